#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rfsf/autodiff.hpp"
#include "rfsf/optim.hpp"
#include "rfsf/rng.hpp"
#include "rfsf/tensor.hpp"

namespace rfsf {

struct ModelConfig {
    int n_layers = 4;
    int n_heads = 8;
    int d_model = 64;
    int d_ff = 0;  // 0 means 4 * d_model
    int bag_size = 10;
    int instance_dim = 256;
    int noise_dim = 32;
    int n_classes = 3;
    std::vector<int> conv_channels = {16, 32, 64, 128, 128};
    int kernel_size = 3;
    bool use_mil = true;
    bool use_channel_attention = true;
    bool use_posenc = true;
    std::string generator_kind = "transformer";  // or "cnn"

    int ff_dim() const { return d_ff > 0 ? d_ff : 4 * d_model; }
    int bag_flat_len() const { return bag_size * instance_dim; }
    void validate() const;
};

// Sinusoidal encoding: PE[j,2i] = sin(j / 10000^(2i/d)), PE[j,2i+1] = cos(...).
Tensor positional_encoding(int t, int d);

struct DenseLayer {
    Param w;  // in × out
    Param b;  // out
    DenseLayer() = default;
    DenseLayer(int in, int out, Rng& rng, const std::string& name);
    Var apply(const Var& x);  // rank-1 or rank-2 input
    int64_t param_count() const { return w.value.size() + b.value.size(); }
};

struct AttentionParams {
    DenseLayer q, k, v, o;
};

// softmax(Q Kᵀ/sqrt(d_head)) V per head, heads concatenated, then projected.
Var multi_head_attention(const Var& x, AttentionParams& params, int n_heads);

struct TransformerBlock {
    AttentionParams attn;
    Param ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    DenseLayer ff1, ff2;
    TransformerBlock() = default;
    TransformerBlock(int d, int ff, Rng& rng, const std::string& name);
    Var apply(const Var& x, int n_heads);
    std::vector<Param*> parameters();
};

// Values extracted from a MIL forward pass.
struct MILOutput {
    std::vector<double> attention;  // t, each in (0,1) for the sigmoid head
    Tensor instance_probs;          // t×K rows summing to 1
    Tensor bag_pred;                // K, (1/t) * sum_j a_j * yhat_j
    Tensor saliency;                // t×K, a_j * yhat_j
};

struct MILForward {
    Var attention;       // t
    Var instance_probs;  // t×K
    Var saliency;        // t×K
    Var bag_pred;        // K
};

struct MILHeads {
    DenseLayer attn;  // d -> 1 (absent when frozen uniform)
    DenseLayer clf;   // d -> K
    bool frozen_uniform = false;
};

// a_j = sigmoid(psi_attn(z_j)), yhat_j = softmax(psi_clf(z_j)),
// bag prediction = (1/t) sum_j a_j yhat_j. Frozen-uniform mode sets a_j = 1.
MILForward mil_conjunctive_pool(const Var& z, MILHeads& heads);
MILOutput extract_mil(const MILForward& fwd);

// ---- generators ------------------------------------------------------------

struct GenForward {
    Var bag;  // t × instance_dim
    MILForward mil;
    bool has_mil = false;
};

struct ClfForward {
    MILForward mil;
};

class GeneratorBase {
public:
    virtual ~GeneratorBase() = default;
    virtual GenForward generate(const Tensor& z, int label) = 0;
    virtual std::vector<Param*> parameters() = 0;
    virtual const ModelConfig& config() const = 0;
    virtual std::string kind() const = 0;
    int64_t param_count();
};

// Transformer encoder + conjunctive MIL pooling + spectrum projection.
class GeneratorNet : public GeneratorBase {
public:
    GeneratorNet(const ModelConfig& cfg, Rng& rng);

    GenForward generate(const Tensor& z, int label) override;
    // Classification path over a real bag (t × instance_dim).
    ClfForward classify(const Tensor& bag);
    ClfForward classify_var(const Var& bag);

    std::vector<Param*> parameters() override;
    const ModelConfig& config() const override { return cfg_; }
    std::string kind() const override { return "transformer"; }

    Param& label_embedding() { return label_embed_; }
    MILHeads& mil_heads() { return mil_; }

private:
    Var encode(const Var& x_td);  // posenc + transformer blocks

    ModelConfig cfg_;
    Param label_embed_;      // K × d
    DenseLayer noise_proj_;  // |z| -> t*d
    DenseLayer input_proj_;  // instance_dim -> d
    Tensor pos_enc_;         // t × d, fixed
    std::vector<TransformerBlock> blocks_;
    MILHeads mil_;
    DenseLayer out_proj_;  // d -> instance_dim
};

// Ablation baseline: dense stem + transposed-conv stack, parameter count
// matched to the transformer generator within 10%.
class CnnGeneratorNet : public GeneratorBase {
public:
    CnnGeneratorNet(const ModelConfig& cfg, Rng& rng);

    GenForward generate(const Tensor& z, int label) override;
    std::vector<Param*> parameters() override;
    const ModelConfig& config() const override { return cfg_; }
    std::string kind() const override { return "cnn"; }

    int hidden_dim() const { return hidden_dim_; }

private:
    ModelConfig cfg_;
    int embed_dim_ = 0;
    int hidden_dim_ = 0;
    int stem_channels_ = 0;
    int stem_len_ = 0;
    Param label_embed_;
    DenseLayer stem1_, stem2_;
    Param tc1_w_, tc1_b_, tc2_w_, tc2_b_, tc3_w_, tc3_b_;
};

std::unique_ptr<GeneratorBase> make_generator(const ModelConfig& cfg, Rng& rng);

// ---- discriminator -----------------------------------------------------------

struct DiscForward {
    Var source_logit;       // 1
    Var class_logits;       // K
    Var attention_weights;  // C (empty Var when attention is off)
    bool has_attention = false;
};

// Channel attention: softmax(dense([avg-pool, max-pool])) re-scaled by C so a
// uniform weight vector is the exact identity.
struct ChannelAttentionResult {
    Var weights;   // C, sums to 1
    Var features;  // C × L
};
ChannelAttentionResult channel_attention(const Var& features, DenseLayer& dense,
                                         bool frozen_uniform);

class DiscriminatorNet {
public:
    DiscriminatorNet(const ModelConfig& cfg, Rng& rng);

    DiscForward forward(const Var& bag_flat);  // 1 × (t*instance_dim)
    DiscForward forward(const Tensor& bag);    // detached t×d bag

    std::vector<Param*> parameters();
    const ModelConfig& config() const { return cfg_; }
    int64_t param_count();

    DenseLayer& attention_dense() { return attn_dense_; }
    // Replaces learned attention weights with an exact uniform 1/C (identity
    // rescale); used by the ablation-consistency checks.
    void set_attention_frozen(bool frozen) { attention_frozen_ = frozen; }

private:
    ModelConfig cfg_;
    std::vector<Param> conv_w_, conv_b_;
    DenseLayer attn_dense_;  // 2C -> C
    DenseLayer src_head_, cls_head_;
    bool attention_frozen_ = false;
};

// ---- explainability ------------------------------------------------------------

struct Explanation {
    MILOutput mil;
    int predicted_class = 0;
    int top_instance = 0;  // argmax saliency for the predicted class
};

Explanation explain(const Tensor& bag, GeneratorNet& model);

// ---- analytic counts -------------------------------------------------------------

int64_t analytic_param_count_generator(const ModelConfig& cfg);
int64_t analytic_param_count_cnn_generator(const ModelConfig& cfg, int hidden_dim, int embed_dim,
                                           int stem_channels, int stem_len);
int64_t analytic_param_count_discriminator(const ModelConfig& cfg);

// ---- checkpoints -----------------------------------------------------------------
// Layout: magic "RFSFCKP1", u32 version, u32 json_len, config JSON (echo +
// kind), u32 tensor count, then per tensor: u32 name_len, name, u32 rank,
// u64 dims, float64 row-major data.

void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const ModelConfig& cfg, const std::vector<Param*>& params);

struct CheckpointInfo {
    std::string kind;
    ModelConfig config;
};
CheckpointInfo peek_checkpoint(const std::filesystem::path& path);
void load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind,
                     const std::vector<Param*>& params);

ModelConfig model_config_from_json(const std::string& json_text);
std::string model_config_to_json(const ModelConfig& cfg);

}  // namespace rfsf
