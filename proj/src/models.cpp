#include "rfsf/models.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "rfsf/errors.hpp"

namespace rfsf {

using json = nlohmann::json;

void ModelConfig::validate() const {
    if (n_layers < 1) throw ConfigError("model: n_layers must be >= 1");
    if (n_heads < 1) throw ConfigError("model: n_heads must be >= 1");
    if (d_model < 2 || d_model % 2 != 0) throw ConfigError("model: d_model must be even and >= 2");
    if (d_model % n_heads != 0) {
        throw ConfigError("model: d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                          std::to_string(n_heads));
    }
    if (bag_size < 1) throw ConfigError("model: bag size must be >= 1");
    if (instance_dim < 1) throw ConfigError("model: instance dim must be >= 1");
    if (noise_dim < 1) throw ConfigError("model: noise dim must be >= 1");
    if (n_classes < 2) throw ConfigError("model: n_classes must be >= 2");
    if (conv_channels.empty()) throw ConfigError("model: discriminator needs conv channels");
    if (kernel_size < 1) throw ConfigError("model: kernel size must be >= 1");
    if (generator_kind != "transformer" && generator_kind != "cnn") {
        throw ConfigError("model: generator kind must be 'transformer' or 'cnn'");
    }
    if (generator_kind == "cnn" && bag_flat_len() % 8 != 0) {
        throw ConfigError("model: cnn generator needs bag_size*instance_dim divisible by 8");
    }
}

Tensor positional_encoding(int t, int d) {
    if (t < 1 || d < 1) throw ContractError("positional_encoding: t and d must be >= 1");
    if (d % 2 != 0) throw ContractError("positional_encoding: d must be even, got " + std::to_string(d));
    Tensor pe({t, d});
    for (int j = 0; j < t; ++j) {
        for (int i = 0; i < d / 2; ++i) {
            double denom = std::pow(10000.0, 2.0 * i / static_cast<double>(d));
            pe.at(j, 2 * i) = std::sin(j / denom);
            pe.at(j, 2 * i + 1) = std::cos(j / denom);
        }
    }
    return pe;
}

DenseLayer::DenseLayer(int in, int out, Rng& rng, const std::string& name)
    : w(xavier_uniform({in, out}, in, out, rng), name + ".w"),
      b(Tensor::zeros({out}), name + ".b") {}

Var DenseLayer::apply(const Var& x) {
    bool vec = x.value().rank() == 1;
    Var x2 = vec ? reshape(x, {1, x.value().dim(0)}) : x;
    Var y = add_rowvec(matmul(x2, Var::leaf(w)), Var::leaf(b));
    return vec ? reshape(y, {y.value().dim(1)}) : y;
}

Var multi_head_attention(const Var& x, AttentionParams& params, int n_heads) {
    int d = x.value().dim(1);
    if (d % n_heads != 0) {
        throw ConfigError("multi_head_attention: d " + std::to_string(d) +
                          " not divisible by heads " + std::to_string(n_heads));
    }
    int dh = d / n_heads;
    Var q = params.q.apply(x);
    Var k = params.k.apply(x);
    Var v = params.v.apply(x);
    std::vector<Var> heads;
    heads.reserve(static_cast<size_t>(n_heads));
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < n_heads; ++h) {
        Var qh = col_slice(q, h * dh, (h + 1) * dh);
        Var kh = col_slice(k, h * dh, (h + 1) * dh);
        Var vh = col_slice(v, h * dh, (h + 1) * dh);
        Var scores = scale(matmul_nt(qh, kh), inv_sqrt);
        Var attn = softmax_stable(scores, 1);
        heads.push_back(matmul(attn, vh));
    }
    Var cat = n_heads == 1 ? heads[0] : concat(heads, 1);
    return params.o.apply(cat);
}

TransformerBlock::TransformerBlock(int d, int ff, Rng& rng, const std::string& name)
    : ln1_gain(Tensor::full({d}, 1.0), name + ".ln1.gain"),
      ln1_bias(Tensor::zeros({d}), name + ".ln1.bias"),
      ln2_gain(Tensor::full({d}, 1.0), name + ".ln2.gain"),
      ln2_bias(Tensor::zeros({d}), name + ".ln2.bias") {
    attn.q = DenseLayer(d, d, rng, name + ".attn.q");
    attn.k = DenseLayer(d, d, rng, name + ".attn.k");
    attn.v = DenseLayer(d, d, rng, name + ".attn.v");
    attn.o = DenseLayer(d, d, rng, name + ".attn.o");
    ff1 = DenseLayer(d, ff, rng, name + ".ff1");
    ff2 = DenseLayer(ff, d, rng, name + ".ff2");
}

Var TransformerBlock::apply(const Var& x, int n_heads) {
    Var a = multi_head_attention(x, attn, n_heads);
    Var x1 = layer_norm(add(x, a), Var::leaf(ln1_gain), Var::leaf(ln1_bias));
    Var f = ff2.apply(relu(ff1.apply(x1)));
    return layer_norm(add(x1, f), Var::leaf(ln2_gain), Var::leaf(ln2_bias));
}

std::vector<Param*> TransformerBlock::parameters() {
    return {&attn.q.w, &attn.q.b, &attn.k.w, &attn.k.b, &attn.v.w, &attn.v.b,
            &attn.o.w, &attn.o.b, &ln1_gain, &ln1_bias, &ff1.w,    &ff1.b,
            &ff2.w,    &ff2.b,    &ln2_gain, &ln2_bias};
}

MILForward mil_conjunctive_pool(const Var& z, MILHeads& heads) {
    if (!z.value().all_finite()) throw NumericalError("mil_conjunctive_pool: non-finite embeddings");
    int t = z.value().dim(0);
    MILForward out;
    if (heads.frozen_uniform) {
        out.attention = Var::constant(Tensor::full({t}, 1.0));
    } else {
        out.attention = reshape(sigmoid(heads.attn.apply(z)), {t});
    }
    out.instance_probs = softmax_stable(heads.clf.apply(z), 1);
    out.saliency = row_scale(out.instance_probs, out.attention);
    out.bag_pred = reduce_mean_axis(out.saliency, 0);
    return out;
}

MILOutput extract_mil(const MILForward& fwd) {
    MILOutput out;
    const Tensor& a = fwd.attention.value();
    out.attention.assign(a.data(), a.data() + a.size());
    out.instance_probs = fwd.instance_probs.value();
    out.bag_pred = fwd.bag_pred.value();
    out.saliency = fwd.saliency.value();
    return out;
}

int64_t GeneratorBase::param_count() {
    int64_t n = 0;
    for (Param* p : parameters()) n += p->value.size();
    return n;
}

// ---- transformer generator ------------------------------------------------------

GeneratorNet::GeneratorNet(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    int d = cfg_.d_model, t = cfg_.bag_size;
    label_embed_ = Param(xavier_uniform({cfg_.n_classes, d}, cfg_.n_classes, d, rng),
                         "gen.label_embed");
    noise_proj_ = DenseLayer(cfg_.noise_dim, t * d, rng, "gen.noise_proj");
    input_proj_ = DenseLayer(cfg_.instance_dim, d, rng, "gen.input_proj");
    pos_enc_ = positional_encoding(t, d);
    for (int i = 0; i < cfg_.n_layers; ++i) {
        blocks_.emplace_back(d, cfg_.ff_dim(), rng, "gen.block" + std::to_string(i));
    }
    if (cfg_.use_mil) {
        mil_.attn = DenseLayer(d, 1, rng, "gen.mil.attn");
        mil_.frozen_uniform = false;
    } else {
        mil_.frozen_uniform = true;
    }
    mil_.clf = DenseLayer(d, cfg_.n_classes, rng, "gen.mil.clf");
    out_proj_ = DenseLayer(d, cfg_.instance_dim, rng, "gen.out_proj");
}

Var GeneratorNet::encode(const Var& x_td) {
    Var x = x_td;
    if (cfg_.use_posenc) x = add(x, Var::constant(pos_enc_));
    for (auto& block : blocks_) x = block.apply(x, cfg_.n_heads);
    return x;
}

GenForward GeneratorNet::generate(const Tensor& z, int label) {
    if (z.size() != cfg_.noise_dim) {
        throw ContractError("generate: noise vector length " + std::to_string(z.size()) +
                            ", expected " + std::to_string(cfg_.noise_dim));
    }
    if (label < 0 || label >= cfg_.n_classes) {
        throw IndexError("generate: label " + std::to_string(label) + " out of range [0," +
                         std::to_string(cfg_.n_classes) + ")");
    }
    Var zv = Var::constant(Tensor({1, cfg_.noise_dim},
                                  std::vector<double>(z.data(), z.data() + z.size())));
    Var x = reshape(noise_proj_.apply(zv), {cfg_.bag_size, cfg_.d_model});
    x = add_rowvec(x, embedding_row(Var::leaf(label_embed_), label));
    x = encode(x);
    GenForward out;
    out.mil = mil_conjunctive_pool(x, mil_);
    out.has_mil = true;
    out.bag = out_proj_.apply(x);
    return out;
}

ClfForward GeneratorNet::classify(const Tensor& bag) { return classify_var(Var::constant(bag)); }

ClfForward GeneratorNet::classify_var(const Var& bag) {
    if (bag.value().rank() != 2 || bag.value().dim(0) != cfg_.bag_size ||
        bag.value().dim(1) != cfg_.instance_dim) {
        throw DimensionError("classify: bag shape " + shape_str(bag.value().shape()) +
                             ", expected [" + std::to_string(cfg_.bag_size) + "x" +
                             std::to_string(cfg_.instance_dim) + "]");
    }
    Var x = input_proj_.apply(bag);
    x = encode(x);
    ClfForward out;
    out.mil = mil_conjunctive_pool(x, mil_);
    return out;
}

std::vector<Param*> GeneratorNet::parameters() {
    std::vector<Param*> params = {&label_embed_, &noise_proj_.w, &noise_proj_.b,
                                  &input_proj_.w, &input_proj_.b};
    for (auto& block : blocks_) {
        auto bp = block.parameters();
        params.insert(params.end(), bp.begin(), bp.end());
    }
    if (cfg_.use_mil) {
        params.push_back(&mil_.attn.w);
        params.push_back(&mil_.attn.b);
    }
    params.push_back(&mil_.clf.w);
    params.push_back(&mil_.clf.b);
    params.push_back(&out_proj_.w);
    params.push_back(&out_proj_.b);
    return params;
}

// ---- cnn generator -------------------------------------------------------------

CnnGeneratorNet::CnnGeneratorNet(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    embed_dim_ = cfg_.noise_dim;
    stem_channels_ = 8;
    stem_len_ = cfg_.bag_flat_len() / 8;

    // Match the transformer generator's parameter count within 10%.
    int64_t target = analytic_param_count_generator(cfg_);
    int64_t fixed = static_cast<int64_t>(cfg_.n_classes) * embed_dim_;
    fixed += 8LL * 8 * 4 + 8 + 4LL * 8 * 4 + 4 + 1LL * 4 * 4 + 1;  // tconv stack
    fixed += static_cast<int64_t>(stem_channels_) * stem_len_;     // stem2 bias
    int64_t per_h = cfg_.noise_dim + embed_dim_ + 1 +
                    static_cast<int64_t>(stem_channels_) * stem_len_;
    hidden_dim_ = static_cast<int>(std::max<int64_t>(4, (target - fixed + per_h / 2) / per_h));

    label_embed_ = Param(xavier_uniform({cfg_.n_classes, embed_dim_}, cfg_.n_classes, embed_dim_, rng),
                         "cnngen.label_embed");
    stem1_ = DenseLayer(cfg_.noise_dim + embed_dim_, hidden_dim_, rng, "cnngen.stem1");
    stem2_ = DenseLayer(hidden_dim_, stem_channels_ * stem_len_, rng, "cnngen.stem2");
    auto conv_init = [&](int c_out, int c_in, int k, const std::string& name) {
        return Param(xavier_uniform({c_out, c_in, k}, c_in * k, c_out * k, rng), name);
    };
    tc1_w_ = conv_init(8, 8, 4, "cnngen.tc1.w");
    tc1_b_ = Param(Tensor::zeros({8}), "cnngen.tc1.b");
    tc2_w_ = conv_init(4, 8, 4, "cnngen.tc2.w");
    tc2_b_ = Param(Tensor::zeros({4}), "cnngen.tc2.b");
    tc3_w_ = conv_init(1, 4, 4, "cnngen.tc3.w");
    tc3_b_ = Param(Tensor::zeros({1}), "cnngen.tc3.b");
}

GenForward CnnGeneratorNet::generate(const Tensor& z, int label) {
    if (z.size() != cfg_.noise_dim) throw ContractError("generate: bad noise length");
    if (label < 0 || label >= cfg_.n_classes) throw IndexError("generate: label out of range");
    Var zv = Var::constant(Tensor({cfg_.noise_dim},
                                  std::vector<double>(z.data(), z.data() + z.size())));
    Var cond = concat({zv, embedding_row(Var::leaf(label_embed_), label)}, 0);
    Var h = relu(stem1_.apply(cond));
    Var stem = relu(stem2_.apply(h));
    Var x = reshape(stem, {stem_channels_, stem_len_});
    x = relu(conv_transpose1d(x, Var::leaf(tc1_w_), Var::leaf(tc1_b_), 2, 1));
    x = relu(conv_transpose1d(x, Var::leaf(tc2_w_), Var::leaf(tc2_b_), 2, 1));
    x = conv_transpose1d(x, Var::leaf(tc3_w_), Var::leaf(tc3_b_), 2, 1);
    GenForward out;
    out.bag = reshape(x, {cfg_.bag_size, cfg_.instance_dim});
    out.has_mil = false;
    return out;
}

std::vector<Param*> CnnGeneratorNet::parameters() {
    return {&label_embed_, &stem1_.w, &stem1_.b, &stem2_.w, &stem2_.b, &tc1_w_, &tc1_b_,
            &tc2_w_,       &tc2_b_,   &tc3_w_,   &tc3_b_};
}

std::unique_ptr<GeneratorBase> make_generator(const ModelConfig& cfg, Rng& rng) {
    if (cfg.generator_kind == "cnn") return std::make_unique<CnnGeneratorNet>(cfg, rng);
    return std::make_unique<GeneratorNet>(cfg, rng);
}

// ---- discriminator ---------------------------------------------------------------

ChannelAttentionResult channel_attention(const Var& features, DenseLayer& dense,
                                         bool frozen_uniform) {
    int c = features.value().dim(0);
    ChannelAttentionResult out;
    if (frozen_uniform) {
        out.weights = Var::constant(Tensor::full({c}, 1.0 / c));
        out.features = features;  // C * (1/C) rescale is the exact identity
        return out;
    }
    Var avg = reduce_mean_axis(features, 1);
    Var mx = reduce_max_axis(features, 1);
    Var logits = dense.apply(concat({avg, mx}, 0));
    out.weights = softmax_stable(logits, 0);
    out.features = row_scale(features, scale(out.weights, static_cast<double>(c)));
    return out;
}

DiscriminatorNet::DiscriminatorNet(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    int c_in = 1;
    int k = cfg_.kernel_size;
    for (size_t i = 0; i < cfg_.conv_channels.size(); ++i) {
        int c_out = cfg_.conv_channels[i];
        std::string name = "disc.conv" + std::to_string(i);
        conv_w_.emplace_back(xavier_uniform({c_out, c_in, k}, c_in * k, c_out * k, rng), name + ".w");
        conv_b_.emplace_back(Tensor::zeros({c_out}), name + ".b");
        c_in = c_out;
    }
    int c_last = cfg_.conv_channels.back();
    if (cfg_.use_channel_attention) {
        attn_dense_ = DenseLayer(2 * c_last, c_last, rng, "disc.attn_dense");
    }
    src_head_ = DenseLayer(c_last, 1, rng, "disc.src_head");
    cls_head_ = DenseLayer(c_last, cfg_.n_classes, rng, "disc.cls_head");
}

DiscForward DiscriminatorNet::forward(const Var& bag_flat) {
    if (bag_flat.value().rank() != 2 || bag_flat.value().dim(0) != 1 ||
        bag_flat.value().dim(1) != cfg_.bag_flat_len()) {
        throw DimensionError("discriminator: input shape " + shape_str(bag_flat.value().shape()) +
                             ", expected [1x" + std::to_string(cfg_.bag_flat_len()) + "]");
    }
    Var x = bag_flat;
    for (size_t i = 0; i < conv_w_.size(); ++i) {
        try {
            x = relu(conv1d(x, Var::leaf(conv_w_[i]), Var::leaf(conv_b_[i]), 2, 1));
        } catch (const DimensionError& e) {
            throw DimensionError("discriminator conv layer " + std::to_string(i) + ": " + e.what());
        }
    }
    DiscForward out;
    if (cfg_.use_channel_attention) {
        auto ca = channel_attention(x, attn_dense_, attention_frozen_);
        out.attention_weights = ca.weights;
        out.has_attention = true;
        x = ca.features;
    }
    Var pooled = reduce_mean_axis(x, 1);
    out.source_logit = src_head_.apply(pooled);
    out.class_logits = cls_head_.apply(pooled);
    return out;
}

DiscForward DiscriminatorNet::forward(const Tensor& bag) {
    Tensor flat({1, static_cast<int>(bag.size())},
                std::vector<double>(bag.data(), bag.data() + bag.size()));
    return forward(Var::constant(flat));
}

std::vector<Param*> DiscriminatorNet::parameters() {
    std::vector<Param*> params;
    for (size_t i = 0; i < conv_w_.size(); ++i) {
        params.push_back(&conv_w_[i]);
        params.push_back(&conv_b_[i]);
    }
    if (cfg_.use_channel_attention) {
        params.push_back(&attn_dense_.w);
        params.push_back(&attn_dense_.b);
    }
    params.push_back(&src_head_.w);
    params.push_back(&src_head_.b);
    params.push_back(&cls_head_.w);
    params.push_back(&cls_head_.b);
    return params;
}

int64_t DiscriminatorNet::param_count() {
    int64_t n = 0;
    for (Param* p : parameters()) n += p->value.size();
    return n;
}

// ---- explainability ---------------------------------------------------------------

Explanation explain(const Tensor& bag, GeneratorNet& model) {
    ClfForward fwd = model.classify(bag);
    Explanation ex;
    ex.mil = extract_mil(fwd.mil);
    const Tensor& pred = ex.mil.bag_pred;
    int best = 0;
    for (int k = 1; k < pred.dim(0); ++k)
        if (pred[k] > pred[best]) best = k;
    ex.predicted_class = best;
    int t = ex.mil.saliency.dim(0);
    int top = 0;
    for (int j = 1; j < t; ++j)
        if (ex.mil.saliency.at(j, best) > ex.mil.saliency.at(top, best)) top = j;
    ex.top_instance = top;
    return ex;
}

// ---- analytic parameter counts ------------------------------------------------------

int64_t analytic_param_count_generator(const ModelConfig& cfg) {
    int64_t d = cfg.d_model, ff = cfg.ff_dim(), t = cfg.bag_size;
    int64_t inst = cfg.instance_dim, k = cfg.n_classes, z = cfg.noise_dim;
    int64_t total = k * d;                    // label embedding
    total += z * (t * d) + t * d;             // noise projection
    total += inst * d + d;                    // input projection
    int64_t per_block = 4 * (d * d + d)       // q, k, v, o
                        + 2 * (2 * d)         // two layer norms
                        + d * ff + ff         // ff1
                        + ff * d + d;         // ff2
    total += cfg.n_layers * per_block;
    if (cfg.use_mil) total += d + 1;          // psi_attn
    total += d * k + k;                       // psi_clf
    total += d * inst + inst;                 // output projection
    return total;
}

int64_t analytic_param_count_cnn_generator(const ModelConfig& cfg, int hidden_dim, int embed_dim,
                                           int stem_channels, int stem_len) {
    int64_t total = static_cast<int64_t>(cfg.n_classes) * embed_dim;
    total += static_cast<int64_t>(cfg.noise_dim + embed_dim) * hidden_dim + hidden_dim;
    total += static_cast<int64_t>(hidden_dim) * stem_channels * stem_len + stem_channels * stem_len;
    total += 8LL * 8 * 4 + 8 + 4LL * 8 * 4 + 4 + 1LL * 4 * 4 + 1;
    return total;
}

int64_t analytic_param_count_discriminator(const ModelConfig& cfg) {
    int64_t total = 0;
    int64_t c_in = 1;
    for (int c_out : cfg.conv_channels) {
        total += c_out * c_in * cfg.kernel_size + c_out;
        c_in = c_out;
    }
    int64_t c = cfg.conv_channels.back();
    if (cfg.use_channel_attention) total += 2 * c * c + c;
    total += c + 1;                      // source head
    total += c * cfg.n_classes + cfg.n_classes;  // class head
    return total;
}

// ---- config json ---------------------------------------------------------------------

std::string model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["schema_version"] = 1;
    j["n_layers"] = cfg.n_layers;
    j["n_heads"] = cfg.n_heads;
    j["d_model"] = cfg.d_model;
    j["d_ff"] = cfg.d_ff;
    j["bag_size"] = cfg.bag_size;
    j["instance_dim"] = cfg.instance_dim;
    j["noise_dim"] = cfg.noise_dim;
    j["n_classes"] = cfg.n_classes;
    j["conv_channels"] = cfg.conv_channels;
    j["kernel_size"] = cfg.kernel_size;
    j["use_mil"] = cfg.use_mil;
    j["use_channel_attention"] = cfg.use_channel_attention;
    j["use_posenc"] = cfg.use_posenc;
    j["generator_kind"] = cfg.generator_kind;
    return j.dump();
}

ModelConfig model_config_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("model config: invalid JSON: ") + e.what());
    }
    ModelConfig cfg;
    cfg.n_layers = j.value("n_layers", cfg.n_layers);
    cfg.n_heads = j.value("n_heads", cfg.n_heads);
    cfg.d_model = j.value("d_model", cfg.d_model);
    cfg.d_ff = j.value("d_ff", cfg.d_ff);
    cfg.bag_size = j.value("bag_size", cfg.bag_size);
    cfg.instance_dim = j.value("instance_dim", cfg.instance_dim);
    cfg.noise_dim = j.value("noise_dim", cfg.noise_dim);
    cfg.n_classes = j.value("n_classes", cfg.n_classes);
    cfg.conv_channels = j.value("conv_channels", cfg.conv_channels);
    cfg.kernel_size = j.value("kernel_size", cfg.kernel_size);
    cfg.use_mil = j.value("use_mil", cfg.use_mil);
    cfg.use_channel_attention = j.value("use_channel_attention", cfg.use_channel_attention);
    cfg.use_posenc = j.value("use_posenc", cfg.use_posenc);
    cfg.generator_kind = j.value("generator_kind", cfg.generator_kind);
    cfg.validate();
    return cfg;
}

// ---- checkpoints -----------------------------------------------------------------------

namespace {

constexpr char kCkptMagic[8] = {'R', 'F', 'S', 'F', 'C', 'K', 'P', '1'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("checkpoint: truncated while reading " + what);
    return v;
}

std::string read_string(std::ifstream& in, uint32_t len, const std::string& what) {
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw FormatError("checkpoint: truncated while reading " + what);
    return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const ModelConfig& cfg, const std::vector<Param*>& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("save_checkpoint: cannot open '" + path.string() + "'");
    out.write(kCkptMagic, 8);
    write_pod<uint32_t>(out, 1);
    json meta;
    meta["kind"] = kind;
    meta["config"] = json::parse(model_config_to_json(cfg));
    std::string meta_str = meta.dump();
    write_pod<uint32_t>(out, static_cast<uint32_t>(meta_str.size()));
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    write_pod<uint32_t>(out, static_cast<uint32_t>(params.size()));
    for (const Param* p : params) {
        write_pod<uint32_t>(out, static_cast<uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_pod<uint32_t>(out, static_cast<uint32_t>(p->value.rank()));
        for (int i = 0; i < p->value.rank(); ++i) write_pod<uint64_t>(out, static_cast<uint64_t>(p->value.dim(i)));
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
    if (!out) throw IoError("save_checkpoint: short write on '" + path.string() + "'");
}

namespace {

json read_checkpoint_meta(std::ifstream& in, const std::filesystem::path& path) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCkptMagic, 8) != 0) {
        throw FormatError("checkpoint: '" + path.string() + "' has a bad magic header");
    }
    uint32_t version = read_pod<uint32_t>(in, "version");
    if (version != 1) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    uint32_t meta_len = read_pod<uint32_t>(in, "metadata length");
    std::string meta_str = read_string(in, meta_len, "metadata");
    try {
        return json::parse(meta_str);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("checkpoint: bad metadata JSON: ") + e.what());
    }
}

}  // namespace

CheckpointInfo peek_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("peek_checkpoint: cannot open '" + path.string() + "'");
    json meta = read_checkpoint_meta(in, path);
    CheckpointInfo info;
    info.kind = meta.value("kind", "");
    info.config = model_config_from_json(meta["config"].dump());
    return info;
}

void load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind,
                     const std::vector<Param*>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open '" + path.string() + "'");
    json meta = read_checkpoint_meta(in, path);
    std::string kind = meta.value("kind", "");
    if (!expected_kind.empty() && kind != expected_kind) {
        throw FormatError("checkpoint: kind '" + kind + "', expected '" + expected_kind + "'");
    }
    uint32_t count = read_pod<uint32_t>(in, "tensor count");
    if (count != params.size()) {
        throw FormatError("checkpoint: holds " + std::to_string(count) + " tensors, model expects " +
                          std::to_string(params.size()));
    }
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = read_pod<uint32_t>(in, "tensor name length");
        std::string name = read_string(in, name_len, "tensor name");
        uint32_t rank = read_pod<uint32_t>(in, "tensor rank");
        std::vector<int> shape;
        int64_t n = 1;
        for (uint32_t r = 0; r < rank; ++r) {
            auto dim = static_cast<int>(read_pod<uint64_t>(in, "tensor dim"));
            shape.push_back(dim);
            n *= dim;
        }
        Param* target = nullptr;
        for (Param* p : params) {
            if (p->name == name) {
                target = p;
                break;
            }
        }
        if (!target) throw FormatError("checkpoint: unknown tensor '" + name + "'");
        if (target->value.shape() != shape) {
            throw FormatError("checkpoint: tensor '" + name + "' shape " + shape_str(shape) +
                              " does not match model " + shape_str(target->value.shape()));
        }
        in.read(reinterpret_cast<char*>(target->value.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!in) throw FormatError("checkpoint: truncated tensor data for '" + name + "'");
    }
}

}  // namespace rfsf
