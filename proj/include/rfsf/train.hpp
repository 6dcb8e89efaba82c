#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "rfsf/models.hpp"
#include "rfsf/preprocess.hpp"

namespace rfsf {

struct TrainConfig {
    int epochs = 30;  // desk-scale default; 300 reproduces the full protocol
    int batch_size = 64;
    double lr_d = 0.01;
    double lr_g = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    double lambda_cls = 1.0;
    double lambda_mil = 0.5;
    double augment_ratio = 1.0;
    int jobs = 4;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double d_src_acc = 0.0;  // real/fake separation on the source head
    double d_cls_acc = 0.0;  // class head accuracy on real bags
    double g_mil_acc = 0.0;  // generator class-consistency on its own fakes
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> records;
};

void save_history_csv(const std::filesystem::path& path, const TrainHistory& history);

// ---- losses -------------------------------------------------------------------

// BCE(source; real=1, fake=0) averaged over both halves, plus
// lambda_cls * cross-entropy of the real half's class logits.
Var disc_pair_loss(DiscriminatorNet& disc, const Tensor& real_bag, int real_label,
                   const Tensor& fake_bag, double lambda_cls);
double discriminator_loss(DiscriminatorNet& disc, const std::vector<const WindowedBag*>& real,
                          const std::vector<Tensor>& fake, double lambda_cls);

// Non-saturating BCE(source on fake; target real) + lambda_cls * CE of the
// discriminator's class logits + lambda_mil * -log ŷ[label] from the
// generator's own MIL aggregation (when the generator has one).
Var gen_sample_loss(DiscriminatorNet& disc, const GenForward& fake, int cond_label,
                    double lambda_cls, double lambda_mil);
double generator_loss(GeneratorBase& gen, DiscriminatorNet& disc, const std::vector<Tensor>& zs,
                      const std::vector<int>& cond_labels, double lambda_cls, double lambda_mil);

// ---- training -------------------------------------------------------------------

struct CganResult {
    std::unique_ptr<GeneratorBase> generator;
    std::unique_ptr<DiscriminatorNet> discriminator;
    TrainHistory history;
};

// Alternating one discriminator step / one generator step per batch,
// z ~ N(0, I), conditioning labels uniform. Deterministic given (data,
// configs, seed) regardless of the job count.
CganResult train_cgan(const BagDataset& data, const ModelConfig& mcfg, const TrainConfig& tcfg);

struct ClassifierResult {
    std::unique_ptr<GeneratorNet> classifier;
    TrainHistory history;
};

// Supervised training of the generator-architecture encoder + MIL heads on
// real (or augmented) bags.
ClassifierResult train_classifier(const BagDataset& data, const ModelConfig& mcfg,
                                  const TrainConfig& tcfg);

// Adds round(ratio * |real|) generated bags with labels matching the real
// class histogram. Generated bags carry a provenance flag.
BagDataset augment_dataset(const BagDataset& real, GeneratorBase& gen, double ratio, uint64_t seed);

}  // namespace rfsf
