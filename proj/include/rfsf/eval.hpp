#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rfsf/models.hpp"
#include "rfsf/preprocess.hpp"
#include "rfsf/train.hpp"

namespace rfsf {

struct ConfusionMatrix {
    int n_classes = 0;
    std::vector<int64_t> counts;  // row = true class, column = predicted

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int k) : n_classes(k), counts(static_cast<size_t>(k) * k, 0) {}
    int64_t& at(int truth, int pred) { return counts[static_cast<size_t>(truth) * n_classes + pred]; }
    int64_t at(int truth, int pred) const {
        return counts[static_cast<size_t>(truth) * n_classes + pred];
    }
    int64_t total() const;
    int64_t trace() const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels,
                                 int n_classes);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::vector<ClassMetrics> per_class;
    ConfusionMatrix cm;
    std::string head;  // which network produced the predictions
};

// Accuracy, per-class precision/recall/F1 (0 when undefined), macro-F1.
MetricsReport metrics(const ConfusionMatrix& cm);

// Euclidean k-NN on flattened bags; majority vote, ties broken by the
// smallest summed distance. k must be odd and <= |train|.
MetricsReport knn_baseline(const BagDataset& train, const BagDataset& test, int k);

MetricsReport evaluate_discriminator(DiscriminatorNet& disc, const BagDataset& data);
MetricsReport evaluate_classifier(GeneratorNet& clf, const BagDataset& data);

// ---- complexity accounting -------------------------------------------------------

// Exact multiply-accumulate counts for one forward pass; additions,
// activations and norms are excluded. Mirrors the instrumented counter.
uint64_t mac_count_generator(const ModelConfig& cfg);
uint64_t mac_count_cnn_generator(const ModelConfig& cfg, int hidden_dim);
uint64_t mac_count_discriminator(const ModelConfig& cfg);
// The quadratic-in-bag-size attention term alone.
uint64_t attention_score_macs(const ModelConfig& cfg);

// Same counts measured by running a forward pass with the MAC counter on.
uint64_t measured_generator_macs(GeneratorBase& gen);
uint64_t measured_discriminator_macs(DiscriminatorNet& disc);

struct ComplexityReport {
    uint64_t generator_macs = 0;
    uint64_t discriminator_macs = 0;
    uint64_t total_macs = 0;
    // dominant-term coefficients: generator_macs ~ coeff_attention * N_layer t^2 d,
    // discriminator_macs ~ coeff_conv * N_cnn C K L d
    double coeff_attention = 0.0;
    double coeff_conv = 0.0;
};
ComplexityReport complexity_report(const ModelConfig& cfg);

// ---- ablation ---------------------------------------------------------------------

struct AblationVariant {
    std::string name;
    ModelConfig model;
    double lambda_mil = 0.0;
};

// Model 1: CNN generator + CNN discriminator, no attention of either kind.
// Model 2: Transformer generator without MIL + discriminator without channel attention.
// Model 3: without MIL + channel attention. Model 4: MIL + without channel
// attention. Full: everything on.
std::vector<AblationVariant> ablation_variants(const ModelConfig& base, double base_lambda_mil);

struct AblationRow {
    std::string variant;
    std::vector<double> per_seed_accuracy;
    std::vector<double> per_seed_f1;
    double mean_accuracy = 0.0;
    double mean_f1 = 0.0;
    std::string head;
};

struct AblationTable {
    std::vector<AblationRow> rows;
    std::vector<uint64_t> seeds;
};

AblationTable ablation_run(const BagDataset& train, const BagDataset& test,
                           const ModelConfig& base_m, const TrainConfig& base_t,
                           const std::vector<uint64_t>& seeds);

// ---- exports ----------------------------------------------------------------------

std::string metrics_to_json(const MetricsReport& report);
void save_metrics_json(const std::filesystem::path& path, const MetricsReport& report);
void save_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);
void save_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm);
// gnuplot `splot ... with image` triples: x y count
void save_confusion_gnuplot(const std::filesystem::path& path, const ConfusionMatrix& cm);
void save_ablation_csv(const std::filesystem::path& path, const AblationTable& table);
void save_ablation_json(const std::filesystem::path& path, const AblationTable& table);

}  // namespace rfsf
