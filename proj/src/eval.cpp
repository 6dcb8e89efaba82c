#include "rfsf/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "rfsf/errors.hpp"

namespace rfsf {

using json = nlohmann::json;

int64_t ConfusionMatrix::total() const {
    int64_t acc = 0;
    for (int64_t c : counts) acc += c;
    return acc;
}

int64_t ConfusionMatrix::trace() const {
    int64_t acc = 0;
    for (int i = 0; i < n_classes; ++i) acc += at(i, i);
    return acc;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels,
                                 int n_classes) {
    if (preds.size() != labels.size()) {
        throw ContractError("confusion_matrix: prediction/label lengths disagree");
    }
    ConfusionMatrix cm(n_classes);
    for (size_t i = 0; i < preds.size(); ++i) {
        int p = preds[i], t = labels[i];
        if (p < 0 || p >= n_classes || t < 0 || t >= n_classes) {
            throw IndexError("confusion_matrix: entry " + std::to_string(i) + " out of range [0," +
                             std::to_string(n_classes) + ")");
        }
        cm.at(t, p) += 1;
    }
    return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
    MetricsReport rep;
    rep.cm = cm;
    int k = cm.n_classes;
    rep.per_class.resize(static_cast<size_t>(k));
    int64_t total = cm.total();
    rep.accuracy = total > 0 ? static_cast<double>(cm.trace()) / static_cast<double>(total) : 0.0;
    double f1_sum = 0.0;
    for (int c = 0; c < k; ++c) {
        int64_t col = 0, row = 0;
        for (int i = 0; i < k; ++i) {
            col += cm.at(i, c);
            row += cm.at(c, i);
        }
        int64_t tp = cm.at(c, c);
        ClassMetrics& m = rep.per_class[static_cast<size_t>(c)];
        m.precision = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
        m.recall = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                              : 0.0;
        f1_sum += m.f1;
    }
    rep.macro_f1 = k > 0 ? f1_sum / k : 0.0;
    return rep;
}

MetricsReport knn_baseline(const BagDataset& train, const BagDataset& test, int k) {
    if (k < 1 || k % 2 == 0) throw ContractError("knn_baseline: k must be odd and >= 1");
    if (k > static_cast<int>(train.bags.size())) {
        throw ContractError("knn_baseline: k " + std::to_string(k) + " exceeds train size " +
                            std::to_string(train.bags.size()));
    }
    std::vector<int> preds, labels;
    preds.reserve(test.bags.size());
    for (const auto& q : test.bags) {
        std::vector<std::pair<double, int>> dist;  // (distance, train label)
        dist.reserve(train.bags.size());
        for (const auto& tr : train.bags) {
            double acc = 0.0;
            for (int64_t i = 0; i < q.instances.size(); ++i) {
                double diff = q.instances[i] - tr.instances[i];
                acc += diff * diff;
            }
            dist.emplace_back(acc, tr.label.index);
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        std::vector<int> votes(static_cast<size_t>(train.n_classes), 0);
        std::vector<double> dsum(static_cast<size_t>(train.n_classes), 0.0);
        for (int i = 0; i < k; ++i) {
            votes[static_cast<size_t>(dist[static_cast<size_t>(i)].second)]++;
            dsum[static_cast<size_t>(dist[static_cast<size_t>(i)].second)] +=
                std::sqrt(dist[static_cast<size_t>(i)].first);
        }
        int best = 0;
        for (int c = 1; c < train.n_classes; ++c) {
            if (votes[static_cast<size_t>(c)] > votes[static_cast<size_t>(best)] ||
                (votes[static_cast<size_t>(c)] == votes[static_cast<size_t>(best)] &&
                 dsum[static_cast<size_t>(c)] < dsum[static_cast<size_t>(best)])) {
                best = c;
            }
        }
        preds.push_back(best);
        labels.push_back(q.label.index);
    }
    MetricsReport rep = metrics(confusion_matrix(preds, labels, train.n_classes));
    rep.head = "knn";
    return rep;
}

namespace {

int argmax(const Tensor& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

}  // namespace

MetricsReport evaluate_discriminator(DiscriminatorNet& disc, const BagDataset& data) {
    std::vector<int> preds, labels;
    preds.reserve(data.bags.size());
    for (const auto& bag : data.bags) {
        DiscForward f = disc.forward(bag.instances);
        preds.push_back(argmax(f.class_logits.value()));
        labels.push_back(bag.label.index);
    }
    MetricsReport rep = metrics(confusion_matrix(preds, labels, data.n_classes));
    rep.head = "disc";
    return rep;
}

MetricsReport evaluate_classifier(GeneratorNet& clf, const BagDataset& data) {
    std::vector<int> preds, labels;
    preds.reserve(data.bags.size());
    for (const auto& bag : data.bags) {
        ClfForward f = clf.classify(bag.instances);
        preds.push_back(argmax(f.mil.bag_pred.value()));
        labels.push_back(bag.label.index);
    }
    MetricsReport rep = metrics(confusion_matrix(preds, labels, data.n_classes));
    rep.head = "mil";
    return rep;
}

// ---- complexity -------------------------------------------------------------------

uint64_t attention_score_macs(const ModelConfig& cfg) {
    uint64_t t = static_cast<uint64_t>(cfg.bag_size);
    return static_cast<uint64_t>(cfg.n_layers) * 2 * t * t * cfg.d_model;
}

uint64_t mac_count_generator(const ModelConfig& cfg) {
    uint64_t t = static_cast<uint64_t>(cfg.bag_size);
    uint64_t d = static_cast<uint64_t>(cfg.d_model);
    uint64_t ff = static_cast<uint64_t>(cfg.ff_dim());
    uint64_t macs = static_cast<uint64_t>(cfg.noise_dim) * t * d;  // noise projection
    macs += static_cast<uint64_t>(cfg.n_layers) * (4 * t * d * d + 2 * t * t * d + 2 * t * d * ff);
    if (cfg.use_mil) macs += t * d;                    // psi_attn
    macs += t * d * static_cast<uint64_t>(cfg.n_classes);  // psi_clf
    macs += t * d * static_cast<uint64_t>(cfg.instance_dim);  // output projection
    return macs;
}

uint64_t mac_count_cnn_generator(const ModelConfig& cfg, int hidden_dim) {
    uint64_t l0 = static_cast<uint64_t>(cfg.bag_flat_len()) / 8;
    uint64_t macs = static_cast<uint64_t>(cfg.noise_dim + cfg.noise_dim) * hidden_dim;  // stem1
    macs += static_cast<uint64_t>(hidden_dim) * 8 * l0;                                 // stem2
    macs += 8ULL * 8 * 4 * l0;        // tconv1 on length l0
    macs += 8ULL * 4 * 4 * (2 * l0);  // tconv2
    macs += 4ULL * 1 * 4 * (4 * l0);  // tconv3
    return macs;
}

namespace {

int conv_out_len(int l_in, int kernel, int stride, int padding) {
    return (l_in + 2 * padding - kernel) / stride + 1;
}

}  // namespace

uint64_t mac_count_discriminator(const ModelConfig& cfg) {
    uint64_t macs = 0;
    int l = cfg.bag_flat_len();
    int c_in = 1;
    for (int c_out : cfg.conv_channels) {
        int l_out = conv_out_len(l, cfg.kernel_size, 2, 1);
        macs += static_cast<uint64_t>(c_in) * c_out * cfg.kernel_size * l_out;
        c_in = c_out;
        l = l_out;
    }
    uint64_t c = static_cast<uint64_t>(cfg.conv_channels.back());
    if (cfg.use_channel_attention) macs += 2 * c * c;
    macs += c;                                        // source head
    macs += c * static_cast<uint64_t>(cfg.n_classes);  // class head
    return macs;
}

uint64_t measured_generator_macs(GeneratorBase& gen) {
    Tensor z = Tensor::zeros({gen.config().noise_dim});
    mac_counter::reset();
    mac_counter::enable(true);
    gen.generate(z, 0);
    mac_counter::enable(false);
    return mac_counter::count();
}

uint64_t measured_discriminator_macs(DiscriminatorNet& disc) {
    Tensor bag = Tensor::zeros({disc.config().bag_size, disc.config().instance_dim});
    mac_counter::reset();
    mac_counter::enable(true);
    disc.forward(bag);
    mac_counter::enable(false);
    return mac_counter::count();
}

ComplexityReport complexity_report(const ModelConfig& cfg) {
    ComplexityReport rep;
    rep.generator_macs = mac_count_generator(cfg);
    rep.discriminator_macs = mac_count_discriminator(cfg);
    rep.total_macs = rep.generator_macs + rep.discriminator_macs;
    double t = cfg.bag_size, d = cfg.d_model;
    rep.coeff_attention =
        static_cast<double>(rep.generator_macs) / (cfg.n_layers * t * t * d);
    double conv_norm = static_cast<double>(cfg.conv_channels.size()) * cfg.conv_channels.back() *
                       cfg.kernel_size * cfg.bag_flat_len();
    rep.coeff_conv = static_cast<double>(rep.discriminator_macs) / conv_norm;
    return rep;
}

// ---- ablation ----------------------------------------------------------------------

std::vector<AblationVariant> ablation_variants(const ModelConfig& base, double base_lambda_mil) {
    std::vector<AblationVariant> variants;
    {
        AblationVariant v;
        v.name = "model1_cnn_gen_cnn_disc";
        v.model = base;
        v.model.generator_kind = "cnn";
        v.model.use_mil = false;
        v.model.use_channel_attention = false;
        v.lambda_mil = 0.0;
        variants.push_back(v);
    }
    {
        AblationVariant v;
        v.name = "model2_no_mil_no_chattn";
        v.model = base;
        v.model.use_mil = false;
        v.model.use_channel_attention = false;
        v.lambda_mil = 0.0;
        variants.push_back(v);
    }
    {
        AblationVariant v;
        v.name = "model3_no_mil_chattn";
        v.model = base;
        v.model.use_mil = false;
        v.model.use_channel_attention = true;
        v.lambda_mil = 0.0;
        variants.push_back(v);
    }
    {
        AblationVariant v;
        v.name = "model4_mil_no_chattn";
        v.model = base;
        v.model.use_mil = true;
        v.model.use_channel_attention = false;
        v.lambda_mil = base_lambda_mil;
        variants.push_back(v);
    }
    {
        AblationVariant v;
        v.name = "full";
        v.model = base;
        v.model.use_mil = true;
        v.model.use_channel_attention = true;
        v.lambda_mil = base_lambda_mil;
        variants.push_back(v);
    }
    return variants;
}

AblationTable ablation_run(const BagDataset& train, const BagDataset& test,
                           const ModelConfig& base_m, const TrainConfig& base_t,
                           const std::vector<uint64_t>& seeds) {
    AblationTable table;
    table.seeds = seeds;
    for (const AblationVariant& variant : ablation_variants(base_m, base_t.lambda_mil)) {
        AblationRow row;
        row.variant = variant.name;
        row.head = "disc";
        for (uint64_t seed : seeds) {
            TrainConfig tcfg = base_t;
            tcfg.seed = seed;
            tcfg.lambda_mil = variant.lambda_mil;
            CganResult res = train_cgan(train, variant.model, tcfg);
            MetricsReport rep = evaluate_discriminator(*res.discriminator, test);
            row.per_seed_accuracy.push_back(rep.accuracy);
            row.per_seed_f1.push_back(rep.macro_f1);
        }
        double acc = 0.0, f1 = 0.0;
        for (size_t i = 0; i < row.per_seed_accuracy.size(); ++i) {
            acc += row.per_seed_accuracy[i];
            f1 += row.per_seed_f1[i];
        }
        row.mean_accuracy = acc / static_cast<double>(row.per_seed_accuracy.size());
        row.mean_f1 = f1 / static_cast<double>(row.per_seed_f1.size());
        table.rows.push_back(std::move(row));
    }
    return table;
}

// ---- exports -----------------------------------------------------------------------

std::string metrics_to_json(const MetricsReport& report) {
    json j;
    j["head"] = report.head;
    j["accuracy"] = report.accuracy;
    j["macro_f1"] = report.macro_f1;
    json per_class = json::array();
    for (const auto& m : report.per_class) {
        per_class.push_back({{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}});
    }
    j["per_class"] = per_class;
    json cm = json::array();
    for (int t = 0; t < report.cm.n_classes; ++t) {
        json row = json::array();
        for (int p = 0; p < report.cm.n_classes; ++p) row.push_back(report.cm.at(t, p));
        cm.push_back(row);
    }
    j["confusion"] = cm;
    return j.dump(2);
}

void save_metrics_json(const std::filesystem::path& path, const MetricsReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("save_metrics_json: cannot open '" + path.string() + "'");
    out << metrics_to_json(report) << "\n";
}

void save_metrics_csv(const std::filesystem::path& path, const MetricsReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("save_metrics_csv: cannot open '" + path.string() + "'");
    out.precision(12);
    out << "head,accuracy,macro_f1\n";
    out << report.head << "," << report.accuracy << "," << report.macro_f1 << "\n";
    out << "class,precision,recall,f1\n";
    for (size_t c = 0; c < report.per_class.size(); ++c) {
        out << c << "," << report.per_class[c].precision << "," << report.per_class[c].recall << ","
            << report.per_class[c].f1 << "\n";
    }
}

void save_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("save_confusion_csv: cannot open '" + path.string() + "'");
    for (int t = 0; t < cm.n_classes; ++t) {
        for (int p = 0; p < cm.n_classes; ++p) {
            if (p) out << ",";
            out << cm.at(t, p);
        }
        out << "\n";
    }
}

void save_confusion_gnuplot(const std::filesystem::path& path, const ConfusionMatrix& cm) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("save_confusion_gnuplot: cannot open '" + path.string() + "'");
    out << "# predicted true count\n";
    for (int t = 0; t < cm.n_classes; ++t) {
        for (int p = 0; p < cm.n_classes; ++p) {
            out << p << " " << t << " " << cm.at(t, p) << "\n";
        }
        out << "\n";
    }
}

void save_ablation_csv(const std::filesystem::path& path, const AblationTable& table) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("save_ablation_csv: cannot open '" + path.string() + "'");
    out.precision(12);
    out << "variant,head";
    for (uint64_t s : table.seeds) out << ",acc_seed" << s;
    out << ",mean_accuracy,mean_f1\n";
    for (const auto& row : table.rows) {
        out << row.variant << "," << row.head;
        for (double a : row.per_seed_accuracy) out << "," << a;
        out << "," << row.mean_accuracy << "," << row.mean_f1 << "\n";
    }
}

void save_ablation_json(const std::filesystem::path& path, const AblationTable& table) {
    json j;
    j["seeds"] = table.seeds;
    json rows = json::array();
    for (const auto& row : table.rows) {
        rows.push_back({{"variant", row.variant},
                        {"head", row.head},
                        {"per_seed_accuracy", row.per_seed_accuracy},
                        {"per_seed_f1", row.per_seed_f1},
                        {"mean_accuracy", row.mean_accuracy},
                        {"mean_f1", row.mean_f1}});
    }
    j["rows"] = rows;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("save_ablation_json: cannot open '" + path.string() + "'");
    out << j.dump(2) << "\n";
}

}  // namespace rfsf
