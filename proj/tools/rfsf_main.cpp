// rfsf: synthetic UAV RF flight-state experiments end to end.
// Subcommands: synth, preprocess, train, eval, ablate, explain.
// Exit codes: 0 success, 2 argument error, 3 I/O error, 4 numerical failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "rfsf/config.hpp"
#include "rfsf/errors.hpp"
#include "rfsf/eval.hpp"
#include "rfsf/ingest.hpp"
#include "rfsf/parallel.hpp"
#include "rfsf/preprocess.hpp"
#include "rfsf/signal.hpp"
#include "rfsf/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace rfsf;

namespace {

constexpr const char* kToolVersion = "0.1.0";

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

LogLevel g_log_level = LogLevel::Info;

void init_log_level() {
    const char* env = std::getenv("RFSF_LOG");
    if (!env) return;
    std::string s(env);
    if (s == "debug") g_log_level = LogLevel::Debug;
    else if (s == "info") g_log_level = LogLevel::Info;
    else if (s == "warn") g_log_level = LogLevel::Warn;
    else if (s == "error") g_log_level = LogLevel::Error;
}

void log_at(LogLevel level, const char* tag, const std::string& msg) {
    if (level < g_log_level) return;
    std::cerr << "[rfsf][" << tag << "] " << msg << "\n";
}

void log_debug(const std::string& msg) { log_at(LogLevel::Debug, "debug", msg); }
void log_info(const std::string& msg) { log_at(LogLevel::Info, "info", msg); }
void log_warn(const std::string& msg) { log_at(LogLevel::Warn, "warn", msg); }

using Clock = std::chrono::steady_clock;

struct RunManifestWriter {
    std::string command;
    fs::path out_dir;
    uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> configs;  // (path, hash)
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    Clock::time_point start = Clock::now();

    void add_config(const fs::path& path) {
        if (path.empty()) return;
        configs.emplace_back(path.string(), file_hash_hex(path));
    }

    void write() const {
        json j;
        j["command"] = command;
        j["seed"] = seed;
        json cfgs = json::array();
        for (const auto& [p, h] : configs) cfgs.push_back({{"path", p}, {"hash_fnv1a", h}});
        j["configs"] = cfgs;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["tool_version"] = kToolVersion;
        j["wall_time_seconds"] = std::chrono::duration<double>(Clock::now() - start).count();
        std::ofstream out(out_dir / "run_manifest.json", std::ios::trunc);
        if (!out) throw IoError("cannot write run manifest in '" + out_dir.string() + "'");
        out << j.dump(2) << "\n";
    }
};

void ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory '" + dir.string() + "'");
    }
}

std::pair<double, double> parse_snr_range(const std::string& s) {
    size_t comma = s.find(',');
    if (comma == std::string::npos) {
        double v = std::stod(s);
        return {v, v};
    }
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
}

std::vector<uint64_t> parse_seed_list(const std::string& s) {
    std::vector<uint64_t> seeds;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) throw ConfigError("seed list is empty");
    return seeds;
}

// Dataset geometry wins over config defaults for fields the bags pin down.
ModelConfig sync_model_config(ModelConfig cfg, const BagDataset& data) {
    if (cfg.bag_size != data.bag_size || cfg.instance_dim != data.instance_dim ||
        cfg.n_classes != data.n_classes) {
        log_info("model geometry synced to bags: t=" + std::to_string(data.bag_size) +
                 " d=" + std::to_string(data.instance_dim) +
                 " classes=" + std::to_string(data.n_classes));
    }
    cfg.bag_size = data.bag_size;
    cfg.instance_dim = data.instance_dim;
    cfg.n_classes = data.n_classes;
    cfg.validate();
    return cfg;
}

// ---- synth ------------------------------------------------------------------

int cmd_synth(const std::string& states, int count_per_state, const std::string& profile_name,
              const std::string& snr, int samples, uint64_t seed, const fs::path& out_dir) {
    if (count_per_state < 1) throw ConfigError("count must be >= 1");
    if (samples < 1) throw ConfigError("samples must be >= 1");
    LabelSet set = label_set_from_name(states);
    SignalProfile profile = SignalProfile::standard(profile_name, set);
    auto [snr_lo, snr_hi] = parse_snr_range(snr);

    DatasetSpec spec;
    spec.set = set;
    spec.count_per_state.assign(static_cast<size_t>(label_set_size(set)), count_per_state);
    spec.snr_db_lo = snr_lo;
    spec.snr_db_hi = snr_hi;
    spec.n_samples = samples;

    ensure_out_dir(out_dir);
    RunManifestWriter rm;
    rm.command = "synth";
    rm.out_dir = out_dir;
    rm.seed = seed;

    std::vector<IQSignal> signals = make_dataset(spec, profile, seed);
    std::vector<ManifestRow> rows;
    for (size_t i = 0; i < signals.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "%04zu_%s.iq", i, class_name(signals[i].label).c_str());
        write_iq(out_dir / name, signals[i]);
        ManifestRow row;
        row.path = name;
        row.class_index = signals[i].label.index;
        row.class_name = class_name(signals[i].label);
        row.sample_rate_hz = signals[i].sample_rate_hz;
        row.center_freq_hz = profile.center_freq_hz;
        row.snr_db = signals[i].snr_db;
        row.has_snr = true;
        row.speed_mps = signals[i].kinematics.speed_mps;
        row.angle_rad = signals[i].kinematics.angle_rad;
        row.has_kinematics = true;
        rows.push_back(std::move(row));
        rm.outputs.push_back(name);
    }
    write_manifest(out_dir / "manifest.csv", rows);
    rm.outputs.push_back("manifest.csv");
    rm.write();
    std::cout << "wrote " << signals.size() << " signals and manifest.csv to " << out_dir.string()
              << "\n";
    return 0;
}

// ---- preprocess --------------------------------------------------------------

int cmd_preprocess(const fs::path& manifest_path, const fs::path& config_path,
                   const fs::path& out_dir, int jobs) {
    PreprocessConfig cfg;
    if (!config_path.empty()) cfg = load_preprocess_config(config_path);
    cfg.validate();

    Manifest manifest = load_manifest(manifest_path);
    ensure_out_dir(out_dir);
    RunManifestWriter rm;
    rm.command = "preprocess";
    rm.out_dir = out_dir;
    rm.add_config(config_path);
    rm.inputs.push_back(manifest_path.string());

    int n = static_cast<int>(manifest.rows.size());
    std::vector<std::vector<WindowedBag>> per_signal(static_cast<size_t>(n));
    std::vector<std::string> skip_notes(static_cast<size_t>(n));
    std::vector<int64_t> window_counts(static_cast<size_t>(n), 0);
    parallel_blocks(n, std::max(1, std::min(n, 16)), jobs, [&](int, int begin, int end) {
        for (int i = begin; i < end; ++i) {
            const ManifestRow& row = manifest.rows[static_cast<size_t>(i)];
            IQSignal sig = read_iq(manifest.base_dir / row.path, row.sample_rate_hz);
            sig.label.index = row.class_index;
            if (row.has_kinematics) {
                sig.kinematics.speed_mps = row.speed_mps;
                sig.kinematics.angle_rad = row.angle_rad;
            }
            window_counts[static_cast<size_t>(i)] =
                window_count(static_cast<int64_t>(sig.samples.size()), cfg.window_len, cfg.stride);
            try {
                per_signal[static_cast<size_t>(i)] = make_bags(sig, row.center_freq_hz, cfg, i);
            } catch (const ContractError& e) {
                skip_notes[static_cast<size_t>(i)] = e.what();
            }
        }
    });

    std::vector<WindowedBag> bags;
    int64_t total_windows = 0;
    int skipped = 0;
    for (int i = 0; i < n; ++i) {
        total_windows += window_counts[static_cast<size_t>(i)];
        if (!skip_notes[static_cast<size_t>(i)].empty()) {
            ++skipped;
            log_warn("skipping " + manifest.rows[static_cast<size_t>(i)].path + ": " +
                     skip_notes[static_cast<size_t>(i)]);
            continue;
        }
        auto& sig_bags = per_signal[static_cast<size_t>(i)];
        bags.insert(bags.end(), std::make_move_iterator(sig_bags.begin()),
                    std::make_move_iterator(sig_bags.end()));
    }
    BagDataset ds = collect_bags(std::move(bags), manifest.n_classes);
    std::cout << "signals=" << n << " skipped=" << skipped << " windows=" << total_windows
              << " bags=" << ds.bags.size() << "\n";
    if (ds.bags.empty()) {
        std::cerr << "no bags produced\n";
        return 1;
    }
    save_bags(out_dir / "bags.bin", ds);
    rm.outputs.push_back("bags.bin");
    rm.write();
    return 0;
}

// ---- train --------------------------------------------------------------------

int cmd_train(const fs::path& bags_path, const fs::path& model_config_path,
              const fs::path& train_config_path, const std::string& mode, int64_t seed_flag,
              int jobs_flag, const fs::path& out_dir) {
    BagDataset data = load_bags(bags_path);
    ModelConfig mcfg;
    if (!model_config_path.empty()) mcfg = load_model_config(model_config_path);
    mcfg = sync_model_config(mcfg, data);
    TrainConfig tcfg;
    if (!train_config_path.empty()) tcfg = load_train_config(train_config_path);
    if (seed_flag >= 0) tcfg.seed = static_cast<uint64_t>(seed_flag);
    if (jobs_flag > 0) tcfg.jobs = jobs_flag;
    tcfg.validate();

    ensure_out_dir(out_dir);
    RunManifestWriter rm;
    rm.command = "train";
    rm.out_dir = out_dir;
    rm.seed = tcfg.seed;
    rm.add_config(model_config_path);
    rm.add_config(train_config_path);
    rm.inputs.push_back(bags_path.string());

    if (mode == "cgan" || mode == "both") {
        CganResult res = train_cgan(data, mcfg, tcfg);
        save_checkpoint(out_dir / "generator.ckpt", res.generator->kind() == "cnn" ? "cnn_generator"
                                                                                   : "generator",
                        mcfg, res.generator->parameters());
        save_checkpoint(out_dir / "discriminator.ckpt", "discriminator", mcfg,
                        res.discriminator->parameters());
        save_history_csv(out_dir / "history_cgan.csv", res.history);
        rm.outputs.insert(rm.outputs.end(), {"generator.ckpt", "discriminator.ckpt",
                                             "history_cgan.csv"});
        if (!res.history.records.empty()) {
            const EpochRecord& last = res.history.records.back();
            std::cout << "cgan: d_loss=" << last.d_loss << " g_loss=" << last.g_loss
                      << " d_cls_acc=" << last.d_cls_acc << "\n";
        } else {
            std::cout << "cgan: saved initial checkpoints (0 epochs)\n";
        }
    }
    if (mode == "classifier" || mode == "both") {
        ClassifierResult res = train_classifier(data, mcfg, tcfg);
        save_checkpoint(out_dir / "classifier.ckpt", "classifier", mcfg,
                        res.classifier->parameters());
        save_history_csv(out_dir / "history_classifier.csv", res.history);
        rm.outputs.insert(rm.outputs.end(), {"classifier.ckpt", "history_classifier.csv"});
        if (!res.history.records.empty()) {
            std::cout << "classifier: loss=" << res.history.records.back().g_loss
                      << " train_acc=" << res.history.records.back().g_mil_acc << "\n";
        } else {
            std::cout << "classifier: saved initial checkpoint (0 epochs)\n";
        }
    }
    rm.write();
    return 0;
}

// ---- eval ---------------------------------------------------------------------

fs::path resolve_checkpoint(const fs::path& base, const std::string& head) {
    if (fs::is_directory(base)) {
        if (head == "disc") return base / "discriminator.ckpt";
        fs::path clf = base / "classifier.ckpt";
        if (fs::exists(clf)) return clf;
        return base / "generator.ckpt";
    }
    return base;
}

MetricsReport eval_head(const fs::path& ckpt_base, const std::string& head,
                        const BagDataset& data) {
    fs::path path = resolve_checkpoint(ckpt_base, head);
    CheckpointInfo info = peek_checkpoint(path);
    if (head == "disc") {
        if (info.kind != "discriminator") {
            throw FormatError("eval: head 'disc' needs a discriminator checkpoint, got '" +
                              info.kind + "'");
        }
        Rng rng(0);
        DiscriminatorNet disc(info.config, rng);
        load_checkpoint(path, "discriminator", disc.parameters());
        return evaluate_discriminator(disc, data);
    }
    if (info.kind != "classifier" && info.kind != "generator") {
        throw FormatError("eval: head 'mil' needs a classifier or generator checkpoint, got '" +
                          info.kind + "'");
    }
    Rng rng(0);
    GeneratorNet net(info.config, rng);
    load_checkpoint(path, info.kind, net.parameters());
    MetricsReport rep = evaluate_classifier(net, data);
    rep.head = info.kind == "classifier" ? "mil" : "mil(generator)";
    return rep;
}

int cmd_eval(const fs::path& ckpt_base, const fs::path& bags_path, const std::string& head,
             const fs::path& report_dir) {
    BagDataset data = load_bags(bags_path);
    ensure_out_dir(report_dir);
    RunManifestWriter rm;
    rm.command = "eval";
    rm.out_dir = report_dir;
    rm.inputs.push_back(bags_path.string());
    rm.inputs.push_back(ckpt_base.string());

    std::vector<std::string> heads;
    if (head == "both") {
        heads = {"disc", "mil"};
    } else {
        heads = {head};
    }
    for (const std::string& h : heads) {
        MetricsReport rep = eval_head(ckpt_base, h, data);
        // attach analytic complexity for the evaluated configuration
        fs::path path = resolve_checkpoint(ckpt_base, h);
        ComplexityReport cx = complexity_report(peek_checkpoint(path).config);
        json j = json::parse(metrics_to_json(rep));
        j["complexity"] = {{"generator_macs", cx.generator_macs},
                           {"discriminator_macs", cx.discriminator_macs},
                           {"total_macs", cx.total_macs}};
        std::ofstream out(report_dir / ("metrics_" + h + ".json"), std::ios::trunc);
        if (!out) throw IoError("cannot write metrics JSON");
        out << j.dump(2) << "\n";
        save_metrics_csv(report_dir / ("metrics_" + h + ".csv"), rep);
        save_confusion_csv(report_dir / ("confusion_" + h + ".csv"), rep.cm);
        save_confusion_gnuplot(report_dir / ("confusion_" + h + ".dat"), rep.cm);
        rm.outputs.insert(rm.outputs.end(),
                          {"metrics_" + h + ".json", "metrics_" + h + ".csv",
                           "confusion_" + h + ".csv", "confusion_" + h + ".dat"});
        std::cout << h << ": accuracy=" << rep.accuracy << " macro_f1=" << rep.macro_f1 << "\n";
    }
    rm.write();
    return 0;
}

// ---- ablate --------------------------------------------------------------------

int cmd_ablate(const fs::path& bags_path, const fs::path& test_bags_path,
               const std::string& seeds_str, const fs::path& model_config_path,
               const fs::path& train_config_path, int jobs_flag, const fs::path& out_dir) {
    BagDataset train = load_bags(bags_path);
    BagDataset test = load_bags(test_bags_path);
    ModelConfig mcfg;
    if (!model_config_path.empty()) mcfg = load_model_config(model_config_path);
    mcfg = sync_model_config(mcfg, train);
    TrainConfig tcfg;
    if (!train_config_path.empty()) tcfg = load_train_config(train_config_path);
    if (jobs_flag > 0) tcfg.jobs = jobs_flag;
    std::vector<uint64_t> seeds = parse_seed_list(seeds_str);

    ensure_out_dir(out_dir);
    RunManifestWriter rm;
    rm.command = "ablate";
    rm.out_dir = out_dir;
    rm.seed = seeds[0];
    rm.add_config(model_config_path);
    rm.add_config(train_config_path);
    rm.inputs = {bags_path.string(), test_bags_path.string()};

    AblationTable table = ablation_run(train, test, mcfg, tcfg, seeds);
    save_ablation_csv(out_dir / "ablation.csv", table);
    save_ablation_json(out_dir / "ablation.json", table);
    rm.outputs = {"ablation.csv", "ablation.json"};
    rm.write();
    for (const auto& row : table.rows) {
        std::cout << row.variant << ": mean_accuracy=" << row.mean_accuracy << "\n";
    }
    return 0;
}

// ---- explain --------------------------------------------------------------------

int cmd_explain(const fs::path& ckpt_path, const fs::path& bags_path, int bag_index,
                const fs::path& out_dir) {
    BagDataset data = load_bags(bags_path);
    if (bag_index < 0 || bag_index >= static_cast<int>(data.bags.size())) {
        throw ConfigError("bag index " + std::to_string(bag_index) + " out of range [0," +
                          std::to_string(data.bags.size()) + ")");
    }
    fs::path path = fs::is_directory(ckpt_path) ? resolve_checkpoint(ckpt_path, "mil") : ckpt_path;
    CheckpointInfo info = peek_checkpoint(path);
    if (info.kind != "classifier" && info.kind != "generator") {
        throw FormatError("explain: needs a classifier or generator checkpoint, got '" + info.kind +
                          "'");
    }
    Rng rng(0);
    GeneratorNet net(info.config, rng);
    load_checkpoint(path, info.kind, net.parameters());

    Explanation ex = explain(data.bags[static_cast<size_t>(bag_index)].instances, net);
    ensure_out_dir(out_dir);
    RunManifestWriter rm;
    rm.command = "explain";
    rm.out_dir = out_dir;
    rm.inputs = {bags_path.string(), path.string()};

    std::ofstream out(out_dir / "saliency.csv", std::ios::trunc);
    if (!out) throw IoError("cannot write saliency.csv");
    out.precision(17);
    int k = info.config.n_classes;
    out << "instance,attention";
    for (int c = 0; c < k; ++c) out << ",yhat_" << c;
    for (int c = 0; c < k; ++c) out << ",saliency_" << c;
    out << "\n";
    int t = info.config.bag_size;
    for (int j = 0; j < t; ++j) {
        out << j << "," << ex.mil.attention[static_cast<size_t>(j)];
        for (int c = 0; c < k; ++c) out << "," << ex.mil.instance_probs.at(j, c);
        for (int c = 0; c < k; ++c) out << "," << ex.mil.saliency.at(j, c);
        out << "\n";
    }
    json pj;
    pj["bag_index"] = bag_index;
    pj["true_class"] = data.bags[static_cast<size_t>(bag_index)].label.index;
    pj["predicted_class"] = ex.predicted_class;
    pj["top_instance"] = ex.top_instance;
    std::vector<double> bag_pred(ex.mil.bag_pred.data(),
                                 ex.mil.bag_pred.data() + ex.mil.bag_pred.size());
    pj["bag_pred"] = bag_pred;
    std::ofstream pout(out_dir / "prediction.json", std::ios::trunc);
    if (!pout) throw IoError("cannot write prediction.json");
    pout << pj.dump(2) << "\n";

    rm.outputs = {"saliency.csv", "prediction.json"};
    rm.write();
    std::cout << "bag " << bag_index << ": true=" << data.bags[static_cast<size_t>(bag_index)].label.index
              << " predicted=" << ex.predicted_class << " top_instance=" << ex.top_instance << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    init_log_level();
    CLI::App app{"UAV RF flight-state classification experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic raw-IQ dataset");
    std::string states = "SYNTH3", profile = "dronedetect", snr = "10,20";
    int count_per_state = 0, samples = 8192;
    int64_t seed = 0;
    std::string out_dir;
    synth->add_option("--states", states, "label set: SYNTH3, DRONERF10 or DRONEDETECT21");
    synth->add_option("--count-per-state", count_per_state, "signals per class")->required();
    synth->add_option("--profile", profile, "dronedetect or dronerf");
    synth->add_option("--snr", snr, "SNR dB value or lo,hi range");
    synth->add_option("--samples", samples, "samples per signal");
    synth->add_option("--seed", seed, "master seed");
    synth->add_option("--out", out_dir, "output directory")->required();

    // preprocess
    auto* prep = app.add_subcommand("preprocess", "manifest of raw IQ -> bag container");
    std::string manifest_path, prep_config, prep_out;
    int jobs = 4;
    prep->add_option("--manifest", manifest_path, "manifest CSV")->required();
    prep->add_option("--config", prep_config, "preprocess config JSON");
    prep->add_option("--jobs", jobs, "worker threads");
    prep->add_option("--out", prep_out, "output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "train the cGAN and/or the MIL classifier");
    std::string bags_path, model_config, train_config, mode = "both", train_out;
    int64_t train_seed = -1;
    int train_jobs = 0;
    train->add_option("--bags", bags_path, "bag container")->required();
    train->add_option("--model-config", model_config, "model config JSON");
    train->add_option("--train-config", train_config, "train config JSON");
    train->add_option("--mode", mode, "cgan, classifier or both")
        ->check(CLI::IsMember({"cgan", "classifier", "both"}));
    train->add_option("--seed", train_seed, "overrides the config seed");
    train->add_option("--jobs", train_jobs, "overrides the config job count");
    train->add_option("--out", train_out, "output directory")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate checkpoints on a bag container");
    std::string ckpt, eval_bags, head = "both", report_dir;
    eval->add_option("--checkpoint", ckpt, "checkpoint file or train output directory")->required();
    eval->add_option("--bags", eval_bags, "bag container")->required();
    eval->add_option("--head", head, "disc, mil or both")
        ->check(CLI::IsMember({"disc", "mil", "both"}));
    eval->add_option("--report", report_dir, "report directory")->required();

    // ablate
    auto* ablate = app.add_subcommand("ablate", "five-variant ablation over seeds");
    std::string ab_bags, ab_test_bags, ab_seeds = "1,2,3", ab_model_cfg, ab_train_cfg, ab_out;
    int ab_jobs = 0;
    ablate->add_option("--bags", ab_bags, "training bag container")->required();
    ablate->add_option("--test-bags", ab_test_bags, "held-out bag container")->required();
    ablate->add_option("--seeds", ab_seeds, "comma-separated seed list");
    ablate->add_option("--model-config", ab_model_cfg, "model config JSON");
    ablate->add_option("--train-config", ab_train_cfg, "train config JSON");
    ablate->add_option("--jobs", ab_jobs, "worker threads");
    ablate->add_option("--out", ab_out, "output directory")->required();

    // explain
    auto* explain_cmd = app.add_subcommand("explain", "per-instance saliency for one bag");
    std::string ex_ckpt, ex_bags, ex_out;
    int bag_index = 0;
    explain_cmd->add_option("--checkpoint", ex_ckpt, "classifier/generator checkpoint")->required();
    explain_cmd->add_option("--bags", ex_bags, "bag container")->required();
    explain_cmd->add_option("--bag-index", bag_index, "bag to explain")->required();
    explain_cmd->add_option("--out", ex_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth) {
            return cmd_synth(states, count_per_state, profile, snr, samples,
                             static_cast<uint64_t>(seed), out_dir);
        }
        if (*prep) return cmd_preprocess(manifest_path, prep_config, prep_out, jobs);
        if (*train) {
            return cmd_train(bags_path, model_config, train_config, mode, train_seed, train_jobs,
                             train_out);
        }
        if (*eval) return cmd_eval(ckpt, eval_bags, head, report_dir);
        if (*ablate) {
            return cmd_ablate(ab_bags, ab_test_bags, ab_seeds, ab_model_cfg, ab_train_cfg, ab_jobs,
                              ab_out);
        }
        if (*explain_cmd) return cmd_explain(ex_ckpt, ex_bags, bag_index, ex_out);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "invalid arguments: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "invalid arguments: " << e.what() << "\n";
        return 2;
    } catch (const IndexError& e) {
        std::cerr << "invalid arguments: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
    (void)log_debug;
}
