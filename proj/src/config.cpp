#include "rfsf/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "rfsf/errors.hpp"

namespace rfsf {

using json = nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string(what) + ": invalid JSON: " + e.what());
    }
}

}  // namespace

ModelConfig load_model_config(const std::filesystem::path& path) {
    return model_config_from_json(read_file(path));
}

std::string train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["schema_version"] = 1;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["lr_d"] = cfg.lr_d;
    j["lr_g"] = cfg.lr_g;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["adam_eps"] = cfg.adam_eps;
    j["seed"] = cfg.seed;
    j["lambda_cls"] = cfg.lambda_cls;
    j["lambda_mil"] = cfg.lambda_mil;
    j["augment_ratio"] = cfg.augment_ratio;
    j["jobs"] = cfg.jobs;
    return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
    json j = parse(text, "train config");
    TrainConfig cfg;
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.lr_d = j.value("lr_d", cfg.lr_d);
    cfg.lr_g = j.value("lr_g", cfg.lr_g);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.lambda_cls = j.value("lambda_cls", cfg.lambda_cls);
    cfg.lambda_mil = j.value("lambda_mil", cfg.lambda_mil);
    cfg.augment_ratio = j.value("augment_ratio", cfg.augment_ratio);
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.validate();
    return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
    return train_config_from_json(read_file(path));
}

std::string preprocess_config_to_json(const PreprocessConfig& cfg) {
    json j;
    j["schema_version"] = 1;
    j["window_len"] = cfg.window_len;
    j["stride"] = cfg.stride;
    j["fft_len"] = cfg.fft_len;
    j["n_bands"] = cfg.n_bands;
    j["zscore_eps"] = cfg.zscore_eps;
    j["doppler_mode"] = cfg.doppler_mode == DopplerMode::Oracle ? "oracle" : "off";
    j["bag_size"] = cfg.bag_size;
    return j.dump(2);
}

PreprocessConfig preprocess_config_from_json(const std::string& text) {
    json j = parse(text, "preprocess config");
    PreprocessConfig cfg;
    cfg.window_len = j.value("window_len", cfg.window_len);
    cfg.stride = j.value("stride", cfg.stride);
    cfg.fft_len = j.value("fft_len", cfg.window_len);
    cfg.n_bands = j.value("n_bands", cfg.n_bands);
    cfg.zscore_eps = j.value("zscore_eps", cfg.zscore_eps);
    std::string mode = j.value("doppler_mode", std::string("oracle"));
    if (mode == "oracle") {
        cfg.doppler_mode = DopplerMode::Oracle;
    } else if (mode == "off") {
        cfg.doppler_mode = DopplerMode::Off;
    } else {
        throw FormatError("preprocess config: doppler_mode must be 'oracle' or 'off'");
    }
    cfg.bag_size = j.value("bag_size", cfg.bag_size);
    cfg.validate();
    return cfg;
}

PreprocessConfig load_preprocess_config(const std::filesystem::path& path) {
    return preprocess_config_from_json(read_file(path));
}

std::string file_hash_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot hash missing file '" + path.string() + "'");
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

}  // namespace rfsf
