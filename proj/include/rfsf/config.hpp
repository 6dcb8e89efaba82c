#pragma once

#include <filesystem>
#include <string>

#include "rfsf/models.hpp"
#include "rfsf/preprocess.hpp"
#include "rfsf/train.hpp"

namespace rfsf {

// JSON config files carry a schema_version field; unknown fields are ignored
// and missing fields fall back to defaults.

ModelConfig load_model_config(const std::filesystem::path& path);
TrainConfig load_train_config(const std::filesystem::path& path);
PreprocessConfig load_preprocess_config(const std::filesystem::path& path);

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);
std::string preprocess_config_to_json(const PreprocessConfig& cfg);
PreprocessConfig preprocess_config_from_json(const std::string& text);

// FNV-1a over the file bytes; recorded in run manifests.
std::string file_hash_hex(const std::filesystem::path& path);

}  // namespace rfsf
