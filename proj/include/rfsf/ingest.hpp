#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rfsf/signal.hpp"

namespace rfsf {

struct ManifestRow {
    std::string path;  // relative to the manifest file
    int class_index = 0;
    std::string class_name;
    double sample_rate_hz = 0.0;
    double center_freq_hz = 0.0;
    double snr_db = 0.0;
    bool has_snr = false;
    // optional trailing columns so synthetic captures keep their kinematics
    double speed_mps = 0.0;
    double angle_rad = 0.0;
    bool has_kinematics = false;
};

struct Manifest {
    std::filesystem::path base_dir;
    std::vector<ManifestRow> rows;
    int n_classes = 0;
};

// Interleaved little-endian float32 I,Q widened to 64-bit complex.
IQSignal read_iq(const std::filesystem::path& path, double sample_rate_hz);
void write_iq(const std::filesystem::path& path, const IQSignal& signal);

// CSV with header path,class_index,class_name,sample_rate_hz,center_freq_hz,snr_db.
// '#' lines are comments. Validates: files exist with even float counts,
// class indices contiguous from 0, no duplicate paths.
Manifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

}  // namespace rfsf
