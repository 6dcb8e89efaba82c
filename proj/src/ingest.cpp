#include "rfsf/ingest.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "rfsf/errors.hpp"

namespace rfsf {

namespace {

// Raw capture files are little-endian float32; computation stays 64-bit.
static_assert(sizeof(float) == 4);

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

IQSignal read_iq(const std::filesystem::path& path, double sample_rate_hz) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_iq: cannot open '" + path.string() + "'");
    in.seekg(0, std::ios::end);
    std::streamoff bytes = in.tellg();
    in.seekg(0);
    if (bytes % 4 != 0) {
        throw FormatError("read_iq: '" + path.string() + "' truncated mid-float at byte offset " +
                          std::to_string(bytes - bytes % 4));
    }
    if ((bytes / 4) % 2 != 0) {
        throw FormatError("read_iq: '" + path.string() + "' has an odd float count (" +
                          std::to_string(bytes / 4) + "); expected interleaved I,Q pairs");
    }
    size_t n = static_cast<size_t>(bytes / 8);
    std::vector<float> raw(n * 2);
    if (n > 0) {
        in.read(reinterpret_cast<char*>(raw.data()), bytes);
        if (!in) throw IoError("read_iq: short read on '" + path.string() + "'");
    }
    IQSignal sig;
    sig.sample_rate_hz = sample_rate_hz;
    sig.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        sig.samples[i] = std::complex<double>(raw[2 * i], raw[2 * i + 1]);
    }
    sig.validate();  // rejects empty files
    return sig;
}

void write_iq(const std::filesystem::path& path, const IQSignal& signal) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_iq: cannot open '" + path.string() + "'");
    std::vector<float> raw(signal.samples.size() * 2);
    for (size_t i = 0; i < signal.samples.size(); ++i) {
        raw[2 * i] = static_cast<float>(signal.samples[i].real());
        raw[2 * i + 1] = static_cast<float>(signal.samples[i].imag());
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!out) throw IoError("write_iq: short write on '" + path.string() + "'");
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_manifest: cannot open '" + path.string() + "'");

    Manifest m;
    m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    const std::vector<std::string> expected = {"path",           "class_index",
                                               "class_name",     "sample_rate_hz",
                                               "center_freq_hz", "snr_db"};
    std::string line;
    bool header_seen = false;
    int line_no = 0;
    std::set<std::string> seen_paths;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::vector<std::string> fields = split_csv_line(t);
        if (!header_seen) {
            for (size_t i = 0; i < expected.size(); ++i) {
                if (i >= fields.size() || trim(fields[i]) != expected[i]) {
                    throw FormatError("load_manifest: line " + std::to_string(line_no) +
                                      ": missing or misnamed column '" + expected[i] + "'");
                }
            }
            header_seen = true;
            continue;
        }
        if (fields.size() < 5) {
            throw FormatError("load_manifest: line " + std::to_string(line_no) + ": expected " +
                              std::to_string(expected.size()) + " columns, got " +
                              std::to_string(fields.size()));
        }
        ManifestRow row;
        row.path = trim(fields[0]);
        try {
            row.class_index = std::stoi(trim(fields[1]));
            row.sample_rate_hz = std::stod(trim(fields[3]));
            row.center_freq_hz = std::stod(trim(fields[4]));
        } catch (const std::exception&) {
            throw FormatError("load_manifest: line " + std::to_string(line_no) +
                              ": non-numeric field");
        }
        row.class_name = trim(fields[2]);
        if (fields.size() > 5 && !trim(fields[5]).empty()) {
            row.snr_db = std::stod(trim(fields[5]));
            row.has_snr = true;
        }
        if (fields.size() > 7 && !trim(fields[6]).empty() && !trim(fields[7]).empty()) {
            row.speed_mps = std::stod(trim(fields[6]));
            row.angle_rad = std::stod(trim(fields[7]));
            row.has_kinematics = true;
        }
        if (row.class_index < 0) {
            throw FormatError("load_manifest: line " + std::to_string(line_no) +
                              ": negative class index");
        }
        if (!seen_paths.insert(row.path).second) {
            throw FormatError("load_manifest: line " + std::to_string(line_no) + ": duplicate path '" +
                              row.path + "'");
        }
        std::filesystem::path full = m.base_dir / row.path;
        if (!std::filesystem::exists(full)) {
            throw FormatError("load_manifest: line " + std::to_string(line_no) + ": file '" +
                              row.path + "' does not exist");
        }
        auto bytes = std::filesystem::file_size(full);
        if (bytes % 8 != 0) {
            throw FormatError("load_manifest: line " + std::to_string(line_no) + ": file '" +
                              row.path + "' does not hold an even float32 count");
        }
        m.rows.push_back(std::move(row));
    }
    if (!header_seen) throw FormatError("load_manifest: '" + path.string() + "' has no header row");

    std::set<int> classes;
    for (const auto& row : m.rows) classes.insert(row.class_index);
    if (!classes.empty()) {
        int expected_idx = 0;
        for (int c : classes) {
            if (c != expected_idx) {
                throw FormatError("load_manifest: non-contiguous classes (missing index " +
                                  std::to_string(expected_idx) + ")");
            }
            ++expected_idx;
        }
        m.n_classes = expected_idx;
    }
    return m;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("write_manifest: cannot open '" + path.string() + "'");
    bool kinematics = false;
    for (const auto& row : rows) kinematics = kinematics || row.has_kinematics;
    out << "path,class_index,class_name,sample_rate_hz,center_freq_hz,snr_db";
    if (kinematics) out << ",speed_mps,angle_rad";
    out << "\n";
    out.precision(17);
    for (const auto& row : rows) {
        out << row.path << "," << row.class_index << "," << row.class_name << ","
            << row.sample_rate_hz << "," << row.center_freq_hz << ",";
        if (row.has_snr) out << row.snr_db;
        if (kinematics) {
            out << ",";
            if (row.has_kinematics) out << row.speed_mps << "," << row.angle_rad;
            else out << ",";
        }
        out << "\n";
    }
    if (!out) throw IoError("write_manifest: short write on '" + path.string() + "'");
}

}  // namespace rfsf
