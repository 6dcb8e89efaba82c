#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rfsf/errors.hpp"
#include "rfsf/ingest.hpp"

using namespace rfsf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("rfsf_ingest_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int counter;
};
int TempDir::counter = 0;

void write_bytes(const fs::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("write_iq then read_iq round trips at float32 precision") {
    TempDir tmp;
    IQSignal sig;
    sig.sample_rate_hz = 1e6;
    for (int i = 0; i < 100; ++i) {
        sig.samples.emplace_back(0.125 * i, -0.25 * i);  // exactly representable
    }
    write_iq(tmp.path / "a.iq", sig);
    IQSignal back = read_iq(tmp.path / "a.iq", 1e6);
    REQUIRE(back.samples.size() == sig.samples.size());
    for (size_t i = 0; i < sig.samples.size(); ++i) CHECK(back.samples[i] == sig.samples[i]);
}

TEST_CASE("read_iq rejects an empty file via the signal length invariant") {
    TempDir tmp;
    write_bytes(tmp.path / "empty.iq", {});
    CHECK_THROWS_AS(read_iq(tmp.path / "empty.iq", 1e6), ContractError);
}

TEST_CASE("read_iq of a known 4-sample fixture gives exact values") {
    TempDir tmp;
    // four I/Q pairs, little-endian float32
    std::vector<float> vals = {1.0f, 2.0f, -0.5f, 0.25f, 3.0f, -3.0f, 0.0f, 1.5f};
    std::vector<char> bytes(vals.size() * 4);
    std::memcpy(bytes.data(), vals.data(), bytes.size());
    write_bytes(tmp.path / "fix.iq", bytes);
    IQSignal sig = read_iq(tmp.path / "fix.iq", 2e6);
    REQUIRE(sig.samples.size() == 4);
    CHECK(sig.samples[0] == std::complex<double>(1.0, 2.0));
    CHECK(sig.samples[1] == std::complex<double>(-0.5, 0.25));
    CHECK(sig.samples[2] == std::complex<double>(3.0, -3.0));
    CHECK(sig.samples[3] == std::complex<double>(0.0, 1.5));
    CHECK(sig.sample_rate_hz == 2e6);
}

TEST_CASE("read_iq reports truncation with a byte offset") {
    TempDir tmp;
    write_bytes(tmp.path / "trunc.iq", std::vector<char>(10, 0));  // 10 % 4 != 0
    try {
        read_iq(tmp.path / "trunc.iq", 1e6);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("byte offset 8") != std::string::npos);
    }
    write_bytes(tmp.path / "odd.iq", std::vector<char>(12, 0));  // 3 floats
    try {
        read_iq(tmp.path / "odd.iq", 1e6);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("odd float count") != std::string::npos);
    }
}

TEST_CASE("well-formed two-row manifest loads") {
    TempDir tmp;
    write_bytes(tmp.path / "a.iq", std::vector<char>(16, 0));
    write_bytes(tmp.path / "b.iq", std::vector<char>(16, 0));
    std::ofstream csv(tmp.path / "manifest.csv");
    csv << "path,class_index,class_name,sample_rate_hz,center_freq_hz,snr_db\n";
    csv << "# a comment\n";
    csv << "a.iq,0,ON,60000000,2437500000,10\n";
    csv << "b.iq,1,HO,60000000,2437500000,\n";
    csv.close();
    Manifest m = load_manifest(tmp.path / "manifest.csv");
    REQUIRE(m.rows.size() == 2);
    CHECK(m.n_classes == 2);
    CHECK(m.rows[0].class_name == "ON");
    CHECK(m.rows[0].has_snr);
    CHECK(!m.rows[1].has_snr);
    CHECK(m.rows[0].sample_rate_hz == 60000000.0);
}

TEST_CASE("manifest with class indices {0,2} is rejected as non-contiguous") {
    TempDir tmp;
    write_bytes(tmp.path / "a.iq", std::vector<char>(16, 0));
    write_bytes(tmp.path / "b.iq", std::vector<char>(16, 0));
    std::ofstream csv(tmp.path / "m.csv");
    csv << "path,class_index,class_name,sample_rate_hz,center_freq_hz,snr_db\n";
    csv << "a.iq,0,A,1e6,2e9,\n";
    csv << "b.iq,2,C,1e6,2e9,\n";
    csv.close();
    try {
        load_manifest(tmp.path / "m.csv");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("non-contiguous") != std::string::npos);
    }
}

TEST_CASE("manifest rejects duplicates, missing files and missing columns") {
    TempDir tmp;
    write_bytes(tmp.path / "a.iq", std::vector<char>(16, 0));
    {
        std::ofstream csv(tmp.path / "dup.csv");
        csv << "path,class_index,class_name,sample_rate_hz,center_freq_hz,snr_db\n";
        csv << "a.iq,0,A,1e6,2e9,\n";
        csv << "a.iq,0,A,1e6,2e9,\n";
    }
    CHECK_THROWS_AS(load_manifest(tmp.path / "dup.csv"), FormatError);
    {
        std::ofstream csv(tmp.path / "missing.csv");
        csv << "path,class_index,class_name,sample_rate_hz,center_freq_hz,snr_db\n";
        csv << "ghost.iq,0,A,1e6,2e9,\n";
    }
    CHECK_THROWS_AS(load_manifest(tmp.path / "missing.csv"), FormatError);
    {
        std::ofstream csv(tmp.path / "badcols.csv");
        csv << "path,class_index,sample_rate_hz,center_freq_hz,snr_db\n";
        csv << "a.iq,0,1e6,2e9,\n";
    }
    CHECK_THROWS_AS(load_manifest(tmp.path / "badcols.csv"), FormatError);
}

TEST_CASE("a 15-signal synthetic dataset export reloads with identical labels") {
    TempDir tmp;
    SignalProfile p = SignalProfile::standard("dronedetect", LabelSet::Synth3);
    DatasetSpec spec;
    spec.count_per_state = {5, 5, 5};
    spec.n_samples = 512;
    auto ds = make_dataset(spec, p, 3);
    std::vector<ManifestRow> rows;
    for (size_t i = 0; i < ds.size(); ++i) {
        std::string name = "sig" + std::to_string(i) + ".iq";
        write_iq(tmp.path / name, ds[i]);
        ManifestRow r;
        r.path = name;
        r.class_index = ds[i].label.index;
        r.class_name = class_name(ds[i].label);
        r.sample_rate_hz = ds[i].sample_rate_hz;
        r.center_freq_hz = p.center_freq_hz;
        r.snr_db = ds[i].snr_db;
        r.has_snr = true;
        rows.push_back(r);
    }
    write_manifest(tmp.path / "manifest.csv", rows);
    Manifest m = load_manifest(tmp.path / "manifest.csv");
    REQUIRE(m.rows.size() == 15);
    CHECK(m.n_classes == 3);
    for (size_t i = 0; i < m.rows.size(); ++i) {
        CHECK(m.rows[i].class_index == ds[i].label.index);
        CHECK(m.rows[i].class_name == class_name(ds[i].label));
    }
    // order-preserving and idempotent
    Manifest m2 = load_manifest(tmp.path / "manifest.csv");
    for (size_t i = 0; i < m.rows.size(); ++i) CHECK(m2.rows[i].path == m.rows[i].path);
}
