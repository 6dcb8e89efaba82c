#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "rfsf/errors.hpp"
#include "rfsf/preprocess.hpp"
#include "rfsf/rng.hpp"

using namespace rfsf;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

IQSignal random_signal(int n, uint64_t seed, double fs = 1e6) {
    Rng rng(seed);
    IQSignal sig;
    sig.sample_rate_hz = fs;
    sig.samples.resize(static_cast<size_t>(n));
    for (auto& s : sig.samples) s = {rng.normal(), rng.normal()};
    return sig;
}

double relative_rms(const IQSignal& a, const IQSignal& b) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.samples.size(); ++i) {
        num += std::norm(a.samples[i] - b.samples[i]);
        den += std::norm(b.samples[i]);
    }
    return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("doppler compensation with f_d = 0 is the identity") {
    IQSignal sig = random_signal(256, 1);
    IQSignal out = compensate_doppler(sig, 0.0);
    for (size_t i = 0; i < sig.samples.size(); ++i) CHECK(out.samples[i] == sig.samples[i]);
}

TEST_CASE("apply then compensate round trips within 1e-9 relative RMS") {
    for (uint64_t seed : {2, 3, 4}) {
        IQSignal sig = random_signal(4096, seed);
        IQSignal shifted = sig;
        apply_frequency_shift(shifted, 1234.5);
        IQSignal back = compensate_doppler(shifted, 1234.5);
        CHECK(relative_rms(back, sig) <= 1e-9);
    }
}

TEST_CASE("tone shifted by an integer number of bins moves its FFT peak and back") {
    int n = 256;
    double fs = 1e6;
    double bin = fs / n;
    IQSignal sig;
    sig.sample_rate_hz = fs;
    sig.samples.resize(static_cast<size_t>(n));
    int m = 20;  // tone bin
    for (int i = 0; i < n; ++i) {
        double ph = 2.0 * M_PI * m * i / n;
        sig.samples[static_cast<size_t>(i)] = {std::cos(ph), std::sin(ph)};
    }
    auto peak_of = [&](const IQSignal& s) {
        Spectrum sp = fft_magnitude(Window(s.samples.begin(), s.samples.end()), fs, 0.0);
        int best = 0;
        for (size_t i = 1; i < sp.magnitudes.size(); ++i)
            if (sp.magnitudes[i] > sp.magnitudes[static_cast<size_t>(best)]) best = static_cast<int>(i);
        return best;
    };
    CHECK(peak_of(sig) == n / 2 + m);
    for (int k : {-7, -3, 1, 4, 9}) {
        IQSignal shifted = sig;
        apply_frequency_shift(shifted, k * bin);
        CHECK(peak_of(shifted) == n / 2 + m + k);  // moves by round(f_d / bin)
        IQSignal back = compensate_doppler(shifted, k * bin);
        CHECK(peak_of(back) == n / 2 + m);
    }
}

TEST_CASE("compensate_doppler rejects shifts at or above Nyquist") {
    IQSignal sig = random_signal(64, 5, 1000.0);
    CHECK_THROWS_AS(compensate_doppler(sig, 500.0), ContractError);
}

TEST_CASE("segment_windows enumerates starts 0,2,4,6 for L=10 N=4 stride=2") {
    IQSignal sig = random_signal(10, 6);
    auto windows = segment_windows(sig, 4, 2);
    REQUIRE(windows.size() == 4);
    for (int w = 0; w < 4; ++w) {
        for (int j = 0; j < 4; ++j) {
            CHECK(windows[static_cast<size_t>(w)][static_cast<size_t>(j)] ==
                  sig.samples[static_cast<size_t>(2 * w + j)]);
        }
    }
}

TEST_CASE("segment_windows edge cases") {
    IQSignal sig = random_signal(20, 7);
    CHECK(segment_windows(sig, 10, 10).size() == 2);  // stride = N, L = 2N
    auto one = segment_windows(random_signal(16, 8), 16, 4);
    REQUIRE(one.size() == 1);  // L = N
    CHECK_THROWS_AS(segment_windows(random_signal(8, 9), 16, 4), ContractError);
}

TEST_CASE("window count formula matches exhaustive enumeration") {
    for (int len = 1; len <= 96; ++len) {
        for (int n = 1; n <= len; ++n) {
            for (int stride = 1; stride <= n; ++stride) {
                int64_t brute = 0;
                for (int64_t start = 0; start + n <= len; start += stride) ++brute;
                CHECK(window_count(len, n, stride) == brute);
            }
        }
    }
}

TEST_CASE("fft of zeros is zero") {
    Window w(64, {0.0, 0.0});
    Spectrum s = fft_magnitude(w, 1e6, 0.0);
    for (double m : s.magnitudes) CHECK(m == 0.0);
}

TEST_CASE("fft of a complex exponential at bin m is a single spike of magnitude N") {
    int n = 128;
    for (int m : {0, 5, 63, 64, 100}) {
        Window w(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            double ph = 2.0 * M_PI * m * i / n;
            w[static_cast<size_t>(i)] = {std::cos(ph), std::sin(ph)};
        }
        Spectrum s = fft_magnitude(w, 1e6, 0.0);
        int shifted = (m + n / 2) % n;  // negative-first ordering
        for (int k = 0; k < n; ++k) {
            if (k == shifted) {
                CHECK(s.magnitudes[static_cast<size_t>(k)] == doctest::Approx(n).epsilon(1e-12));
            } else {
                CHECK(s.magnitudes[static_cast<size_t>(k)] <= 1e-9 * n);
            }
        }
    }
}

TEST_CASE("Parseval identity holds within 1e-9 relative") {
    for (int n : {64, 256, 100}) {  // includes a non power of two
        Rng rng(static_cast<uint64_t>(n));
        Window w(static_cast<size_t>(n));
        double time_energy = 0.0;
        for (auto& s : w) {
            s = {rng.normal(), rng.normal()};
            time_energy += std::norm(s);
        }
        Spectrum sp = fft_magnitude(w, 1e6, 0.0);
        double freq_energy = 0.0;
        for (double m : sp.magnitudes) freq_energy += m * m;
        freq_energy /= n;
        CHECK(std::fabs(freq_energy - time_energy) / time_energy <= 1e-9);
    }
}

TEST_CASE("filter bank split partitions and reassembles the spectrum") {
    Spectrum s;
    for (int i = 0; i < 10; ++i) s.magnitudes.push_back(i + 1.0);

    auto one = filter_bank_split(s, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == s.magnitudes);

    Spectrum s8;
    for (int i = 0; i < 8; ++i) s8.magnitudes.push_back(i * 2.0);
    auto four = filter_bank_split(s8, 4);
    REQUIRE(four.size() == 4);
    for (const auto& b : four) CHECK(b.size() == 2);

    auto bands = filter_bank_split(s, 4);  // 10 bins -> {2,2,2,4}
    REQUIRE(bands.size() == 4);
    CHECK(bands[0].size() == 2);
    CHECK(bands[1].size() == 2);
    CHECK(bands[2].size() == 2);
    CHECK(bands[3].size() == 4);
    CHECK(concat_bands(bands) == s.magnitudes);

    CHECK_THROWS_AS(filter_bank_split(s, 11), ContractError);
}

TEST_CASE("z-score normalizes [1,2,3] to zero mean unit std") {
    std::vector<std::vector<double>> bands = {{1.0, 2.0, 3.0}};
    zscore_per_band(bands, 1e-15);
    double mean = (bands[0][0] + bands[0][1] + bands[0][2]) / 3.0;
    double var = 0.0;
    for (double v : bands[0]) var += (v - mean) * (v - mean);
    var /= 3.0;
    CHECK(std::fabs(mean) <= 1e-9);
    CHECK(std::fabs(std::sqrt(var) - 1.0) <= 1e-9);
}

TEST_CASE("constant band z-scores to all zeros") {
    std::vector<std::vector<double>> bands = {{5.0, 5.0, 5.0}};
    zscore_per_band(bands, 1e-8);
    for (double v : bands[0]) CHECK(v == 0.0);
}

TEST_CASE("bands of wildly different scales normalize to unit std") {
    Rng rng(10);
    std::vector<std::vector<double>> bands(2);
    for (int i = 0; i < 64; ++i) {
        bands[0].push_back(rng.normal());
        bands[1].push_back(1000.0 * rng.normal());
    }
    zscore_per_band(bands, 1e-8);
    for (const auto& band : bands) {
        double mean = 0.0;
        for (double v : band) mean += v;
        mean /= static_cast<double>(band.size());
        double var = 0.0;
        for (double v : band) var += (v - mean) * (v - mean);
        var /= static_cast<double>(band.size());
        CHECK(std::fabs(mean) <= 1e-9);
        CHECK(std::fabs(std::sqrt(var) - 1.0) <= 1e-6);
    }
}

TEST_CASE("make_bags groups windows into ordered bags and drops the remainder") {
    PreprocessConfig cfg;
    cfg.window_len = 16;
    cfg.stride = 16;
    cfg.fft_len = 16;
    cfg.n_bands = 4;
    cfg.bag_size = 10;
    cfg.doppler_mode = DopplerMode::Off;

    // 40 windows -> 4 bags
    auto bags = make_bags(random_signal(16 * 40, 11), 2.4e9, cfg, 5);
    CHECK(bags.size() == 4);
    for (const auto& b : bags) {
        CHECK(b.instances.dim(0) == 10);
        CHECK(b.instances.dim(1) == 16);
        CHECK(b.source_id == 5);
    }

    // 45 windows -> 4 bags, 5 dropped
    CHECK(make_bags(random_signal(16 * 45, 12), 2.4e9, cfg, 0).size() == 4);

    // t=1 -> one bag per window
    cfg.bag_size = 1;
    CHECK(make_bags(random_signal(16 * 7, 13), 2.4e9, cfg, 0).size() == 7);

    cfg.bag_size = 10;
    try {
        make_bags(random_signal(16 * 9, 14), 2.4e9, cfg, 0);
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        std::string msg = e.what();
        CHECK(msg.find("9") != std::string::npos);
        CHECK(msg.find("10") != std::string::npos);
    }
}

TEST_CASE("instance order equals temporal order of source windows") {
    PreprocessConfig cfg;
    cfg.window_len = 8;
    cfg.stride = 8;
    cfg.fft_len = 8;
    cfg.n_bands = 1;
    cfg.bag_size = 4;
    cfg.doppler_mode = DopplerMode::Off;
    cfg.zscore_eps = 1e-8;

    // Window k is a pure tone at bin k%8, so each instance's max-energy bin
    // identifies its source window.
    IQSignal sig;
    sig.sample_rate_hz = 1e6;
    sig.samples.resize(32);
    for (int w = 0; w < 4; ++w) {
        for (int i = 0; i < 8; ++i) {
            double ph = 2.0 * M_PI * (w + 1) * i / 8.0;
            sig.samples[static_cast<size_t>(8 * w + i)] = {std::cos(ph), std::sin(ph)};
        }
    }
    auto bags = make_bags(sig, 0.0, cfg, 0);
    REQUIRE(bags.size() == 1);
    for (int j = 0; j < 4; ++j) {
        int best = 0;
        for (int k = 1; k < 8; ++k) {
            if (bags[0].instances.at(j, k) > bags[0].instances.at(j, best)) best = k;
        }
        int expected = ((j + 1) + 4) % 8;  // fftshifted bin of tone j+1
        CHECK(best == expected);
    }
}

TEST_CASE("pipeline is bit-exact deterministic") {
    PreprocessConfig cfg;
    cfg.window_len = 32;
    cfg.stride = 16;
    cfg.fft_len = 32;
    cfg.n_bands = 4;
    cfg.bag_size = 3;
    IQSignal sig = random_signal(512, 15);
    sig.kinematics = {12.0, 0.4, 300.0};
    auto a = make_bags(sig, 2.4375e9, cfg, 1);
    auto b = make_bags(sig, 2.4375e9, cfg, 1);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        for (int64_t j = 0; j < a[i].instances.size(); ++j) {
            CHECK(a[i].instances[j] == b[i].instances[j]);
        }
    }
}

TEST_CASE("bag container round trips bags, labels and provenance") {
    namespace fs = std::filesystem;
    PreprocessConfig cfg;
    cfg.window_len = 16;
    cfg.stride = 16;
    cfg.fft_len = 16;
    cfg.n_bands = 2;
    cfg.bag_size = 2;
    cfg.doppler_mode = DopplerMode::Off;
    std::vector<WindowedBag> all;
    for (int s = 0; s < 3; ++s) {
        IQSignal sig = random_signal(16 * 6, 20 + static_cast<uint64_t>(s));
        sig.label = {LabelSet::Synth3, s};
        auto bags = make_bags(sig, 2.4e9, cfg, s);
        all.insert(all.end(), bags.begin(), bags.end());
    }
    all[0].synthetic = true;
    BagDataset ds = collect_bags(all, 3);

    fs::path tmp = fs::temp_directory_path() / "rfsf_bags_test.bin";
    save_bags(tmp, ds);
    BagDataset back = load_bags(tmp);
    fs::remove(tmp);

    REQUIRE(back.bags.size() == ds.bags.size());
    CHECK(back.n_classes == 3);
    CHECK(back.bag_size == 2);
    CHECK(back.instance_dim == 16);
    CHECK(back.bags[0].synthetic);
    CHECK(!back.bags[1].synthetic);
    for (size_t i = 0; i < ds.bags.size(); ++i) {
        CHECK(back.bags[i].label.index == ds.bags[i].label.index);
        CHECK(back.bags[i].source_id == ds.bags[i].source_id);
        for (int64_t j = 0; j < ds.bags[i].instances.size(); ++j) {
            // stored at float32 precision
            CHECK(back.bags[i].instances[j] ==
                  static_cast<double>(static_cast<float>(ds.bags[i].instances[j])));
        }
    }
}
