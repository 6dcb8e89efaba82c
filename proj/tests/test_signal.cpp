#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "rfsf/errors.hpp"
#include "rfsf/preprocess.hpp"
#include "rfsf/signal.hpp"

using namespace rfsf;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("stationary kinematics are exactly zero speed and angle") {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        KinematicParams k = sample_kinematics({LabelSet::Synth3, 0}, rng);
        CHECK(k.speed_mps == 0.0);
        CHECK(k.angle_rad == 0.0);
        CHECK(k.distance_m >= 0.0);
        CHECK(k.distance_m <= 100.0);
    }
}

TEST_CASE("hovering kinematics stay in range") {
    Rng rng(2);
    for (int i = 0; i < 10000; ++i) {
        KinematicParams k = sample_kinematics({LabelSet::Synth3, 1}, rng);
        CHECK(k.speed_mps >= 0.0);
        CHECK(k.speed_mps <= 5.0);
        CHECK(k.angle_rad >= 0.0);
        CHECK(k.angle_rad <= 15.0 * M_PI / 180.0);
        CHECK(k.distance_m >= 50.0);
        CHECK(k.distance_m <= 500.0);
    }
}

TEST_CASE("flying kinematics stay in range over 10k draws") {
    Rng rng(3);
    double max_speed = 0.0, min_speed = 1e9;
    for (int i = 0; i < 10000; ++i) {
        KinematicParams k = sample_kinematics({LabelSet::Synth3, 2}, rng);
        max_speed = std::max(max_speed, k.speed_mps);
        min_speed = std::min(min_speed, k.speed_mps);
        CHECK(k.angle_rad <= M_PI / 2.0);
        CHECK(k.distance_m >= 10.0);
        CHECK(k.distance_m <= 1000.0);
    }
    CHECK(max_speed <= 26.0);
    CHECK(min_speed >= 0.0);
}

TEST_CASE("every class in every label set maps to a kinematic class") {
    for (LabelSet set : {LabelSet::Synth3, LabelSet::DroneRf10, LabelSet::DroneDetect21}) {
        for (int c = 0; c < label_set_size(set); ++c) {
            CHECK_NOTHROW(kinematic_class({set, c}));
            CHECK(!class_name({set, c}).empty());
        }
    }
    CHECK_THROWS_AS(kinematic_class({LabelSet::Synth3, 3}), ConfigError);
}

TEST_CASE("doppler shift limits") {
    CHECK(doppler_shift_hz(0.0, 2.4375e9, 0.7) == 0.0);
    CHECK(std::fabs(doppler_shift_hz(26.0, 2.4375e9, M_PI / 2.0)) <= 1e-12);
}

TEST_CASE("doppler shift matches scalar arithmetic oracle") {
    double expected = 26.0 * 2.4375e9 / 299792458.0;
    double got = doppler_shift_hz(26.0, 2.4375e9, 0.0);
    CHECK(got == doctest::Approx(expected).epsilon(1e-15));
    CHECK(std::fabs(got - 211.40) <= 0.01);
}

TEST_CASE("doppler shift is monotone in speed below pi/2") {
    double prev = -1.0;
    for (double v = 0.0; v <= 26.0; v += 0.5) {
        double f = doppler_shift_hz(v, 2.4375e9, 0.9);
        CHECK(f > prev);
        prev = f;
    }
}

TEST_CASE("noiseless single tone peaks at its bin") {
    SignalProfile p = SignalProfile::standard("dronedetect", LabelSet::Synth3);
    // single clean tone, no jitter, no gating
    double f0 = 16.0 * p.sample_rate_hz / 256.0;  // exactly bin 16
    p.signatures.assign(3, ToneSignature{{f0}, {1.0}, 0.0, 1.0, 1024});

    Rng rng(4);
    KinematicParams still{0.0, 0.0, 1.0};
    IQSignal sig = synth_signal({LabelSet::Synth3, 0}, p, still, kInf, 4096, rng);

    Window w(sig.samples.begin(), sig.samples.begin() + 256);
    Spectrum s = fft_magnitude(w, sig.sample_rate_hz, p.center_freq_hz);
    int peak = 0;
    for (size_t i = 1; i < s.magnitudes.size(); ++i)
        if (s.magnitudes[i] > s.magnitudes[static_cast<size_t>(peak)]) peak = static_cast<int>(i);
    int expected_bin = 128 + 16;  // fftshift offset + tone bin
    CHECK(std::abs(peak - expected_bin) <= 1);
}

TEST_CASE("same seed gives bit-identical signals") {
    SignalProfile p = SignalProfile::standard("dronedetect", LabelSet::Synth3);
    KinematicParams kin{3.0, 0.1, 120.0};
    Rng r1(77), r2(77);
    IQSignal a = synth_signal({LabelSet::Synth3, 1}, p, kin, 15.0, 2048, r1);
    IQSignal b = synth_signal({LabelSet::Synth3, 1}, p, kin, 15.0, 2048, r2);
    REQUIRE(a.samples.size() == b.samples.size());
    for (size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
}

TEST_CASE("synthesized signal hits requested SNR within half a dB") {
    SignalProfile p = SignalProfile::standard("dronedetect", LabelSet::Synth3);
    Rng rng(5);
    KinematicParams kin{2.0, 0.05, 80.0};
    // measure clean and noisy variants with identical tone draws
    Rng r1(99), r2(99);
    IQSignal clean = synth_signal({LabelSet::Synth3, 1}, p, kin, kInf, 100000, r1);
    IQSignal noisy = synth_signal({LabelSet::Synth3, 1}, p, kin, 10.0, 100000, r2);
    double ps = clean.power();
    double pn = 0.0;
    for (size_t i = 0; i < clean.samples.size(); ++i) {
        pn += std::norm(noisy.samples[i] - clean.samples[i]);
    }
    pn /= static_cast<double>(clean.samples.size());
    double snr_db = 10.0 * std::log10(ps / pn);
    CHECK(std::fabs(snr_db - 10.0) <= 0.5);
    (void)rng;
}

TEST_CASE("add_noise at very high SNR is a near no-op") {
    SignalProfile p = SignalProfile::standard("dronedetect", LabelSet::Synth3);
    Rng rng(6);
    IQSignal sig = synth_signal({LabelSet::Synth3, 1}, p, {1.0, 0.0, 10.0}, kInf, 4096, rng);
    IQSignal noisy = sig;
    add_noise(noisy, 100.0, rng);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < sig.samples.size(); ++i) {
        num += std::norm(noisy.samples[i] - sig.samples[i]);
        den += std::norm(sig.samples[i]);
    }
    CHECK(std::sqrt(num / den) <= 1e-3);
}

TEST_CASE("add_noise at 0 dB equalizes powers within 5 percent") {
    SignalProfile p = SignalProfile::standard("dronedetect", LabelSet::Synth3);
    Rng rng(7);
    IQSignal sig = synth_signal({LabelSet::Synth3, 2}, p, {10.0, 0.3, 100.0}, kInf, 100000, rng);
    IQSignal noisy = sig;
    add_noise(noisy, 0.0, rng);
    double ps = sig.power();
    double pn = 0.0;
    for (size_t i = 0; i < sig.samples.size(); ++i) pn += std::norm(noisy.samples[i] - sig.samples[i]);
    pn /= static_cast<double>(sig.samples.size());
    CHECK(std::fabs(pn / ps - 1.0) <= 0.05);
}

TEST_CASE("add_noise rejects zero-power signals") {
    IQSignal sig;
    sig.sample_rate_hz = 1e6;
    sig.samples.assign(64, {0.0, 0.0});
    Rng rng(8);
    CHECK_THROWS_AS(add_noise(sig, 10.0, rng), ContractError);
}

TEST_CASE("add_noise is seed deterministic") {
    SignalProfile p = SignalProfile::standard("dronerf", LabelSet::Synth3);
    Rng rng(9);
    IQSignal sig = synth_signal({LabelSet::Synth3, 1}, p, {1.0, 0.0, 60.0}, kInf, 1024, rng);
    IQSignal a = sig, b = sig;
    Rng r1(123), r2(123);
    add_noise(a, 5.0, r1);
    add_noise(b, 5.0, r2);
    for (size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
}

TEST_CASE("make_dataset honors per-state counts and shuffles deterministically") {
    SignalProfile p = SignalProfile::standard("dronedetect", LabelSet::Synth3);
    DatasetSpec spec;
    spec.count_per_state = {5, 5, 5};
    spec.n_samples = 600;
    auto ds1 = make_dataset(spec, p, 7);
    auto ds2 = make_dataset(spec, p, 7);
    REQUIRE(ds1.size() == 15);
    std::vector<int> hist(3, 0);
    for (const auto& s : ds1) hist[static_cast<size_t>(s.label.index)]++;
    CHECK(hist == std::vector<int>{5, 5, 5});
    for (size_t i = 0; i < ds1.size(); ++i) {
        CHECK(ds1[i].label.index == ds2[i].label.index);
        CHECK(ds1[i].samples == ds2[i].samples);
    }
}

TEST_CASE("label histogram of a 300-signal dataset matches the spec exactly") {
    SignalProfile p = SignalProfile::standard("dronedetect", LabelSet::Synth3);
    DatasetSpec spec;
    spec.count_per_state = {120, 90, 90};
    spec.n_samples = 300;
    auto ds = make_dataset(spec, p, 11);
    REQUIRE(ds.size() == 300);
    std::vector<int> hist(3, 0);
    for (const auto& s : ds) hist[static_cast<size_t>(s.label.index)]++;
    CHECK(hist == std::vector<int>{120, 90, 90});
}

TEST_CASE("make_dataset rejects zero counts and empty signatures") {
    SignalProfile p = SignalProfile::standard("dronedetect", LabelSet::Synth3);
    DatasetSpec spec;
    spec.count_per_state = {0, 1, 1};
    CHECK_THROWS_AS(make_dataset(spec, p, 1), ConfigError);

    SignalProfile bad = p;
    bad.signatures[0].tone_freqs_hz.clear();
    bad.signatures[0].tone_amps.clear();
    Rng rng(1);
    CHECK_THROWS_AS(synth_signal({LabelSet::Synth3, 0}, bad, {0, 0, 10}, 10.0, 512, rng),
                    ConfigError);
}
