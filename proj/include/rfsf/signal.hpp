#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "rfsf/rng.hpp"

namespace rfsf {

constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

enum class LabelSet { Synth3, DroneRf10, DroneDetect21 };

enum class KinematicClass { Stationary, Hovering, Flying };

struct FlightState {
    LabelSet set = LabelSet::Synth3;
    int index = 0;
};

int label_set_size(LabelSet set);
std::string label_set_name(LabelSet set);
LabelSet label_set_from_name(const std::string& name);
std::string class_name(const FlightState& state);
KinematicClass kinematic_class(const FlightState& state);

struct KinematicParams {
    double speed_mps = 0.0;
    double angle_rad = 0.0;
    double distance_m = 0.0;
};

// Per-class spectral fingerprint. Tone frequencies are baseband offsets.
struct ToneSignature {
    std::vector<double> tone_freqs_hz;
    std::vector<double> tone_amps;
    double mod_bandwidth_hz = 0.0;  // per-signal tone jitter range
    double burst_duty = 1.0;        // fraction of burst period with carrier on
    int burst_period_samples = 1024;
};

struct SignalProfile {
    double sample_rate_hz = 60e6;
    double center_freq_hz = 2.4375e9;
    double bandwidth_hz = 28e6;
    std::vector<ToneSignature> signatures;  // one per class

    void validate() const;

    // "dronedetect": 60 MS/s, 28 MHz, 2.4375 GHz. "dronerf": 40 MS/s, 40 MHz, 2.422 GHz.
    static SignalProfile standard(const std::string& name, LabelSet set);
};

struct IQSignal {
    std::vector<std::complex<double>> samples;
    double sample_rate_hz = 0.0;
    FlightState label;
    KinematicParams kinematics;
    double snr_db = 0.0;  // +inf means noiseless

    void validate() const;
    double power() const;  // mean |x|^2
};

// State-conditional kinematic draw:
//   stationary: v=0, theta=0, distance ~ U[0,100] m
//   hovering:   v ~ U[0,5] m/s, theta ~ U[0,15 deg], distance ~ U[50,500] m
//   flying:     v ~ U[0,26] m/s, theta ~ U[0,90 deg], distance ~ U[10,1000] m
KinematicParams sample_kinematics(const FlightState& state, Rng& rng);

// f_d = (v/c) * f_c * cos(theta)
double doppler_shift_hz(double speed_mps, double carrier_hz, double angle_rad);

// Multiplies sample n by exp(+i 2*pi*shift_hz*n / sample_rate).
void apply_frequency_shift(IQSignal& signal, double shift_hz);

// Sum of the state's signature tones with burst gating, Doppler-shifted per the
// kinematics, plus circular complex Gaussian noise at snr_db. Amplitude decays
// as 1/max(distance, 1 m).
IQSignal synth_signal(const FlightState& state, const SignalProfile& profile,
                      const KinematicParams& kinematics, double snr_db, int n_samples, Rng& rng);

// Adds noise scaled so that 10*log10(Ps/Pn) = snr_db. No-op for +inf.
void add_noise(IQSignal& signal, double snr_db, Rng& rng);

struct DatasetSpec {
    LabelSet set = LabelSet::Synth3;
    std::vector<int> count_per_state;  // one entry per class
    double snr_db_lo = 10.0;
    double snr_db_hi = 20.0;
    int n_samples = 8192;
};

// Labeled, shuffled, seed-deterministic dataset. Signal i uses substream
// (seed, i), so generation is a pure function of (spec, profile, seed).
std::vector<IQSignal> make_dataset(const DatasetSpec& spec, const SignalProfile& profile,
                                   uint64_t seed);

}  // namespace rfsf
