#include "rfsf/signal.hpp"

#include <algorithm>
#include <cmath>

#include "rfsf/errors.hpp"

namespace rfsf {

int label_set_size(LabelSet set) {
    switch (set) {
        case LabelSet::Synth3: return 3;
        case LabelSet::DroneRf10: return 10;
        case LabelSet::DroneDetect21: return 21;
    }
    throw ConfigError("unknown label set");
}

std::string label_set_name(LabelSet set) {
    switch (set) {
        case LabelSet::Synth3: return "SYNTH3";
        case LabelSet::DroneRf10: return "DRONERF10";
        case LabelSet::DroneDetect21: return "DRONEDETECT21";
    }
    throw ConfigError("unknown label set");
}

LabelSet label_set_from_name(const std::string& name) {
    if (name == "SYNTH3") return LabelSet::Synth3;
    if (name == "DRONERF10") return LabelSet::DroneRf10;
    if (name == "DRONEDETECT21") return LabelSet::DroneDetect21;
    throw ConfigError("unknown label set '" + name + "'");
}

namespace {

const char* kModeNames[3] = {"on", "hover", "fly"};

void check_index(const FlightState& state) {
    int n = label_set_size(state.set);
    if (state.index < 0 || state.index >= n) {
        throw ConfigError("class index " + std::to_string(state.index) + " out of range for " +
                          label_set_name(state.set));
    }
}

}  // namespace

std::string class_name(const FlightState& state) {
    check_index(state);
    switch (state.set) {
        case LabelSet::Synth3: {
            const char* names[3] = {"ON", "HO", "FY"};
            return names[state.index];
        }
        case LabelSet::DroneRf10: {
            if (state.index == 0) return "background";
            int drone = (state.index - 1) / 3;
            int mode = (state.index - 1) % 3;
            const char* drones[3] = {"bebop", "ardrone", "phantom"};
            return std::string(drones[drone]) + "_" + kModeNames[mode];
        }
        case LabelSet::DroneDetect21: {
            int drone = state.index / 3;
            int mode = state.index % 3;
            return "uas" + std::to_string(drone) + "_" + kModeNames[mode];
        }
    }
    throw ConfigError("unknown label set");
}

KinematicClass kinematic_class(const FlightState& state) {
    check_index(state);
    int mode;
    switch (state.set) {
        case LabelSet::Synth3:
            mode = state.index;
            break;
        case LabelSet::DroneRf10:
            if (state.index == 0) return KinematicClass::Stationary;
            mode = (state.index - 1) % 3;
            break;
        case LabelSet::DroneDetect21:
            mode = state.index % 3;
            break;
        default:
            throw ConfigError("unknown label set");
    }
    switch (mode) {
        case 0: return KinematicClass::Stationary;
        case 1: return KinematicClass::Hovering;
        case 2: return KinematicClass::Flying;
    }
    throw ConfigError("state does not map to a kinematic class");
}

void SignalProfile::validate() const {
    if (sample_rate_hz <= 0.0) throw ConfigError("profile: sample rate must be positive");
    if (bandwidth_hz > sample_rate_hz) {
        throw ConfigError("profile: bandwidth exceeds sample rate (complex baseband)");
    }
    if (signatures.empty()) throw ConfigError("profile: no spectral signatures");
    for (size_t c = 0; c < signatures.size(); ++c) {
        const ToneSignature& sig = signatures[c];
        if (sig.tone_freqs_hz.empty()) {
            throw ConfigError("profile: class " + std::to_string(c) + " has an empty signature");
        }
        if (sig.tone_freqs_hz.size() != sig.tone_amps.size()) {
            throw ConfigError("profile: tone frequency/amplitude counts disagree for class " +
                              std::to_string(c));
        }
        for (double f : sig.tone_freqs_hz) {
            if (std::fabs(f) > bandwidth_hz / 2.0) {
                throw ConfigError("profile: tone outside +-bandwidth/2 for class " + std::to_string(c));
            }
        }
        if (sig.burst_duty <= 0.0 || sig.burst_duty > 1.0) {
            throw ConfigError("profile: burst duty must be in (0,1]");
        }
    }
}

namespace {

// Mode-level tone layouts as fractions of bandwidth. ON: sparse beacon bursts,
// HO: continuous mid-band tones, FY: wide spread with faster bursts.
ToneSignature mode_signature(int mode, double bw) {
    ToneSignature sig;
    switch (mode) {
        case 0:  // on / beacon
            sig.tone_freqs_hz = {-0.05 * bw, 0.06 * bw};
            sig.tone_amps = {1.0, 0.8};
            sig.mod_bandwidth_hz = 0.002 * bw;
            sig.burst_duty = 0.3;
            sig.burst_period_samples = 1024;
            break;
        case 1:  // hover
            sig.tone_freqs_hz = {-0.13 * bw, 0.0, 0.13 * bw};
            sig.tone_amps = {0.9, 1.0, 0.9};
            sig.mod_bandwidth_hz = 0.004 * bw;
            sig.burst_duty = 1.0;
            sig.burst_period_samples = 1024;
            break;
        default:  // fly
            sig.tone_freqs_hz = {-0.38 * bw, -0.2 * bw, 0.03 * bw, 0.21 * bw, 0.39 * bw};
            sig.tone_amps = {0.8, 1.0, 0.9, 1.0, 0.8};
            sig.mod_bandwidth_hz = 0.008 * bw;
            sig.burst_duty = 0.7;
            sig.burst_period_samples = 512;
            break;
    }
    return sig;
}

ToneSignature background_signature(double bw) {
    ToneSignature sig;
    sig.tone_freqs_hz = {-0.45 * bw, -0.25 * bw, 0.1 * bw, 0.33 * bw};
    sig.tone_amps = {0.15, 0.1, 0.12, 0.1};
    sig.mod_bandwidth_hz = 0.02 * bw;
    sig.burst_duty = 1.0;
    sig.burst_period_samples = 1024;
    return sig;
}

// Shifts a signature by a per-drone frequency offset, clamped into band.
ToneSignature drone_shift(ToneSignature sig, int drone, int n_drones, double bw) {
    double offset = (drone - (n_drones - 1) / 2.0) * 0.018 * bw;
    for (double& f : sig.tone_freqs_hz) {
        f = std::clamp(f + offset, -0.49 * bw, 0.49 * bw);
    }
    return sig;
}

}  // namespace

SignalProfile SignalProfile::standard(const std::string& name, LabelSet set) {
    SignalProfile p;
    if (name == "dronedetect") {
        p.sample_rate_hz = 60e6;
        p.bandwidth_hz = 28e6;
        p.center_freq_hz = 2.4375e9;
    } else if (name == "dronerf") {
        p.sample_rate_hz = 40e6;
        p.bandwidth_hz = 40e6;
        p.center_freq_hz = 2.422e9;
    } else {
        throw ConfigError("unknown profile '" + name + "' (expected dronedetect or dronerf)");
    }
    double bw = p.bandwidth_hz;
    switch (set) {
        case LabelSet::Synth3:
            for (int mode = 0; mode < 3; ++mode) p.signatures.push_back(mode_signature(mode, bw));
            break;
        case LabelSet::DroneRf10:
            p.signatures.push_back(background_signature(bw));
            for (int drone = 0; drone < 3; ++drone)
                for (int mode = 0; mode < 3; ++mode)
                    p.signatures.push_back(drone_shift(mode_signature(mode, bw), drone, 3, bw));
            break;
        case LabelSet::DroneDetect21:
            for (int drone = 0; drone < 7; ++drone)
                for (int mode = 0; mode < 3; ++mode)
                    p.signatures.push_back(drone_shift(mode_signature(mode, bw), drone, 7, bw));
            break;
    }
    p.validate();
    return p;
}

void IQSignal::validate() const {
    if (samples.empty()) throw ContractError("IQSignal: length must be >= 1");
    if (sample_rate_hz <= 0.0) throw ContractError("IQSignal: sample rate must be positive");
}

double IQSignal::power() const {
    double acc = 0.0;
    for (const auto& s : samples) acc += std::norm(s);
    return samples.empty() ? 0.0 : acc / static_cast<double>(samples.size());
}

KinematicParams sample_kinematics(const FlightState& state, Rng& rng) {
    KinematicParams k;
    switch (kinematic_class(state)) {
        case KinematicClass::Stationary:
            k.speed_mps = 0.0;
            k.angle_rad = 0.0;
            k.distance_m = rng.uniform(0.0, 100.0);
            break;
        case KinematicClass::Hovering:
            k.speed_mps = rng.uniform(0.0, 5.0);
            k.angle_rad = rng.uniform(0.0, 15.0 * M_PI / 180.0);
            k.distance_m = rng.uniform(50.0, 500.0);
            break;
        case KinematicClass::Flying:
            k.speed_mps = rng.uniform(0.0, 26.0);
            k.angle_rad = rng.uniform(0.0, M_PI / 2.0);
            k.distance_m = rng.uniform(10.0, 1000.0);
            break;
    }
    return k;
}

double doppler_shift_hz(double speed_mps, double carrier_hz, double angle_rad) {
    if (speed_mps < 0.0) throw ContractError("doppler_shift_hz: speed must be >= 0");
    if (carrier_hz <= 0.0) throw ContractError("doppler_shift_hz: carrier must be positive");
    return speed_mps / kSpeedOfLight * carrier_hz * std::cos(angle_rad);
}

void apply_frequency_shift(IQSignal& signal, double shift_hz) {
    double w = 2.0 * M_PI * shift_hz / signal.sample_rate_hz;
    for (size_t n = 0; n < signal.samples.size(); ++n) {
        double phase = w * static_cast<double>(n);
        signal.samples[n] *= std::complex<double>(std::cos(phase), std::sin(phase));
    }
}

IQSignal synth_signal(const FlightState& state, const SignalProfile& profile,
                      const KinematicParams& kinematics, double snr_db, int n_samples, Rng& rng) {
    check_index(state);
    profile.validate();
    if (n_samples < 1) throw ContractError("synth_signal: n_samples must be >= 1");
    if (static_cast<size_t>(state.index) >= profile.signatures.size()) {
        throw ConfigError("synth_signal: profile has no signature for class " +
                          std::to_string(state.index));
    }
    const ToneSignature& sig = profile.signatures[static_cast<size_t>(state.index)];

    double f_d = doppler_shift_hz(kinematics.speed_mps, profile.center_freq_hz, kinematics.angle_rad);
    double amp_scale = 1.0 / std::max(kinematics.distance_m, 1.0);

    size_t n_tones = sig.tone_freqs_hz.size();
    std::vector<double> omega(n_tones), phase0(n_tones);
    for (size_t k = 0; k < n_tones; ++k) {
        double jitter = sig.mod_bandwidth_hz > 0.0
                            ? rng.uniform(-sig.mod_bandwidth_hz / 2.0, sig.mod_bandwidth_hz / 2.0)
                            : 0.0;
        omega[k] = 2.0 * M_PI * (sig.tone_freqs_hz[k] + jitter + f_d) / profile.sample_rate_hz;
        phase0[k] = rng.uniform(0.0, 2.0 * M_PI);
    }
    int period = std::max(sig.burst_period_samples, 1);
    int on_span = static_cast<int>(std::lround(sig.burst_duty * period));
    on_span = std::clamp(on_span, 1, period);
    // Start inside an on-burst so even short captures carry energy.
    int burst_offset = rng.uniform_int(on_span);

    IQSignal out;
    out.sample_rate_hz = profile.sample_rate_hz;
    out.label = state;
    out.kinematics = kinematics;
    out.snr_db = snr_db;
    out.samples.resize(static_cast<size_t>(n_samples));
    for (int n = 0; n < n_samples; ++n) {
        bool gate = ((n + burst_offset) % period) < on_span;
        if (!gate) continue;
        std::complex<double> acc(0.0, 0.0);
        for (size_t k = 0; k < n_tones; ++k) {
            double ph = omega[k] * n + phase0[k];
            acc += sig.tone_amps[k] * std::complex<double>(std::cos(ph), std::sin(ph));
        }
        out.samples[static_cast<size_t>(n)] = amp_scale * acc;
    }
    add_noise(out, snr_db, rng);
    out.validate();
    return out;
}

void add_noise(IQSignal& signal, double snr_db, Rng& rng) {
    if (std::isinf(snr_db) && snr_db > 0.0) return;  // noiseless sentinel
    double ps = signal.power();
    if (ps <= 0.0) throw ContractError("add_noise: signal has zero power");
    double pn = ps / std::pow(10.0, snr_db / 10.0);
    double sigma = std::sqrt(pn / 2.0);
    for (auto& s : signal.samples) {
        s += std::complex<double>(sigma * rng.normal(), sigma * rng.normal());
    }
    signal.snr_db = snr_db;
}

std::vector<IQSignal> make_dataset(const DatasetSpec& spec, const SignalProfile& profile,
                                   uint64_t seed) {
    int n_classes = label_set_size(spec.set);
    if (static_cast<int>(spec.count_per_state.size()) != n_classes) {
        throw ConfigError("make_dataset: expected " + std::to_string(n_classes) +
                          " per-state counts, got " + std::to_string(spec.count_per_state.size()));
    }
    for (int c : spec.count_per_state) {
        if (c < 1) throw ConfigError("make_dataset: count per state must be >= 1");
    }
    Rng master(seed);
    std::vector<IQSignal> out;
    uint64_t signal_index = 0;
    for (int cls = 0; cls < n_classes; ++cls) {
        FlightState state{spec.set, cls};
        for (int i = 0; i < spec.count_per_state[static_cast<size_t>(cls)]; ++i, ++signal_index) {
            Rng sub = master.split(signal_index);
            KinematicParams kin = sample_kinematics(state, sub);
            double snr = sub.uniform(spec.snr_db_lo, spec.snr_db_hi);
            out.push_back(synth_signal(state, profile, kin, snr, spec.n_samples, sub));
        }
    }
    Rng shuffler = master.split(0xD5ULL << 32);
    shuffler.shuffle(out);
    return out;
}

}  // namespace rfsf
