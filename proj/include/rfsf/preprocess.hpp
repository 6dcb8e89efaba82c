#pragma once

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include "rfsf/signal.hpp"
#include "rfsf/tensor.hpp"

namespace rfsf {

enum class DopplerMode { Oracle, Off };

struct PreprocessConfig {
    int window_len = 256;
    int stride = 128;
    int fft_len = 256;  // equals window_len
    int n_bands = 8;
    double zscore_eps = 1e-8;
    DopplerMode doppler_mode = DopplerMode::Oracle;
    int bag_size = 10;

    void validate() const;
};

struct Spectrum {
    std::vector<double> magnitudes;  // ordered -fs/2 .. +fs/2 (fftshift)
    double bin_width_hz = 0.0;
    double center_freq_hz = 0.0;
};

struct WindowedBag {
    Tensor instances;  // t x d, temporal order
    FlightState label;
    int source_id = 0;
    bool synthetic = false;
};

using Window = std::vector<std::complex<double>>;

// Unnormalized DFT; fftshift-ordered magnitudes come from fft_magnitude.
void fft_inplace(std::vector<std::complex<double>>& data);

// Multiplies sample n by exp(-i 2*pi*f_d*n / sample_rate). Metadata preserved.
IQSignal compensate_doppler(const IQSignal& signal, double doppler_hz);

// Windows starting at 0, stride, 2*stride, ...; trailing partial window dropped.
std::vector<Window> segment_windows(const IQSignal& signal, int window_len, int stride);
int64_t window_count(int64_t signal_len, int window_len, int stride);

Spectrum fft_magnitude(const Window& window, double sample_rate_hz, double center_freq_hz);

// Contiguous near-equal partition; the last band absorbs the remainder.
std::vector<std::vector<double>> filter_bank_split(const Spectrum& spectrum, int n_bands);

// Per band: (x - mean) / (population std + eps), in place.
void zscore_per_band(std::vector<std::vector<double>>& bands, double eps);

std::vector<double> concat_bands(const std::vector<std::vector<double>>& bands);

// Full chain for one signal: Doppler mitigation -> windows -> magnitude
// spectra -> band z-score -> bags of `bag_size` consecutive instances.
std::vector<WindowedBag> make_bags(const IQSignal& signal, double center_freq_hz,
                                   const PreprocessConfig& config, int source_id = 0);

// ---- bag container ----------------------------------------------------------
// Layout (little-endian): magic "RFSFBAG1", u32 version, u32 t, u32 d,
// u64 count, u32 n_classes, then count*t*d float32 row-major, then
// count u32 labels, count u32 source ids, count u8 synthetic flags.

struct BagDataset {
    std::vector<WindowedBag> bags;
    int n_classes = 0;
    int bag_size = 0;
    int instance_dim = 0;
};

void save_bags(const std::filesystem::path& path, const BagDataset& ds);
BagDataset load_bags(const std::filesystem::path& path);

BagDataset collect_bags(std::vector<WindowedBag> bags, int n_classes);

}  // namespace rfsf
