#include "rfsf/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "rfsf/errors.hpp"

namespace rfsf {

void PreprocessConfig::validate() const {
    if (window_len < 1) throw ConfigError("preprocess: window length must be >= 1");
    if (stride < 1 || stride > window_len) {
        throw ConfigError("preprocess: stride must satisfy 1 <= stride <= window length");
    }
    if (fft_len != window_len) throw ConfigError("preprocess: fft length must equal window length");
    if (n_bands < 1) throw ConfigError("preprocess: band count must be >= 1");
    if (n_bands > fft_len) throw ConfigError("preprocess: band count exceeds bin count");
    if (zscore_eps <= 0.0) throw ConfigError("preprocess: z-score eps must be positive");
    if (bag_size < 1) throw ConfigError("preprocess: bag size must be >= 1");
}

namespace {

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<std::complex<double>>& a) {
    size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * M_PI / static_cast<double>(len);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

void dft_naive(std::vector<std::complex<double>>& a) {
    size_t n = a.size();
    std::vector<std::complex<double>> out(n);
    for (size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (size_t j = 0; j < n; ++j) {
            double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(j) /
                         static_cast<double>(n);
            acc += a[j] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    a = std::move(out);
}

}  // namespace

void fft_inplace(std::vector<std::complex<double>>& data) {
    if (data.empty()) return;
    if (is_pow2(data.size())) {
        fft_radix2(data);
    } else {
        dft_naive(data);
    }
}

IQSignal compensate_doppler(const IQSignal& signal, double doppler_hz) {
    signal.validate();
    if (std::fabs(doppler_hz) >= signal.sample_rate_hz / 2.0) {
        throw ContractError("compensate_doppler: |f_d| must be below sample_rate/2");
    }
    IQSignal out = signal;
    if (doppler_hz == 0.0) return out;
    apply_frequency_shift(out, -doppler_hz);
    return out;
}

int64_t window_count(int64_t signal_len, int window_len, int stride) {
    if (signal_len < window_len) return 0;
    return (signal_len - window_len) / stride + 1;
}

std::vector<Window> segment_windows(const IQSignal& signal, int window_len, int stride) {
    if (window_len < 1 || stride < 1) throw ContractError("segment_windows: bad window/stride");
    int64_t len = static_cast<int64_t>(signal.samples.size());
    if (len < window_len) {
        throw ContractError("segment_windows: signal length " + std::to_string(len) +
                            " shorter than window " + std::to_string(window_len));
    }
    int64_t count = window_count(len, window_len, stride);
    std::vector<Window> windows;
    windows.reserve(static_cast<size_t>(count));
    for (int64_t w = 0; w < count; ++w) {
        int64_t start = w * stride;
        windows.emplace_back(signal.samples.begin() + start,
                             signal.samples.begin() + start + window_len);
    }
    return windows;
}

Spectrum fft_magnitude(const Window& window, double sample_rate_hz, double center_freq_hz) {
    if (window.empty()) throw ContractError("fft_magnitude: empty window");
    std::vector<std::complex<double>> buf = window;
    fft_inplace(buf);
    size_t n = buf.size();
    size_t half = (n + 1) / 2;  // index of the most negative frequency after shift
    Spectrum s;
    s.magnitudes.resize(n);
    for (size_t k = 0; k < n; ++k) {
        s.magnitudes[k] = std::abs(buf[(k + half) % n]);
    }
    s.bin_width_hz = sample_rate_hz / static_cast<double>(n);
    s.center_freq_hz = center_freq_hz;
    return s;
}

std::vector<std::vector<double>> filter_bank_split(const Spectrum& spectrum, int n_bands) {
    int bins = static_cast<int>(spectrum.magnitudes.size());
    if (n_bands < 1) throw ContractError("filter_bank_split: band count must be >= 1");
    if (n_bands > bins) {
        throw ContractError("filter_bank_split: " + std::to_string(n_bands) + " bands for " +
                            std::to_string(bins) + " bins");
    }
    int base = bins / n_bands;
    std::vector<std::vector<double>> bands;
    bands.reserve(static_cast<size_t>(n_bands));
    for (int b = 0; b < n_bands; ++b) {
        int start = b * base;
        int end = (b == n_bands - 1) ? bins : start + base;  // last band absorbs remainder
        bands.emplace_back(spectrum.magnitudes.begin() + start, spectrum.magnitudes.begin() + end);
    }
    return bands;
}

void zscore_per_band(std::vector<std::vector<double>>& bands, double eps) {
    if (eps <= 0.0) throw ContractError("zscore_per_band: eps must be positive");
    for (auto& band : bands) {
        if (band.empty()) throw ContractError("zscore_per_band: empty band");
        double mean = 0.0;
        for (double v : band) mean += v;
        mean /= static_cast<double>(band.size());
        double var = 0.0;
        for (double v : band) var += (v - mean) * (v - mean);
        var /= static_cast<double>(band.size());
        double denom = std::sqrt(var) + eps;
        for (double& v : band) v = (v - mean) / denom;
    }
}

std::vector<double> concat_bands(const std::vector<std::vector<double>>& bands) {
    std::vector<double> out;
    for (const auto& b : bands) out.insert(out.end(), b.begin(), b.end());
    return out;
}

std::vector<WindowedBag> make_bags(const IQSignal& signal, double center_freq_hz,
                                   const PreprocessConfig& config, int source_id) {
    config.validate();
    signal.validate();

    IQSignal work = signal;
    if (config.doppler_mode == DopplerMode::Oracle) {
        double f_d = doppler_shift_hz(signal.kinematics.speed_mps, center_freq_hz,
                                      signal.kinematics.angle_rad);
        work = compensate_doppler(signal, f_d);
    }

    std::vector<Window> windows = segment_windows(work, config.window_len, config.stride);
    int t = config.bag_size;
    if (static_cast<int>(windows.size()) < t) {
        throw ContractError("make_bags: " + std::to_string(windows.size()) + " windows, need >= " +
                            std::to_string(t) + " for one bag");
    }

    int d = config.fft_len;
    size_t n_bags = windows.size() / static_cast<size_t>(t);
    std::vector<WindowedBag> bags;
    bags.reserve(n_bags);
    for (size_t b = 0; b < n_bags; ++b) {
        WindowedBag bag;
        bag.instances = Tensor({t, d});
        bag.label = signal.label;
        bag.source_id = source_id;
        for (int j = 0; j < t; ++j) {
            const Window& w = windows[b * static_cast<size_t>(t) + static_cast<size_t>(j)];
            Spectrum spec = fft_magnitude(w, work.sample_rate_hz, center_freq_hz);
            auto bands = filter_bank_split(spec, config.n_bands);
            zscore_per_band(bands, config.zscore_eps);
            std::vector<double> inst = concat_bands(bands);
            for (int k = 0; k < d; ++k) bag.instances.at(j, k) = inst[static_cast<size_t>(k)];
        }
        bags.push_back(std::move(bag));
    }
    return bags;
}

// ---- container ---------------------------------------------------------------

namespace {

constexpr char kBagMagic[8] = {'R', 'F', 'S', 'F', 'B', 'A', 'G', '1'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("bag container: truncated while reading " + what);
    return v;
}

}  // namespace

BagDataset collect_bags(std::vector<WindowedBag> bags, int n_classes) {
    BagDataset ds;
    ds.bags = std::move(bags);
    ds.n_classes = n_classes;
    if (!ds.bags.empty()) {
        ds.bag_size = ds.bags[0].instances.dim(0);
        ds.instance_dim = ds.bags[0].instances.dim(1);
        for (const auto& b : ds.bags) {
            if (b.instances.dim(0) != ds.bag_size || b.instances.dim(1) != ds.instance_dim) {
                throw ContractError("collect_bags: inconsistent bag shapes");
            }
            if (b.label.index < 0 || b.label.index >= n_classes) {
                throw ContractError("collect_bags: label outside [0, n_classes)");
            }
        }
    }
    return ds;
}

void save_bags(const std::filesystem::path& path, const BagDataset& ds) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("save_bags: cannot open '" + path.string() + "'");
    out.write(kBagMagic, 8);
    write_pod<uint32_t>(out, 1);  // version
    write_pod<uint32_t>(out, static_cast<uint32_t>(ds.bag_size));
    write_pod<uint32_t>(out, static_cast<uint32_t>(ds.instance_dim));
    write_pod<uint64_t>(out, static_cast<uint64_t>(ds.bags.size()));
    write_pod<uint32_t>(out, static_cast<uint32_t>(ds.n_classes));
    for (const auto& bag : ds.bags) {
        for (int64_t i = 0; i < bag.instances.size(); ++i) {
            write_pod<float>(out, static_cast<float>(bag.instances[i]));
        }
    }
    for (const auto& bag : ds.bags) write_pod<uint32_t>(out, static_cast<uint32_t>(bag.label.index));
    for (const auto& bag : ds.bags) write_pod<uint32_t>(out, static_cast<uint32_t>(bag.source_id));
    for (const auto& bag : ds.bags) write_pod<uint8_t>(out, bag.synthetic ? 1 : 0);
    if (!out) throw IoError("save_bags: short write on '" + path.string() + "'");
}

BagDataset load_bags(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_bags: cannot open '" + path.string() + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kBagMagic, 8) != 0) {
        throw FormatError("load_bags: '" + path.string() + "' is not a bag container");
    }
    uint32_t version = read_pod<uint32_t>(in, "version");
    if (version != 1) throw FormatError("load_bags: unsupported version " + std::to_string(version));
    int t = static_cast<int>(read_pod<uint32_t>(in, "bag size"));
    int d = static_cast<int>(read_pod<uint32_t>(in, "instance dim"));
    uint64_t count = read_pod<uint64_t>(in, "bag count");
    int n_classes = static_cast<int>(read_pod<uint32_t>(in, "class count"));

    BagDataset ds;
    ds.bag_size = t;
    ds.instance_dim = d;
    ds.n_classes = n_classes;
    ds.bags.resize(count);
    for (auto& bag : ds.bags) {
        bag.instances = Tensor({t, d});
        for (int64_t i = 0; i < bag.instances.size(); ++i) {
            bag.instances[i] = static_cast<double>(read_pod<float>(in, "bag data"));
        }
    }
    for (auto& bag : ds.bags) {
        bag.label.index = static_cast<int>(read_pod<uint32_t>(in, "label"));
        if (bag.label.index >= n_classes) throw FormatError("load_bags: label out of range");
    }
    for (auto& bag : ds.bags) bag.source_id = static_cast<int>(read_pod<uint32_t>(in, "source id"));
    for (auto& bag : ds.bags) bag.synthetic = read_pod<uint8_t>(in, "synthetic flag") != 0;
    return ds;
}

}  // namespace rfsf
