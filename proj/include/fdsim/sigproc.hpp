#pragma once

// Bit/symbol/waveform conversions: Gray M-PSK, SRRC shaping, matched
// filtering and complex AWGN.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace fdsim {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using Bits = std::vector<std::uint8_t>;
using Rng = std::mt19937_64;

// Complex baseband samples on an absolute time axis. samples[i] sits at
// absolute sample index start + i, and symbol m of a shaped frame is centred
// on absolute index m * samples_per_symbol. Tracking the offset explicitly
// keeps every convolution linear; nothing is ever wrapped.
class Waveform {
public:
    Waveform(CVec samples, double sample_rate_hz, int samples_per_symbol,
             std::ptrdiff_t start = 0);

    const CVec& samples() const noexcept { return samples_; }
    CVec& samples() noexcept { return samples_; }
    double sample_rate_hz() const noexcept { return rate_; }
    int samples_per_symbol() const noexcept { return sps_; }
    std::ptrdiff_t start() const noexcept { return start_; }
    std::ptrdiff_t end() const noexcept {
        return start_ + static_cast<std::ptrdiff_t>(samples_.size());
    }
    std::size_t size() const noexcept { return samples_.size(); }

    // Sample at an absolute index; zero outside the stored span.
    cplx at(std::ptrdiff_t absolute) const noexcept;
    // Copy of the absolute range [lo, hi), zero-filled where uncovered.
    Waveform window(std::ptrdiff_t lo, std::ptrdiff_t hi) const;
    double mean_power() const noexcept;

private:
    CVec samples_;
    double rate_;
    int sps_;
    std::ptrdiff_t start_;
};

// Sample-wise sum on the union of both spans. Rates must match.
Waveform operator+(const Waveform& a, const Waveform& b);
Waveform operator-(const Waveform& a, const Waveform& b);
Waveform scaled(const Waveform& w, cplx factor);

struct SrrcFilter {
    std::vector<double> taps;  // span_symbols * samples_per_symbol + 1, unit energy
    double rolloff = 0.25;
    int span_symbols = 8;
    int samples_per_symbol = 2;

    std::ptrdiff_t group_delay() const noexcept {
        return static_cast<std::ptrdiff_t>(span_symbols) * samples_per_symbol / 2;
    }
};

int bits_per_symbol(int order);  // throws UnsupportedOrder unless M in {2,4,8,16}

CVec modulate_psk(std::span<const std::uint8_t> bits, int order);
Bits demodulate_psk(std::span<const cplx> symbols, int order);

SrrcFilter srrc_taps(double rolloff, int span_symbols, int samples_per_symbol);

// Zero-insertion upsampling followed by the SRRC. The result has unit mean
// power per sample for unit-energy symbols and starts at -group_delay().
Waveform pulse_shape(std::span<const cplx> symbols, const SrrcFilter& filter,
                     double sample_rate_hz);

// Matched filter evaluated at absolute indices m * S for m = 0..n_symbols-1.
CVec matched_filter_downsample(const Waveform& waveform, const SrrcFilter& filter,
                               std::size_t n_symbols);
// Same, with the symbol count inferred from the waveform extent as produced
// by pulse_shape.
CVec matched_filter_downsample(const Waveform& waveform, const SrrcFilter& filter);

CVec awgn(std::size_t n, double variance, Rng& rng);

Bits random_bits(std::size_t n, Rng& rng);

}  // namespace fdsim
