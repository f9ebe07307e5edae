#include "fdsim/sigproc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fdsim/error.hpp"

namespace fdsim {

namespace {

constexpr double kPi = std::numbers::pi;

void require_same_rate(const Waveform& a, const Waveform& b) {
    if (std::abs(a.sample_rate_hz() - b.sample_rate_hz()) > 1e-9 * a.sample_rate_hz())
        throw InvalidInput("sample rate mismatch: " + std::to_string(a.sample_rate_hz()) +
                           " Hz vs " + std::to_string(b.sample_rate_hz()) + " Hz");
}

unsigned gray_encode(unsigned k) { return k ^ (k >> 1); }

unsigned gray_decode(unsigned g) {
    unsigned k = g;
    for (unsigned shift = g >> 1; shift != 0; shift >>= 1) k ^= shift;
    return k;
}

double srrc_value(double t, double beta) {
    if (std::abs(t) < 1e-12) return 1.0 - beta + 4.0 * beta / kPi;
    if (std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-9) {
        const double a = kPi / (4.0 * beta);
        return beta / std::numbers::sqrt2 *
               ((1.0 + 2.0 / kPi) * std::sin(a) + (1.0 - 2.0 / kPi) * std::cos(a));
    }
    const double num = std::sin(kPi * t * (1.0 - beta)) +
                       4.0 * beta * t * std::cos(kPi * t * (1.0 + beta));
    const double den = kPi * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
    return num / den;
}

}  // namespace

Waveform::Waveform(CVec samples, double sample_rate_hz, int samples_per_symbol,
                   std::ptrdiff_t start)
    : samples_(std::move(samples)), rate_(sample_rate_hz), sps_(samples_per_symbol),
      start_(start) {
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
        throw InvalidParameter("waveform sample rate must be positive and finite");
    if (samples_per_symbol < 1)
        throw InvalidParameter("samples_per_symbol must be at least 1");
}

cplx Waveform::at(std::ptrdiff_t absolute) const noexcept {
    const std::ptrdiff_t i = absolute - start_;
    if (i < 0 || i >= static_cast<std::ptrdiff_t>(samples_.size())) return {};
    return samples_[static_cast<std::size_t>(i)];
}

Waveform Waveform::window(std::ptrdiff_t lo, std::ptrdiff_t hi) const {
    CVec out(static_cast<std::size_t>(std::max<std::ptrdiff_t>(hi - lo, 0)));
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = at(lo + static_cast<std::ptrdiff_t>(i));
    return Waveform(std::move(out), rate_, sps_, lo);
}

double Waveform::mean_power() const noexcept {
    if (samples_.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : samples_) acc += std::norm(s);
    return acc / static_cast<double>(samples_.size());
}

Waveform operator+(const Waveform& a, const Waveform& b) {
    require_same_rate(a, b);
    if (a.size() == 0) return b;
    if (b.size() == 0) return a;
    const auto lo = std::min(a.start(), b.start());
    const auto hi = std::max(a.end(), b.end());
    CVec out(static_cast<std::size_t>(hi - lo));
    for (std::size_t i = 0; i < a.size(); ++i)
        out[static_cast<std::size_t>(a.start() - lo) + i] += a.samples()[i];
    for (std::size_t i = 0; i < b.size(); ++i)
        out[static_cast<std::size_t>(b.start() - lo) + i] += b.samples()[i];
    return Waveform(std::move(out), a.sample_rate_hz(), a.samples_per_symbol(), lo);
}

Waveform scaled(const Waveform& w, cplx factor) {
    CVec out = w.samples();
    for (auto& s : out) s *= factor;
    return Waveform(std::move(out), w.sample_rate_hz(), w.samples_per_symbol(), w.start());
}

Waveform operator-(const Waveform& a, const Waveform& b) { return a + scaled(b, -1.0); }

int bits_per_symbol(int order) {
    switch (order) {
        case 2: return 1;
        case 4: return 2;
        case 8: return 3;
        case 16: return 4;
        default:
            throw UnsupportedOrder("unsupported PSK order M=" + std::to_string(order) +
                                   " (expected 2, 4, 8 or 16)");
    }
}

CVec modulate_psk(std::span<const std::uint8_t> bits, int order) {
    const int nb = bits_per_symbol(order);
    if (bits.size() % static_cast<std::size_t>(nb) != 0)
        throw InvalidInput("bit count " + std::to_string(bits.size()) +
                           " is not divisible by log2(M)=" + std::to_string(nb));
    const double step = 2.0 * kPi / order;
    CVec out;
    out.reserve(bits.size() / static_cast<std::size_t>(nb));
    for (std::size_t i = 0; i < bits.size(); i += static_cast<std::size_t>(nb)) {
        unsigned label = 0;
        for (int b = 0; b < nb; ++b) label = (label << 1) | (bits[i + b] ? 1u : 0u);
        const unsigned k = gray_decode(label);
        out.push_back(std::polar(1.0, step * k + step / 2.0));
    }
    return out;
}

Bits demodulate_psk(std::span<const cplx> symbols, int order) {
    const int nb = bits_per_symbol(order);
    const double step = 2.0 * kPi / order;
    Bits out;
    out.reserve(symbols.size() * static_cast<std::size_t>(nb));
    for (const auto& s : symbols) {
        // Position in units of constellation spacing, with point k at u = k.
        double u = (std::arg(s) - step / 2.0) / step;
        u -= order * std::floor(u / order);
        const auto lower = static_cast<unsigned>(std::floor(u)) % static_cast<unsigned>(order);
        const auto upper = (lower + 1) % static_cast<unsigned>(order);
        const double frac = u - std::floor(u);
        unsigned k = lower;
        if (frac > 0.5) k = upper;
        else if (frac == 0.5) k = std::min(lower, upper);  // tie: lower index wins
        const unsigned label = gray_encode(k);
        for (int b = nb - 1; b >= 0; --b) out.push_back(static_cast<std::uint8_t>((label >> b) & 1u));
    }
    return out;
}

SrrcFilter srrc_taps(double rolloff, int span_symbols, int samples_per_symbol) {
    if (!(rolloff > 0.0 && rolloff <= 1.0))
        throw InvalidParameter("SRRC rolloff must lie in (0, 1], got " + std::to_string(rolloff));
    if (span_symbols < 4)
        throw InvalidParameter("SRRC span must be at least 4 symbols");
    if (samples_per_symbol < 2)
        throw InvalidParameter("SRRC needs at least 2 samples per symbol");
    if ((span_symbols * samples_per_symbol) % 2 != 0)
        throw InvalidParameter("SRRC span * samples_per_symbol must be even for an integer group delay");

    SrrcFilter f;
    f.rolloff = rolloff;
    f.span_symbols = span_symbols;
    f.samples_per_symbol = samples_per_symbol;
    const int n = span_symbols * samples_per_symbol + 1;
    const int half = n / 2;
    f.taps.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i - half) / samples_per_symbol;
        f.taps[static_cast<std::size_t>(i)] = srrc_value(t, rolloff);
    }
    // Enforce exact symmetry before normalising so rounding cannot break it.
    for (int i = 0; i < half; ++i)
        f.taps[static_cast<std::size_t>(n - 1 - i)] = f.taps[static_cast<std::size_t>(i)];
    double energy = 0.0;
    for (double t : f.taps) energy += t * t;
    const double norm = 1.0 / std::sqrt(energy);
    for (double& t : f.taps) t *= norm;
    return f;
}

Waveform pulse_shape(std::span<const cplx> symbols, const SrrcFilter& filter,
                     double sample_rate_hz) {
    const auto S = static_cast<std::size_t>(filter.samples_per_symbol);
    const auto& g = filter.taps;
    const double gain = std::sqrt(static_cast<double>(S));
    CVec out(symbols.size() * S + g.size() - 1);
    for (std::size_t m = 0; m < symbols.size(); ++m) {
        const cplx s = symbols[m] * gain;
        cplx* dst = out.data() + m * S;
        for (std::size_t k = 0; k < g.size(); ++k) dst[k] += s * g[k];
    }
    return Waveform(std::move(out), sample_rate_hz, filter.samples_per_symbol,
                    -filter.group_delay());
}

CVec matched_filter_downsample(const Waveform& waveform, const SrrcFilter& filter,
                               std::size_t n_symbols) {
    if (waveform.samples_per_symbol() != filter.samples_per_symbol)
        throw InvalidInput("waveform and filter disagree on samples per symbol");
    if (waveform.size() < filter.taps.size())
        throw InsufficientSamples("waveform of " + std::to_string(waveform.size()) +
                                  " samples is shorter than the " +
                                  std::to_string(filter.taps.size()) + "-tap filter");
    const auto S = static_cast<std::ptrdiff_t>(filter.samples_per_symbol);
    const auto G = filter.group_delay();
    const auto& g = filter.taps;
    const auto n_taps = static_cast<std::ptrdiff_t>(g.size());
    const double inv_gain = 1.0 / std::sqrt(static_cast<double>(S));
    const auto& x = waveform.samples();
    const auto len = static_cast<std::ptrdiff_t>(x.size());

    CVec out(n_symbols);
    for (std::size_t m = 0; m < n_symbols; ++m) {
        const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(m) * S - G - waveform.start();
        const std::ptrdiff_t k0 = std::max<std::ptrdiff_t>(0, -first);
        const std::ptrdiff_t k1 = std::min<std::ptrdiff_t>(n_taps, len - first);
        cplx acc{};
        for (std::ptrdiff_t k = k0; k < k1; ++k) acc += g[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(first + k)];
        out[m] = acc * inv_gain;
    }
    return out;
}

CVec matched_filter_downsample(const Waveform& waveform, const SrrcFilter& filter) {
    const auto S = static_cast<std::ptrdiff_t>(filter.samples_per_symbol);
    const std::ptrdiff_t last = waveform.end() - 1 - filter.group_delay();
    const std::size_t n = last < 0 ? 0 : static_cast<std::size_t>(last / S + 1);
    return matched_filter_downsample(waveform, filter, n);
}

CVec awgn(std::size_t n, double variance, Rng& rng) {
    if (!(variance >= 0.0) || !std::isfinite(variance))
        throw InvalidParameter("noise variance must be finite and non-negative");
    CVec out(n);
    if (variance == 0.0) return out;
    std::normal_distribution<double> gauss(0.0, std::sqrt(variance / 2.0));
    for (auto& z : out) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        z = {re, im};
    }
    return out;
}

Bits random_bits(std::size_t n, Rng& rng) {
    Bits out(n);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 64 == 0) word = rng();
        out[i] = static_cast<std::uint8_t>(word & 1u);
        word >>= 1;
    }
    return out;
}

}  // namespace fdsim
