#include "fdsim/link.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fdsim/error.hpp"

namespace fdsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void bad(const std::string& field, const std::string& why) {
    throw ConfigError("invalid config: " + field + " " + why);
}

void require_finite(const std::string& field, double v) {
    if (!std::isfinite(v)) bad(field, "must be finite");
}

ChannelProfile profile_for(const LinkConfig& c) {
    const ProfileLabel family = rf_family(c.scheme);
    const std::string& path = family == ProfileLabel::PS ? c.ps_profile : c.ac_profile;
    if (!path.empty()) {
        ChannelProfile p = load_profile(path);
        p.label = family;
        return p;
    }
    NotchSpec notch = default_notch(family);
    notch.width_hz = family == ProfileLabel::PS ? c.ps_notch_width_hz : c.ac_notch_width_hz;
    notch.group_delay_s = c.group_delay_s;
    FrequencyGrid grid = default_grid(notch);
    // Make sure an off-peak carrier still has the full B_H band on the grid.
    const double need_lo = c.carrier_hz() - c.B_H / 2.0;
    const double need_hi = c.carrier_hz() + c.B_H / 2.0;
    while (grid.start_hz > need_lo) grid.start_hz -= grid.step_hz;
    while (grid.stop_hz < need_hi) grid.stop_hz += grid.step_hz;
    return synthesize_profile(family, notch, grid);
}

}  // namespace

std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::PS: return "PS";
        case Scheme::AC: return "AC";
        case Scheme::PS_B: return "PS+B";
        case Scheme::AC_B: return "AC+B";
    }
    return "?";
}

Scheme parse_scheme(std::string_view text) {
    if (text == "PS") return Scheme::PS;
    if (text == "AC") return Scheme::AC;
    if (text == "PS+B") return Scheme::PS_B;
    if (text == "AC+B") return Scheme::AC_B;
    throw ConfigError("unknown scheme '" + std::string(text) + "' (expected PS, AC, PS+B or AC+B)");
}

bool uses_baseband(Scheme s) noexcept { return s == Scheme::PS_B || s == Scheme::AC_B; }

ProfileLabel rf_family(Scheme s) noexcept {
    return (s == Scheme::PS || s == Scheme::PS_B) ? ProfileLabel::PS : ProfileLabel::AC;
}

double default_carrier_hz(Scheme s) noexcept {
    return rf_family(s) == ProfileLabel::PS ? 2.438e9 : 2.457e9;
}

int LinkConfig::samples_per_symbol() const {
    const double ratio = F_s / B;
    const double rounded = std::round(ratio);
    if (!(B > 0.0) || std::abs(ratio - rounded) > 1e-9 * ratio || rounded < 2.0)
        bad("B", "must divide F_s into an integer number (>= 2) of samples per symbol");
    return static_cast<int>(rounded);
}

void validate(const LinkConfig& c) {
    if (c.n_b < 1 || c.n_b > 4) bad("n_b", "must be in 1..4");
    if (c.M != (1 << c.n_b))
        bad("M", "must equal 2^n_b (M=" + std::to_string(c.M) + ", n_b=" + std::to_string(c.n_b) + ")");
    if (c.N_bits < 1 || c.N_bits % c.n_b != 0) bad("N_bits", "must be a positive multiple of n_b");
    if (c.N_tr < 1) bad("N_tr", "must be at least 1");
    for (auto [name, v] : {std::pair{"F_s", c.F_s}, {"B_H", c.B_H}, {"B", c.B}}) {
        require_finite(name, v);
        if (!(v > 0.0)) bad(name, "must be positive");
    }
    if (c.B > c.F_s) bad("B", "must not exceed F_s");
    if (c.B_H > c.F_s) bad("B_H", "must not exceed F_s");
    (void)c.samples_per_symbol();
    if (c.f_c) require_finite("f_c", *c.f_c);
    require_finite("P_Ta_dbm", c.P_Ta_dbm);
    require_finite("P_Rb_dbm", c.P_Rb_dbm);
    require_finite("P_Tb_dbm", c.P_Tb_dbm);
    if (c.noise_ref_dbm) require_finite("noise_ref_dbm", *c.noise_ref_dbm);
    if (std::isnan(c.EbN0_db) || c.EbN0_db == -kInf) bad("EbN0_db", "must be a number or +inf");
    if (!(c.rolloff > 0.0 && c.rolloff <= 1.0)) bad("rolloff", "must lie in (0, 1]");
    if (c.span < 4) bad("span", "must be at least 4");
    if (c.estimator_order < 0) bad("estimator_order", "must be >= 0 (0 selects the support length)");
    if (!(c.support_fraction > 0.0 && c.support_fraction <= 1.0)) bad("support_fraction", "must lie in (0, 1]");
    if (c.n_taps < 8 || (c.n_taps & (c.n_taps - 1)) != 0) bad("n_taps", "must be a power of two >= 8");
    require_finite("group_delay_s", c.group_delay_s);
    if (!(c.ps_notch_width_hz > 0.0)) bad("ps_notch_width_hz", "must be positive");
    if (!(c.ac_notch_width_hz > 0.0)) bad("ac_notch_width_hz", "must be positive");
}

bool comparable(const LinkConfig& a, const LinkConfig& b) {
    LinkConfig x = a;
    x.scheme = b.scheme;
    x.seed = b.seed;
    return x == b;
}

SiChannel prepare_si_channel(const LinkConfig& c) {
    validate(c);
    const ChannelProfile profile = profile_for(c);
    BasebandChannel full = derive_baseband_channel(profile, c.carrier_hz(), c.B_H, c.F_s,
                                                   static_cast<std::size_t>(c.n_taps));
    SupportWindow w = trim_to_support(full, c.support_fraction);
    return {std::move(full), std::move(w.channel), w.retained_fraction};
}

SiChannel no_si_channel(double sample_rate_hz) {
    return {zero_channel(sample_rate_hz), zero_channel(sample_rate_hz), 1.0};
}

LinkReport::LinkReport(const LinkConfig& config, const Measurement& m)
    : config_(config), m_(m) {
    if (m.n_bits == 0 || m.bit_errors > m.n_bits)
        throw InvalidInput("report needs bit_errors <= n_bits and n_bits > 0");
    if (!(m.desired_power >= 0.0) || !(m.residual_power >= 0.0))
        throw InvalidInput("report powers must be non-negative");
    sinr_ = m.residual_power > 0.0 ? m.desired_power / m.residual_power : kInf;
    ber_ = static_cast<double>(m.bit_errors) / static_cast<double>(m.n_bits);
    rate_ = std::log2(1.0 + sinr_);
}

LinkReport run_trial(const LinkConfig& config, Rng& rng) {
    return run_trial(config, prepare_si_channel(config), rng);
}

LinkReport run_trial(const LinkConfig& c, const SiChannel& si, Rng& rng) {
    validate(c);
    const int S = c.samples_per_symbol();
    const SrrcFilter filter = srrc_taps(c.rolloff, c.span, S);
    const double noise_var =
        ebn0_to_noise_variance(c.EbN0_db, dbm_to_power(c.noise_reference_dbm()), c.n_b, S);
    const BasebandChannel& h = si.effective;

    // Training happens first, while node b is silent.
    ChannelEstimate est = zero_estimate(h.taps.size(), h.first_lag);
    if (uses_baseband(c.scheme)) {
        const auto order = c.estimator_order > 0 ? static_cast<std::size_t>(c.estimator_order)
                                                 : h.taps.size();
        est = run_training(h, c.P_Ta_dbm, make_training(c.N_tr, filter, c.F_s), noise_var, order, rng);
    }

    const auto n_bits = static_cast<std::size_t>(c.N_bits);
    const Bits bits_a = random_bits(n_bits, rng);
    const Bits bits_b = random_bits(n_bits, rng);
    const Waveform x_a = pulse_shape(modulate_psk(bits_a, c.M), filter, c.F_s);
    const Waveform x_b = pulse_shape(modulate_psk(bits_b, c.M), filter, c.F_s);
    const DesiredChannel h_ba = make_desired_channel(c.P_Rb_dbm, c.P_Tb_dbm, rng);
    const cplx desired_gain = std::sqrt(dbm_to_power(c.P_Tb_dbm)) * h_ba.gain;

    const Waveform desired = scaled(x_b, desired_gain);
    const Waveform si_wave = apply_channel(x_a, h, c.P_Ta_dbm);
    const Waveform x_hat = uses_baseband(c.scheme) ? build_cancellation(x_a, est, c.P_Ta_dbm)
                                                   : Waveform({}, c.F_s, S, 0);
    auto lo = std::min(desired.start(), si_wave.start());
    auto hi = std::max(desired.end(), si_wave.end());
    if (x_hat.size() != 0) {
        lo = std::min(lo, x_hat.start());
        hi = std::max(hi, x_hat.end());
    }
    const Waveform noise(awgn(static_cast<std::size_t>(hi - lo), noise_var, rng), c.F_s, S, lo);

    // Everything except the desired signal counts as residual, including the noise.
    const Waveform residual = cancel(si_wave + noise, x_hat);
    const Waveform y = desired + residual;

    const std::size_t n_sym = n_bits / static_cast<std::size_t>(c.n_b);
    CVec rx = matched_filter_downsample(y, filter, n_sym);
    for (auto& s : rx) s /= desired_gain;
    const Bits decided = demodulate_psk(rx, c.M);

    // Power window: data region with filter and channel transients removed.
    const auto margin = static_cast<std::ptrdiff_t>(c.span) * S + static_cast<std::ptrdiff_t>(h.taps.size());
    const auto w_lo = margin;
    const auto w_hi = static_cast<std::ptrdiff_t>(n_sym) * S - margin;
    if (w_hi <= w_lo)
        throw ConfigError("invalid config: N_bits too small for a transient-free measurement window");

    LinkReport::Measurement m;
    m.desired_power = desired.window(w_lo, w_hi).mean_power();
    m.residual_power = residual.window(w_lo, w_hi).mean_power();
    m.si_power = si_wave.window(w_lo, w_hi).mean_power();
    m.n_bits = n_bits;
    for (std::size_t i = 0; i < n_bits; ++i) m.bit_errors += bits_b[i] != decided[i];
    const double h_energy = h.energy();
    const double err_energy = channel_error(h, est).energy();
    m.estimate_error_db = h_energy > 0.0 ? 10.0 * std::log10(err_energy / h_energy)
                                         : (err_energy > 0.0 ? kInf : -kInf);
    m.retained_fraction = si.retained_fraction;
    m.noise_variance = noise_var;
    return LinkReport(c, m);
}

double sinr(const Waveform& desired, const Waveform& residual) {
    if (desired.start() != residual.start() || desired.size() != residual.size())
        throw InvalidInput("sinr needs desired and residual over the same window");
    const double r = residual.mean_power();
    if (r == 0.0) return kInf;
    return 10.0 * std::log10(desired.mean_power() / r);
}

GainRatios sinr_gain_ratios(const std::map<Scheme, double>& sinr_db) {
    auto diff = [&](Scheme a, Scheme b) -> std::optional<double> {
        const auto ia = sinr_db.find(a);
        const auto ib = sinr_db.find(b);
        if (ia == sinr_db.end() || ib == sinr_db.end()) return std::nullopt;
        return ia->second - ib->second;
    };
    return {diff(Scheme::PS_B, Scheme::AC_B), diff(Scheme::PS_B, Scheme::PS),
            diff(Scheme::AC_B, Scheme::AC)};
}

GainRatios sinr_gain_ratios(const std::map<Scheme, LinkReport>& reports) {
    std::map<Scheme, double> values;
    for (const auto& [scheme, report] : reports) {
        if (report.scheme() != scheme)
            throw InvalidComparison("report filed under " + std::string(to_string(scheme)) +
                                    " was produced by " + std::string(to_string(report.scheme())));
        if (!comparable(report.config(), reports.begin()->second.config()))
            throw InvalidComparison("reports differ in more than scheme and seed");
        values[scheme] = report.sinr_db();
    }
    return sinr_gain_ratios(values);
}

double ber(std::span<const std::uint8_t> tx, std::span<const std::uint8_t> rx) {
    if (tx.size() != rx.size())
        throw InvalidInput("bit vectors differ in length: " + std::to_string(tx.size()) + " vs " +
                           std::to_string(rx.size()));
    if (tx.empty()) throw InvalidInput("BER of an empty bit vector is undefined");
    std::size_t errors = 0;
    for (std::size_t i = 0; i < tx.size(); ++i) errors += (tx[i] != 0) != (rx[i] != 0);
    return static_cast<double>(errors) / static_cast<double>(tx.size());
}

double rate_difference(double rate_ps_b, double rate_ac_b) { return rate_ps_b - rate_ac_b; }

double rate_difference(const LinkReport& ps_b, const LinkReport& ac_b) {
    if (ps_b.scheme() != Scheme::PS_B || ac_b.scheme() != Scheme::AC_B)
        throw InvalidComparison("rate_difference expects a PS+B and an AC+B report");
    if (!comparable(ps_b.config(), ac_b.config()))
        throw InvalidComparison("reports differ in more than scheme and seed");
    return rate_difference(ps_b.rate_bps_hz(), ac_b.rate_bps_hz());
}

double ebn0_to_noise_variance(double ebn0_db, double reference_power, int n_b,
                              int samples_per_symbol) {
    if (ebn0_db == kInf) return 0.0;
    return reference_power * samples_per_symbol / (n_b * std::pow(10.0, ebn0_db / 10.0));
}

}  // namespace fdsim
