#pragma once

// One full-duplex trial seen from node a, and the link metrics built on it.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "fdsim/cancellation.hpp"
#include "fdsim/channel.hpp"
#include "fdsim/sigproc.hpp"

namespace fdsim {

enum class Scheme { PS, AC, PS_B, AC_B };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view text);  // "PS", "AC", "PS+B", "AC+B"
bool uses_baseband(Scheme s) noexcept;
ProfileLabel rf_family(Scheme s) noexcept;
double default_carrier_hz(Scheme s) noexcept;

struct LinkConfig {
    int n_b = 2;
    int M = 4;
    int N_bits = 2000;
    int N_tr = 5;
    std::optional<double> f_c;  // unset: the scheme's optimal isolation frequency
    double F_s = 20e6;
    double B_H = 20e6;
    double B = 10e6;
    double P_Ta_dbm = 0.0;
    double P_Rb_dbm = -60.0;
    double P_Tb_dbm = 0.0;
    // Power the Eb/N0 axis is referenced to. Unset: P_Rb_dbm.
    std::optional<double> noise_ref_dbm;
    Scheme scheme = Scheme::PS_B;
    double EbN0_db = 10.0;
    double rolloff = 0.25;
    int span = 8;
    int estimator_order = 0;  // 0: length of the trimmed SI channel
    double support_fraction = 0.999;
    int n_taps = 256;
    std::uint64_t seed = 1;
    double group_delay_s = 1e-9;
    double ps_notch_width_hz = default_notch(ProfileLabel::PS).width_hz;
    double ac_notch_width_hz = default_notch(ProfileLabel::AC).width_hz;
    std::string ps_profile;  // optional measured profile CSV; empty: synthesize
    std::string ac_profile;

    bool operator==(const LinkConfig&) const = default;

    double carrier_hz() const noexcept { return f_c.value_or(default_carrier_hz(scheme)); }
    int samples_per_symbol() const;
    double noise_reference_dbm() const noexcept { return noise_ref_dbm.value_or(P_Rb_dbm); }
};

// Throws ConfigError naming the offending field.
void validate(const LinkConfig& c);

// Same experiment apart from scheme and seed.
bool comparable(const LinkConfig& a, const LinkConfig& b);

// Self-interference channel for a config: the full IFFT response and the
// window the link actually simulates (trimmed to support_fraction energy).
struct SiChannel {
    BasebandChannel full;
    BasebandChannel effective;
    double retained_fraction = 1.0;
};

SiChannel prepare_si_channel(const LinkConfig& c);
SiChannel no_si_channel(double sample_rate_hz);

class LinkReport {
public:
    struct Measurement {
        double desired_power = 0.0;   // linear, measurement window
        double residual_power = 0.0;  // linear, same window
        double si_power = 0.0;        // SI before cancellation, same window
        std::size_t bit_errors = 0;
        std::size_t n_bits = 0;
        double estimate_error_db = 0.0;  // 10 log10(|h - h_hat|^2 / |h|^2)
        double retained_fraction = 1.0;
        double noise_variance = 0.0;
    };

    LinkReport(const LinkConfig& config, const Measurement& m);

    const LinkConfig& config() const noexcept { return config_; }
    Scheme scheme() const noexcept { return config_.scheme; }
    const Measurement& measurement() const noexcept { return m_; }
    double sinr_linear() const noexcept { return sinr_; }
    double sinr_db() const noexcept { return 10.0 * std::log10(sinr_); }
    bool sinr_infinite() const noexcept { return std::isinf(sinr_); }
    double ber() const noexcept { return ber_; }
    double rate_bps_hz() const noexcept { return rate_; }
    double residual_power_dbm() const noexcept { return power_to_dbm(m_.residual_power); }
    double estimate_error_db() const noexcept { return m_.estimate_error_db; }
    int trials() const noexcept { return 1; }

private:
    LinkConfig config_;
    Measurement m_;
    double sinr_;
    double ber_;
    double rate_;
};

LinkReport run_trial(const LinkConfig& config, Rng& rng);
LinkReport run_trial(const LinkConfig& config, const SiChannel& si, Rng& rng);

// Ratio of mean powers in dB; +inf when the residual is exactly zero.
double sinr(const Waveform& desired, const Waveform& residual);

struct GainRatios {
    std::optional<double> ps_b_over_ac_b;  // Lambda^{PS+B}_{AC+B}
    std::optional<double> ps_b_over_ps;    // Lambda^{PS+B}_{PS}
    std::optional<double> ac_b_over_ac;    // Lambda^{AC+B}_{AC}
};

GainRatios sinr_gain_ratios(const std::map<Scheme, double>& sinr_db);
GainRatios sinr_gain_ratios(const std::map<Scheme, LinkReport>& reports);

double ber(std::span<const std::uint8_t> tx, std::span<const std::uint8_t> rx);

double rate_difference(double rate_ps_b, double rate_ac_b);
double rate_difference(const LinkReport& ps_b, const LinkReport& ac_b);

double ebn0_to_noise_variance(double ebn0_db, double reference_power, int n_b,
                              int samples_per_symbol);

}  // namespace fdsim
