#pragma once

// Passband isolation profiles, their equivalent-baseband impulse responses,
// and channel application.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fdsim/sigproc.hpp"

namespace fdsim {

enum class ProfileLabel { PS, AC, Custom };

std::string_view to_string(ProfileLabel label);

// Antenna-system isolation versus frequency. Positive isolation means
// attenuation.
struct ChannelProfile {
    std::vector<double> freqs_hz;
    std::vector<double> isolation_db;
    std::vector<double> phase_deg;
    ProfileLabel label = ProfileLabel::Custom;
    std::optional<double> center_hint_hz;

    std::size_t size() const noexcept { return freqs_hz.size(); }
    // Throws InvalidGrid on mismatched lengths, fewer than two points,
    // non-finite values or a grid that is not strictly increasing.
    void validate() const;
};

// Gaussian-in-dB notch parameters for one RF scheme. width_hz is the
// Gaussian standard deviation of the notch; the floor is solved for.
struct NotchSpec {
    double peak_db;
    double peak_freq_hz;
    double band_mean_db;   // target mean isolation across band_hz around the peak
    double band_hz = 10e6;
    double width_hz;
    double group_delay_s = 1e-9;
};

NotchSpec default_notch(ProfileLabel scheme);

struct FrequencyGrid {
    double start_hz;
    double stop_hz;
    double step_hz;
};

// Default synthesis grid: 30 MHz around the notch centre at 50 kHz spacing.
FrequencyGrid default_grid(const NotchSpec& notch);

// Isolation floor that makes the dB-mean over the calibration band equal to
// band_mean_db. Throws CalibrationError when no non-negative floor exists.
double calibrate_floor(const NotchSpec& notch);

ChannelProfile synthesize_profile(ProfileLabel scheme, const NotchSpec& notch,
                                  const FrequencyGrid& grid);
ChannelProfile synthesize_profile(ProfileLabel scheme);

ChannelProfile load_profile(const std::filesystem::path& path);
ChannelProfile parse_profile(std::string_view text, const std::string& source = "<profile>");
void save_profile(const ChannelProfile& profile, const std::filesystem::path& path);
std::string format_profile(const ChannelProfile& profile);

// Complex FIR taps; taps[i] acts at lag first_lag + i samples.
struct BasebandChannel {
    CVec taps;
    double sample_rate_hz = 20e6;
    ProfileLabel label = ProfileLabel::Custom;
    std::ptrdiff_t first_lag = 0;

    double energy() const noexcept;
    std::size_t dominant_index() const noexcept;
    std::ptrdiff_t lag_end() const noexcept {
        return first_lag + static_cast<std::ptrdiff_t>(taps.size());
    }
};

BasebandChannel zero_channel(double sample_rate_hz);
BasebandChannel impulse_channel(double sample_rate_hz, cplx gain = 1.0);

BasebandChannel derive_baseband_channel(const ChannelProfile& profile, double f_c_hz,
                                        double b_h_hz, double f_s_hz, std::size_t n_taps);

// Shortest contiguous window around the dominant tap holding at least
// energy_fraction of the total energy. The window grows one tap at a time
// toward whichever neighbour is stronger.
struct SupportWindow {
    BasebandChannel channel;
    double retained_fraction;  // energy kept / energy of the input channel
};
SupportWindow trim_to_support(const BasebandChannel& h, double energy_fraction);

// sqrt(P_T) * (h conv x). Output starts at x.start() + h.first_lag.
Waveform apply_channel(const Waveform& x, const BasebandChannel& h, double tx_power_dbm);

struct DesiredChannel {
    cplx gain;
    double target_rx_power_dbm;
};

DesiredChannel make_desired_channel(double rx_power_dbm, double tx_power_dbm, Rng& rng);

// 0 dBm is unit power in simulation units.
double dbm_to_power(double dbm);
double power_to_dbm(double power);

}  // namespace fdsim
