#include "fdsim/channel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>

#include "fdsim/error.hpp"

namespace fdsim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::string_view kProfileHeader = "freq_hz,isolation_db,phase_deg";

// FFTW's planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<double> unwrap_degrees(const std::vector<double>& phase) {
    std::vector<double> out(phase.size());
    double offset = 0.0;
    for (std::size_t i = 0; i < phase.size(); ++i) {
        if (i > 0) {
            const double jump = phase[i] - phase[i - 1];
            offset -= 360.0 * std::round(jump / 360.0);
        }
        out[i] = phase[i] + offset;
    }
    return out;
}

// Linear interpolation on a strictly increasing grid; f must lie inside it.
double interp(const std::vector<double>& xs, const std::vector<double>& ys, double f) {
    auto it = std::upper_bound(xs.begin(), xs.end(), f);
    if (it == xs.begin()) return ys.front();
    if (it == xs.end()) return ys.back();
    const auto hi = static_cast<std::size_t>(it - xs.begin());
    const auto lo = hi - 1;
    const double t = (f - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + t * (ys[hi] - ys[lo]);
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double parse_number(std::string_view field, const std::string& source, std::size_t line,
                    const char* column) {
    const std::string t = trim(field);
    double v = 0.0;
    const auto* first = t.data();
    const auto* last = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (t.empty() || ec != std::errc() || ptr != last)
        throw ParseError(source, line, std::string("cannot parse ") + column + " value '" + t + "'");
    if (!std::isfinite(v))
        throw ParseError(source, line, std::string(column) + " must be finite, got '" + t + "'");
    return v;
}

}  // namespace

std::string_view to_string(ProfileLabel label) {
    switch (label) {
        case ProfileLabel::PS: return "PS";
        case ProfileLabel::AC: return "AC";
        case ProfileLabel::Custom: return "custom";
    }
    return "custom";
}

double dbm_to_power(double dbm) { return std::pow(10.0, dbm / 10.0); }
double power_to_dbm(double power) { return 10.0 * std::log10(power); }

void ChannelProfile::validate() const {
    if (freqs_hz.size() != isolation_db.size() || freqs_hz.size() != phase_deg.size())
        throw InvalidGrid("profile columns have different lengths");
    if (freqs_hz.size() < 2) throw InvalidGrid("profile needs at least two points");
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
        if (!std::isfinite(freqs_hz[i]) || !std::isfinite(isolation_db[i]) ||
            !std::isfinite(phase_deg[i]))
            throw InvalidGrid("profile point " + std::to_string(i) + " is not finite");
        if (i > 0 && !(freqs_hz[i] > freqs_hz[i - 1]))
            throw InvalidGrid("profile frequencies must be strictly increasing");
    }
}

// Notch widths are not reported in the measurements. These values put the
// PS+B/AC+B crossover near 2 MHz and keep PS+B ahead at 10 MHz when run
// through the full link (see README, "Calibration").
NotchSpec default_notch(ProfileLabel scheme) {
    switch (scheme) {
        case ProfileLabel::PS:
            return {.peak_db = 53.9, .peak_freq_hz = 2.438e9, .band_mean_db = 42.5,
                    .band_hz = 10e6, .width_hz = 3.0e6};
        case ProfileLabel::AC:
            return {.peak_db = 78.1, .peak_freq_hz = 2.457e9, .band_mean_db = 35.3,
                    .band_hz = 10e6, .width_hz = 0.27e6};
        case ProfileLabel::Custom: break;
    }
    throw InvalidParameter("no default notch for a custom profile");
}

FrequencyGrid default_grid(const NotchSpec& notch) {
    return {notch.peak_freq_hz - 15e6, notch.peak_freq_hz + 15e6, 50e3};
}

double calibrate_floor(const NotchSpec& notch) {
    if (!(notch.width_hz > 0.0) || !(notch.band_hz > 0.0))
        throw CalibrationError("notch width and calibration band must be positive");
    // Mean of the unit Gaussian shape over the band, by composite Simpson.
    constexpr int kIntervals = 4000;
    const double h = notch.band_hz / kIntervals;
    double acc = 0.0;
    for (int i = 0; i <= kIntervals; ++i) {
        const double f = -notch.band_hz / 2.0 + i * h;
        const double w = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * std::exp(-f * f / (2.0 * notch.width_hz * notch.width_hz));
    }
    const double shape_mean = acc * h / 3.0 / notch.band_hz;
    // The band mean is affine in the floor: mean = floor + (peak - floor) * shape_mean.
    const double floor = (notch.band_mean_db - notch.peak_db * shape_mean) / (1.0 - shape_mean);
    if (!std::isfinite(floor) || floor < 0.0 || floor > notch.band_mean_db) {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "no valid isolation floor: peak %.3f dB, band mean %.3f dB, width %.4g Hz "
                      "gives floor %.4g dB (shape mean %.6f)",
                      notch.peak_db, notch.band_mean_db, notch.width_hz, floor, shape_mean);
        throw CalibrationError(buf);
    }
    return floor;
}

ChannelProfile synthesize_profile(ProfileLabel scheme, const NotchSpec& notch,
                                  const FrequencyGrid& grid) {
    if (!(grid.step_hz > 0.0) || !(grid.stop_hz > grid.start_hz))
        throw InvalidGrid("synthesis grid must have positive step and stop > start");
    const double half_band = notch.band_hz / 2.0;
    if (grid.start_hz > notch.peak_freq_hz - half_band || grid.stop_hz < notch.peak_freq_hz + half_band)
        throw InvalidGrid("synthesis grid does not cover the calibration band around the notch");

    const double floor = calibrate_floor(notch);
    const auto n = static_cast<std::size_t>(std::floor((grid.stop_hz - grid.start_hz) / grid.step_hz + 1e-9)) + 1;
    ChannelProfile p;
    p.label = scheme;
    p.center_hint_hz = notch.peak_freq_hz;
    p.freqs_hz.resize(n);
    p.isolation_db.resize(n);
    p.phase_deg.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double f = grid.start_hz + static_cast<double>(i) * grid.step_hz;
        const double df = f - notch.peak_freq_hz;
        p.freqs_hz[i] = f;
        p.isolation_db[i] =
            floor + (notch.peak_db - floor) * std::exp(-df * df / (2.0 * notch.width_hz * notch.width_hz));
        p.phase_deg[i] = -360.0 * notch.group_delay_s * df;
    }
    return p;
}

ChannelProfile synthesize_profile(ProfileLabel scheme) {
    const NotchSpec notch = default_notch(scheme);
    return synthesize_profile(scheme, notch, default_grid(notch));
}

ChannelProfile parse_profile(std::string_view text, const std::string& source) {
    ChannelProfile p;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string line = trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != kProfileHeader)
                throw ParseError(source, line_no,
                                 "expected header '" + std::string(kProfileHeader) + "', got '" + line + "'");
            header_seen = true;
            continue;
        }
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (;;) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() != 3)
            throw ParseError(source, line_no,
                             "expected 3 columns, found " + std::to_string(fields.size()));
        const double f = parse_number(fields[0], source, line_no, "freq_hz");
        const double iso = parse_number(fields[1], source, line_no, "isolation_db");
        const double ph = parse_number(fields[2], source, line_no, "phase_deg");
        if (!p.freqs_hz.empty()) {
            if (f == p.freqs_hz.back())
                throw ParseError(source, line_no, "duplicate frequency " + trim(fields[0]));
            if (f < p.freqs_hz.back())
                throw NonMonotoneGrid(source, line_no, "frequencies must be increasing");
        }
        p.freqs_hz.push_back(f);
        p.isolation_db.push_back(iso);
        p.phase_deg.push_back(ph);
    }
    if (!header_seen) throw ParseError(source, 0, "empty profile (missing header)");
    if (p.size() < 2) throw ParseError(source, 0, "profile needs at least two rows");
    return p;
}

ChannelProfile load_profile(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open profile '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_profile(ss.str(), path.string());
}

std::string format_profile(const ChannelProfile& profile) {
    profile.validate();
    std::string out(kProfileHeader);
    out += '\n';
    char buf[128];
    for (std::size_t i = 0; i < profile.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", profile.freqs_hz[i],
                      profile.isolation_db[i], profile.phase_deg[i]);
        out += buf;
    }
    return out;
}

void save_profile(const ChannelProfile& profile, const std::filesystem::path& path) {
    const std::string text = format_profile(profile);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

double BasebandChannel::energy() const noexcept {
    double e = 0.0;
    for (const auto& t : taps) e += std::norm(t);
    return e;
}

std::size_t BasebandChannel::dominant_index() const noexcept {
    std::size_t best = 0;
    for (std::size_t i = 1; i < taps.size(); ++i)
        if (std::norm(taps[i]) > std::norm(taps[best])) best = i;
    return best;
}

BasebandChannel zero_channel(double sample_rate_hz) {
    return BasebandChannel{CVec{cplx{}}, sample_rate_hz, ProfileLabel::Custom, 0};
}

BasebandChannel impulse_channel(double sample_rate_hz, cplx gain) {
    return BasebandChannel{CVec{gain}, sample_rate_hz, ProfileLabel::Custom, 0};
}

BasebandChannel derive_baseband_channel(const ChannelProfile& profile, double f_c_hz,
                                        double b_h_hz, double f_s_hz, std::size_t n_taps) {
    if (!is_power_of_two(n_taps) || n_taps < 8)
        throw InvalidParameter("n_taps must be a power of two >= 8, got " + std::to_string(n_taps));
    if (!(b_h_hz > 0.0) || !(f_s_hz >= b_h_hz))
        throw InvalidParameter("need 0 < B_H <= F_s");
    profile.validate();
    const double lo = f_c_hz - b_h_hz / 2.0;
    const double hi = f_c_hz + b_h_hz / 2.0;
    const double tol = 1e-6;
    if (profile.freqs_hz.front() > lo + tol || profile.freqs_hz.back() < hi - tol) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "profile covers [%.9g, %.9g] Hz but [%.9g, %.9g] Hz is required",
                      profile.freqs_hz.front(), profile.freqs_hz.back(), lo, hi);
        throw CoverageError(buf);
    }

    const std::vector<double> phase = unwrap_degrees(profile.phase_deg);
    const auto n = static_cast<int>(n_taps);
    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_taps));
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    // Bins in FFT order; bin k sits at baseband frequency k*F_s/n (wrapped).
    for (int k = 0; k < n; ++k) {
        const int signed_k = k < n / 2 ? k : k - n;
        const double f = signed_k * f_s_hz / n;
        cplx H{};
        if (std::abs(f) <= b_h_hz / 2.0 + tol) {
            const double pf = std::clamp(f_c_hz + f, lo, hi);
            const double iso = interp(profile.freqs_hz, profile.isolation_db, pf);
            const double ph = interp(profile.freqs_hz, phase, pf) * kPi / 180.0;
            H = 0.5 * std::polar(std::pow(10.0, -iso / 20.0), ph);
        }
        buf[k][0] = H.real();
        buf[k][1] = H.imag();
    }
    fftw_execute(plan);
    CVec h(n_taps);
    for (int k = 0; k < n; ++k) h[static_cast<std::size_t>(k)] = cplx(buf[k][0], buf[k][1]) / static_cast<double>(n);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(buf);

    // Rotate so the dominant tap lands at index n/8.
    std::size_t dominant = 0;
    for (std::size_t i = 1; i < n_taps; ++i)
        if (std::norm(h[i]) > std::norm(h[dominant])) dominant = i;
    const auto dominant_lag = static_cast<std::ptrdiff_t>(dominant) -
                              (dominant < n_taps / 2 ? 0 : static_cast<std::ptrdiff_t>(n_taps));
    const auto target = static_cast<std::ptrdiff_t>(n_taps / 8);
    BasebandChannel out;
    out.sample_rate_hz = f_s_hz;
    out.label = profile.label;
    out.first_lag = dominant_lag - target;
    out.taps.resize(n_taps);
    for (std::size_t i = 0; i < n_taps; ++i) {
        const auto src = ((static_cast<std::ptrdiff_t>(i) + out.first_lag) % n + n) % n;
        out.taps[i] = h[static_cast<std::size_t>(src)];
    }
    return out;
}

SupportWindow trim_to_support(const BasebandChannel& h, double energy_fraction) {
    if (!(energy_fraction > 0.0 && energy_fraction <= 1.0))
        throw InvalidParameter("support energy fraction must lie in (0, 1]");
    const double total = h.energy();
    if (total == 0.0 || h.taps.empty()) {
        BasebandChannel single = h;
        single.taps.assign(1, cplx{});
        return {single, 1.0};
    }
    const auto n = static_cast<std::ptrdiff_t>(h.taps.size());
    std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(h.dominant_index());
    std::ptrdiff_t hi = lo;
    double kept = std::norm(h.taps[static_cast<std::size_t>(lo)]);
    const double goal = energy_fraction * total;
    while (kept < goal && (lo > 0 || hi + 1 < n)) {
        const double left = lo > 0 ? std::norm(h.taps[static_cast<std::size_t>(lo - 1)]) : -1.0;
        const double right = hi + 1 < n ? std::norm(h.taps[static_cast<std::size_t>(hi + 1)]) : -1.0;
        if (left >= right) kept += std::norm(h.taps[static_cast<std::size_t>(--lo)]);
        else kept += std::norm(h.taps[static_cast<std::size_t>(++hi)]);
    }
    BasebandChannel out;
    out.sample_rate_hz = h.sample_rate_hz;
    out.label = h.label;
    out.first_lag = h.first_lag + lo;
    out.taps.assign(h.taps.begin() + lo, h.taps.begin() + hi + 1);
    return {out, out.energy() / total};
}

Waveform apply_channel(const Waveform& x, const BasebandChannel& h, double tx_power_dbm) {
    if (std::abs(x.sample_rate_hz() - h.sample_rate_hz) > 1e-9 * x.sample_rate_hz())
        throw InvalidInput("waveform and channel sample rates differ");
    const double amp = std::sqrt(dbm_to_power(tx_power_dbm));
    const auto& xs = x.samples();
    CVec out(xs.empty() ? 0 : xs.size() + h.taps.size() - 1);
    for (std::size_t j = 0; j < h.taps.size(); ++j) {
        const cplx t = h.taps[j] * amp;
        if (t == cplx{}) continue;
        cplx* dst = out.data() + j;
        for (std::size_t i = 0; i < xs.size(); ++i) dst[i] += t * xs[i];
    }
    return Waveform(std::move(out), x.sample_rate_hz(), x.samples_per_symbol(),
                    x.start() + h.first_lag);
}

DesiredChannel make_desired_channel(double rx_power_dbm, double tx_power_dbm, Rng& rng) {
    if (!std::isfinite(rx_power_dbm) || !std::isfinite(tx_power_dbm))
        throw InvalidParameter("desired-link powers must be finite");
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    const double mag = std::sqrt(dbm_to_power(rx_power_dbm - tx_power_dbm));
    return {std::polar(mag, phase(rng)), rx_power_dbm};
}

}  // namespace fdsim
