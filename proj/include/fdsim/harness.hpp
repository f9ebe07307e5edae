#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fdsim/link.hpp"

namespace fdsim {

enum class SweepAxis { EbN0, Bandwidth, PRb, ModOrder };

std::string_view to_string(SweepAxis a);  // ebn0_db, bandwidth_hz, prb_dbm, mod_order
SweepAxis parse_axis(std::string_view text);

struct SweepSpec {
    LinkConfig base;
    SweepAxis axis = SweepAxis::EbN0;
    std::vector<double> values{10.0};
    std::vector<Scheme> schemes{Scheme::PS, Scheme::AC, Scheme::PS_B, Scheme::AC_B};
    int trials_per_point = 50;
    std::uint64_t root_seed = 1;

    bool operator==(const SweepSpec&) const = default;
};

void validate(const SweepSpec& spec);

// Config for one sweep point. A P_Rb sweep pins the Eb/N0 reference power
// to the base P_Rb, so the noise floor stays put while the desired signal
// moves; otherwise every point would sit at the same SINR.
LinkConfig apply_axis(const LinkConfig& base, SweepAxis axis, double value);

std::uint64_t trial_seed(std::uint64_t root_seed, Scheme scheme, double value, int trial);

struct SweepRow {
    Scheme scheme;
    SweepAxis axis;
    double axis_value;
    double sinr_db;  // 10 log10 of the mean linear SINR
    double ber;
    double rate_bps_hz;
    int trials;
    double sinr_se_db;
    double ber_se;

    bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // scheme-major, in spec order

    const SweepRow& at(Scheme scheme, double axis_value) const;
    bool operator==(const SweepResult&) const = default;
};

struct TrialRecord {
    Scheme scheme;
    double axis_value;
    int trial;
    std::uint64_t seed;
    double sinr_db;
    double ber;
    double rate_bps_hz;
};

struct SweepOptions {
    unsigned threads = 0;  // 0: hardware concurrency
    // Called once per trial, on the calling thread, in (scheme, value, trial) order.
    std::function<void(const TrialRecord&)> on_trial;
};

SweepResult run_sweep(const SweepSpec& spec, const SweepOptions& options = {});

// Flat "key = value" text. Keys are the LinkConfig and SweepSpec field
// names; '#' starts a comment. Absent keys keep their defaults.
SweepSpec parse_config(std::string_view text, const std::string& source = "<config>");
SweepSpec load_config(const std::filesystem::path& path);
std::string emit_config(const SweepSpec& spec);

std::string format_results(const SweepResult& result);
SweepResult parse_results(std::string_view text, const std::string& source = "<results>");
void write_results(const SweepResult& result, const std::filesystem::path& path);
SweepResult read_results(const std::filesystem::path& path);

}  // namespace fdsim
