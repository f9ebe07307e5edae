// fdsim: command-line front end for the full-duplex link simulator.
//
//   fdsim run                 one trial, report to stdout (and --out as CSV)
//   fdsim sweep               Monte-Carlo sweep from a config file
//   fdsim synthesize-profile  write a calibrated PS or AC isolation profile
//   fdsim derive-channel      profile CSV -> baseband tap CSV
//
// Exit codes: 0 success, 1 usage or config error, 2 runtime error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fdsim/channel.hpp"
#include "fdsim/error.hpp"
#include "fdsim/harness.hpp"
#include "fdsim/link.hpp"

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

fdsim::SweepSpec load_spec(const std::string& path) {
    return path.empty() ? fdsim::parse_config("") : fdsim::load_config(path);
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw fdsim::IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw fdsim::IoError("write failed for '" + path + "'");
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string scheme;
    std::optional<int> trials;
    bool verbose = false;
    unsigned threads = 0;
};

int cmd_run(const Common& o) {
    fdsim::SweepSpec spec = load_spec(o.config);
    fdsim::LinkConfig c = spec.base;
    if (o.seed) c.seed = *o.seed;
    if (!o.scheme.empty()) c.scheme = fdsim::parse_scheme(o.scheme);
    fdsim::validate(c);

    const fdsim::SiChannel si = fdsim::prepare_si_channel(c);
    fdsim::Rng rng(c.seed);
    const fdsim::LinkReport r = fdsim::run_trial(c, si, rng);
    const auto& m = r.measurement();

    std::printf("scheme            %s\n", std::string(fdsim::to_string(r.scheme())).c_str());
    std::printf("EbN0_db           %g\n", c.EbN0_db);
    std::printf("sinr_db           %.4f%s\n", r.sinr_db(), r.sinr_infinite() ? " (zero residual)" : "");
    std::printf("ber               %.6g (%zu / %zu)\n", r.ber(), m.bit_errors, m.n_bits);
    std::printf("rate_bps_hz       %.4f\n", r.rate_bps_hz());
    std::printf("residual_dbm      %.3f\n", r.residual_power_dbm());
    std::printf("estimate_error_db %.3f\n", r.estimate_error_db());
    if (o.verbose) {
        std::printf("si_power_dbm      %.3f\n", fdsim::power_to_dbm(m.si_power));
        std::printf("desired_dbm       %.3f\n", fdsim::power_to_dbm(m.desired_power));
        std::printf("noise_variance    %.6g\n", m.noise_variance);
        std::printf("si_taps           %zu (retained energy %.6f)\n", si.effective.taps.size(),
                    m.retained_fraction);
    }
    if (!o.out.empty()) {
        std::string csv =
            "scheme,sinr_db,ber,rate_bps_hz,residual_power_dbm,estimate_error_db,bit_errors,n_bits\n";
        csv += std::string(fdsim::to_string(r.scheme())) + ',' + g17(r.sinr_db()) + ',' + g17(r.ber()) + ',' +
               g17(r.rate_bps_hz()) + ',' + g17(r.residual_power_dbm()) + ',' + g17(r.estimate_error_db()) +
               ',' + std::to_string(m.bit_errors) + ',' + std::to_string(m.n_bits) + '\n';
        write_text(o.out, csv);
    }
    return 0;
}

int cmd_sweep(const Common& o) {
    fdsim::SweepSpec spec = load_spec(o.config);
    if (o.seed) spec.root_seed = *o.seed;
    if (o.trials) spec.trials_per_point = *o.trials;
    if (!o.scheme.empty()) spec.schemes = {fdsim::parse_scheme(o.scheme)};
    fdsim::validate(spec);

    fdsim::SweepOptions opts;
    opts.threads = o.threads;
    if (o.verbose) {
        std::fprintf(stderr, "scheme,axis_value,trial,seed,sinr_db,ber,rate_bps_hz\n");
        opts.on_trial = [](const fdsim::TrialRecord& t) {
            std::fprintf(stderr, "%s,%s,%d,%llu,%s,%s,%s\n", std::string(fdsim::to_string(t.scheme)).c_str(),
                         g17(t.axis_value).c_str(), t.trial, static_cast<unsigned long long>(t.seed),
                         g17(t.sinr_db).c_str(), g17(t.ber).c_str(), g17(t.rate_bps_hz).c_str());
        };
    }
    const fdsim::SweepResult result = fdsim::run_sweep(spec, opts);
    if (o.out.empty() || o.out == "-") std::cout << fdsim::format_results(result);
    else fdsim::write_results(result, o.out);
    return 0;
}

int cmd_synthesize(const Common& o) {
    const fdsim::SweepSpec spec = load_spec(o.config);
    const fdsim::Scheme scheme = fdsim::parse_scheme(o.scheme.empty() ? "PS" : o.scheme);
    const fdsim::ProfileLabel family = fdsim::rf_family(scheme);
    fdsim::NotchSpec notch = fdsim::default_notch(family);
    notch.width_hz = family == fdsim::ProfileLabel::PS ? spec.base.ps_notch_width_hz
                                                       : spec.base.ac_notch_width_hz;
    notch.group_delay_s = spec.base.group_delay_s;
    const fdsim::ChannelProfile p = fdsim::synthesize_profile(family, notch, fdsim::default_grid(notch));
    if (o.verbose)
        std::fprintf(stderr, "%s: floor %.4f dB, width %.4g Hz, %zu points\n",
                     std::string(fdsim::to_string(family)).c_str(), fdsim::calibrate_floor(notch),
                     notch.width_hz, p.size());
    write_text(o.out, fdsim::format_profile(p));
    return 0;
}

int cmd_derive(const Common& o, const std::string& profile_path) {
    const fdsim::SweepSpec spec = load_spec(o.config);
    fdsim::LinkConfig c = spec.base;
    if (!o.scheme.empty()) c.scheme = fdsim::parse_scheme(o.scheme);
    fdsim::validate(c);
    fdsim::ChannelProfile p = fdsim::load_profile(profile_path);
    const fdsim::BasebandChannel h =
        fdsim::derive_baseband_channel(p, p.center_hint_hz.value_or(c.carrier_hz()), c.B_H, c.F_s,
                                       static_cast<std::size_t>(c.n_taps));
    const fdsim::SupportWindow w = fdsim::trim_to_support(h, c.support_fraction);
    std::string csv = "lag,re,im\n";
    for (std::size_t i = 0; i < h.taps.size(); ++i)
        csv += std::to_string(h.first_lag + static_cast<std::ptrdiff_t>(i)) + ',' + g17(h.taps[i].real()) + ',' +
               g17(h.taps[i].imag()) + '\n';
    write_text(o.out, csv);
    std::fprintf(stderr, "energy %.6g (%.3f dB), support %zu taps from lag %td holds %.6f of it\n", h.energy(),
                 fdsim::power_to_dbm(h.energy()), w.channel.taps.size(), w.channel.first_lag,
                 w.retained_fraction);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Full-duplex link simulator with analog-baseband self-interference cancellation"};
    app.require_subcommand(1);

    Common o;
    std::string profile_path;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "flat key = value config file");
        sub->add_option("--seed", o.seed, "trial seed (run) or root seed (sweep)");
        sub->add_option("--out", o.out, "output path ('-' or absent: stdout)");
        sub->add_option("--scheme", o.scheme, "PS, AC, PS+B or AC+B")
            ->check(CLI::IsMember({"PS", "AC", "PS+B", "AC+B"}));
        sub->add_flag("--verbose", o.verbose, "extra diagnostics on stderr");
    };

    auto* run = app.add_subcommand("run", "run a single trial");
    add_common(run);
    auto* sweep = app.add_subcommand("sweep", "run a Monte-Carlo sweep");
    add_common(sweep);
    sweep->add_option("--trials", o.trials, "trials per sweep point")->check(CLI::PositiveNumber);
    sweep->add_option("--threads", o.threads, "worker threads (0: all cores)");
    auto* synth = app.add_subcommand("synthesize-profile", "write a calibrated PS/AC profile CSV");
    add_common(synth);
    auto* derive = app.add_subcommand("derive-channel", "convert a profile CSV to baseband taps");
    add_common(derive);
    derive->add_option("--profile", profile_path, "profile CSV (freq_hz,isolation_db,phase_deg)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        if (*run) return cmd_run(o);
        if (*sweep) return cmd_sweep(o);
        if (*synth) return cmd_synthesize(o);
        if (*derive) return cmd_derive(o, profile_path);
    } catch (const fdsim::ConfigError& e) {
        std::fprintf(stderr, "fdsim: %s\n", e.what());
        return kUsageError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fdsim: %s\n", e.what());
        return kRuntimeError;
    }
    return kUsageError;
}
