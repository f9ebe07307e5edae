#include "fdsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "fdsim/error.hpp"

namespace fdsim {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    for (;;) {
        const auto p = s.find(sep);
        out.push_back(trim(s.substr(0, p)));
        if (p == std::string_view::npos) break;
        s.remove_prefix(p + 1);
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
T parse_as(const std::string& text) {
    T v{};
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), last, v);
    if (text.empty() || ec != std::errc() || ptr != last) throw std::invalid_argument(text);
    return v;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// One entry per config key: how to read it and how to write it back.
struct KeyHandler {
    std::function<void(SweepSpec&, const std::string&)> set;
    std::function<std::string(const SweepSpec&)> get;
};

template <class T>
KeyHandler number_key(T LinkConfig::*field) {
    return {[field](SweepSpec& s, const std::string& v) { s.base.*field = parse_as<T>(v); },
            [field](const SweepSpec& s) {
                if constexpr (std::is_floating_point_v<T>) return fmt(s.base.*field);
                else return std::to_string(s.base.*field);
            }};
}

KeyHandler optional_key(std::optional<double> LinkConfig::*field) {
    return {[field](SweepSpec& s, const std::string& v) {
                if (v == "auto") s.base.*field = std::nullopt;
                else s.base.*field = parse_as<double>(v);
            },
            [field](const SweepSpec& s) {
                const auto& o = s.base.*field;
                return o ? fmt(*o) : std::string("auto");
            }};
}

KeyHandler string_key(std::string LinkConfig::*field) {
    return {[field](SweepSpec& s, const std::string& v) { s.base.*field = v; },
            [field](const SweepSpec& s) { return s.base.*field; }};
}

const std::map<std::string, KeyHandler>& key_table() {
    static const std::map<std::string, KeyHandler> table = {
        {"n_b", number_key(&LinkConfig::n_b)},
        {"M", number_key(&LinkConfig::M)},
        {"N_bits", number_key(&LinkConfig::N_bits)},
        {"N_tr", number_key(&LinkConfig::N_tr)},
        {"f_c", optional_key(&LinkConfig::f_c)},
        {"F_s", number_key(&LinkConfig::F_s)},
        {"B_H", number_key(&LinkConfig::B_H)},
        {"B", number_key(&LinkConfig::B)},
        {"P_Ta_dbm", number_key(&LinkConfig::P_Ta_dbm)},
        {"P_Rb_dbm", number_key(&LinkConfig::P_Rb_dbm)},
        {"P_Tb_dbm", number_key(&LinkConfig::P_Tb_dbm)},
        {"noise_ref_dbm", optional_key(&LinkConfig::noise_ref_dbm)},
        {"scheme",
         {[](SweepSpec& s, const std::string& v) { s.base.scheme = parse_scheme(v); },
          [](const SweepSpec& s) { return std::string(to_string(s.base.scheme)); }}},
        {"EbN0_db", number_key(&LinkConfig::EbN0_db)},
        {"rolloff", number_key(&LinkConfig::rolloff)},
        {"span", number_key(&LinkConfig::span)},
        {"estimator_order", number_key(&LinkConfig::estimator_order)},
        {"support_fraction", number_key(&LinkConfig::support_fraction)},
        {"n_taps", number_key(&LinkConfig::n_taps)},
        {"seed", number_key(&LinkConfig::seed)},
        {"group_delay_s", number_key(&LinkConfig::group_delay_s)},
        {"ps_notch_width_hz", number_key(&LinkConfig::ps_notch_width_hz)},
        {"ac_notch_width_hz", number_key(&LinkConfig::ac_notch_width_hz)},
        {"ps_profile", string_key(&LinkConfig::ps_profile)},
        {"ac_profile", string_key(&LinkConfig::ac_profile)},
        {"axis",
         {[](SweepSpec& s, const std::string& v) { s.axis = parse_axis(v); },
          [](const SweepSpec& s) { return std::string(to_string(s.axis)); }}},
        {"values",
         {[](SweepSpec& s, const std::string& v) {
              s.values.clear();
              for (const auto& item : split(v, ',')) s.values.push_back(parse_as<double>(item));
          },
          [](const SweepSpec& s) {
              std::string out;
              for (std::size_t i = 0; i < s.values.size(); ++i) out += (i ? ", " : "") + fmt(s.values[i]);
              return out;
          }}},
        {"schemes",
         {[](SweepSpec& s, const std::string& v) {
              s.schemes.clear();
              for (const auto& item : split(v, ',')) s.schemes.push_back(parse_scheme(item));
          },
          [](const SweepSpec& s) {
              std::string out;
              for (std::size_t i = 0; i < s.schemes.size(); ++i)
                  out += (i ? ", " : "") + std::string(to_string(s.schemes[i]));
              return out;
          }}},
        {"trials_per_point",
         {[](SweepSpec& s, const std::string& v) { s.trials_per_point = parse_as<int>(v); },
          [](const SweepSpec& s) { return std::to_string(s.trials_per_point); }}},
        {"root_seed",
         {[](SweepSpec& s, const std::string& v) { s.root_seed = parse_as<std::uint64_t>(v); },
          [](const SweepSpec& s) { return std::to_string(s.root_seed); }}},
    };
    return table;
}

// Emission order: LinkConfig fields first, then the sweep fields.
constexpr const char* kKeyOrder[] = {
    "n_b", "M", "N_bits", "N_tr", "f_c", "F_s", "B_H", "B", "P_Ta_dbm", "P_Rb_dbm", "P_Tb_dbm",
    "noise_ref_dbm", "scheme", "EbN0_db", "rolloff", "span", "estimator_order",
    "support_fraction", "n_taps", "seed", "group_delay_s", "ps_notch_width_hz",
    "ac_notch_width_hz", "ps_profile", "ac_profile", "axis", "values", "schemes",
    "trials_per_point", "root_seed"};

constexpr std::string_view kResultsHeader =
    "scheme,axis,axis_value,sinr_db,ber,rate_bps_hz,trials,sinr_se_db,ber_se";

std::string channel_cache_key(const LinkConfig& c) {
    const bool ps = rf_family(c.scheme) == ProfileLabel::PS;
    return std::string(ps ? "PS|" : "AC|") + fmt(c.carrier_hz()) + '|' + fmt(c.F_s) + '|' + fmt(c.B_H) +
           '|' + std::to_string(c.n_taps) + '|' + fmt(ps ? c.ps_notch_width_hz : c.ac_notch_width_hz) +
           '|' + fmt(c.group_delay_s) + '|' + fmt(c.support_fraction) + '|' +
           (ps ? c.ps_profile : c.ac_profile);
}

struct TrialOutcome {
    double sinr_linear = 0.0;
    double ber = 0.0;
    double rate = 0.0;
    std::uint64_t seed = 0;
};

}  // namespace

std::string_view to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::EbN0: return "ebn0_db";
        case SweepAxis::Bandwidth: return "bandwidth_hz";
        case SweepAxis::PRb: return "prb_dbm";
        case SweepAxis::ModOrder: return "mod_order";
    }
    return "?";
}

SweepAxis parse_axis(std::string_view text) {
    if (text == "ebn0_db") return SweepAxis::EbN0;
    if (text == "bandwidth_hz") return SweepAxis::Bandwidth;
    if (text == "prb_dbm") return SweepAxis::PRb;
    if (text == "mod_order") return SweepAxis::ModOrder;
    throw ConfigError("unknown axis '" + std::string(text) +
                      "' (expected ebn0_db, bandwidth_hz, prb_dbm or mod_order)");
}

void validate(const SweepSpec& spec) {
    if (spec.values.empty()) throw ConfigError("invalid sweep: values must not be empty");
    if (spec.schemes.empty()) throw ConfigError("invalid sweep: schemes must not be empty");
    if (spec.trials_per_point < 1) throw ConfigError("invalid sweep: trials_per_point must be >= 1");
    std::set<Scheme> seen(spec.schemes.begin(), spec.schemes.end());
    if (seen.size() != spec.schemes.size()) throw ConfigError("invalid sweep: duplicate scheme");
    for (double v : spec.values)
        if (!std::isfinite(v)) throw ConfigError("invalid sweep: values must be finite");
    validate(spec.base);
}

LinkConfig apply_axis(const LinkConfig& base, SweepAxis axis, double value) {
    LinkConfig c = base;
    switch (axis) {
        case SweepAxis::EbN0: c.EbN0_db = value; break;
        case SweepAxis::Bandwidth: c.B = value; break;
        case SweepAxis::PRb:
            if (!c.noise_ref_dbm) c.noise_ref_dbm = base.P_Rb_dbm;
            c.P_Rb_dbm = value;
            break;
        case SweepAxis::ModOrder: {
            const double lg = std::log2(value);
            if (value < 2.0 || lg != std::round(lg))
                throw ConfigError("invalid sweep: mod_order value " + fmt(value) + " is not a power of two");
            c.M = static_cast<int>(value);
            c.n_b = static_cast<int>(lg);
            break;
        }
    }
    return c;
}

std::uint64_t trial_seed(std::uint64_t root_seed, Scheme scheme, double value, int trial) {
    std::uint64_t h = splitmix64(root_seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(scheme));
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(value));
    h = splitmix64(h ^ static_cast<std::uint64_t>(trial));
    return h;
}

const SweepRow& SweepResult::at(Scheme scheme, double axis_value) const {
    for (const auto& r : rows)
        if (r.scheme == scheme && r.axis_value == axis_value) return r;
    throw InvalidInput("no row for scheme " + std::string(to_string(scheme)) + " at " + fmt(axis_value));
}

SweepResult run_sweep(const SweepSpec& spec, const SweepOptions& options) {
    validate(spec);

    struct Point {
        Scheme scheme;
        double value;
        LinkConfig config;
        const SiChannel* channel;
    };
    std::map<std::string, SiChannel> channels;
    std::vector<Point> points;
    for (Scheme scheme : spec.schemes) {
        for (double value : spec.values) {
            LinkConfig c = apply_axis(spec.base, spec.axis, value);
            c.scheme = scheme;
            try {
                validate(c);
                const std::string key = channel_cache_key(c);
                auto it = channels.find(key);
                if (it == channels.end()) it = channels.emplace(key, prepare_si_channel(c)).first;
                points.push_back({scheme, value, c, &it->second});
            } catch (const ConfigError& e) {
                throw ConfigError("scheme=" + std::string(to_string(scheme)) + " value=" + fmt(value) +
                                  ": " + e.what());
            }
        }
    }

    const auto trials = static_cast<std::size_t>(spec.trials_per_point);
    const std::size_t n_tasks = points.size() * trials;
    std::vector<TrialOutcome> outcomes(n_tasks);
    std::vector<std::string> failures(n_tasks);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};

    auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < n_tasks && !failed.load();) {
            const Point& p = points[t / trials];
            const int trial = static_cast<int>(t % trials);
            try {
                LinkConfig c = p.config;
                c.seed = trial_seed(spec.root_seed, p.scheme, p.value, trial);
                Rng rng(c.seed);
                const LinkReport r = run_trial(c, *p.channel, rng);
                outcomes[t] = {r.sinr_linear(), r.ber(), r.rate_bps_hz(), c.seed};
            } catch (const std::exception& e) {
                failures[t] = "scheme=" + std::string(to_string(p.scheme)) + " value=" + fmt(p.value) +
                              " trial=" + std::to_string(trial) + ": " + e.what();
                failed = true;
            }
        }
    };

    unsigned n_threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, n_tasks));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    }
    for (const auto& f : failures)
        if (!f.empty()) throw SweepError(f);

    SweepResult result;
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        const Point& p = points[pi];
        double s_sum = 0.0, s_sq = 0.0, b_sum = 0.0, b_sq = 0.0, r_sum = 0.0;
        bool infinite = false;
        for (std::size_t t = 0; t < trials; ++t) {
            const TrialOutcome& o = outcomes[pi * trials + t];
            if (options.on_trial)
                options.on_trial({p.scheme, p.value, static_cast<int>(t), o.seed,
                                  10.0 * std::log10(o.sinr_linear), o.ber, o.rate});
            infinite = infinite || std::isinf(o.sinr_linear);
            s_sum += o.sinr_linear;
            s_sq += o.sinr_linear * o.sinr_linear;
            b_sum += o.ber;
            b_sq += o.ber * o.ber;
            r_sum += o.rate;
        }
        const double n = static_cast<double>(trials);
        auto std_error = [n](double sum, double sq) {
            if (n < 2.0) return 0.0;
            const double mean = sum / n;
            const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1.0));
            return std::sqrt(var / n);
        };
        SweepRow row{p.scheme, spec.axis, p.value, 0.0, b_sum / n, r_sum / n,
                     spec.trials_per_point, 0.0, std_error(b_sum, b_sq)};
        const double s_mean = s_sum / n;
        if (infinite) {
            row.sinr_db = std::numeric_limits<double>::infinity();
        } else {
            row.sinr_db = 10.0 * std::log10(s_mean);
            // Delta method: d(10 log10 x) = 10 / (x ln 10) dx.
            row.sinr_se_db = s_mean > 0.0 ? 10.0 / std::log(10.0) * std_error(s_sum, s_sq) / s_mean : 0.0;
        }
        result.rows.push_back(row);
    }
    return result;
}

SweepSpec parse_config(std::string_view text, const std::string& source) {
    SweepSpec spec;
    const auto& table = key_table();
    bool saw_M = false, saw_n_b = false;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view raw = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        auto where = [&] { return source + ":" + std::to_string(line_no) + ": "; };
        if (eq == std::string::npos) throw ConfigError(where() + "expected 'key = value', got '" + line + "'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        const auto it = table.find(key);
        if (it == table.end()) throw ConfigError(where() + "unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError(where() + "duplicate key '" + key + "'");
        try {
            it->second.set(spec, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where() + e.what());
        } catch (const std::exception&) {
            throw ConfigError(where() + "cannot parse value '" + value + "' for key '" + key + "'");
        }
        saw_M = saw_M || key == "M";
        saw_n_b = saw_n_b || key == "n_b";
    }

    // Either of M and n_b implies the other; both must agree when given.
    LinkConfig& b = spec.base;
    if (saw_M && !saw_n_b) {
        const int nb = std::bit_width(static_cast<unsigned>(std::max(b.M, 0))) - 1;
        if (b.M < 2 || (1 << nb) != b.M)
            throw ConfigError(source + ": M=" + std::to_string(b.M) + " is not a power of two");
        b.n_b = nb;
    } else if (saw_n_b && !saw_M) {
        if (b.n_b < 1 || b.n_b > 4) throw ConfigError(source + ": n_b must be in 1..4");
        b.M = 1 << b.n_b;
    }
    try {
        validate(spec);
    } catch (const Error& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return spec;
}

SweepSpec load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string emit_config(const SweepSpec& spec) {
    const auto& table = key_table();
    std::string out;
    for (const char* key : kKeyOrder) out += std::string(key) + " = " + table.at(key).get(spec) + "\n";
    return out;
}

std::string format_results(const SweepResult& result) {
    std::string out(kResultsHeader);
    out += '\n';
    for (const auto& r : result.rows) {
        out += std::string(to_string(r.scheme)) + ',' + std::string(to_string(r.axis)) + ',' +
               fmt(r.axis_value) + ',' + fmt(r.sinr_db) + ',' + fmt(r.ber) + ',' + fmt(r.rate_bps_hz) +
               ',' + std::to_string(r.trials) + ',' + fmt(r.sinr_se_db) + ',' + fmt(r.ber_se) + '\n';
    }
    return out;
}

SweepResult parse_results(std::string_view text, const std::string& source) {
    SweepResult result;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header = false;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string line = trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (line.empty()) continue;
        if (!header) {
            if (line != kResultsHeader) throw ParseError(source, line_no, "unexpected results header");
            header = true;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 9) throw ParseError(source, line_no, "expected 9 columns");
        try {
            result.rows.push_back({parse_scheme(f[0]), parse_axis(f[1]), parse_as<double>(f[2]),
                                   parse_as<double>(f[3]), parse_as<double>(f[4]),
                                   parse_as<double>(f[5]), parse_as<int>(f[6]),
                                   parse_as<double>(f[7]), parse_as<double>(f[8])});
        } catch (const std::exception& e) {
            throw ParseError(source, line_no, std::string("bad results row: ") + e.what());
        }
    }
    if (!header) throw ParseError(source, 0, "missing results header");
    return result;
}

void write_results(const SweepResult& result, const std::filesystem::path& path) {
    const std::string text = format_results(result);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

SweepResult read_results(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_results(ss.str(), path.string());
}

}  // namespace fdsim
