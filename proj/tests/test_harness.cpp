#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fdsim/error.hpp"
#include "fdsim/harness.hpp"

using namespace fdsim;

namespace {

SweepSpec small_spec() {
    SweepSpec s;
    s.values = {10.0, 20.0};
    s.schemes = {Scheme::PS_B, Scheme::AC_B};
    s.trials_per_point = 4;
    s.root_seed = 7;
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("fdsim_test_" + name);
}

}  // namespace

TEST_CASE("run_sweep: one scheme, one value, one trial gives one row") {
    SweepSpec s;
    s.values = {10.0};
    s.schemes = {Scheme::PS_B};
    s.trials_per_point = 1;
    const SweepResult r = run_sweep(s);
    REQUIRE(r.rows.size() == 1);
    const SweepRow& row = r.rows[0];
    CHECK(row.scheme == Scheme::PS_B);
    CHECK(row.axis == SweepAxis::EbN0);
    CHECK(row.axis_value == 10.0);
    CHECK(row.trials == 1);
    CHECK(row.sinr_se_db == 0.0);
    CHECK(row.ber_se == 0.0);
    CHECK(std::isfinite(row.sinr_db));

    // A single trial must reproduce run_trial with the derived seed.
    LinkConfig c = apply_axis(s.base, s.axis, 10.0);
    c.scheme = Scheme::PS_B;
    c.seed = trial_seed(s.root_seed, Scheme::PS_B, 10.0, 0);
    Rng rng(c.seed);
    const LinkReport direct = run_trial(c, rng);
    CHECK(row.sinr_db == doctest::Approx(direct.sinr_db()).epsilon(1e-12));
    CHECK(row.ber == direct.ber());
    CHECK(row.rate_bps_hz == direct.rate_bps_hz());
}

TEST_CASE("run_sweep: results are independent of the thread count") {
    const SweepSpec s = small_spec();
    const SweepResult one = run_sweep(s, {.threads = 1});
    const SweepResult many = run_sweep(s, {.threads = 5});
    CHECK(one == many);
    CHECK(format_results(one) == format_results(many));
    REQUIRE(one.rows.size() == 4);
    // Scheme-major ordering in spec order.
    CHECK(one.rows[0].scheme == Scheme::PS_B);
    CHECK(one.rows[1].axis_value == 20.0);
    CHECK(one.rows[2].scheme == Scheme::AC_B);

    SweepSpec other = s;
    other.root_seed = 8;
    CHECK_FALSE(run_sweep(other) == one);
}

TEST_CASE("run_sweep: per-trial records reproduce the aggregates") {
    const SweepSpec s = small_spec();
    std::vector<TrialRecord> log;
    const SweepResult r = run_sweep(s, {.threads = 3, .on_trial = [&](const TrialRecord& t) { log.push_back(t); }});
    REQUIRE(log.size() == 16);
    for (std::size_t i = 0; i < log.size(); ++i) CHECK(log[i].trial == static_cast<int>(i % 4));
    for (const SweepRow& row : r.rows) {
        double s_lin = 0.0, b = 0.0, rate = 0.0;
        int n = 0;
        for (const auto& t : log) {
            if (t.scheme != row.scheme || t.axis_value != row.axis_value) continue;
            CHECK(t.seed == trial_seed(s.root_seed, t.scheme, t.axis_value, t.trial));
            s_lin += std::pow(10.0, t.sinr_db / 10.0);
            b += t.ber;
            rate += t.rate_bps_hz;
            ++n;
        }
        REQUIRE(n == 4);
        CHECK(row.sinr_db == doctest::Approx(10.0 * std::log10(s_lin / n)).epsilon(1e-12));
        CHECK(row.ber == doctest::Approx(b / n));
        CHECK(row.rate_bps_hz == doctest::Approx(rate / n));
    }
}

TEST_CASE("trial_seed: distinct across every coordinate") {
    std::set<std::uint64_t> seen;
    int count = 0;
    for (std::uint64_t root : {1ULL, 2ULL})
        for (Scheme s : {Scheme::PS, Scheme::AC, Scheme::PS_B, Scheme::AC_B})
            for (double v : {0.0, -0.0, 10.0, 10.5, 20.0})
                for (int t = 0; t < 50; ++t, ++count) seen.insert(trial_seed(root, s, v, t));
    CHECK(seen.size() == static_cast<std::size_t>(count));
    CHECK(trial_seed(3, Scheme::AC, 1.0, 4) == trial_seed(3, Scheme::AC, 1.0, 4));
}

TEST_CASE("apply_axis: each axis edits the right field") {
    const LinkConfig base;
    CHECK(apply_axis(base, SweepAxis::EbN0, 17.0).EbN0_db == 17.0);
    CHECK(apply_axis(base, SweepAxis::Bandwidth, 2e6).B == 2e6);
    const LinkConfig m = apply_axis(base, SweepAxis::ModOrder, 8.0);
    CHECK(m.M == 8);
    CHECK(m.n_b == 3);
    CHECK_THROWS_AS(apply_axis(base, SweepAxis::ModOrder, 6.0), ConfigError);

    // Sweeping P_Rb keeps the noise floor referenced to the base P_Rb.
    const LinkConfig p = apply_axis(base, SweepAxis::PRb, -50.0);
    CHECK(p.P_Rb_dbm == -50.0);
    REQUIRE(p.noise_ref_dbm.has_value());
    CHECK(*p.noise_ref_dbm == base.P_Rb_dbm);
    LinkConfig pinned = base;
    pinned.noise_ref_dbm = -70.0;
    CHECK(*apply_axis(pinned, SweepAxis::PRb, -50.0).noise_ref_dbm == -70.0);
}

TEST_CASE("run_sweep: errors carry their coordinates") {
    SweepSpec s;
    s.axis = SweepAxis::Bandwidth;
    s.values = {10e6, 3e6};  // 3 MHz gives a non-integer oversampling factor
    s.schemes = {Scheme::PS};
    s.trials_per_point = 1;
    try {
        run_sweep(s);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("scheme=PS") != std::string::npos);
        CHECK(what.find("value=3000000") != std::string::npos);
    }

    SweepSpec bad_profile;
    bad_profile.schemes = {Scheme::PS_B};
    bad_profile.trials_per_point = 1;
    bad_profile.base.ps_profile = "/nonexistent/profile.csv";
    CHECK_THROWS_AS(run_sweep(bad_profile), Error);

    SweepSpec empty;
    empty.values.clear();
    CHECK_THROWS_AS(run_sweep(empty), ConfigError);
}

TEST_CASE("parse_config: defaults, comments and round trip") {
    CHECK(parse_config("") == SweepSpec{});
    CHECK(parse_config("# only a comment\n\n   \n") == SweepSpec{});

    const SweepSpec s = parse_config(
        "scheme = AC+B   # trailing comment\n"
        "EbN0_db = 12.5\n"
        "M = 8\n"
        "N_bits = 2001\n"
        "axis = bandwidth_hz\n"
        "values = 2e6, 10e6\n"
        "schemes = PS+B, AC+B\n"
        "trials_per_point = 3\n"
        "root_seed = 42\n"
        "f_c = 2.45e9\n");
    CHECK(s.base.scheme == Scheme::AC_B);
    CHECK(s.base.EbN0_db == 12.5);
    CHECK(s.base.M == 8);
    CHECK(s.base.n_b == 3);
    CHECK(s.axis == SweepAxis::Bandwidth);
    CHECK(s.values == std::vector<double>{2e6, 10e6});
    CHECK(s.schemes == std::vector<Scheme>{Scheme::PS_B, Scheme::AC_B});
    CHECK(s.trials_per_point == 3);
    CHECK(s.root_seed == 42);
    REQUIRE(s.base.f_c.has_value());
    CHECK(*s.base.f_c == 2.45e9);

    CHECK(parse_config(emit_config(s)) == s);
    CHECK(parse_config(emit_config(SweepSpec{})) == SweepSpec{});
    CHECK(parse_config(emit_config(s)).base.f_c == s.base.f_c);
    CHECK_FALSE(parse_config("f_c = auto\n").base.f_c.has_value());
}

TEST_CASE("parse_config: rejects bad input with its location") {
    auto message = [](const std::string& text) {
        try {
            parse_config(text, "cfg");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("<no error>");
    };
    CHECK(message("M = 3\n").find("power of two") != std::string::npos);
    CHECK(message("EbN0_db = 3\nbogus = 1\n").find("cfg:2") != std::string::npos);
    CHECK(message("EbN0_db = 3\nbogus = 1\n").find("unknown key 'bogus'") != std::string::npos);
    CHECK(message("seed = 1\nseed = 2\n").find("duplicate") != std::string::npos);
    CHECK(message("EbN0_db = ten\n").find("cfg:1") != std::string::npos);
    CHECK(message("just words\n").find("cfg:1") != std::string::npos);
    CHECK(message("scheme = XYZ\n").find("cfg:1") != std::string::npos);
    CHECK(message("M = 4\nn_b = 3\n") != "<no error>");
    CHECK(message("N_bits = 2001\n") != "<no error>");
    CHECK(message("trials_per_point = 0\n") != "<no error>");
    CHECK(message("schemes = PS, PS\n") != "<no error>");
}

TEST_CASE("results CSV: header, precision and round trip") {
    SweepResult r;
    r.rows.push_back({Scheme::PS_B, SweepAxis::EbN0, 10.0, 5.123456789012345, 1.0 / 3.0, 2.0 / 7.0, 50,
                      0.1, 1e-17});
    const std::string text = format_results(r);
    CHECK(text ==
          "scheme,axis,axis_value,sinr_db,ber,rate_bps_hz,trials,sinr_se_db,ber_se\n"
          "PS+B,ebn0_db,10,5.1234567890123452,0.33333333333333331,0.2857142857142857,50,"
          "0.10000000000000001,1.0000000000000001e-17\n");
    CHECK(text.find('\r') == std::string::npos);
    CHECK(parse_results(text) == r);

    const auto path = temp_file("results.csv");
    write_results(r, path);
    CHECK(slurp(path) == text);
    CHECK(read_results(path) == r);

    // A larger file: every numeric field parses back finite and exact.
    SweepResult big;
    for (int i = 0; i < 100; ++i)
        big.rows.push_back({i % 2 ? Scheme::AC : Scheme::PS, SweepAxis::PRb, -63.0 + 0.13 * i,
                            std::sin(i) * 30.0, std::exp(-i / 10.0), std::log1p(i), 50, 0.01 * i, 1e-3});
    write_results(big, path);
    const SweepResult back = read_results(path);
    CHECK(back == big);
    for (const auto& row : back.rows) {
        CHECK(std::isfinite(row.sinr_db));
        CHECK(std::isfinite(row.ber));
        CHECK(std::isfinite(row.rate_bps_hz));
    }
    std::filesystem::remove(path);

    CHECK_THROWS_AS(parse_results("scheme,axis\n"), ParseError);
    CHECK_THROWS_AS(read_results("/nonexistent/results.csv"), IoError);
}

TEST_CASE("run_sweep: identical inputs give byte-identical files") {
    const SweepSpec s = small_spec();
    const auto a = temp_file("a.csv"), b = temp_file("b.csv");
    write_results(run_sweep(s, {.threads = 2}), a);
    write_results(run_sweep(s, {.threads = 4}), b);
    CHECK(slurp(a) == slurp(b));
    std::filesystem::remove(a);
    std::filesystem::remove(b);
}
