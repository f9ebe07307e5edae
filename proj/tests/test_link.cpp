#include <cmath>
#include <limits>

#include "doctest.h"
#include "fdsim/error.hpp"
#include "fdsim/link.hpp"

using namespace fdsim;

namespace {

// Gray QPSK over AWGN: P_b = Q(sqrt(2 Eb/N0)).
double qpsk_ber(double ebn0_db) {
    return 0.5 * std::erfc(std::sqrt(std::pow(10.0, ebn0_db / 10.0)));
}

struct Averages {
    double sinr_db;
    double ber;
    std::size_t errors;
    std::size_t bits;
};

Averages average(LinkConfig c, const SiChannel& si, int trials, std::uint64_t seed) {
    double s = 0.0;
    std::size_t errors = 0, bits = 0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(seed + static_cast<std::uint64_t>(t));
        const LinkReport r = run_trial(c, si, rng);
        s += r.sinr_linear();
        errors += r.measurement().bit_errors;
        bits += r.measurement().n_bits;
    }
    return {10.0 * std::log10(s / trials), static_cast<double>(errors) / static_cast<double>(bits), errors, bits};
}

}  // namespace

TEST_CASE("ber counts bit disagreements") {
    const Bits a(2000, 0);
    Bits b = a;
    CHECK(ber(a, b) == 0.0);
    Bits c(2000, 1);
    CHECK(ber(a, c) == 1.0);
    b[5] = b[700] = b[1999] = 1;
    CHECK(ber(a, b) == doctest::Approx(0.0015).epsilon(1e-15));
    CHECK_THROWS_AS(ber(a, Bits(3)), InvalidInput);
}

TEST_CASE("ebn0_to_noise_variance") {
    CHECK(ebn0_to_noise_variance(std::numeric_limits<double>::infinity(), 1.0, 2, 2) == 0.0);
    CHECK(ebn0_to_noise_variance(0.0, 1.0, 1, 1) == doctest::Approx(1.0));
    CHECK(ebn0_to_noise_variance(7.0, 1e-6, 4, 2) ==
          doctest::Approx(0.5 * ebn0_to_noise_variance(7.0, 1e-6, 2, 2)).epsilon(1e-15));
    CHECK(ebn0_to_noise_variance(10.0, 1e-6, 2, 2) == doctest::Approx(1e-7).epsilon(1e-12));
}

TEST_CASE("sinr on measured windows") {
    const Waveform d(CVec(100, cplx(1e-3, 0.0)), 20e6, 2, 0);
    CHECK(sinr(d, d) == doctest::Approx(0.0));
    const Waveform r(CVec(100, cplx(0.0, 1e-4)), 20e6, 2, 0);
    CHECK(sinr(d, r) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(std::isinf(sinr(d, Waveform(CVec(100), 20e6, 2, 0))));
    CHECK_THROWS_AS(sinr(d, Waveform(CVec(100), 20e6, 2, 1)), InvalidInput);
}

TEST_CASE("rate_difference and gain ratios") {
    CHECK(rate_difference(3.0, 3.0) == 0.0);
    const double r15 = std::log2(1.0 + std::pow(10.0, 1.5));
    const double r7 = std::log2(1.0 + std::pow(10.0, 0.7));
    CHECK(rate_difference(r15, r7) == doctest::Approx(2.4398).epsilon(1e-4));

    const GainRatios same = sinr_gain_ratios({{Scheme::PS, 4.0}, {Scheme::AC, 4.0}, {Scheme::PS_B, 4.0}, {Scheme::AC_B, 4.0}});
    CHECK(*same.ps_b_over_ac_b == 0.0);
    CHECK(*same.ps_b_over_ps == 0.0);
    CHECK(*same.ac_b_over_ac == 0.0);
    const GainRatios partial = sinr_gain_ratios({{Scheme::PS_B, 9.0}, {Scheme::AC_B, 4.0}});
    CHECK(*partial.ps_b_over_ac_b == 5.0);
    CHECK_FALSE(partial.ps_b_over_ps.has_value());

    LinkConfig a;
    a.scheme = Scheme::PS_B;
    LinkConfig b = a;
    b.scheme = Scheme::AC_B;
    b.seed = 99;
    LinkReport::Measurement m;
    m.desired_power = 1e-6;
    m.residual_power = 1e-7;
    m.n_bits = 10;
    const LinkReport ra(a, m), rb(b, m);
    CHECK(rate_difference(ra, rb) == 0.0);
    CHECK(*sinr_gain_ratios(std::map<Scheme, LinkReport>{{Scheme::PS_B, ra}, {Scheme::AC_B, rb}}).ps_b_over_ac_b == 0.0);
    b.EbN0_db = 20.0;
    const LinkReport rc(b, m);
    CHECK_THROWS_AS(rate_difference(ra, rc), InvalidComparison);
    CHECK_THROWS_AS(sinr_gain_ratios(std::map<Scheme, LinkReport>{{Scheme::PS_B, ra}, {Scheme::AC_B, rc}}),
                    InvalidComparison);
    CHECK_THROWS_AS(rate_difference(rb, ra), InvalidComparison);
}

TEST_CASE("LinkReport derives rate from its own SINR") {
    LinkConfig c;
    LinkReport::Measurement m;
    m.desired_power = 3e-6;
    m.residual_power = 1e-7;
    m.n_bits = 2000;
    m.bit_errors = 3;
    const LinkReport r(c, m);
    CHECK(r.rate_bps_hz() == std::log2(1.0 + r.sinr_linear()));
    CHECK(r.sinr_db() == doctest::Approx(10.0 * std::log10(30.0)));
    CHECK(r.ber() == 0.0015);
    m.residual_power = 0.0;
    const LinkReport inf(c, m);
    CHECK(inf.sinr_infinite());
    CHECK(std::isinf(inf.rate_bps_hz()));
    m.bit_errors = 5000;
    CHECK_THROWS_AS(LinkReport(c, m), InvalidInput);
}

TEST_CASE("validate rejects inconsistent configs") {
    LinkConfig c;
    CHECK_NOTHROW(validate(c));
    c.N_bits = 2001;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.M = 8;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.B = 3e6;  // 20/3 samples per symbol
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.n_taps = 100;
    CHECK_THROWS_AS(validate(c), ConfigError);
    Rng rng(1);
    c = {};
    c.N_bits = 2001;
    CHECK_THROWS_AS(run_trial(c, rng), ConfigError);
}

TEST_CASE("run_trial: noiseless PS+B cancels perfectly") {
    LinkConfig c;
    c.scheme = Scheme::PS_B;
    c.EbN0_db = std::numeric_limits<double>::infinity();
    Rng rng(3);
    const LinkReport r = run_trial(c, rng);
    CHECK(r.ber() == 0.0);
    CHECK(r.measurement().residual_power <= 1e-12 * r.measurement().si_power);
    CHECK(r.measurement().retained_fraction >= 0.999);
}

TEST_CASE("run_trial: deterministic for a seed") {
    LinkConfig c;
    c.scheme = Scheme::AC_B;
    const SiChannel si = prepare_si_channel(c);
    Rng a(77), b(77);
    const LinkReport ra = run_trial(c, si, a), rb = run_trial(c, si, b);
    CHECK(ra.sinr_linear() == rb.sinr_linear());
    CHECK(ra.measurement().bit_errors == rb.measurement().bit_errors);
}

TEST_CASE("run_trial: noise-only residual gives SINR = P_Rb / sigma^2") {
    LinkConfig c;
    c.scheme = Scheme::PS;
    c.N_bits = 20000;
    const SiChannel none = no_si_channel(c.F_s);
    const Averages a = average(c, none, 20, 500);
    const double expect = dbm_to_power(c.P_Rb_dbm) / ebn0_to_noise_variance(c.EbN0_db, dbm_to_power(c.P_Rb_dbm), 2, 2);
    CHECK(std::pow(10.0, a.sinr_db / 10.0) == doctest::Approx(expect).epsilon(0.01));
}

TEST_CASE("run_trial: AWGN BER at 10 dB matches the closed form (1e7 bits)") {
    LinkConfig c;
    c.scheme = Scheme::PS;
    c.EbN0_db = 10.0;
    c.N_bits = 200000;
    const Averages a = average(c, no_si_channel(c.F_s), 50, 1000);
    const double p = qpsk_ber(10.0);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(a.bits));
    MESSAGE("AWGN BER " << a.ber << " (" << a.errors << " errors) vs " << p << " +- " << se);
    CHECK(std::abs(a.ber - p) <= 3.0 * se);
}

TEST_CASE("run_trial: baseband cancellation improves BER tenfold at 10 dB") {
    LinkConfig c;
    c.EbN0_db = 10.0;
    c.scheme = Scheme::PS;
    const Averages rf = average(c, prepare_si_channel(c), 20, 1);
    c.scheme = Scheme::PS_B;
    const Averages bb = average(c, prepare_si_channel(c), 20, 1);
    MESSAGE("BER PS " << rf.ber << ", PS+B " << bb.ber);
    CHECK(bb.ber <= rf.ber / 10.0);
}

TEST_CASE("run_trial: SINR trends across Eb/N0 and schemes") {
    LinkConfig c;
    std::map<Scheme, SiChannel> chans;
    for (Scheme s : {Scheme::PS, Scheme::AC, Scheme::PS_B, Scheme::AC_B}) {
        c.scheme = s;
        chans.emplace(s, prepare_si_channel(c));
    }
    for (Scheme s : {Scheme::PS_B, Scheme::AC_B}) {
        c.scheme = s;
        double prev = -1e9;
        for (double e : {0.0, 5.0, 10.0, 15.0, 20.0}) {
            c.EbN0_db = e;
            const double g = average(c, chans.at(s), 20, 40).sinr_db;
            CHECK(g >= prev);
            prev = g;
        }
    }
    c.EbN0_db = 20.0;
    std::map<Scheme, double> g;
    for (Scheme s : {Scheme::PS, Scheme::AC, Scheme::PS_B, Scheme::AC_B}) {
        c.scheme = s;
        g[s] = average(c, chans.at(s), 20, 60).sinr_db;
    }
    CHECK(g[Scheme::PS_B] > g[Scheme::AC_B]);
    CHECK(g[Scheme::PS] > g[Scheme::AC]);
}
