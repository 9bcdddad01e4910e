#include <doctest.h>

#include <cmath>
#include <set>

#include "dispersal/env_model.hpp"
#include "oracles.hpp"

using namespace dispersal;

TEST_CASE("mean_rate matches each variant") {
    CHECK(mean_rate(RateLaw::two_point(0.5, 1.5, 0.8)) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(mean_rate(RateLaw::point(1.0)) == 1.0);
    CHECK(mean_rate(RateLaw::uniform(0.0, 2.0)) == 1.0);
    CHECK(mean_rate(RateLaw::discrete({{0.0, 0.25}, {2.0, 0.25}, {4.0, 0.5}})) == 2.5);
}

TEST_CASE("mean_clock matches each variant") {
    CHECK(mean_clock(ClockLaw::exponential(2.0)) == 0.5);
    CHECK(mean_clock(ClockLaw::deterministic(std::log(2.0))) == doctest::Approx(0.6931).epsilon(1e-4));
    CHECK(mean_clock(ClockLaw::discrete({{1.0, 0.25}, {3.0, 0.75}})) == 2.5);
}

TEST_CASE("two_point is stored with low <= high") {
    const RateLaw law = RateLaw::two_point(2.0, 0.5, 0.8);
    const auto& tp = std::get<TwoPointRate>(law.variant());
    CHECK(tp.low == 0.5);
    CHECK(tp.high == 2.0);
    CHECK(tp.p_low == doctest::Approx(0.2));
    CHECK(to_string(law) == "two_point:0.5,2,0.2");
}

TEST_CASE("invalid laws are rejected at construction") {
    CHECK_THROWS_AS(RateLaw::point(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(RateLaw::two_point(0.5, 1.5, 1.2), std::invalid_argument);
    CHECK_THROWS_AS(RateLaw::uniform(2.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(RateLaw::discrete({{1.0, 0.5}, {2.0, 0.4}}), std::invalid_argument);
    CHECK_THROWS_AS(RateLaw::discrete({}), std::invalid_argument);
    CHECK_THROWS_AS(ClockLaw::exponential(0.0), std::invalid_argument);
    CHECK_THROWS_AS(ClockLaw::deterministic(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(ClockLaw::discrete({{0.0, 1.0}}), std::invalid_argument);
    CHECK_NOTHROW(RateLaw::discrete({{1.0, 0.5}, {2.0, 0.5 + 5e-13}}));
}

TEST_CASE("degenerate laws always give the same environment") {
    const EnvironmentLaw env{RateLaw::point(1.0), ClockLaw::deterministic(2.0), Coupling::Independent};
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const auto e = sample_env(env, rng);
        REQUIRE(e.rate == 1.0);
        REQUIRE(e.time == 2.0);
    }
}

TEST_CASE("two-point frequency matches its probability") {
    const EnvironmentLaw env{RateLaw::two_point(0.5, 1.5, 0.8), ClockLaw::exponential(1.0), Coupling::Independent};
    Rng rng(7);
    const int n = 100'000;
    int low = 0;
    for (int i = 0; i < n; ++i) low += sample_env(env, rng).rate == 0.5;
    CHECK(std::abs(low / double(n) - 0.8) < 0.005);
}

TEST_CASE("comonotone and antimonotone couplings pair quantiles") {
    const RateLaw rate = RateLaw::two_point(0.0, 2.0, 0.5);
    const ClockLaw clock = ClockLaw::discrete({{1.0, 0.5}, {3.0, 0.5}});
    Rng rng(3);
    std::set<std::pair<double, double>> como, anti;
    for (int i = 0; i < 10'000; ++i) {
        const auto a = sample_env({rate, clock, Coupling::Comonotone}, rng);
        como.insert({a.rate, a.time});
        const auto b = sample_env({rate, clock, Coupling::Antimonotone}, rng);
        anti.insert({b.rate, b.time});
    }
    CHECK(como == std::set<std::pair<double, double>>{{0.0, 1.0}, {2.0, 3.0}});
    CHECK(anti == std::set<std::pair<double, double>>{{0.0, 3.0}, {2.0, 1.0}});
}

TEST_CASE("marginals are preserved under every coupling (KS at 0.1%)") {
    const double lo = 0.0, hi = 2.0, a = 1.5;
    const std::size_t n = 100'000;
    for (Coupling c : {Coupling::Independent, Coupling::Comonotone, Coupling::Antimonotone}) {
        CAPTURE(to_string(c));
        const EnvironmentLaw env{RateLaw::uniform(lo, hi), ClockLaw::exponential(a), c};
        Rng rng(11);
        std::vector<double> rates, times;
        for (std::size_t i = 0; i < n; ++i) {
            const auto e = sample_env(env, rng);
            rates.push_back(e.rate);
            times.push_back(e.time);
        }
        const double d_rate = oracle::ks_statistic(rates, [&](double x) { return (x - lo) / (hi - lo); });
        const double d_time = oracle::ks_statistic(times, [&](double t) { return 1.0 - std::exp(-a * t); });
        CHECK(d_rate < oracle::ks_critical_001(n));
        CHECK(d_time < oracle::ks_critical_001(n));
    }
}

TEST_CASE("discrete marginals are preserved under dependent couplings") {
    const RateLaw rate = RateLaw::discrete({{0.0, 0.2}, {1.0, 0.3}, {3.0, 0.5}});
    const ClockLaw clock = ClockLaw::discrete({{0.5, 0.6}, {2.0, 0.4}});
    const int n = 100'000;
    for (Coupling c : {Coupling::Comonotone, Coupling::Antimonotone}) {
        Rng rng(5);
        std::map<double, int> rc, tc;
        for (int i = 0; i < n; ++i) {
            const auto e = sample_env({rate, clock, c}, rng);
            ++rc[e.rate];
            ++tc[e.time];
        }
        for (const Atom& atom : rate.atoms()) {
            const double se = std::sqrt(atom.prob * (1 - atom.prob) / n);
            CHECK(std::abs(rc[atom.value] / double(n) - atom.prob) < 4 * se);
        }
        for (const Atom& atom : clock.atoms()) {
            const double se = std::sqrt(atom.prob * (1 - atom.prob) / n);
            CHECK(std::abs(tc[atom.value] / double(n) - atom.prob) < 4 * se);
        }
    }
}

TEST_CASE("same seed gives the same draw sequence") {
    const EnvironmentLaw env{RateLaw::uniform(0.0, 3.0), ClockLaw::exponential(0.7), Coupling::Independent};
    Rng a(99), b(99);
    for (int i = 0; i < 1000; ++i) {
        const auto x = sample_env(env, a);
        const auto y = sample_env(env, b);
        REQUIRE(x.rate == y.rate);
        REQUIRE(x.time == y.time);
    }
}

TEST_CASE("exact means agree with sample means within 4 standard errors") {
    const std::vector<EnvironmentLaw> laws{
        {RateLaw::two_point(0.5, 1.5, 0.8), ClockLaw::exponential(2.0), Coupling::Independent},
        {RateLaw::uniform(0.2, 3.0), ClockLaw::discrete({{1.0, 0.25}, {3.0, 0.75}}), Coupling::Comonotone},
        {RateLaw::discrete({{0.0, 0.1}, {4.0, 0.9}}), ClockLaw::deterministic(0.3), Coupling::Antimonotone},
    };
    for (const auto& env : laws) {
        Rng rng(17);
        std::vector<double> rates, times;
        for (int i = 0; i < 1'000'000; ++i) {
            const auto e = sample_env(env, rng);
            rates.push_back(e.rate);
            times.push_back(e.time);
        }
        const auto r = oracle::mean_se(rates);
        const auto t = oracle::mean_se(times);
        CHECK(std::abs(r.mean - mean_rate(env.rate)) <= 4 * r.se + 1e-9 * std::abs(r.mean));
        CHECK(std::abs(t.mean - mean_clock(env.clock)) <= 4 * t.se + 1e-9 * std::abs(t.mean));
    }
}

TEST_CASE("law text forms parse and re-serialize canonically") {
    CHECK(to_string(parse_rate_law("two_point:0.5,1.5,0.8")) == "two_point:0.5,1.5,0.8");
    CHECK(to_string(parse_rate_law("point:2")) == "point:2");
    CHECK(to_string(parse_rate_law("uniform:0,2")) == "uniform:0,2");
    CHECK(to_string(parse_rate_law("discrete:2:0.7,0:0.3")) == "discrete:0:0.3,2:0.7");
    CHECK(to_string(parse_clock_law("exp:1.0")) == "exp:1");
    CHECK(to_string(parse_clock_law("det:0.6931")) == "det:0.6931");
    CHECK(to_string(parse_clock_law("discrete:1:0.5,3:0.5")) == "discrete:1:0.5,3:0.5");
    CHECK(parse_coupling("comonotone") == Coupling::Comonotone);

    // Property: canonical text is a fixed point of parse -> print.
    Rng rng(2024);
    for (int i = 0; i < 500; ++i) {
        const double l1 = 3 * rng.uniform(), l2 = 3 * rng.uniform(), p = rng.uniform();
        const RateLaw law = RateLaw::two_point(l1, l2, p);
        const std::string text = to_string(law);
        REQUIRE(to_string(parse_rate_law(text)) == text);
        const ClockLaw clock = ClockLaw::exponential(0.1 + rng.uniform());
        REQUIRE(to_string(parse_clock_law(to_string(clock))) == to_string(clock));
    }
}

TEST_CASE("malformed law text gives a diagnostic") {
    CHECK_THROWS_WITH_AS(parse_rate_law("two_point:0.5,1.5"), doctest::Contains("expected 3"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_rate_law("gamma:1,2"), doctest::Contains("unknown rate law"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_clock_law("exp:abc"), doctest::Contains("not a finite number"), std::invalid_argument);
    CHECK_THROWS_AS(parse_clock_law("exp"), std::invalid_argument);
    CHECK_THROWS_AS(parse_clock_law("det:-1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_rate_law("discrete:1:0.5,2"), std::invalid_argument);
    CHECK_THROWS_AS(parse_coupling("copula"), std::invalid_argument);
}
