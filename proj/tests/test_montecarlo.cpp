#include <doctest.h>

#include <cmath>
#include <unordered_set>

#include "dispersal/montecarlo.hpp"
#include "oracles.hpp"

using namespace dispersal;

namespace {

ModelConfig model(Model m, RateLaw rate, ClockLaw clock) {
    ModelConfig cfg;
    cfg.model = m;
    cfg.env = {std::move(rate), std::move(clock), Coupling::Independent};
    return cfg;
}

// Wilson bounds written out directly from the score-test inversion.
std::pair<double, double> wilson_oracle(double s, double n, double z) {
    const double p = s / n;
    const double a = 1 + z * z / n;
    const double b = -(2 * p + z * z / n);
    const double c = p * p;
    const double disc = std::sqrt(b * b - 4 * a * c);
    return {(-b - disc) / (2 * a), (-b + disc) / (2 * a)};
}

}  // namespace

TEST_CASE("wilson interval") {
    for (auto [s, n] : {std::pair<std::uint64_t, std::uint64_t>{0, 10}, {3, 10}, {500, 1000}, {999, 1000}, {7, 7}}) {
        CAPTURE(s);
        CAPTURE(n);
        const auto ci = wilson_interval(s, n);
        const auto [lo, hi] = wilson_oracle(double(s), double(n), kZ95);
        CHECK(ci.low == doctest::Approx(std::max(0.0, lo)).epsilon(1e-9));
        CHECK(ci.high == doctest::Approx(std::min(1.0, hi)).epsilon(1e-9));
        const double p = double(s) / double(n);
        CHECK(ci.low <= p);
        CHECK(p <= ci.high);
    }
    const auto zero = wilson_interval(0, 1000);
    CHECK(zero.low == 0.0);
    CHECK(zero.high > 0.0);
    CHECK(zero.high < 0.01);
    CHECK_THROWS_AS(wilson_interval(0, 0), std::invalid_argument);
    CHECK_THROWS_AS(wilson_interval(5, 4), std::invalid_argument);
}

TEST_CASE("fixed chain with no births never survives") {
    auto cfg = model(Model::Fixed, RateLaw::point(1.0), ClockLaw::exponential(1.0));
    cfg.fixed_rate = 0.0;
    const auto est = estimate_survival(cfg, 1000, 1);
    CHECK(est.point == 0.0);
    CHECK(est.ci_low == 0.0);
    CHECK(est.n_trials == 1000);
}

TEST_CASE("dispersion at E(Λ) = 1 has survival bounded away from zero") {
    const auto cfg = model(Model::Dispersion, RateLaw::two_point(0.0, 2.0, 0.5), ClockLaw::exponential(1.5));
    const auto est = estimate_survival(cfg, 10'000, kDefaultSeed);
    CHECK(est.ci_low > 0.01);
    CHECK(est.ci_low <= est.point);
    CHECK(est.point <= est.ci_high);
    CHECK(est.point == double(est.n_survived) / double(est.n_trials));
}

TEST_CASE("estimates are reproducible and independent of the worker count") {
    const auto cfg = model(Model::Dispersion, RateLaw::two_point(0.5, 1.5, 0.8), ClockLaw::exponential(0.7));
    const auto a = estimate_survival(cfg, 2000, 42, 1);
    const auto b = estimate_survival(cfg, 2000, 42, 1);
    const auto c = estimate_survival(cfg, 2000, 42, 3);
    const auto d = estimate_survival(cfg, 2000, 42, 8);
    CHECK(a == b);
    CHECK(a == c);
    CHECK(a == d);
    CHECK(a.master_seed == 42);
    CHECK(a.caps == cfg.caps);
}

TEST_CASE("derived seeds do not collide") {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(2'000'000);
    for (std::uint64_t i = 0; i < 1'000'000; ++i) REQUIRE(seen.insert(derive_seed(kDefaultSeed, i)).second);
}

TEST_CASE("wilson intervals cover the fixed chain's survival probability") {
    // λ = 2: P(reach cap c from 1) = (1 - 1/2)/(1 - 2^-c), indistinguishable from 1/2.
    auto cfg = model(Model::Fixed, RateLaw::point(2.0), ClockLaw::exponential(1.0));
    cfg.caps.horizon = 1e9;
    cfg.caps.population_cap = 1000;
    int covered = 0;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        const auto est = estimate_survival(cfg, 1000, derive_seed(777, rep), 1);
        covered += est.ci_low <= 0.5 && 0.5 <= est.ci_high;
    }
    CHECK(covered >= 90);
}

TEST_CASE("sweep over the clock rate follows the critical rate") {
    const auto base = model(Model::Dispersion, RateLaw::two_point(0.5, 1.5, 0.8), ClockLaw::exponential(1.0));
    const std::vector<double> grid{0.3, 0.6, 0.7, 1.0, 1.2};
    const auto rows = sweep(base, SweepParam::A, grid, 500, 11, 1);
    REQUIRE(rows.size() == grid.size());
    const Prediction expected[] = {Prediction::Survives, Prediction::Survives, Prediction::Survives, Prediction::Dies,
                                   Prediction::Dies};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CAPTURE(i);
        CHECK(rows[i].value == grid[i]);
        CHECK(rows[i].predicted == expected[i]);
        CHECK(rows[i].seed == sweep_point_seed(11, SweepParam::A, grid[i]));
        CHECK_FALSE(rows[i].rejected);
    }
    CHECK(std::isinf(rows[0].m));
}

TEST_CASE("sweep over p with equal rates keeps m constant") {
    const auto base = model(Model::Dispersion, RateLaw::two_point(1.3, 1.3, 0.5), ClockLaw::exponential(2.0));
    const auto rows = sweep(base, SweepParam::P, std::vector<double>{0.1, 0.3, 0.5, 0.9}, 50, 3, 1);
    for (const auto& r : rows) CHECK(r.m == doctest::Approx(rows.front().m).epsilon(1e-14));
    CHECK(rows.front().m == doctest::Approx(2.0 / (2.0 - 0.3)).epsilon(1e-12));
}

TEST_CASE("every clock rate survives when E(Λ) > 1") {
    const auto base = model(Model::Dispersion, RateLaw::two_point(1.2, 2.0, 0.5), ClockLaw::exponential(1.0));
    const auto rows = sweep(base, SweepParam::A, std::vector<double>{0.05, 0.5, 1.0, 3.0, 10.0, 100.0}, 20, 5, 1);
    for (const auto& r : rows) {
        CAPTURE(r.value);
        CHECK(r.predicted == Prediction::Survives);
        CHECK(r.m > 1.0);
    }
}

TEST_CASE("invalid grid values become rejected rows") {
    const auto base = model(Model::Dispersion, RateLaw::two_point(0.5, 1.5, 0.8), ClockLaw::exponential(1.0));
    const auto rows = sweep(base, SweepParam::P, std::vector<double>{0.5, 1.5, -0.1}, 50, 3, 1);
    REQUIRE(rows.size() == 3);
    CHECK_FALSE(rows[0].rejected);
    CHECK(rows[1].rejected);
    CHECK(rows[2].rejected);
    CHECK(rows[1].predicted == Prediction::NotApplicable);
    CHECK(std::isnan(rows[1].m));
    CHECK(rows[1].estimate.n_trials == 0);

    const auto wrong = sweep(base, SweepParam::T0, std::vector<double>{1.0}, 10, 3, 1);
    CHECK(wrong[0].rejected->find("det") != std::string::npos);
    CHECK_THROWS_AS(sweep(base, SweepParam::A, std::vector<double>{}, 10, 3, 1), std::invalid_argument);
}

TEST_CASE("adding a grid point leaves the other rows untouched") {
    const auto base = model(Model::Dispersion, RateLaw::two_point(0.0, 2.0, 0.5), ClockLaw::exponential(1.0));
    const auto small = sweep(base, SweepParam::A, std::vector<double>{1.5, 2.5}, 300, 9, 1);
    const auto large = sweep(base, SweepParam::A, std::vector<double>{1.5, 2.0, 2.5}, 300, 9, 1);
    CHECK(small[0] == large[0]);
    CHECK(small[1] == large[2]);
}

TEST_CASE("sweep parameter names") {
    CHECK(parse_sweep_param("a") == SweepParam::A);
    CHECK(parse_sweep_param("lambda2") == SweepParam::Lambda2);
    CHECK(parse_sweep_param("l1") == SweepParam::Lambda1);
    for (SweepParam p : {SweepParam::A, SweepParam::P, SweepParam::Lambda1, SweepParam::Lambda2, SweepParam::T0}) {
        CHECK(parse_sweep_param(to_string(p)) == p);
    }
    CHECK_THROWS_AS(parse_sweep_param("b"), std::invalid_argument);
}

TEST_CASE("fixed model defaults to the mean rate") {
    const auto cfg = model(Model::Fixed, RateLaw::two_point(0.0, 2.0, 0.25), ClockLaw::exponential(1.0));
    CHECK(cfg.effective_fixed_rate() == 1.5);
    CHECK(predicted_verdict(cfg, MValue{}) == Prediction::Survives);
}
