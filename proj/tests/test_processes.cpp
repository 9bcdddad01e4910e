#include <doctest.h>

#include <cmath>

#include "dispersal/processes.hpp"
#include "oracles.hpp"

using namespace dispersal;

namespace {

double survival_frequency(int n, const std::function<TrialOutcome(Rng&)>& trial, std::uint64_t seed) {
    int survived = 0;
    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, i));
        survived += trial(rng).verdict == Verdict::SurvivedToCap;
    }
    return survived / double(n);
}

EnvironmentLaw env(RateLaw r, ClockLaw c, Coupling k = Coupling::Independent) { return {std::move(r), std::move(c), k}; }

}  // namespace

TEST_CASE("dispersion with no births always dies out") {
    DispersionConfig cfg{env(RateLaw::point(0.0), ClockLaw::exponential(1.0)), 50, kDefaultPopulationCap};
    for (int i = 0; i < 10'000; ++i) {
        Rng rng(derive_seed(1, i));
        const auto out = run_dispersion_trial(cfg, rng);
        REQUIRE(out.verdict == Verdict::Extinct);
        REQUIRE(out.stop_population == 0);
    }
}

TEST_CASE("dispersion at E(Λ) = 1 survives with positive probability") {
    DispersionConfig cfg{env(RateLaw::two_point(0.0, 2.0, 0.5), ClockLaw::exponential(1.5))};
    const int n = 10'000;
    const double f = survival_frequency(n, [&](Rng& r) { return run_dispersion_trial(cfg, r); }, 2);
    const double se = std::sqrt(f * (1 - f) / n);
    CHECK(f - 1.96 * se > 0.0);
}

TEST_CASE("dispersion with PointMass(2) x Deterministic(ln 2) survives half the time") {
    DispersionConfig cfg{env(RateLaw::point(2.0), ClockLaw::deterministic(std::log(2.0)))};
    const double f = survival_frequency(10'000, [&](Rng& r) { return run_dispersion_trial(cfg, r); }, 3);
    CHECK(std::abs(f - 0.5) < 0.02);
}

TEST_CASE("outcome invariants") {
    DispersionConfig cfg{env(RateLaw::two_point(0.0, 2.0, 0.5), ClockLaw::exponential(1.5)), 30, 500};
    for (int i = 0; i < 2000; ++i) {
        Rng rng(derive_seed(4, i));
        const auto out = run_dispersion_trial(cfg, rng);
        REQUIRE(out.peak_population >= out.stop_population);
        if (out.verdict == Verdict::Extinct) {
            REQUIRE(out.stop_population == 0);
        } else {
            REQUIRE((out.stop_population >= cfg.population_cap ||
                     (out.stop_step == cfg.max_generations && out.stop_population >= 1)));
        }
    }
}

TEST_CASE("generation limit with a small population is still survival") {
    // λ = 1 with deterministic clocks is critical; some lineages linger.
    DispersionConfig cfg{env(RateLaw::point(1.0), ClockLaw::deterministic(0.1)), 3, 1'000'000};
    bool saw = false;
    for (int i = 0; i < 200 && !saw; ++i) {
        Rng rng(derive_seed(5, i));
        const auto out = run_dispersion_trial(cfg, rng);
        if (out.verdict == Verdict::SurvivedToCap) {
            CHECK(out.stop_step == 3);
            CHECK(out.stop_population < cfg.population_cap);
            saw = true;
        }
    }
    CHECK(saw);
}

TEST_CASE("global model with a degenerate environment equals the fixed chain") {
    const double rate = 1.6;
    const int n = 10'000;
    GlobalConfig g{env(RateLaw::point(rate), ClockLaw::exponential(1.0)), 100, 2000};
    FixedConfig f{rate, 1e6, 2000};
    const double pg = survival_frequency(n, [&](Rng& r) { return run_global_trial(g, r); }, 6);
    const double pf = survival_frequency(n, [&](Rng& r) { return run_fixed_trial(f, r); }, 7);
    const double half_g = 1.96 * std::sqrt(pg * (1 - pg) / n);
    const double half_f = 1.96 * std::sqrt(pf * (1 - pf) / n);
    CHECK(std::abs(pg - pf) <= half_g + half_f);
    CHECK(std::abs(pg - (1.0 - 1.0 / rate)) < 2 * half_g);
}

TEST_CASE("global model dies out when E(Λ) <= 1") {
    GlobalConfig sub{env(RateLaw::two_point(0.5, 1.5, 0.8), ClockLaw::exponential(0.2))};
    CHECK(survival_frequency(10'000, [&](Rng& r) { return run_global_trial(sub, r); }, 8) < 0.005);

}

TEST_CASE("critical global model survives far less often than the dispersion model") {
    // E(Λ) = 1: the global chain is a critical branching process in random
    // environment and dies out, though it can wander past the cap first.
    const auto law = env(RateLaw::two_point(0.0, 2.0, 0.5), ClockLaw::exponential(1.5));
    GlobalConfig crit{law};
    DispersionConfig disp{law};
    const double pg = survival_frequency(10'000, [&](Rng& r) { return run_global_trial(crit, r); }, 9);
    const double pd = survival_frequency(10'000, [&](Rng& r) { return run_dispersion_trial(disp, r); }, 9);
    CHECK(pg < 0.25 * pd);

    // Lengthening the epoch limit removes the survivors that were merely still alive.
    GlobalConfig longer{law, 2000, kDefaultPopulationCap};
    int lingering = 0;
    for (int i = 0; i < 2000; ++i) {
        Rng rng(derive_seed(90, i));
        const auto out = run_global_trial(longer, rng);
        lingering += out.verdict == Verdict::SurvivedToCap && out.stop_population < longer.population_cap;
    }
    CHECK(lingering <= 2);
}

TEST_CASE("global model rejects dependent couplings") {
    GlobalConfig g{env(RateLaw::point(2.0), ClockLaw::exponential(1.0), Coupling::Comonotone)};
    Rng rng(1);
    CHECK_THROWS_AS(run_global_trial(g, rng), std::invalid_argument);
}

TEST_CASE("fixed chain survival") {
    FixedConfig critical{1.0, 200.0, 100'000};
    CHECK(survival_frequency(10'000, [&](Rng& r) { return run_fixed_trial(critical, r); }, 10) < 0.01);

    FixedConfig super{2.0, 1e9, 10'000};
    CHECK(std::abs(survival_frequency(10'000, [&](Rng& r) { return run_fixed_trial(super, r); }, 11) - 0.5) < 0.02);

    FixedConfig none{0.0, 1e9, 10};
    CHECK(survival_frequency(1000, [&](Rng& r) { return run_fixed_trial(none, r); }, 12) == 0.0);
}

TEST_CASE("first generation of the dispersion trial is the environment mixture") {
    // V_1 from full trials (one generation, no cap) vs direct mixture draws.
    const auto law = env(RateLaw::two_point(0.0, 2.0, 0.5), ClockLaw::exponential(1.5));
    DispersionConfig cfg{law, 1, kSaturatedCount};
    std::vector<std::uint64_t> from_trials, direct;
    Rng mix(13);
    for (int i = 0; i < 100'000; ++i) {
        Rng rng(derive_seed(14, i));
        from_trials.push_back(run_dispersion_trial(cfg, rng).stop_population);
        direct.push_back(sample_first_generation(law, mix));
    }
    const auto [stat, crit] = oracle::chi_square_two_sample(oracle::binned(from_trials, 20), oracle::binned(direct, 20));
    CHECK(stat < crit);
}

TEST_CASE("tabulated founder path matches the generic path in law") {
    // Finite laws use a lookup table; a uniform-rate law forces the generic path.
    const auto finite = env(RateLaw::discrete({{0.0, 0.3}, {2.5, 0.7}}), ClockLaw::discrete({{0.5, 0.5}, {1.0, 0.5}}),
                            Coupling::Comonotone);
    DispersionConfig cfg{finite, 1, kSaturatedCount};
    std::vector<std::uint64_t> table, generic;
    Rng g(15);
    for (int i = 0; i < 100'000; ++i) {
        Rng rng(derive_seed(16, i));
        table.push_back(run_dispersion_trial(cfg, rng).stop_population);
        generic.push_back(sample_first_generation(finite, g));
    }
    const auto [stat, crit] = oracle::chi_square_two_sample(oracle::binned(table, 20), oracle::binned(generic, 20));
    CHECK(stat < crit);
}

TEST_CASE("every trial terminates") {
    DispersionConfig cfg{env(RateLaw::point(1.0), ClockLaw::deterministic(1.0)), 100, 1000};
    for (int i = 0; i < 2000; ++i) {
        Rng rng(derive_seed(17, i));
        const auto out = run_dispersion_trial(cfg, rng);
        REQUIRE(out.stop_step <= 100);
    }
}

TEST_CASE("trajectory: pure death chain has exactly one event") {
    TrajectoryConfig cfg;
    cfg.model = Model::Fixed;
    cfg.fixed_rate = 0.0;
    cfg.horizon = 1e9;
    std::vector<double> times;
    for (int i = 0; i < 20'000; ++i) {
        Rng rng(derive_seed(18, i));
        const auto tr = run_trajectory(cfg, rng);
        REQUIRE(tr.events.size() == 1);
        REQUIRE(tr.events[0].delta == -1);
        REQUIRE(tr.termination == Termination::Extinct);
        times.push_back(tr.events[0].time);
    }
    CHECK(oracle::ks_statistic(times, [](double t) { return 1.0 - std::exp(-t); }) < oracle::ks_critical_001(times.size()));
}

TEST_CASE("trajectory: horizon zero leaves only the initial record") {
    for (Model m : {Model::Dispersion, Model::Global, Model::Fixed}) {
        TrajectoryConfig cfg;
        cfg.model = m;
        cfg.env = env(RateLaw::point(2.0), ClockLaw::exponential(1.0));
        cfg.horizon = 0.0;
        Rng rng(19);
        const auto tr = run_trajectory(cfg, rng);
        CHECK(tr.events.empty());
        CHECK(tr.initial_population == 1);
        CHECK(tr.population_at(0.0) == 1);
    }
}

TEST_CASE("trajectory: dispersion wavefront means double each generation") {
    TrajectoryConfig cfg;
    cfg.model = Model::Dispersion;
    cfg.env = env(RateLaw::point(2.0), ClockLaw::deterministic(std::log(2.0)));
    cfg.horizon = 4 * std::log(2.0) + 1e-9;
    cfg.population_cap = 1'000'000;
    const int runs = 4000;
    std::vector<std::vector<double>> at(5);
    for (int i = 0; i < runs; ++i) {
        Rng rng(derive_seed(20, i));
        const auto tr = run_trajectory(cfg, rng);
        for (int k = 1; k <= 4; ++k) at[k].push_back(double(tr.population_at(k * std::log(2.0) + 1e-12)));
    }
    for (int k = 1; k <= 4; ++k) {
        CAPTURE(k);
        const auto ms = oracle::mean_se(at[k]);
        CHECK(std::abs(ms.mean - std::pow(2.0, k)) < 4 * ms.se);
    }
}

TEST_CASE("trajectory events are ordered and consistent; cap terminates cleanly") {
    for (Model m : {Model::Dispersion, Model::Global, Model::Fixed}) {
        TrajectoryConfig cfg;
        cfg.model = m;
        cfg.env = env(RateLaw::two_point(0.0, 3.0, 0.3), ClockLaw::exponential(0.5));
        cfg.fixed_rate = 2.0;
        cfg.horizon = 1e6;
        cfg.population_cap = 200;
        bool capped = false;
        for (int i = 0; i < 200; ++i) {
            Rng rng(derive_seed(21, i));
            const auto tr = run_trajectory(cfg, rng);
            std::uint64_t n = tr.initial_population;
            double last = 0.0;
            for (const auto& e : tr.events) {
                REQUIRE(e.time >= last);
                REQUIRE(static_cast<std::int64_t>(e.population_after) == static_cast<std::int64_t>(n) + e.delta);
                n = e.population_after;
                last = e.time;
            }
            if (tr.termination == Termination::CapReached) {
                capped = true;
                CHECK(n == 200);
            } else {
                CHECK(tr.termination == Termination::Extinct);
                CHECK(n == 0);
            }
        }
        CHECK(capped);
    }
}
