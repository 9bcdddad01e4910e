#include "dispersal/montecarlo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

namespace dispersal {

TrialOutcome run_trial(const ModelConfig& cfg, Rng& rng) {
    switch (cfg.model) {
        case Model::Dispersion:
            return run_dispersion_trial({cfg.env, cfg.caps.max_steps, cfg.caps.population_cap}, rng);
        case Model::Global:
            return run_global_trial({cfg.env, cfg.caps.max_steps, cfg.caps.population_cap}, rng);
        case Model::Fixed:
            return run_fixed_trial({cfg.effective_fixed_rate(), cfg.caps.horizon, cfg.caps.population_cap}, rng);
    }
    throw std::logic_error("unreachable model");
}

Prediction predicted_verdict(const ModelConfig& cfg, const MValue& m) {
    switch (cfg.model) {
        case Model::Dispersion: return classify_dispersion(m);
        case Model::Global: return classify_global(cfg.env);
        case Model::Fixed: return cfg.effective_fixed_rate() > 1.0 ? Prediction::Survives : Prediction::Dies;
    }
    throw std::logic_error("unreachable model");
}

WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
    if (trials == 0) throw std::invalid_argument("wilson_interval needs at least one trial");
    if (successes > trials) throw std::invalid_argument("wilson_interval: successes exceed trials");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    WilsonInterval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
    ci.low = std::min(ci.low, p);
    ci.high = std::max(ci.high, p);
    return ci;
}

namespace {

void validate_model(const ModelConfig& cfg) {
    switch (cfg.model) {
        case Model::Dispersion: validate(DispersionConfig{cfg.env, cfg.caps.max_steps, cfg.caps.population_cap}); break;
        case Model::Global: validate(GlobalConfig{cfg.env, cfg.caps.max_steps, cfg.caps.population_cap}); break;
        case Model::Fixed:
            validate(FixedConfig{cfg.effective_fixed_rate(), cfg.caps.horizon, cfg.caps.population_cap});
            break;
    }
}

}  // namespace

SurvivalEstimate estimate_survival(const ModelConfig& cfg, std::uint64_t n_trials, std::uint64_t master_seed,
                                   unsigned threads) {
    if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
    validate_model(cfg);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, n_trials));

    std::vector<unsigned char> survived(n_trials, 0);
    auto work = [&](unsigned worker) {
        for (std::uint64_t i = worker; i < n_trials; i += threads) {
            Rng rng(derive_seed(master_seed, i));
            survived[i] = run_trial(cfg, rng).verdict == Verdict::SurvivedToCap;
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    }

    SurvivalEstimate est;
    est.n_trials = n_trials;
    est.n_survived = static_cast<std::uint64_t>(std::count(survived.begin(), survived.end(), 1));
    est.point = static_cast<double>(est.n_survived) / static_cast<double>(n_trials);
    const WilsonInterval ci = wilson_interval(est.n_survived, n_trials);
    est.ci_low = ci.low;
    est.ci_high = ci.high;
    est.master_seed = master_seed;
    est.caps = cfg.caps;
    return est;
}

SweepParam parse_sweep_param(std::string_view text) {
    if (text == "a") return SweepParam::A;
    if (text == "p") return SweepParam::P;
    if (text == "l1" || text == "lambda1") return SweepParam::Lambda1;
    if (text == "l2" || text == "lambda2") return SweepParam::Lambda2;
    if (text == "t0") return SweepParam::T0;
    throw std::invalid_argument(fmt::format("'{}': unknown sweep parameter (expected a, p, l1, l2 or t0)", text));
}

std::string to_string(SweepParam param) {
    switch (param) {
        case SweepParam::A: return "a";
        case SweepParam::P: return "p";
        case SweepParam::Lambda1: return "l1";
        case SweepParam::Lambda2: return "l2";
        case SweepParam::T0: return "t0";
    }
    return "a";
}

ModelConfig with_parameter(const ModelConfig& base, SweepParam param, double value) {
    ModelConfig cfg = base;
    const auto* two_point = std::get_if<TwoPointRate>(&base.env.rate.variant());
    auto need_two_point = [&] {
        if (two_point == nullptr) {
            throw std::invalid_argument(
                fmt::format("sweep over {} needs a two_point rate law, got {}", to_string(param), to_string(base.env.rate)));
        }
    };
    switch (param) {
        case SweepParam::A:
            if (!std::holds_alternative<ExponentialClock>(base.env.clock.variant())) {
                throw std::invalid_argument(
                    fmt::format("sweep over a needs an exp clock law, got {}", to_string(base.env.clock)));
            }
            cfg.env.clock = ClockLaw::exponential(value);
            break;
        case SweepParam::T0:
            if (!std::holds_alternative<DeterministicClock>(base.env.clock.variant())) {
                throw std::invalid_argument(
                    fmt::format("sweep over t0 needs a det clock law, got {}", to_string(base.env.clock)));
            }
            cfg.env.clock = ClockLaw::deterministic(value);
            break;
        case SweepParam::P:
            need_two_point();
            cfg.env.rate = RateLaw::two_point(two_point->low, two_point->high, value);
            break;
        case SweepParam::Lambda1:
            need_two_point();
            cfg.env.rate = RateLaw::two_point(value, two_point->high, two_point->p_low);
            break;
        case SweepParam::Lambda2:
            need_two_point();
            cfg.env.rate = RateLaw::two_point(two_point->low, value, two_point->p_low);
            break;
    }
    validate_model(cfg);
    return cfg;
}

std::uint64_t sweep_point_seed(std::uint64_t master_seed, SweepParam param, double value) {
    return derive_seed(derive_seed(master_seed, static_cast<std::uint64_t>(param)),
                       std::bit_cast<std::uint64_t>(value));
}

std::vector<SweepRow> sweep(const ModelConfig& base, SweepParam param, std::span<const double> grid,
                            std::uint64_t n_trials, std::uint64_t master_seed, unsigned threads) {
    if (grid.empty()) throw std::invalid_argument("sweep grid is empty");
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (double value : grid) {
        SweepRow row;
        row.param = param;
        row.value = value;
        row.seed = sweep_point_seed(master_seed, param, value);
        try {
            const ModelConfig cfg = with_parameter(base, param, value);
            const MValue m = criterion_m(cfg.env, MMethod::Auto, kDefaultMonteCarloDraws, row.seed);
            row.m = m.value;
            row.predicted = predicted_verdict(cfg, m);
            row.estimate = estimate_survival(cfg, n_trials, row.seed, threads);
        } catch (const std::invalid_argument& e) {
            row.m = std::numeric_limits<double>::quiet_NaN();
            row.predicted = Prediction::NotApplicable;
            row.estimate = SurvivalEstimate{};
            row.estimate.n_trials = 0;
            row.estimate.ci_high = 0.0;
            row.estimate.master_seed = row.seed;
            row.estimate.caps = base.caps;
            row.rejected = fmt::format("{}={}: {}", to_string(param), value, e.what());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace dispersal
