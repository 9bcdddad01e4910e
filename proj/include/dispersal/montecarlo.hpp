#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dispersal/analytics.hpp"
#include "dispersal/processes.hpp"

namespace dispersal {

struct Caps {
    std::uint64_t max_steps = kDefaultMaxSteps;  // generations or epochs
    std::uint64_t population_cap = kDefaultPopulationCap;
    double horizon = kDefaultHorizon;  // fixed model only
    friend bool operator==(const Caps&, const Caps&) = default;
};

/// Everything needed to run one trial of any of the three models.
struct ModelConfig {
    Model model = Model::Dispersion;
    EnvironmentLaw env;
    std::optional<double> fixed_rate;  // fixed model; defaults to E(Λ)
    Caps caps;

    double effective_fixed_rate() const { return fixed_rate ? *fixed_rate : mean_rate(env.rate); }
};

TrialOutcome run_trial(const ModelConfig& cfg, Rng& rng);

/// Survives/Dies for the model under its own criterion: m > 1 for the
/// dispersion model, E(Λ) > 1 for the global model, λ > 1 for the fixed
/// chain.
Prediction predicted_verdict(const ModelConfig& cfg, const MValue& m);

struct WilsonInterval {
    double low = 0.0;
    double high = 1.0;
};

inline constexpr double kZ95 = 1.959963984540054;

WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = kZ95);

struct SurvivalEstimate {
    std::uint64_t n_trials = 0;
    std::uint64_t n_survived = 0;
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 1.0;
    std::uint64_t master_seed = 0;
    Caps caps;

    friend bool operator==(const SurvivalEstimate&, const SurvivalEstimate&) = default;
};

/// Runs n_trials independent trials; trial i draws from
/// Rng(derive_seed(master_seed, i)). Results do not depend on `threads`
/// (0 picks the hardware concurrency).
SurvivalEstimate estimate_survival(const ModelConfig& cfg, std::uint64_t n_trials, std::uint64_t master_seed,
                                   unsigned threads = 0);

enum class SweepParam { A, P, Lambda1, Lambda2, T0 };

SweepParam parse_sweep_param(std::string_view text);
std::string to_string(SweepParam param);

/// Copy of `base` with one law parameter replaced. Throws
/// std::invalid_argument when the parameter does not apply to the base law or
/// the new value breaks a law invariant.
ModelConfig with_parameter(const ModelConfig& base, SweepParam param, double value);

struct SweepRow {
    SweepParam param = SweepParam::A;
    double value = 0.0;
    double m = 0.0;
    Prediction predicted = Prediction::Dies;
    SurvivalEstimate estimate;
    std::uint64_t seed = 0;               // per-point master seed
    std::optional<std::string> rejected;  // diagnostic for an invalid grid value

    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

/// Master seed of the grid point `value` for `param`. Keyed on the value's
/// bit pattern, so adding or removing grid points never changes the trials
/// of the others.
std::uint64_t sweep_point_seed(std::uint64_t master_seed, SweepParam param, double value);

/// One row per grid value, in grid order.
std::vector<SweepRow> sweep(const ModelConfig& base, SweepParam param, std::span<const double> grid,
                            std::uint64_t n_trials, std::uint64_t master_seed, unsigned threads = 0);

}  // namespace dispersal
