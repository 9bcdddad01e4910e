#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dispersal/bd_exact.hpp"
#include "dispersal/env_model.hpp"

namespace dispersal {

enum class Model { Dispersion, Global, Fixed };

Model parse_model(std::string_view text);
std::string to_string(Model model);

inline constexpr std::uint64_t kDefaultMaxSteps = 100;
inline constexpr std::uint64_t kDefaultPopulationCap = 100'000;
inline constexpr double kDefaultHorizon = 200.0;

/// Each survivor of a collapsing colony founds its own colony with a freshly
/// drawn environment.
struct DispersionConfig {
    EnvironmentLaw env;
    std::uint64_t max_generations = kDefaultMaxSteps;
    std::uint64_t population_cap = kDefaultPopulationCap;
};

/// One population whose birth rate is redrawn for everyone at each switch.
/// The coupling must be Independent.
struct GlobalConfig {
    EnvironmentLaw env;
    std::uint64_t max_epochs = kDefaultMaxSteps;
    std::uint64_t population_cap = kDefaultPopulationCap;
};

/// Classical chain with a fixed birth rate.
struct FixedConfig {
    double rate = 1.0;
    double horizon = kDefaultHorizon;
    std::uint64_t population_cap = kDefaultPopulationCap;
};

void validate(const DispersionConfig& cfg);
void validate(const GlobalConfig& cfg);
void validate(const FixedConfig& cfg);

enum class Verdict { Extinct, SurvivedToCap };

std::string to_string(Verdict verdict);

struct TrialOutcome {
    Verdict verdict = Verdict::Extinct;
    /// Generation (dispersion), epoch (global) or number of jump events (fixed)
    /// at which the trial stopped.
    std::uint64_t stop_step = 0;
    /// Population when the trial stopped. When the cap stops a generation or
    /// epoch early this is the partial count that crossed the cap.
    std::uint64_t stop_population = 0;
    std::uint64_t peak_population = 0;

    friend bool operator==(const TrialOutcome&, const TrialOutcome&) = default;
};

TrialOutcome run_dispersion_trial(const DispersionConfig& cfg, Rng& rng);
TrialOutcome run_global_trial(const GlobalConfig& cfg, Rng& rng);
TrialOutcome run_fixed_trial(const FixedConfig& cfg, Rng& rng);

/// First generation size V_1 of the dispersion process: one environment
/// draw followed by one offspring draw.
std::uint64_t sample_first_generation(const EnvironmentLaw& env, Rng& rng);

struct TrajectoryConfig {
    Model model = Model::Dispersion;
    EnvironmentLaw env;
    double fixed_rate = 1.0;  // Fixed model only
    double horizon = kDefaultHorizon;
    std::uint64_t population_cap = kDefaultPopulationCap;
};

/// A sample path in absolute time. The path starts from one individual at
/// time 0; `events` holds the births and deaths that follow. Colony founding
/// and environment switches leave the population unchanged and are not
/// events.
struct Trajectory {
    std::uint64_t initial_population = 1;
    std::vector<TrajectoryEvent> events;
    Termination termination = Termination::Horizon;
    double end_time = 0.0;

    /// Population at absolute time t (right-continuous).
    std::uint64_t population_at(double t) const;
};

Trajectory run_trajectory(const TrajectoryConfig& cfg, Rng& rng);

std::string to_string(Termination termination);

}  // namespace dispersal
