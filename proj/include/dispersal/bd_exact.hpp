#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "dispersal/rng.hpp"

namespace dispersal {

/// Population counts saturate here instead of wrapping. Far above any
/// population cap; only reached when e^{(λ-1)t} itself is astronomically large.
inline constexpr std::uint64_t kSaturatedCount = std::uint64_t{1} << 62;

/// Law at time t of a linear birth-death chain (birth rate λ per
/// individual, death rate 1) started from a single individual:
///   P(0) = alpha,  P(n) = (1 - alpha)(1 - beta) beta^{n-1}  for n >= 1.
///
/// The complements are stored separately because 1 - beta suffers total
/// cancellation when (λ-1)t is large.
struct OffspringLaw {
    double rate = 0.0;
    double time = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double one_minus_alpha = 1.0;
    double one_minus_beta = 1.0;
    double mean = 1.0;  // e^{(λ-1)t}

    /// P(population = n).
    double pmf(std::uint64_t n) const;
};

/// |(λ-1)t| below this switches to a series for (e^{(λ-1)t} - 1)/(λ-1).
inline constexpr double kSeriesSwitchover = 1e-6;

OffspringLaw transient_law(double rate, double t);

/// 0 with probability alpha, else 1 + Geometric(1 - beta) failures.
std::uint64_t sample_offspring(const OffspringLaw& law, Rng& rng);

/// Sum of n0 independent draws from transient_law(rate, t).
std::uint64_t sample_population_at(double rate, double t, std::uint64_t n0, Rng& rng);

struct TrajectoryEvent {
    double time = 0.0;
    int delta = 0;  // +1 birth, -1 death
    std::uint64_t population_after = 0;
};

enum class Termination { Horizon, Extinct, CapReached };

struct GillespieResult {
    std::uint64_t population = 0;
    double time = 0.0;  // time of the stopping event, or the horizon
    Termination termination = Termination::Horizon;
    std::uint64_t n_events = 0;
    std::uint64_t peak_population = 0;
    std::vector<TrajectoryEvent> events;  // filled only when recording
};

/// Event-by-event simulation of the linear chain from n0 individuals until
/// the horizon, extinction, or population >= cap. Requires cap >= n0.
GillespieResult gillespie_until(double rate, double horizon, std::uint64_t n0, std::uint64_t cap, Rng& rng,
                                bool record_events = false);

}  // namespace dispersal
