#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "dispersal/env_model.hpp"
#include "dispersal/rng.hpp"

namespace dispersal {

enum class MMethod { Auto, ClosedForm, Quadrature, MonteCarlo };

MMethod parse_m_method(std::string_view text);
std::string to_string(MMethod method);

inline constexpr std::uint64_t kDefaultMonteCarloDraws = 1'000'000;
inline constexpr double kQuadratureTolerance = 1e-10;

/// Value of m = E[exp((Λ-1)τ)], the mean of the embedded Galton-Watson
/// offspring count. `value` may be +inf.
struct MValue {
    double value = 0.0;
    std::optional<double> std_error;  // Monte Carlo only
    MMethod method = MMethod::ClosedForm;
};

/// True when m = +inf. Decided from the law parameters alone: only an
/// exponential clock can make m diverge, and it does so exactly when the
/// birth rate paired with the clock's upper tail reaches a + 1.
bool m_diverges(const EnvironmentLaw& env);

/// ClosedForm and Quadrature require Independent coupling; MonteCarlo works
/// for every coupling. Auto picks ClosedForm for Independent laws and
/// MonteCarlo otherwise. A divergent m is returned as +inf by every method.
MValue criterion_m(const EnvironmentLaw& env, MMethod method = MMethod::Auto,
                   std::uint64_t mc_draws = kDefaultMonteCarloDraws, std::uint64_t mc_seed = kDefaultSeed);

/// Critical exponential-clock rate for a two-point birth-rate law with
/// 0 <= low <= 1 < high: the dispersion model survives iff a < a_c.
/// Empty when E(Λ) >= 1 (survival for every a > 0).
std::optional<double> critical_a(double low, double high, double p_low);

enum class Prediction { Survives, Dies, Inconclusive, NotApplicable };

std::string to_string(Prediction prediction);
Prediction parse_prediction(std::string_view text);

/// Survives iff E(Λ) > 1; NotApplicable unless the coupling is Independent.
Prediction classify_global(const EnvironmentLaw& env);

/// Survives iff m > 1. Monte Carlo values within 3 standard errors of 1 are
/// Inconclusive.
Prediction classify_dispersion(const MValue& m);

/// exp(E(Λ-1) E(τ)) = exp(E ln b(τ,Λ)); a lower bound on m. Requires
/// Independent coupling.
double jensen_lower_bound(const EnvironmentLaw& env);

struct CriterionReport {
    MValue m;
    double mean_rate = 0.0;
    double mean_clock = 0.0;
    std::optional<double> jensen_lower_bound;  // absent for dependent couplings
    std::optional<double> a_critical;          // two-point laws with low <= 1 < high and E(Λ) < 1
    Prediction dispersion_verdict = Prediction::Dies;
    Prediction global_verdict = Prediction::Dies;
    std::string global_reason;  // set when global_verdict is NotApplicable
};

CriterionReport criterion_report(const EnvironmentLaw& env, MMethod method = MMethod::Auto,
                                 std::uint64_t mc_draws = kDefaultMonteCarloDraws,
                                 std::uint64_t mc_seed = kDefaultSeed);

struct ExtinctionEstimate {
    double q = 1.0;
    double std_error = 0.0;
    double empirical_mean = 0.0;
    std::uint64_t iterations = 0;
};

inline constexpr std::uint64_t kMinExtinctionSamples = 10'000;

/// Extinction probability of the dispersion process from the empirical
/// generating function of n_samples first-generation draws, iterated from 0
/// to its smallest fixed point. Standard error by bootstrap.
ExtinctionEstimate gw_extinction_prob(const EnvironmentLaw& env, std::uint64_t n_samples, Rng& rng,
                                      unsigned bootstrap_reps = 100);

}  // namespace dispersal
