#include "dispersal/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "dispersal/processes.hpp"

namespace dispersal {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_independent(const EnvironmentLaw& env, const char* what) {
    if (env.coupling != Coupling::Independent) {
        throw std::invalid_argument(fmt::format("{} requires independent coupling (got {})", what,
                                                to_string(env.coupling)));
    }
}

// ---- closed forms ---------------------------------------------------------

// E[e^{(λ-1)τ}] for a fixed λ.
double clock_mgf_closed(double rate, const ClockLaw& clock) {
    return std::visit(overloaded{
                          [rate](const ExponentialClock& c) { return c.rate / (c.rate - (rate - 1.0)); },
                          [rate](const DeterministicClock& c) { return std::exp((rate - 1.0) * c.time); },
                          [rate](const DiscreteClock& c) {
                              double s = 0.0;
                              for (const Atom& a : c.atoms) s += a.prob * std::exp((rate - 1.0) * a.value);
                              return s;
                          },
                      },
                      clock.variant());
}

// E[e^{(λ-1)t}] for λ ~ Uniform(lo, hi), fixed t.
double uniform_rate_mgf_at(double lo, double hi, double t) {
    const double width = hi - lo;
    const double x = width * t;
    const double ratio = x == 0.0 ? 1.0 : std::expm1(x) / x;
    return std::exp((lo - 1.0) * t) * ratio;
}

double closed_form_m(const EnvironmentLaw& env) {
    const auto* uniform = std::get_if<UniformRate>(&env.rate.variant());
    if (uniform == nullptr) {
        double m = 0.0;
        for (const Atom& a : env.rate.atoms()) {
            if (a.prob > 0.0) m += a.prob * clock_mgf_closed(a.value, env.clock);
        }
        return m;
    }
    const double lo = uniform->lo;
    const double hi = uniform->hi;
    return std::visit(overloaded{
                          [&](const ExponentialClock& c) {
                              const double a = c.rate;
                              if (hi == lo) return a / (a + 1.0 - lo);
                              // (1/(hi-lo)) ∫ a/(a+1-λ) dλ
                              return a / (hi - lo) * std::log1p((hi - lo) / (a + 1.0 - hi));
                          },
                          [&](const DeterministicClock& c) { return uniform_rate_mgf_at(lo, hi, c.time); },
                          [&](const DiscreteClock& c) {
                              double s = 0.0;
                              for (const Atom& a : c.atoms) s += a.prob * uniform_rate_mgf_at(lo, hi, a.value);
                              return s;
                          },
                      },
                      env.clock.variant());
}

// ---- quadrature -----------------------------------------------------------

using Integrator = boost::math::quadrature::gauss_kronrod<double, 31>;
constexpr unsigned kMaxDepth = 30;
constexpr double kRelativeTolerance = 1e-14;

double checked(double value, double error) {
    if (!(error <= kQuadratureTolerance)) {
        throw std::runtime_error(
            fmt::format("quadrature did not reach tolerance {} (error estimate {})", kQuadratureTolerance, error));
    }
    return value;
}

// E[e^{(λ-1)τ}] for a fixed λ, integrating over the clock density.
double clock_mgf_quadrature(double rate, const ClockLaw& clock) {
    return std::visit(overloaded{
                          [rate](const ExponentialClock& c) {
                              const double a = c.rate;
                              auto density_term = [a, rate](double t) { return a * std::exp((rate - 1.0 - a) * t); };
                              double error = 0.0;
                              thread_local boost::math::quadrature::exp_sinh<double> half_line;
                              const double v = half_line.integrate(density_term, kRelativeTolerance, &error);
                              return checked(v, error);
                          },
                          [rate](const DeterministicClock& c) { return std::exp((rate - 1.0) * c.time); },
                          [rate](const DiscreteClock& c) {
                              double s = 0.0;
                              for (const Atom& a : c.atoms) s += a.prob * std::exp((rate - 1.0) * a.value);
                              return s;
                          },
                      },
                      clock.variant());
}

double quadrature_m(const EnvironmentLaw& env) {
    const auto* uniform = std::get_if<UniformRate>(&env.rate.variant());
    if (uniform == nullptr) {
        double m = 0.0;
        for (const Atom& a : env.rate.atoms()) {
            if (a.prob > 0.0) m += a.prob * clock_mgf_quadrature(a.value, env.clock);
        }
        return m;
    }
    if (uniform->hi == uniform->lo) return clock_mgf_quadrature(uniform->lo, env.clock);
    const double width = uniform->hi - uniform->lo;
    auto inner = [&](double rate) { return clock_mgf_quadrature(rate, env.clock) / width; };
    double error = 0.0;
    const double v = Integrator::integrate(inner, uniform->lo, uniform->hi, kMaxDepth, kRelativeTolerance, &error);
    return checked(v, error);
}

MValue monte_carlo_m(const EnvironmentLaw& env, std::uint64_t draws, std::uint64_t seed) {
    if (draws < 2) throw std::invalid_argument("monte carlo m needs at least 2 draws");
    Rng rng(seed);
    // Welford accumulation
    double mean = 0.0;
    double m2 = 0.0;
    for (std::uint64_t i = 0; i < draws; ++i) {
        const Environment e = sample_env(env, rng);
        const double y = std::exp((e.rate - 1.0) * e.time);
        const double delta = y - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (y - mean);
    }
    const double variance = m2 / static_cast<double>(draws - 1);
    return {mean, std::sqrt(variance / static_cast<double>(draws)), MMethod::MonteCarlo};
}

// ---- generating-function fixed point ---------------------------------------

struct Histogram {
    std::vector<double> values;  // ascending
    std::vector<double> probs;
};

double pgf(const Histogram& h, double s) {
    double f = 0.0;
    for (std::size_t k = 0; k < h.values.size(); ++k) {
        const double term = std::pow(s, h.values[k]);
        if (term < 1e-300) break;  // values ascending, s < 1
        f += h.probs[k] * term;
    }
    return f;
}

double histogram_mean(const Histogram& h) {
    long double m = 0.0L;
    for (std::size_t k = 0; k < h.values.size(); ++k) m += static_cast<long double>(h.values[k]) * h.probs[k];
    return static_cast<double>(m);
}

constexpr double kFixedPointTolerance = 1e-12;
constexpr std::uint64_t kMaxFixedPointIterations = 1'000'000;

std::pair<double, std::uint64_t> smallest_fixed_point(const Histogram& h) {
    if (histogram_mean(h) <= 1.0) return {1.0, 0};
    double q = 0.0;
    for (std::uint64_t it = 1; it <= kMaxFixedPointIterations; ++it) {
        const double next = pgf(h, q);
        if (std::abs(next - q) < kFixedPointTolerance) return {next, it};
        q = next;
    }
    return {q, kMaxFixedPointIterations};
}

}  // namespace

MMethod parse_m_method(std::string_view text) {
    if (text == "auto") return MMethod::Auto;
    if (text == "closed_form") return MMethod::ClosedForm;
    if (text == "quadrature") return MMethod::Quadrature;
    if (text == "monte_carlo") return MMethod::MonteCarlo;
    throw std::invalid_argument(
        fmt::format("'{}': unknown method (expected auto, closed_form, quadrature or monte_carlo)", text));
}

std::string to_string(MMethod method) {
    switch (method) {
        case MMethod::Auto: return "auto";
        case MMethod::ClosedForm: return "closed_form";
        case MMethod::Quadrature: return "quadrature";
        case MMethod::MonteCarlo: return "monte_carlo";
    }
    return "auto";
}

bool m_diverges(const EnvironmentLaw& env) {
    const auto* exp_clock = std::get_if<ExponentialClock>(&env.clock.variant());
    if (exp_clock == nullptr) return false;
    const double tail_rate =
        env.coupling == Coupling::Antimonotone ? env.rate.min_support() : env.rate.max_support();
    return tail_rate >= exp_clock->rate + 1.0;
}

MValue criterion_m(const EnvironmentLaw& env, MMethod method, std::uint64_t mc_draws, std::uint64_t mc_seed) {
    if (method == MMethod::Auto) {
        method = env.coupling == Coupling::Independent ? MMethod::ClosedForm : MMethod::MonteCarlo;
    }
    if (method == MMethod::ClosedForm) require_independent(env, "closed_form m");
    if (method == MMethod::Quadrature) require_independent(env, "quadrature m");
    if (m_diverges(env)) return {kInf, std::nullopt, method};
    switch (method) {
        case MMethod::ClosedForm: return {closed_form_m(env), std::nullopt, method};
        case MMethod::Quadrature: return {quadrature_m(env), std::nullopt, method};
        case MMethod::MonteCarlo: return monte_carlo_m(env, mc_draws, mc_seed);
        case MMethod::Auto: break;
    }
    throw std::logic_error("unreachable method");
}

std::optional<double> critical_a(double low, double high, double p_low) {
    if (!(0.0 <= low && low <= 1.0 && 1.0 < high && std::isfinite(high))) {
        throw std::invalid_argument(
            fmt::format("critical_a needs 0 <= low <= 1 < high, got low={} high={}", low, high));
    }
    if (!(0.0 < p_low && p_low < 1.0)) {
        throw std::invalid_argument(fmt::format("critical_a needs 0 < p < 1, got {}", p_low));
    }
    const double mean = p_low * low + (1.0 - p_low) * high;
    if (mean >= 1.0) return std::nullopt;
    return (1.0 - low) * (1.0 - high) / (mean - 1.0);
}

std::string to_string(Prediction prediction) {
    switch (prediction) {
        case Prediction::Survives: return "Survives";
        case Prediction::Dies: return "Dies";
        case Prediction::Inconclusive: return "Inconclusive";
        case Prediction::NotApplicable: return "NotApplicable";
    }
    return "NotApplicable";
}

Prediction parse_prediction(std::string_view text) {
    if (text == "Survives") return Prediction::Survives;
    if (text == "Dies") return Prediction::Dies;
    if (text == "Inconclusive") return Prediction::Inconclusive;
    if (text == "NotApplicable") return Prediction::NotApplicable;
    throw std::invalid_argument(fmt::format("'{}': unknown verdict", text));
}

Prediction classify_global(const EnvironmentLaw& env) {
    if (env.coupling != Coupling::Independent) return Prediction::NotApplicable;
    // Integrability: E(τ) and E(Λ) finite. Every law in the menu guarantees it.
    const double e_rate = mean_rate(env.rate);
    const double e_clock = mean_clock(env.clock);
    if (!std::isfinite(e_rate) || !std::isfinite(e_clock)) {
        throw std::logic_error("environment law violates the finite-mean hypotheses");
    }
    return e_rate > 1.0 ? Prediction::Survives : Prediction::Dies;
}

Prediction classify_dispersion(const MValue& m) {
    if (m.std_error && std::isfinite(m.value) && std::abs(m.value - 1.0) < 3.0 * *m.std_error) {
        return Prediction::Inconclusive;
    }
    return m.value > 1.0 ? Prediction::Survives : Prediction::Dies;
}

double jensen_lower_bound(const EnvironmentLaw& env) {
    require_independent(env, "jensen_lower_bound");
    return std::exp((mean_rate(env.rate) - 1.0) * mean_clock(env.clock));
}

CriterionReport criterion_report(const EnvironmentLaw& env, MMethod method, std::uint64_t mc_draws,
                                 std::uint64_t mc_seed) {
    CriterionReport r;
    r.m = criterion_m(env, method, mc_draws, mc_seed);
    r.mean_rate = mean_rate(env.rate);
    r.mean_clock = mean_clock(env.clock);
    if (env.coupling == Coupling::Independent) r.jensen_lower_bound = jensen_lower_bound(env);
    if (const auto* tp = std::get_if<TwoPointRate>(&env.rate.variant())) {
        if (tp->low <= 1.0 && tp->high > 1.0 && tp->p_low > 0.0 && tp->p_low < 1.0) {
            r.a_critical = critical_a(tp->low, tp->high, tp->p_low);
        }
    }
    r.dispersion_verdict = classify_dispersion(r.m);
    r.global_verdict = classify_global(env);
    if (r.global_verdict == Prediction::NotApplicable) {
        r.global_reason = "global model assumes independent birth rates and clocks";
    }
    return r;
}

ExtinctionEstimate gw_extinction_prob(const EnvironmentLaw& env, std::uint64_t n_samples, Rng& rng,
                                      unsigned bootstrap_reps) {
    if (n_samples < kMinExtinctionSamples) {
        throw std::invalid_argument(
            fmt::format("gw_extinction_prob needs at least {} samples, got {}", kMinExtinctionSamples, n_samples));
    }
    std::vector<std::uint64_t> draws(n_samples);
    for (auto& d : draws) d = sample_first_generation(env, rng);

    std::vector<std::uint64_t> distinct = draws;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<std::size_t> slot(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        slot[i] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), draws[i]) -
                                           distinct.begin());
    }

    auto histogram_from = [&](const std::vector<std::uint64_t>& counts) {
        Histogram h;
        for (std::size_t k = 0; k < distinct.size(); ++k) {
            if (counts[k] == 0) continue;
            h.values.push_back(static_cast<double>(distinct[k]));
            h.probs.push_back(static_cast<double>(counts[k]) / static_cast<double>(n_samples));
        }
        return h;
    };

    std::vector<std::uint64_t> counts(distinct.size(), 0);
    for (std::size_t s : slot) ++counts[s];
    const Histogram full = histogram_from(counts);

    ExtinctionEstimate out;
    out.empirical_mean = histogram_mean(full);
    std::tie(out.q, out.iterations) = smallest_fixed_point(full);
    if (out.empirical_mean <= 1.0 || bootstrap_reps < 2) return out;

    std::vector<double> replicates;
    replicates.reserve(bootstrap_reps);
    for (unsigned b = 0; b < bootstrap_reps; ++b) {
        std::fill(counts.begin(), counts.end(), 0);
        for (std::uint64_t i = 0; i < n_samples; ++i) {
            const auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n_samples));
            ++counts[slot[std::min<std::size_t>(pick, n_samples - 1)]];
        }
        replicates.push_back(smallest_fixed_point(histogram_from(counts)).first);
    }
    const double mean = std::accumulate(replicates.begin(), replicates.end(), 0.0) / replicates.size();
    double ss = 0.0;
    for (double r : replicates) ss += (r - mean) * (r - mean);
    out.std_error = std::sqrt(ss / static_cast<double>(replicates.size() - 1));
    return out;
}

}  // namespace dispersal
