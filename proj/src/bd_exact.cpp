#include "dispersal/bd_exact.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace dispersal {

double OffspringLaw::pmf(std::uint64_t n) const {
    if (n == 0) return alpha;
    if (beta == 0.0) return n == 1 ? one_minus_alpha : 0.0;
    return one_minus_alpha * one_minus_beta * std::exp(static_cast<double>(n - 1) * std::log(beta));
}

// With r = λ - 1 and x = r t the closed form is
//   alpha = (e^x - 1)/(λ e^x - 1),  beta = λ alpha.
// Two rearrangements keep every quantity finite and free of cancellation:
//   x > 0:  w = e^{-x};  D = r + (1 - w);
//           alpha = (1-w)/D, 1-alpha = r/D, beta = λ(1-w)/D, 1-beta = r w/D
//   x <= 0: g = (e^x - 1)/r (series t(1 + x/2 + x^2/6) when |x| < 1e-6);
//           D = λ g + 1;
//           alpha = g/D, 1-alpha = e^x/D, beta = λ g/D, 1-beta = 1/D
// The second form covers λ = 1 exactly (g = t, alpha = beta = t/(1+t)).
OffspringLaw transient_law(double rate, double t) {
    if (!(std::isfinite(rate) && rate >= 0.0) || !(std::isfinite(t) && t >= 0.0)) {
        throw std::invalid_argument(fmt::format("transient_law: need rate >= 0 and t >= 0, got ({}, {})", rate, t));
    }
    OffspringLaw law;
    law.rate = rate;
    law.time = t;
    if (t == 0.0) return law;

    const double r = rate - 1.0;
    const double x = r * t;
    law.mean = std::exp(x);

    if (x > kSeriesSwitchover) {
        const double w = std::exp(-x);
        const double one_minus_w = -std::expm1(-x);
        const double d = r + one_minus_w;
        law.alpha = one_minus_w / d;
        law.one_minus_alpha = r / d;
        law.beta = rate * one_minus_w / d;
        law.one_minus_beta = r * w / d;
    } else {
        const double g = std::abs(x) < kSeriesSwitchover ? t * (1.0 + x / 2.0 + x * x / 6.0) : std::expm1(x) / r;
        const double d = rate * g + 1.0;
        law.alpha = g / d;
        law.one_minus_alpha = law.mean / d;
        law.beta = rate * g / d;
        law.one_minus_beta = 1.0 / d;
    }

    law.alpha = std::clamp(law.alpha, 0.0, 1.0);
    law.one_minus_alpha = std::clamp(law.one_minus_alpha, 0.0, 1.0);
    law.beta = std::clamp(law.beta, 0.0, std::nextafter(1.0, 0.0));
    law.one_minus_beta = std::clamp(law.one_minus_beta, 0.0, 1.0);
    return law;
}

std::uint64_t sample_offspring(const OffspringLaw& law, Rng& rng) {
    if (law.alpha > 0.0 && rng.uniform() < law.alpha) return 0;
    if (law.beta == 0.0) return 1;
    if (law.one_minus_beta == 0.0) return kSaturatedCount;
    const double failures = std::floor(std::log(rng.uniform()) / std::log1p(-law.one_minus_beta));
    if (!(failures < static_cast<double>(kSaturatedCount - 1))) return kSaturatedCount;
    return 1 + static_cast<std::uint64_t>(failures);
}

std::uint64_t sample_population_at(double rate, double t, std::uint64_t n0, Rng& rng) {
    const OffspringLaw law = transient_law(rate, t);
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < n0; ++i) {
        total = std::min(total + sample_offspring(law, rng), kSaturatedCount);
    }
    return total;
}

GillespieResult gillespie_until(double rate, double horizon, std::uint64_t n0, std::uint64_t cap, Rng& rng,
                                bool record_events) {
    if (!(std::isfinite(rate) && rate >= 0.0) || !(horizon >= 0.0)) {
        throw std::invalid_argument("gillespie_until: need rate >= 0 and horizon >= 0");
    }
    if (cap < n0) {
        throw std::invalid_argument(fmt::format("gillespie_until: cap {} below initial population {}", cap, n0));
    }
    GillespieResult out;
    out.population = n0;
    out.peak_population = n0;
    if (n0 == 0) {
        out.termination = Termination::Extinct;
        return out;
    }
    if (n0 >= cap) {
        out.termination = Termination::CapReached;
        return out;
    }

    const double per_capita = rate + 1.0;
    const double p_birth = rate / per_capita;
    double now = 0.0;
    std::uint64_t n = n0;
    while (true) {
        const double dt = rng.exponential(static_cast<double>(n) * per_capita);
        if (now + dt > horizon) {
            out.time = horizon;
            out.termination = Termination::Horizon;
            break;
        }
        now += dt;
        const bool birth = rng.uniform() < p_birth;
        n = birth ? n + 1 : n - 1;
        ++out.n_events;
        out.peak_population = std::max(out.peak_population, n);
        if (record_events) out.events.push_back({now, birth ? 1 : -1, n});
        if (n == 0) {
            out.time = now;
            out.termination = Termination::Extinct;
            break;
        }
        if (n >= cap) {
            out.time = now;
            out.termination = Termination::CapReached;
            break;
        }
    }
    out.population = n;
    return out;
}

}  // namespace dispersal
