#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dispersal/rng.hpp"

namespace dispersal {

/// One support point of a finite discrete law.
struct Atom {
    double value = 0.0;
    double prob = 0.0;
    friend bool operator==(const Atom&, const Atom&) = default;
};

// Birth-rate law variants. Construct through RateLaw's factories so that
// invariants hold; the raw structs are exposed for std::visit.
struct PointRate {
    double rate;
    friend bool operator==(const PointRate&, const PointRate&) = default;
};
struct TwoPointRate {
    double low;
    double high;
    double p_low;  // probability of `low`
    friend bool operator==(const TwoPointRate&, const TwoPointRate&) = default;
};
struct DiscreteRate {
    std::vector<Atom> atoms;  // sorted by value
    friend bool operator==(const DiscreteRate&, const DiscreteRate&) = default;
};
struct UniformRate {
    double lo;
    double hi;
    friend bool operator==(const UniformRate&, const UniformRate&) = default;
};

/// Law of the per-individual birth rate.
class RateLaw {
public:
    using Variant = std::variant<PointRate, TwoPointRate, DiscreteRate, UniformRate>;

    /// point:1
    RateLaw() : law_(PointRate{1.0}) {}

    static RateLaw point(double rate);
    /// Reorders so that low <= high, mapping p to 1 - p on a swap.
    static RateLaw two_point(double first, double second, double p_first);
    static RateLaw discrete(std::vector<Atom> atoms);
    static RateLaw uniform(double lo, double hi);

    const Variant& variant() const noexcept { return law_; }

    double mean() const;
    double min_support() const;
    double max_support() const;
    /// Inverse CDF on (0, 1).
    double quantile(double u) const;
    /// Support points with probabilities; empty for UniformInterval.
    std::vector<Atom> atoms() const;
    bool is_discrete() const noexcept { return !std::holds_alternative<UniformRate>(law_); }
    bool is_degenerate() const;

    friend bool operator==(const RateLaw&, const RateLaw&) = default;

private:
    explicit RateLaw(Variant v) : law_(std::move(v)) {}
    Variant law_;
};

struct ExponentialClock {
    double rate;
    friend bool operator==(const ExponentialClock&, const ExponentialClock&) = default;
};
struct DeterministicClock {
    double time;
    friend bool operator==(const DeterministicClock&, const DeterministicClock&) = default;
};
struct DiscreteClock {
    std::vector<Atom> atoms;  // sorted by value
    friend bool operator==(const DiscreteClock&, const DiscreteClock&) = default;
};

/// Law of the colony collapse / environment switch clock. Every variant has
/// a finite mean.
class ClockLaw {
public:
    using Variant = std::variant<ExponentialClock, DeterministicClock, DiscreteClock>;

    /// exp:1
    ClockLaw() : law_(ExponentialClock{1.0}) {}

    static ClockLaw exponential(double rate);
    static ClockLaw deterministic(double time);
    static ClockLaw discrete(std::vector<Atom> atoms);

    const Variant& variant() const noexcept { return law_; }

    double mean() const;
    double quantile(double u) const;
    std::vector<Atom> atoms() const;  // empty for Exponential
    bool is_degenerate() const;

    friend bool operator==(const ClockLaw&, const ClockLaw&) = default;

private:
    explicit ClockLaw(Variant v) : law_(std::move(v)) {}
    Variant law_;
};

enum class Coupling { Independent, Comonotone, Antimonotone };

/// Joint law of one colony's environment (birth rate, collapse clock).
struct EnvironmentLaw {
    RateLaw rate;
    ClockLaw clock;
    Coupling coupling = Coupling::Independent;

    friend bool operator==(const EnvironmentLaw&, const EnvironmentLaw&) = default;
};

struct Environment {
    double rate;
    double time;
};

Environment sample_env(const EnvironmentLaw& law, Rng& rng);

inline double mean_rate(const RateLaw& law) { return law.mean(); }
inline double mean_clock(const ClockLaw& law) { return law.mean(); }

// Canonical text forms: point:2, two_point:0.5,1.5,0.8, discrete:0:0.3,2:0.7,
// uniform:0,2 for rates; exp:1.5, det:0.6931, discrete:1:0.5,3:0.5 for clocks.
// Parsers throw std::invalid_argument with a one-line diagnostic.
RateLaw parse_rate_law(std::string_view text);
ClockLaw parse_clock_law(std::string_view text);
Coupling parse_coupling(std::string_view text);
std::string to_string(const RateLaw& law);
std::string to_string(const ClockLaw& law);
std::string to_string(Coupling coupling);

}  // namespace dispersal
