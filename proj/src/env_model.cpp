#include "dispersal/env_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace dispersal {
namespace {

constexpr double kProbTolerance = 1e-12;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

std::vector<Atom> validated_atoms(std::vector<Atom> atoms, bool strictly_positive, const char* what) {
    require(!atoms.empty(), fmt::format("{}: at least one atom is required", what));
    double total = 0.0;
    for (const Atom& a : atoms) {
        require(std::isfinite(a.value), fmt::format("{}: non-finite value", what));
        if (strictly_positive) {
            require(a.value > 0.0, fmt::format("{}: value {} must be > 0", what, a.value));
        } else {
            require(a.value >= 0.0, fmt::format("{}: value {} must be >= 0", what, a.value));
        }
        require(is_probability(a.prob), fmt::format("{}: probability {} outside [0,1]", what, a.prob));
        total += a.prob;
    }
    require(std::abs(total - 1.0) <= kProbTolerance,
            fmt::format("{}: probabilities sum to {:.17g}, expected 1", what, total));
    std::stable_sort(atoms.begin(), atoms.end(),
                     [](const Atom& x, const Atom& y) { return x.value < y.value; });
    return atoms;
}

double atoms_mean(const std::vector<Atom>& atoms) {
    double m = 0.0;
    for (const Atom& a : atoms) m += a.prob * a.value;
    return m;
}

double atoms_quantile(const std::vector<Atom>& atoms, double u) {
    double cum = 0.0;
    const Atom* last = nullptr;
    for (const Atom& a : atoms) {
        if (a.prob <= 0.0) continue;
        cum += a.prob;
        last = &a;
        if (u <= cum) return a.value;
    }
    return last->value;
}

bool atoms_degenerate(const std::vector<Atom>& atoms) {
    const Atom* first = nullptr;
    for (const Atom& a : atoms) {
        if (a.prob <= 0.0) continue;
        if (first == nullptr) {
            first = &a;
        } else if (a.value != first->value) {
            return false;
        }
    }
    return true;
}

// ---- text parsing ---------------------------------------------------------

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_number(std::string_view token, std::string_view context) {
    double value = 0.0;
    const char* begin = token.data();
    const char* end = token.data() + token.size();
    if (!token.empty() && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (token.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
        throw std::invalid_argument(
            fmt::format("'{}': '{}' is not a finite number", context, token));
    }
    return value;
}

std::pair<std::string_view, std::string_view> split_kind(std::string_view text) {
    const std::size_t colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw std::invalid_argument(fmt::format("'{}': expected <kind>:<parameters>", text));
    }
    return {text.substr(0, colon), text.substr(colon + 1)};
}

std::vector<double> parse_list(std::string_view params, std::size_t expected, std::string_view context) {
    const auto parts = split(params, ',');
    if (parts.size() != expected) {
        throw std::invalid_argument(
            fmt::format("'{}': expected {} comma-separated values, got {}", context, expected, parts.size()));
    }
    std::vector<double> values;
    for (auto p : parts) values.push_back(parse_number(p, context));
    return values;
}

std::vector<Atom> parse_atoms(std::string_view params, std::string_view context) {
    std::vector<Atom> atoms;
    for (auto item : split(params, ',')) {
        const auto vp = split(item, ':');
        if (vp.size() != 2) {
            throw std::invalid_argument(
                fmt::format("'{}': discrete atoms are written value:prob, got '{}'", context, item));
        }
        atoms.push_back({parse_number(vp[0], context), parse_number(vp[1], context)});
    }
    return atoms;
}

template <class F>
auto with_context(std::string_view text, F&& f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        if (msg.starts_with("'")) throw;
        throw std::invalid_argument(fmt::format("'{}': {}", text, msg));
    }
}

std::string fmt_num(double x) { return fmt::format("{:.15g}", x); }

std::string fmt_atoms(const std::vector<Atom>& atoms) {
    std::string out;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (i) out += ',';
        out += fmt_num(atoms[i].value) + ':' + fmt_num(atoms[i].prob);
    }
    return out;
}

}  // namespace

// ---- RateLaw --------------------------------------------------------------

RateLaw RateLaw::point(double rate) {
    require(std::isfinite(rate) && rate >= 0.0, fmt::format("point rate {} must be >= 0", rate));
    return RateLaw(PointRate{rate});
}

RateLaw RateLaw::two_point(double first, double second, double p_first) {
    require(std::isfinite(first) && first >= 0.0 && std::isfinite(second) && second >= 0.0,
            "two_point rates must be finite and >= 0");
    require(is_probability(p_first), fmt::format("two_point probability {} outside [0,1]", p_first));
    if (first > second) return RateLaw(TwoPointRate{second, first, 1.0 - p_first});
    return RateLaw(TwoPointRate{first, second, p_first});
}

RateLaw RateLaw::discrete(std::vector<Atom> atoms) {
    return RateLaw(DiscreteRate{validated_atoms(std::move(atoms), false, "discrete rate law")});
}

RateLaw RateLaw::uniform(double lo, double hi) {
    require(std::isfinite(lo) && std::isfinite(hi) && lo >= 0.0,
            "uniform bounds must be finite with lo >= 0");
    require(lo <= hi, fmt::format("uniform bounds need lo <= hi, got {} > {}", lo, hi));
    return RateLaw(UniformRate{lo, hi});
}

double RateLaw::mean() const {
    return std::visit(overloaded{
                          [](const PointRate& r) { return r.rate; },
                          [](const TwoPointRate& r) { return r.p_low * r.low + (1.0 - r.p_low) * r.high; },
                          [](const DiscreteRate& r) { return atoms_mean(r.atoms); },
                          [](const UniformRate& r) { return 0.5 * (r.lo + r.hi); },
                      },
                      law_);
}

double RateLaw::min_support() const {
    return std::visit(overloaded{
                          [](const PointRate& r) { return r.rate; },
                          [](const TwoPointRate& r) { return r.p_low > 0.0 ? r.low : r.high; },
                          [](const DiscreteRate& r) {
                              for (const Atom& a : r.atoms)
                                  if (a.prob > 0.0) return a.value;
                              return r.atoms.front().value;
                          },
                          [](const UniformRate& r) { return r.lo; },
                      },
                      law_);
}

double RateLaw::max_support() const {
    return std::visit(overloaded{
                          [](const PointRate& r) { return r.rate; },
                          [](const TwoPointRate& r) { return r.p_low < 1.0 ? r.high : r.low; },
                          [](const DiscreteRate& r) {
                              for (auto it = r.atoms.rbegin(); it != r.atoms.rend(); ++it)
                                  if (it->prob > 0.0) return it->value;
                              return r.atoms.back().value;
                          },
                          [](const UniformRate& r) { return r.hi; },
                      },
                      law_);
}

double RateLaw::quantile(double u) const {
    return std::visit(overloaded{
                          [](const PointRate& r) { return r.rate; },
                          [u](const TwoPointRate& r) { return u <= r.p_low ? r.low : r.high; },
                          [u](const DiscreteRate& r) { return atoms_quantile(r.atoms, u); },
                          [u](const UniformRate& r) { return r.lo + u * (r.hi - r.lo); },
                      },
                      law_);
}

std::vector<Atom> RateLaw::atoms() const {
    return std::visit(overloaded{
                          [](const PointRate& r) { return std::vector<Atom>{{r.rate, 1.0}}; },
                          [](const TwoPointRate& r) {
                              return std::vector<Atom>{{r.low, r.p_low}, {r.high, 1.0 - r.p_low}};
                          },
                          [](const DiscreteRate& r) { return r.atoms; },
                          [](const UniformRate&) { return std::vector<Atom>{}; },
                      },
                      law_);
}

bool RateLaw::is_degenerate() const {
    return std::visit(overloaded{
                          [](const PointRate&) { return true; },
                          [](const TwoPointRate& r) {
                              return r.low == r.high || r.p_low == 0.0 || r.p_low == 1.0;
                          },
                          [](const DiscreteRate& r) { return atoms_degenerate(r.atoms); },
                          [](const UniformRate& r) { return r.lo == r.hi; },
                      },
                      law_);
}

// ---- ClockLaw -------------------------------------------------------------

ClockLaw ClockLaw::exponential(double rate) {
    require(std::isfinite(rate) && rate > 0.0, fmt::format("exponential clock rate {} must be > 0", rate));
    return ClockLaw(ExponentialClock{rate});
}

ClockLaw ClockLaw::deterministic(double time) {
    require(std::isfinite(time) && time > 0.0, fmt::format("deterministic clock time {} must be > 0", time));
    return ClockLaw(DeterministicClock{time});
}

ClockLaw ClockLaw::discrete(std::vector<Atom> atoms) {
    return ClockLaw(DiscreteClock{validated_atoms(std::move(atoms), true, "discrete clock law")});
}

double ClockLaw::mean() const {
    return std::visit(overloaded{
                          [](const ExponentialClock& c) { return 1.0 / c.rate; },
                          [](const DeterministicClock& c) { return c.time; },
                          [](const DiscreteClock& c) { return atoms_mean(c.atoms); },
                      },
                      law_);
}

double ClockLaw::quantile(double u) const {
    return std::visit(overloaded{
                          [u](const ExponentialClock& c) { return -std::log1p(-u) / c.rate; },
                          [](const DeterministicClock& c) { return c.time; },
                          [u](const DiscreteClock& c) { return atoms_quantile(c.atoms, u); },
                      },
                      law_);
}

std::vector<Atom> ClockLaw::atoms() const {
    return std::visit(overloaded{
                          [](const ExponentialClock&) { return std::vector<Atom>{}; },
                          [](const DeterministicClock& c) { return std::vector<Atom>{{c.time, 1.0}}; },
                          [](const DiscreteClock& c) { return c.atoms; },
                      },
                      law_);
}

bool ClockLaw::is_degenerate() const {
    return std::visit(overloaded{
                          [](const ExponentialClock&) { return false; },
                          [](const DeterministicClock&) { return true; },
                          [](const DiscreteClock& c) { return atoms_degenerate(c.atoms); },
                      },
                      law_);
}

// ---- sampling -------------------------------------------------------------

Environment sample_env(const EnvironmentLaw& law, Rng& rng) {
    switch (law.coupling) {
        case Coupling::Independent: {
            const double u_rate = rng.uniform();
            const double u_clock = rng.uniform();
            return {law.rate.quantile(u_rate), law.clock.quantile(u_clock)};
        }
        case Coupling::Comonotone: {
            const double u = rng.uniform();
            return {law.rate.quantile(u), law.clock.quantile(u)};
        }
        case Coupling::Antimonotone: {
            const double u = rng.uniform();
            return {law.rate.quantile(u), law.clock.quantile(1.0 - u)};
        }
    }
    throw std::logic_error("unreachable coupling");
}

// ---- text forms -----------------------------------------------------------

RateLaw parse_rate_law(std::string_view text) {
    return with_context(text, [&] {
        const auto [kind, params] = split_kind(text);
        if (kind == "point") return RateLaw::point(parse_list(params, 1, text)[0]);
        if (kind == "two_point") {
            const auto v = parse_list(params, 3, text);
            return RateLaw::two_point(v[0], v[1], v[2]);
        }
        if (kind == "discrete") return RateLaw::discrete(parse_atoms(params, text));
        if (kind == "uniform") {
            const auto v = parse_list(params, 2, text);
            return RateLaw::uniform(v[0], v[1]);
        }
        throw std::invalid_argument(fmt::format(
            "'{}': unknown rate law '{}' (expected point, two_point, discrete or uniform)", text, kind));
    });
}

ClockLaw parse_clock_law(std::string_view text) {
    return with_context(text, [&] {
        const auto [kind, params] = split_kind(text);
        if (kind == "exp") return ClockLaw::exponential(parse_list(params, 1, text)[0]);
        if (kind == "det") return ClockLaw::deterministic(parse_list(params, 1, text)[0]);
        if (kind == "discrete") return ClockLaw::discrete(parse_atoms(params, text));
        throw std::invalid_argument(fmt::format(
            "'{}': unknown clock law '{}' (expected exp, det or discrete)", text, kind));
    });
}

Coupling parse_coupling(std::string_view text) {
    if (text == "independent") return Coupling::Independent;
    if (text == "comonotone") return Coupling::Comonotone;
    if (text == "antimonotone") return Coupling::Antimonotone;
    throw std::invalid_argument(
        fmt::format("'{}': unknown coupling (expected independent, comonotone or antimonotone)", text));
}

std::string to_string(const RateLaw& law) {
    return std::visit(overloaded{
                          [](const PointRate& r) { return "point:" + fmt_num(r.rate); },
                          [](const TwoPointRate& r) {
                              return fmt::format("two_point:{},{},{}", fmt_num(r.low), fmt_num(r.high),
                                                 fmt_num(r.p_low));
                          },
                          [](const DiscreteRate& r) { return "discrete:" + fmt_atoms(r.atoms); },
                          [](const UniformRate& r) {
                              return fmt::format("uniform:{},{}", fmt_num(r.lo), fmt_num(r.hi));
                          },
                      },
                      law.variant());
}

std::string to_string(const ClockLaw& law) {
    return std::visit(overloaded{
                          [](const ExponentialClock& c) { return "exp:" + fmt_num(c.rate); },
                          [](const DeterministicClock& c) { return "det:" + fmt_num(c.time); },
                          [](const DiscreteClock& c) { return "discrete:" + fmt_atoms(c.atoms); },
                      },
                      law.variant());
}

std::string to_string(Coupling coupling) {
    switch (coupling) {
        case Coupling::Independent: return "independent";
        case Coupling::Comonotone: return "comonotone";
        case Coupling::Antimonotone: return "antimonotone";
    }
    return "independent";
}

}  // namespace dispersal
