#include "dispersal/processes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace dispersal {
namespace {

// Draws one founder's offspring count. When both marginals are finite the
// offspring laws are tabulated per (rate atom, clock atom) pair; the uniforms
// consumed are the same as in sample_env, so both paths realize the same
// process draw for draw.
class FounderSampler {
public:
    explicit FounderSampler(const EnvironmentLaw& env) : env_(env) {
        const auto rates = env.rate.atoms();
        const auto clocks = env.clock.atoms();
        if (rates.empty() || clocks.empty()) return;
        tabulated_ = true;
        for (const Atom& a : rates) {
            if (a.prob <= 0.0) continue;
            rate_cum_.push_back((rate_cum_.empty() ? 0.0 : rate_cum_.back()) + a.prob);
            rate_values_.push_back(a.value);
        }
        for (const Atom& a : clocks) {
            if (a.prob <= 0.0) continue;
            clock_cum_.push_back((clock_cum_.empty() ? 0.0 : clock_cum_.back()) + a.prob);
            clock_values_.push_back(a.value);
        }
        for (double rate : rate_values_)
            for (double t : clock_values_) laws_.push_back(transient_law(rate, t));
    }

    std::uint64_t draw(Rng& rng) const {
        if (!tabulated_) {
            const Environment e = sample_env(env_, rng);
            return sample_offspring(transient_law(e.rate, e.time), rng);
        }
        std::size_t i = 0;
        std::size_t j = 0;
        switch (env_.coupling) {
            case Coupling::Independent: {
                const double u_rate = rng.uniform();
                const double u_clock = rng.uniform();
                i = index_of(rate_cum_, u_rate);
                j = index_of(clock_cum_, u_clock);
                break;
            }
            case Coupling::Comonotone: {
                const double u = rng.uniform();
                i = index_of(rate_cum_, u);
                j = index_of(clock_cum_, u);
                break;
            }
            case Coupling::Antimonotone: {
                const double u = rng.uniform();
                i = index_of(rate_cum_, u);
                j = index_of(clock_cum_, 1.0 - u);
                break;
            }
        }
        return sample_offspring(laws_[i * clock_values_.size() + j], rng);
    }

private:
    // Matches the quantile rule used by RateLaw/ClockLaw: first atom whose
    // cumulative probability reaches u.
    static std::size_t index_of(const std::vector<double>& cum, double u) {
        for (std::size_t k = 0; k < cum.size(); ++k)
            if (u <= cum[k]) return k;
        return cum.size() - 1;
    }

    const EnvironmentLaw& env_;
    bool tabulated_ = false;
    std::vector<double> rate_cum_, rate_values_, clock_cum_, clock_values_;
    std::vector<OffspringLaw> laws_;
};

void require_caps(std::uint64_t steps, std::uint64_t cap) {
    if (steps < 1 || cap < 1) throw std::invalid_argument("generation/epoch limit and population cap must be >= 1");
}

}  // namespace

Model parse_model(std::string_view text) {
    if (text == "dispersion") return Model::Dispersion;
    if (text == "global") return Model::Global;
    if (text == "fixed") return Model::Fixed;
    throw std::invalid_argument(fmt::format("'{}': unknown model (expected dispersion, global or fixed)", text));
}

std::string to_string(Model model) {
    switch (model) {
        case Model::Dispersion: return "dispersion";
        case Model::Global: return "global";
        case Model::Fixed: return "fixed";
    }
    return "dispersion";
}

std::string to_string(Verdict verdict) {
    return verdict == Verdict::Extinct ? "Extinct" : "SurvivedToCap";
}

std::string to_string(Termination termination) {
    switch (termination) {
        case Termination::Horizon: return "horizon";
        case Termination::Extinct: return "extinct";
        case Termination::CapReached: return "cap_reached";
    }
    return "horizon";
}

void validate(const DispersionConfig& cfg) { require_caps(cfg.max_generations, cfg.population_cap); }

void validate(const GlobalConfig& cfg) {
    require_caps(cfg.max_epochs, cfg.population_cap);
    if (cfg.env.coupling != Coupling::Independent) {
        throw std::invalid_argument("the global-environment model requires independent coupling");
    }
}

void validate(const FixedConfig& cfg) {
    if (!(std::isfinite(cfg.rate) && cfg.rate >= 0.0)) throw std::invalid_argument("fixed rate must be >= 0");
    if (!(cfg.horizon >= 0.0)) throw std::invalid_argument("horizon must be >= 0");
    if (cfg.population_cap < 1) throw std::invalid_argument("population cap must be >= 1");
}

std::uint64_t sample_first_generation(const EnvironmentLaw& env, Rng& rng) {
    const Environment e = sample_env(env, rng);
    return sample_offspring(transient_law(e.rate, e.time), rng);
}

TrialOutcome run_dispersion_trial(const DispersionConfig& cfg, Rng& rng) {
    validate(cfg);
    const FounderSampler founders(cfg.env);
    TrialOutcome out;
    std::uint64_t size = 1;
    std::uint64_t generation = 0;
    out.peak_population = size;
    while (true) {
        if (size == 0) {
            out.verdict = Verdict::Extinct;
            break;
        }
        if (size >= cfg.population_cap || generation >= cfg.max_generations) {
            out.verdict = Verdict::SurvivedToCap;
            break;
        }
        std::uint64_t next = 0;
        for (std::uint64_t k = 0; k < size && next < cfg.population_cap; ++k) {
            next = std::min(next + founders.draw(rng), kSaturatedCount);
        }
        size = next;
        ++generation;
        out.peak_population = std::max(out.peak_population, size);
    }
    out.stop_step = generation;
    out.stop_population = size;
    return out;
}

TrialOutcome run_global_trial(const GlobalConfig& cfg, Rng& rng) {
    validate(cfg);
    TrialOutcome out;
    std::uint64_t size = 1;
    std::uint64_t epoch = 0;
    out.peak_population = size;
    while (true) {
        if (size == 0) {
            out.verdict = Verdict::Extinct;
            break;
        }
        if (size >= cfg.population_cap || epoch >= cfg.max_epochs) {
            out.verdict = Verdict::SurvivedToCap;
            break;
        }
        // One environment for the whole population during this epoch.
        const Environment e = sample_env(cfg.env, rng);
        const OffspringLaw law = transient_law(e.rate, e.time);
        std::uint64_t next = 0;
        for (std::uint64_t k = 0; k < size && next < cfg.population_cap; ++k) {
            next = std::min(next + sample_offspring(law, rng), kSaturatedCount);
        }
        size = next;
        ++epoch;
        out.peak_population = std::max(out.peak_population, size);
    }
    out.stop_step = epoch;
    out.stop_population = size;
    return out;
}

TrialOutcome run_fixed_trial(const FixedConfig& cfg, Rng& rng) {
    validate(cfg);
    const GillespieResult g = gillespie_until(cfg.rate, cfg.horizon, 1, cfg.population_cap, rng);
    TrialOutcome out;
    out.verdict = g.termination == Termination::Extinct ? Verdict::Extinct : Verdict::SurvivedToCap;
    out.stop_step = g.n_events;
    out.stop_population = g.population;
    out.peak_population = g.peak_population;
    return out;
}

std::uint64_t Trajectory::population_at(double t) const {
    std::uint64_t n = initial_population;
    for (const TrajectoryEvent& e : events) {
        if (e.time > t) break;
        n = e.population_after;
    }
    return n;
}

namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

struct Colony {
    std::uint64_t size;
    double rate;
    double collapse_time;
};

Trajectory dispersion_trajectory(const TrajectoryConfig& cfg, Rng& rng) {
    Trajectory tr;
    std::vector<Colony> colonies;
    {
        const Environment e = sample_env(cfg.env, rng);
        colonies.push_back({1, e.rate, e.time});
    }
    std::uint64_t population = 1;
    double now = 0.0;
    auto finish = [&](Termination why, double t) {
        tr.termination = why;
        tr.end_time = t;
        return tr;
    };
    if (population >= cfg.population_cap) return finish(Termination::CapReached, 0.0);

    while (true) {
        double total_rate = 0.0;
        std::size_t next_collapse = 0;
        for (std::size_t c = 0; c < colonies.size(); ++c) {
            total_rate += static_cast<double>(colonies[c].size) * (colonies[c].rate + 1.0);
            if (colonies[c].collapse_time < colonies[next_collapse].collapse_time) next_collapse = c;
        }
        const double collapse_at = colonies[next_collapse].collapse_time;
        const double event_at = now + rng.exponential(total_rate);

        if (collapse_at < event_at && collapse_at <= cfg.horizon) {
            // Every survivor founds its own colony with a fresh environment.
            now = collapse_at;
            const std::uint64_t founders = colonies[next_collapse].size;
            colonies[next_collapse] = colonies.back();
            colonies.pop_back();
            for (std::uint64_t k = 0; k < founders; ++k) {
                const Environment e = sample_env(cfg.env, rng);
                colonies.push_back({1, e.rate, now + e.time});
            }
            continue;
        }
        if (event_at > cfg.horizon) return finish(Termination::Horizon, cfg.horizon);

        now = event_at;
        double target = rng.uniform() * total_rate;
        std::size_t pick = colonies.size() - 1;
        for (std::size_t c = 0; c < colonies.size(); ++c) {
            const double r = static_cast<double>(colonies[c].size) * (colonies[c].rate + 1.0);
            if (target < r) {
                pick = c;
                break;
            }
            target -= r;
        }
        Colony& col = colonies[pick];
        const bool birth = rng.uniform() * (col.rate + 1.0) < col.rate;
        if (birth) {
            ++col.size;
            ++population;
        } else {
            --col.size;
            --population;
            if (col.size == 0) {
                colonies[pick] = colonies.back();
                colonies.pop_back();
            }
        }
        tr.events.push_back({now, birth ? 1 : -1, population});
        if (population == 0) return finish(Termination::Extinct, now);
        if (population >= cfg.population_cap) return finish(Termination::CapReached, now);
    }
}

Trajectory global_trajectory(const TrajectoryConfig& cfg, Rng& rng) {
    Trajectory tr;
    Environment e = sample_env(cfg.env, rng);
    double next_switch = e.time;
    double rate = e.rate;
    std::uint64_t population = 1;
    double now = 0.0;
    auto finish = [&](Termination why, double t) {
        tr.termination = why;
        tr.end_time = t;
        return tr;
    };
    if (population >= cfg.population_cap) return finish(Termination::CapReached, 0.0);

    while (true) {
        const double event_at = now + rng.exponential(static_cast<double>(population) * (rate + 1.0));
        if (next_switch < event_at && next_switch <= cfg.horizon) {
            now = next_switch;
            e = sample_env(cfg.env, rng);
            rate = e.rate;
            next_switch = now + e.time;
            continue;
        }
        if (event_at > cfg.horizon) return finish(Termination::Horizon, cfg.horizon);
        now = event_at;
        const bool birth = rng.uniform() * (rate + 1.0) < rate;
        population = birth ? population + 1 : population - 1;
        tr.events.push_back({now, birth ? 1 : -1, population});
        if (population == 0) return finish(Termination::Extinct, now);
        if (population >= cfg.population_cap) return finish(Termination::CapReached, now);
    }
}

}  // namespace

Trajectory run_trajectory(const TrajectoryConfig& cfg, Rng& rng) {
    if (!(cfg.horizon >= 0.0)) throw std::invalid_argument("horizon must be >= 0");
    if (cfg.population_cap < 1) throw std::invalid_argument("population cap must be >= 1");
    switch (cfg.model) {
        case Model::Dispersion: return dispersion_trajectory(cfg, rng);
        case Model::Global: {
            if (cfg.env.coupling != Coupling::Independent) {
                throw std::invalid_argument("the global-environment model requires independent coupling");
            }
            return global_trajectory(cfg, rng);
        }
        case Model::Fixed: {
            const GillespieResult g = gillespie_until(cfg.fixed_rate, cfg.horizon, 1, cfg.population_cap, rng, true);
            Trajectory tr;
            tr.events = g.events;
            tr.termination = g.termination;
            tr.end_time = g.time;
            return tr;
        }
    }
    throw std::logic_error("unreachable model");
}

}  // namespace dispersal
