#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dispersal/analytics.hpp"
#include "dispersal/montecarlo.hpp"
#include "dispersal/processes.hpp"

namespace dispersal::cli {

enum class Subcommand { Criterion, Simulate, Survival, Sweep, Compare, Trajectory };
enum class OutputFormat { Csv, Json };

std::string to_string(Subcommand command);
std::string to_string(OutputFormat format);

struct SweepSpec {
    SweepParam param = SweepParam::A;
    std::vector<double> values;
    friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

/// Parses `name=start:stop:step` (inclusive of stop) or `name=v1,v2,...`.
SweepSpec parse_sweep_spec(std::string_view text);

inline constexpr std::uint64_t kDefaultTrials = 10'000;
inline constexpr const char* kDefaultMu = "two_point:0,2,0.5";
inline constexpr const char* kDefaultNu = "exp:1.5";

/// A fully parsed command line. Law strings are stored in canonical form.
struct RunSpec {
    Subcommand command = Subcommand::Criterion;
    Model model = Model::Dispersion;
    std::string mu = kDefaultMu;
    std::string nu = kDefaultNu;
    Coupling coupling = Coupling::Independent;
    std::optional<double> rate;  // fixed-model birth rate; E(Λ) when absent
    MMethod method = MMethod::Auto;
    std::uint64_t mc_draws = kDefaultMonteCarloDraws;
    std::uint64_t trials = kDefaultTrials;
    std::uint64_t seed = kDefaultSeed;
    Caps caps;
    std::optional<SweepSpec> sweep;
    OutputFormat format = OutputFormat::Csv;
    std::string out;  // empty: standard output
    unsigned threads = 0;

    EnvironmentLaw env() const;
    ModelConfig model_config() const;

    friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

/// Bad command line. `what()` is a one-line diagnostic.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// --help was given; `text` is the help for the requested (sub)command.
struct HelpRequested {
    std::string text;
};

/// Throws UsageError or HelpRequested. `args` excludes the program name.
RunSpec parse_args(const std::vector<std::string>& args);

/// Textual form of a spec; parse_args(to_args(s)) == s.
std::vector<std::string> to_args(const RunSpec& spec);

/// Help text for one subcommand (every flag with its default).
std::string help_text(Subcommand command);
/// Long names of every flag accepted by `command`.
std::vector<std::string> flag_names(Subcommand command);

/// Executes the spec, writing the artifact to spec.out or `out`. Returns 0
/// when the computation completed; diagnostics go to `err`.
int run(const RunSpec& spec, std::ostream& out, std::ostream& err);

/// Full entry point: parse, run, map errors to exit codes (2 for usage).
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// ---- serialization ---------------------------------------------------------

/// 17 significant digits; non-finite values as inf, -inf, nan.
std::string format_number(double x);
double parse_number_field(std::string_view text);

struct CompareRow {
    Model model = Model::Dispersion;
    double mean_rate = 0.0;  // E(Λ), or the fixed chain's rate
    double m = 0.0;
    Prediction predicted = Prediction::Dies;
    SurvivalEstimate estimate;
    friend bool operator==(const CompareRow&, const CompareRow&) = default;
};

std::vector<CompareRow> run_compare(const RunSpec& spec);

std::string write_criterion(const CriterionReport& report, const RunSpec& spec);
std::string write_estimate(const SurvivalEstimate& est, const RunSpec& spec);
std::string write_outcome(const TrialOutcome& outcome, const RunSpec& spec);
std::string write_sweep(const std::vector<SweepRow>& rows, OutputFormat format);
std::string write_compare(const std::vector<CompareRow>& rows, OutputFormat format);
std::string write_trajectory(const Trajectory& trajectory, OutputFormat format);

CriterionReport read_criterion(std::string_view text, OutputFormat format);
SurvivalEstimate read_estimate(std::string_view text, OutputFormat format);
TrialOutcome read_outcome(std::string_view text, OutputFormat format);
std::vector<SweepRow> read_sweep(std::string_view text, OutputFormat format);
std::vector<CompareRow> read_compare(std::string_view text, OutputFormat format);
Trajectory read_trajectory(std::string_view text, OutputFormat format);

}  // namespace dispersal::cli
