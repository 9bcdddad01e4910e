#include "dispersal/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <variant>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

namespace dispersal::cli {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---- flat records ------------------------------------------------------------

using Field = std::variant<std::monostate, double, std::uint64_t, std::string>;
using Record = std::vector<std::pair<std::string, Field>>;

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string json_escape(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            default: out += c;
        }
    }
    return out + '"';
}

std::string csv_value(const Field& f) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) return "";
            else if constexpr (std::is_same_v<T, double>) return format_number(v);
            else if constexpr (std::is_same_v<T, std::uint64_t>) return std::to_string(v);
            else return csv_escape(v);
        },
        f);
}

std::string json_value(const Field& f) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) return "null";
            else if constexpr (std::is_same_v<T, double>) {
                return std::isfinite(v) ? format_number(v) : json_escape(format_number(v));
            } else if constexpr (std::is_same_v<T, std::uint64_t>) return std::to_string(v);
            else return json_escape(v);
        },
        f);
}

std::string json_object(const Record& r) {
    std::string out = "{";
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ", ";
        out += json_escape(r[i].first) + ": " + json_value(r[i].second);
    }
    return out + "}";
}

std::string write_records(const std::vector<Record>& records, OutputFormat format, bool as_array) {
    std::string out;
    if (format == OutputFormat::Json) {
        if (!as_array) return json_object(records.front()) + "\n";
        out = "[\n";
        for (std::size_t i = 0; i < records.size(); ++i) {
            out += "  " + json_object(records[i]) + (i + 1 < records.size() ? ",\n" : "\n");
        }
        return out + "]\n";
    }
    const Record& head = records.front();
    for (std::size_t i = 0; i < head.size(); ++i) out += (i ? "," : "") + head[i].first;
    out += '\n';
    for (const Record& r : records) {
        for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + csv_value(r[i].second);
        out += '\n';
    }
    return out;
}

// Parsed rows as name -> text; JSON values are rendered back to the CSV text
// form so one set of typed readers serves both formats.
using TextRow = std::map<std::string, std::string>;

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    cells.push_back(std::move(cur));
    return cells;
}

std::vector<TextRow> read_csv_rows(std::string_view text) {
    std::vector<TextRow> rows;
    std::vector<std::string> header;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        auto cells = split_csv_line(line);
        if (header.empty()) {
            header = std::move(cells);
            continue;
        }
        if (cells.size() != header.size()) {
            throw std::runtime_error(fmt::format("csv row has {} cells, header has {}", cells.size(), header.size()));
        }
        TextRow row;
        for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = cells[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

TextRow json_to_row(const nlohmann::json& obj) {
    TextRow row;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const auto& v = it.value();
        if (v.is_null()) row[it.key()] = "";
        else if (v.is_string()) row[it.key()] = v.get<std::string>();
        else if (v.is_number_unsigned()) row[it.key()] = std::to_string(v.get<std::uint64_t>());
        else if (v.is_number_integer()) row[it.key()] = std::to_string(v.get<std::int64_t>());
        else if (v.is_number_float()) row[it.key()] = format_number(v.get<double>());
        else if (v.is_boolean()) row[it.key()] = v.get<bool>() ? "true" : "false";
        else row[it.key()] = v.dump();
    }
    return row;
}

std::vector<TextRow> read_rows(std::string_view text, OutputFormat format) {
    if (format == OutputFormat::Csv) return read_csv_rows(text);
    const auto doc = nlohmann::json::parse(text);
    std::vector<TextRow> rows;
    if (doc.is_array()) {
        for (const auto& obj : doc) rows.push_back(json_to_row(obj));
    } else {
        rows.push_back(json_to_row(doc));
    }
    return rows;
}

const std::string& field(const TextRow& row, const std::string& name) {
    const auto it = row.find(name);
    if (it == row.end()) throw std::runtime_error(fmt::format("missing field '{}'", name));
    return it->second;
}

double num(const TextRow& row, const std::string& name) { return parse_number_field(field(row, name)); }

std::optional<double> opt_num(const TextRow& row, const std::string& name) {
    const auto& s = field(row, name);
    if (s.empty()) return std::nullopt;
    return parse_number_field(s);
}

std::uint64_t uint(const TextRow& row, const std::string& name) {
    const auto& s = field(row, name);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw std::runtime_error(fmt::format("field '{}': '{}' is not an unsigned integer", name, s));
    }
    return v;
}

const TextRow& single(const std::vector<TextRow>& rows) {
    if (rows.size() != 1) throw std::runtime_error(fmt::format("expected one record, found {}", rows.size()));
    return rows.front();
}

Field opt_field(const std::optional<double>& v) { return v ? Field{*v} : Field{}; }

Record law_fields(const RunSpec& spec) {
    return {{"mu", spec.mu}, {"nu", spec.nu}, {"coupling", to_string(spec.coupling)}};
}

Record estimate_fields(const SurvivalEstimate& est) {
    return {{"n_trials", est.n_trials}, {"n_survived", est.n_survived}, {"point", est.point},
            {"ci_low", est.ci_low},     {"ci_high", est.ci_high}};
}

void append(Record& r, Record more) {
    for (auto& kv : more) r.push_back(std::move(kv));
}

SurvivalEstimate estimate_from(const TextRow& row) {
    SurvivalEstimate est;
    est.n_trials = uint(row, "n_trials");
    est.n_survived = uint(row, "n_survived");
    est.point = num(row, "point");
    est.ci_low = num(row, "ci_low");
    est.ci_high = num(row, "ci_high");
    return est;
}

// ---- command line ------------------------------------------------------------

struct RawArgs {
    std::string model = "dispersion";
    std::string mu = kDefaultMu;
    std::string nu = kDefaultNu;
    std::string coupling = "independent";
    std::string rate;
    std::string method = "auto";
    std::uint64_t mc_draws = kDefaultMonteCarloDraws;
    std::uint64_t trials = kDefaultTrials;
    std::string seed = std::to_string(kDefaultSeed);
    std::uint64_t max_gen = kDefaultMaxSteps;
    std::uint64_t pop_cap = kDefaultPopulationCap;
    double horizon = kDefaultHorizon;
    std::string sweep;
    std::string format = "csv";
    std::string out;
    unsigned threads = 0;
};

constexpr Subcommand kAllCommands[] = {Subcommand::Criterion, Subcommand::Simulate, Subcommand::Survival,
                                       Subcommand::Sweep,     Subcommand::Compare,  Subcommand::Trajectory};

const char* describe(Subcommand c) {
    switch (c) {
        case Subcommand::Criterion: return "Evaluate the survival criteria for the given laws";
        case Subcommand::Simulate: return "Run one trial and print its outcome";
        case Subcommand::Survival: return "Estimate the survival probability of one model";
        case Subcommand::Sweep: return "Sweep one law parameter and estimate survival at each value";
        case Subcommand::Compare: return "Run the dispersion, global and fixed-rate models on the same laws";
        case Subcommand::Trajectory: return "Emit one sample path as time,delta,population events";
    }
    return "";
}

bool uses(Subcommand c, std::string_view flag) {
    using S = Subcommand;
    const bool sim = c == S::Simulate || c == S::Survival || c == S::Sweep || c == S::Compare || c == S::Trajectory;
    const bool many = c == S::Survival || c == S::Sweep || c == S::Compare;
    if (flag == "mu" || flag == "nu" || flag == "coupling" || flag == "format" || flag == "out" || flag == "seed")
        return true;
    if (flag == "method" || flag == "mc-draws") return c == S::Criterion;
    if (flag == "model") return sim && c != S::Compare;
    if (flag == "rate" || flag == "pop-cap" || flag == "horizon") return sim;
    if (flag == "max-gen") return sim && c != S::Trajectory;
    if (flag == "trials" || flag == "threads") return many;
    if (flag == "sweep") return c == S::Sweep;
    return false;
}

constexpr const char* kFlagOrder[] = {"model", "mu",  "nu",      "coupling", "rate",  "method", "mc-draws",
                                      "trials", "seed", "max-gen", "pop-cap",  "horizon", "sweep", "format",
                                      "out",    "threads"};

void add_options(CLI::App* sub, Subcommand c, RawArgs& raw) {
    auto want = [c](const char* f) { return uses(c, f); };
    if (want("model")) sub->add_option("--model", raw.model, "Model: dispersion, global or fixed");
    sub->add_option("--mu", raw.mu,
                    "Birth-rate law: point:L | two_point:L1,L2,P | discrete:L:P,... | uniform:LO,HI");
    sub->add_option("--nu", raw.nu, "Clock law: exp:A | det:T | discrete:T:Q,...");
    sub->add_option("--coupling", raw.coupling, "Rate/clock coupling: independent, comonotone or antimonotone");
    if (want("rate"))
        sub->add_option("--rate", raw.rate, "Birth rate of the fixed-rate chain")->default_str("mean of --mu");
    if (want("method")) sub->add_option("--method", raw.method, "m method: auto, closed_form, quadrature, monte_carlo");
    if (want("mc-draws")) sub->add_option("--mc-draws", raw.mc_draws, "Draws for the monte_carlo m method");
    if (want("trials")) sub->add_option("--trials", raw.trials, "Independent trials per estimate");
    sub->add_option("--seed", raw.seed, "Master seed (unsigned 64-bit) or 'random'");
    if (want("max-gen")) sub->add_option("--max-gen", raw.max_gen, "Generation/epoch limit per trial");
    if (want("pop-cap")) sub->add_option("--pop-cap", raw.pop_cap, "Population at which a trial counts as surviving");
    if (want("horizon")) sub->add_option("--horizon", raw.horizon, "Time horizon of event-driven runs");
    if (want("sweep"))
        sub->add_option("--sweep", raw.sweep, "Parameter grid: NAME=START:STOP:STEP or NAME=V1,V2,... (a, p, l1, l2, t0)")
            ->required();
    sub->add_option("--format", raw.format, "Output format: csv or json");
    sub->add_option("--out", raw.out, "Output path")->default_str("standard output");
    if (want("threads")) sub->add_option("--threads", raw.threads, "Worker threads (0: all cores)");
}

struct Cli {
    CLI::App app{"Birth-death chains in random environments: survival criteria and Monte Carlo estimates",
                 "dispersal"};
    RawArgs raw;
    std::map<Subcommand, CLI::App*> subs;

    Cli() {
        app.option_defaults()->always_capture_default();
        app.require_subcommand(1);
        for (Subcommand c : kAllCommands) {
            CLI::App* sub = app.add_subcommand(to_string(c), describe(c));
            add_options(sub, c, raw);
            subs[c] = sub;
        }
    }
};

std::uint64_t resolve_seed(const std::string& text) {
    if (text == "random") {
        std::random_device rd;
        return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
        throw UsageError(fmt::format("--seed: '{}' is not an unsigned 64-bit integer or 'random'", text));
    }
    return v;
}

double parse_double_arg(const std::string& text, std::string_view flag) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw UsageError(fmt::format("{}: '{}' is not a finite number", flag, text));
    }
    return v;
}

template <class F>
auto as_usage(std::string_view flag, F&& f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        throw UsageError(fmt::format("{}: {}", flag, e.what()));
    }
}

std::string write_text(const RunSpec& spec, const std::string& text, std::ostream& out, std::ostream& err) {
    if (spec.out.empty()) {
        out << text;
        out.flush();
        return {};
    }
    std::ofstream file(spec.out, std::ios::binary | std::ios::trunc);
    if (!file) return fmt::format("cannot open '{}' for writing: {}", spec.out, std::strerror(errno));
    file << text;
    file.close();
    if (!file) return fmt::format("failed writing '{}'", spec.out);
    (void)err;
    return {};
}

}  // namespace

// ---- public helpers ------------------------------------------------------------

std::string to_string(Subcommand command) {
    switch (command) {
        case Subcommand::Criterion: return "criterion";
        case Subcommand::Simulate: return "simulate";
        case Subcommand::Survival: return "survival";
        case Subcommand::Sweep: return "sweep";
        case Subcommand::Compare: return "compare";
        case Subcommand::Trajectory: return "trajectory";
    }
    return "criterion";
}

std::string to_string(OutputFormat format) { return format == OutputFormat::Csv ? "csv" : "json"; }

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", x);
}

double parse_number_field(std::string_view text) {
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    if (text == "nan") return kNaN;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
        throw std::runtime_error(fmt::format("'{}' is not a number", text));
    }
    return v;
}

SweepSpec parse_sweep_spec(std::string_view text) {
    const std::size_t eq = text.find('=');
    if (eq == std::string_view::npos) {
        throw UsageError(fmt::format("--sweep: '{}' must look like NAME=START:STOP:STEP or NAME=V1,V2", text));
    }
    SweepSpec spec;
    spec.param = as_usage("--sweep", [&] { return parse_sweep_param(text.substr(0, eq)); });
    const std::string body(text.substr(eq + 1));
    if (body.find(':') != std::string::npos) {
        std::vector<double> parts;
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ':')) parts.push_back(parse_double_arg(item, "--sweep"));
        if (parts.size() != 3) throw UsageError(fmt::format("--sweep: range '{}' needs START:STOP:STEP", body));
        const double start = parts[0], stop = parts[1], step = parts[2];
        if (!(step > 0.0) || stop < start) {
            throw UsageError(fmt::format("--sweep: range '{}' is empty (need step > 0 and STOP >= START)", body));
        }
        const auto n = static_cast<std::uint64_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        if (n > 100'000) throw UsageError(fmt::format("--sweep: range '{}' has {} points (max 100000)", body, n));
        for (std::uint64_t k = 0; k < n; ++k) {
            // Round to 12 significant digits so 0.1 steps give 0.3, not 0.30000000000000004.
            const double v = start + static_cast<double>(k) * step;
            spec.values.push_back(parse_double_arg(fmt::format("{:.12g}", v), "--sweep"));
        }
    } else {
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) spec.values.push_back(parse_double_arg(item, "--sweep"));
    }
    if (spec.values.empty()) throw UsageError(fmt::format("--sweep: '{}' has no values", text));
    return spec;
}

EnvironmentLaw RunSpec::env() const {
    return EnvironmentLaw{parse_rate_law(mu), parse_clock_law(nu), coupling};
}

ModelConfig RunSpec::model_config() const {
    ModelConfig cfg;
    cfg.model = model;
    cfg.env = env();
    cfg.fixed_rate = rate;
    cfg.caps = caps;
    return cfg;
}

RunSpec parse_args(const std::vector<std::string>& args) {
    Cli cli;
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        cli.app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        for (auto& [c, sub] : cli.subs)
            if (sub->parsed()) throw HelpRequested{sub->help()};
        throw HelpRequested{cli.app.help()};
    } catch (const CLI::ParseError& e) {
        throw UsageError(fmt::format("{} (see --help)", e.what()));
    }

    RunSpec spec;
    for (auto& [c, sub] : cli.subs)
        if (sub->parsed()) spec.command = c;
    const RawArgs& raw = cli.raw;
    spec.model = as_usage("--model", [&] { return parse_model(raw.model); });
    spec.mu = as_usage("--mu", [&] { return to_string(parse_rate_law(raw.mu)); });
    spec.nu = as_usage("--nu", [&] { return to_string(parse_clock_law(raw.nu)); });
    spec.coupling = as_usage("--coupling", [&] { return parse_coupling(raw.coupling); });
    if (!raw.rate.empty()) {
        const double r = parse_double_arg(raw.rate, "--rate");
        if (r < 0.0) throw UsageError(fmt::format("--rate: {} must be >= 0", raw.rate));
        spec.rate = r;
    }
    spec.method = as_usage("--method", [&] { return parse_m_method(raw.method); });
    spec.mc_draws = raw.mc_draws;
    if (spec.mc_draws < 2) throw UsageError("--mc-draws: need at least 2 draws");
    spec.trials = raw.trials;
    if (spec.trials < 1) throw UsageError("--trials: need at least 1 trial");
    spec.seed = resolve_seed(raw.seed);
    spec.caps.max_steps = raw.max_gen;
    spec.caps.population_cap = raw.pop_cap;
    spec.caps.horizon = raw.horizon;
    if (spec.caps.max_steps < 1) throw UsageError("--max-gen: must be >= 1");
    if (spec.caps.population_cap < 1) throw UsageError("--pop-cap: must be >= 1");
    if (!(spec.caps.horizon >= 0.0) || !std::isfinite(spec.caps.horizon)) {
        throw UsageError("--horizon: must be a finite number >= 0");
    }
    if (!raw.sweep.empty()) spec.sweep = parse_sweep_spec(raw.sweep);
    if (raw.format == "csv") spec.format = OutputFormat::Csv;
    else if (raw.format == "json") spec.format = OutputFormat::Json;
    else throw UsageError(fmt::format("--format: '{}' is not csv or json", raw.format));
    spec.out = raw.out;
    spec.threads = raw.threads;
    return spec;
}

std::vector<std::string> to_args(const RunSpec& spec) {
    std::vector<std::string> args{to_string(spec.command)};
    auto add = [&](const char* flag, std::string value) {
        if (!uses(spec.command, flag)) return;
        args.push_back(std::string("--") + flag);
        args.push_back(std::move(value));
    };
    add("model", to_string(spec.model));
    add("mu", spec.mu);
    add("nu", spec.nu);
    add("coupling", to_string(spec.coupling));
    if (spec.rate) add("rate", format_number(*spec.rate));
    add("method", to_string(spec.method));
    add("mc-draws", std::to_string(spec.mc_draws));
    add("trials", std::to_string(spec.trials));
    add("seed", std::to_string(spec.seed));
    add("max-gen", std::to_string(spec.caps.max_steps));
    add("pop-cap", std::to_string(spec.caps.population_cap));
    add("horizon", format_number(spec.caps.horizon));
    if (spec.sweep) {
        std::string grid = to_string(spec.sweep->param) + "=";
        for (std::size_t i = 0; i < spec.sweep->values.size(); ++i) {
            grid += (i ? "," : "") + format_number(spec.sweep->values[i]);
        }
        add("sweep", grid);
    }
    add("format", to_string(spec.format));
    if (!spec.out.empty()) add("out", spec.out);
    add("threads", std::to_string(spec.threads));
    return args;
}

std::string help_text(Subcommand command) {
    Cli cli;
    return cli.subs.at(command)->help();
}

std::vector<std::string> flag_names(Subcommand command) {
    std::vector<std::string> names;
    for (const char* f : kFlagOrder)
        if (uses(command, f)) names.push_back(std::string("--") + f);
    return names;
}

// ---- writers -------------------------------------------------------------------

std::string write_criterion(const CriterionReport& report, const RunSpec& spec) {
    Record r = law_fields(spec);
    append(r, {{"m", report.m.value},
               {"m_method", to_string(report.m.method)},
               {"m_std_error", opt_field(report.m.std_error)},
               {"mean_rate", report.mean_rate},
               {"mean_clock", report.mean_clock},
               {"jensen_lower_bound", opt_field(report.jensen_lower_bound)},
               {"a_critical", opt_field(report.a_critical)},
               {"dispersion_verdict", to_string(report.dispersion_verdict)},
               {"global_verdict", to_string(report.global_verdict)},
               {"global_reason", report.global_reason}});
    return write_records({r}, spec.format, false);
}

std::string write_estimate(const SurvivalEstimate& est, const RunSpec& spec) {
    Record r{{"model", to_string(spec.model)}};
    append(r, law_fields(spec));
    r.emplace_back("rate", spec.model == Model::Fixed ? Field{spec.model_config().effective_fixed_rate()} : Field{});
    append(r, estimate_fields(est));
    append(r, {{"master_seed", est.master_seed},
               {"max_steps", est.caps.max_steps},
               {"population_cap", est.caps.population_cap},
               {"horizon", est.caps.horizon}});
    return write_records({r}, spec.format, false);
}

std::string write_outcome(const TrialOutcome& outcome, const RunSpec& spec) {
    Record r{{"model", to_string(spec.model)}};
    append(r, law_fields(spec));
    append(r, {{"seed", spec.seed},
               {"verdict", to_string(outcome.verdict)},
               {"stop_step", outcome.stop_step},
               {"stop_population", outcome.stop_population},
               {"peak_population", outcome.peak_population}});
    return write_records({r}, spec.format, false);
}

std::string write_sweep(const std::vector<SweepRow>& rows, OutputFormat format) {
    std::vector<Record> records;
    for (const SweepRow& row : rows) {
        Record r{{"param", to_string(row.param)},
                 {"value", row.value},
                 {"m", row.m},
                 {"predicted", row.rejected ? std::string("Rejected") : to_string(row.predicted)}};
        append(r, estimate_fields(row.estimate));
        r.emplace_back("seed", row.seed);
        records.push_back(std::move(r));
    }
    return write_records(records, format, true);
}

std::string write_compare(const std::vector<CompareRow>& rows, OutputFormat format) {
    std::vector<Record> records;
    for (const CompareRow& row : rows) {
        Record r{{"model", to_string(row.model)},
                 {"mean_rate", row.mean_rate},
                 {"m", row.m},
                 {"predicted", to_string(row.predicted)}};
        append(r, estimate_fields(row.estimate));
        r.emplace_back("seed", row.estimate.master_seed);
        records.push_back(std::move(r));
    }
    return write_records(records, format, true);
}

std::string write_trajectory(const Trajectory& tr, OutputFormat format) {
    if (format == OutputFormat::Json) {
        std::string out = fmt::format("{{\"termination\": \"{}\", \"end_time\": {}, \"initial_population\": {}, \"events\": [",
                                      to_string(tr.termination), json_value(Field{tr.end_time}), tr.initial_population);
        for (std::size_t i = 0; i < tr.events.size(); ++i) {
            const auto& e = tr.events[i];
            out += fmt::format("{}[{}, {}, {}]", i ? ", " : "", format_number(e.time), e.delta, e.population_after);
        }
        return out + "]}\n";
    }
    std::string out = "time,delta,population\n";
    out += fmt::format("0,0,{}\n", tr.initial_population);
    for (const auto& e : tr.events) {
        out += fmt::format("{},{},{}\n", format_number(e.time), e.delta, e.population_after);
    }
    out += fmt::format("# termination={} end_time={}\n", to_string(tr.termination), format_number(tr.end_time));
    return out;
}

// ---- readers -------------------------------------------------------------------

CriterionReport read_criterion(std::string_view text, OutputFormat format) {
    const auto rows = read_rows(text, format);
    const TextRow& row = single(rows);
    CriterionReport r;
    r.m.value = num(row, "m");
    r.m.method = parse_m_method(field(row, "m_method"));
    r.m.std_error = opt_num(row, "m_std_error");
    r.mean_rate = num(row, "mean_rate");
    r.mean_clock = num(row, "mean_clock");
    r.jensen_lower_bound = opt_num(row, "jensen_lower_bound");
    r.a_critical = opt_num(row, "a_critical");
    r.dispersion_verdict = parse_prediction(field(row, "dispersion_verdict"));
    r.global_verdict = parse_prediction(field(row, "global_verdict"));
    r.global_reason = field(row, "global_reason");
    return r;
}

SurvivalEstimate read_estimate(std::string_view text, OutputFormat format) {
    const auto rows = read_rows(text, format);
    const TextRow& row = single(rows);
    SurvivalEstimate est = estimate_from(row);
    est.master_seed = uint(row, "master_seed");
    est.caps.max_steps = uint(row, "max_steps");
    est.caps.population_cap = uint(row, "population_cap");
    est.caps.horizon = num(row, "horizon");
    return est;
}

TrialOutcome read_outcome(std::string_view text, OutputFormat format) {
    const auto rows = read_rows(text, format);
    const TextRow& row = single(rows);
    TrialOutcome o;
    const auto& verdict = field(row, "verdict");
    if (verdict == "Extinct") o.verdict = Verdict::Extinct;
    else if (verdict == "SurvivedToCap") o.verdict = Verdict::SurvivedToCap;
    else throw std::runtime_error(fmt::format("unknown verdict '{}'", verdict));
    o.stop_step = uint(row, "stop_step");
    o.stop_population = uint(row, "stop_population");
    o.peak_population = uint(row, "peak_population");
    return o;
}

std::vector<SweepRow> read_sweep(std::string_view text, OutputFormat format) {
    std::vector<SweepRow> rows;
    for (const TextRow& row : read_rows(text, format)) {
        SweepRow r;
        r.param = parse_sweep_param(field(row, "param"));
        r.value = num(row, "value");
        r.m = num(row, "m");
        const auto& predicted = field(row, "predicted");
        if (predicted == "Rejected") {
            r.predicted = Prediction::NotApplicable;
            r.rejected = "";
        } else {
            r.predicted = parse_prediction(predicted);
        }
        r.estimate = estimate_from(row);
        r.seed = uint(row, "seed");
        r.estimate.master_seed = r.seed;
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<CompareRow> read_compare(std::string_view text, OutputFormat format) {
    std::vector<CompareRow> rows;
    for (const TextRow& row : read_rows(text, format)) {
        CompareRow r;
        r.model = parse_model(field(row, "model"));
        r.mean_rate = num(row, "mean_rate");
        r.m = num(row, "m");
        r.predicted = parse_prediction(field(row, "predicted"));
        r.estimate = estimate_from(row);
        r.estimate.master_seed = uint(row, "seed");
        rows.push_back(std::move(r));
    }
    return rows;
}

Trajectory read_trajectory(std::string_view text, OutputFormat format) {
    auto parse_termination = [](std::string_view s) {
        if (s == "horizon") return Termination::Horizon;
        if (s == "extinct") return Termination::Extinct;
        if (s == "cap_reached") return Termination::CapReached;
        throw std::runtime_error(fmt::format("unknown termination '{}'", s));
    };
    Trajectory tr;
    if (format == OutputFormat::Json) {
        const auto doc = nlohmann::json::parse(text);
        tr.termination = parse_termination(doc.at("termination").get<std::string>());
        const auto& end = doc.at("end_time");
        tr.end_time = end.is_string() ? parse_number_field(end.get<std::string>()) : end.get<double>();
        tr.initial_population = doc.at("initial_population").get<std::uint64_t>();
        for (const auto& e : doc.at("events")) {
            tr.events.push_back({e.at(0).get<double>(), e.at(1).get<int>(), e.at(2).get<std::uint64_t>()});
        }
        return tr;
    }
    const auto rows = read_csv_rows(text);
    if (rows.empty()) throw std::runtime_error("trajectory csv has no initial record");
    tr.initial_population = uint(rows.front(), "population");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        tr.events.push_back({num(rows[i], "time"), static_cast<int>(num(rows[i], "delta")), uint(rows[i], "population")});
    }
    const std::string_view marker = "# termination=";
    const std::size_t pos = text.rfind(marker);
    if (pos == std::string_view::npos) throw std::runtime_error("trajectory csv lacks its termination line");
    std::string_view tail = text.substr(pos + marker.size());
    tail = tail.substr(0, tail.find('\n'));
    const std::size_t space = tail.find(' ');
    tr.termination = parse_termination(tail.substr(0, space));
    const std::string_view end_marker = "end_time=";
    const std::size_t end_pos = tail.find(end_marker);
    if (end_pos != std::string_view::npos) tr.end_time = parse_number_field(tail.substr(end_pos + end_marker.size()));
    return tr;
}

// ---- run -------------------------------------------------------------------------

std::vector<CompareRow> run_compare(const RunSpec& spec) {
    const ModelConfig base = spec.model_config();
    const MValue m = criterion_m(base.env, MMethod::Auto, kDefaultMonteCarloDraws, spec.seed);
    std::vector<CompareRow> rows;
    for (Model model : {Model::Dispersion, Model::Global, Model::Fixed}) {
        ModelConfig cfg = base;
        cfg.model = model;
        CompareRow row;
        row.model = model;
        row.mean_rate = model == Model::Fixed ? cfg.effective_fixed_rate() : mean_rate(cfg.env.rate);
        row.m = model == Model::Fixed ? kNaN : m.value;
        row.predicted = predicted_verdict(cfg, m);
        if (row.predicted == Prediction::NotApplicable) {
            row.estimate.ci_high = 0.0;
            row.estimate.master_seed = spec.seed;
            row.estimate.caps = spec.caps;
        } else {
            row.estimate = estimate_survival(cfg, spec.trials, spec.seed, spec.threads);
        }
        rows.push_back(row);
    }
    return rows;
}

int run(const RunSpec& spec, std::ostream& out, std::ostream& err) {
    std::string text;
    try {
        switch (spec.command) {
            case Subcommand::Criterion:
                text = write_criterion(criterion_report(spec.env(), spec.method, spec.mc_draws, spec.seed), spec);
                break;
            case Subcommand::Simulate: {
                Rng rng(derive_seed(spec.seed, 0));
                text = write_outcome(run_trial(spec.model_config(), rng), spec);
                break;
            }
            case Subcommand::Survival:
                text = write_estimate(estimate_survival(spec.model_config(), spec.trials, spec.seed, spec.threads), spec);
                break;
            case Subcommand::Sweep: {
                if (!spec.sweep) {
                    err << "error: sweep needs --sweep NAME=START:STOP:STEP\n";
                    return 2;
                }
                const auto rows = sweep(spec.model_config(), spec.sweep->param, spec.sweep->values, spec.trials,
                                        spec.seed, spec.threads);
                for (const auto& row : rows)
                    if (row.rejected) err << "warning: rejected grid value " << *row.rejected << '\n';
                text = write_sweep(rows, spec.format);
                break;
            }
            case Subcommand::Compare: text = write_compare(run_compare(spec), spec.format); break;
            case Subcommand::Trajectory: {
                TrajectoryConfig cfg;
                cfg.model = spec.model;
                cfg.env = spec.env();
                cfg.fixed_rate = spec.model_config().effective_fixed_rate();
                cfg.horizon = spec.caps.horizon;
                cfg.population_cap = spec.caps.population_cap;
                Rng rng(derive_seed(spec.seed, 0));
                text = write_trajectory(run_trajectory(cfg, rng), spec.format);
                break;
            }
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    if (const std::string problem = write_text(spec, text, out, err); !problem.empty()) {
        err << "error: " << problem << '\n';
        return 1;
    }
    return 0;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return run(parse_args(args), out, err);
    } catch (const HelpRequested& h) {
        out << h.text;
        return 0;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace dispersal::cli
