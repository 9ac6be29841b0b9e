// trajforge: convert heterogeneous agent trajectory dumps into the unified
// multi-turn JSONL format, rate and filter them, and stream deterministic
// training mixes. Logs and run reports go to stderr, data to files/stdout.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajforge/convert.hpp"
#include "trajforge/grammar.hpp"
#include "trajforge/jsonl.hpp"
#include "trajforge/judge_client.hpp"
#include "trajforge/rater.hpp"
#include "trajforge/schema.hpp"
#include "trajforge/stats.hpp"
#include "trajforge/stream.hpp"

namespace {

using namespace trajforge;
using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;        // I/O, config, endpoint failures
constexpr int kExitStrictParse = 2;    // strict-mode parse failure

struct PipelineRunReport {
    std::string command;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::map<std::string, std::int64_t> counts;  // always carries read/written
    std::int64_t elapsed_ms = 0;
};

void print_report(const PipelineRunReport& report) {
    ordered_json j;
    j["command"] = report.command;
    j["inputs"] = report.inputs;
    j["outputs"] = report.outputs;
    ordered_json counts = ordered_json::object();
    for (const auto& [key, value] : report.counts) {
        counts[key] = value;
    }
    j["counts"] = std::move(counts);
    j["elapsed_ms"] = report.elapsed_ms;
    std::cerr << j.dump() << "\n";
}

std::int64_t elapsed_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

// Data sink: a file path, or "-" for stdout.
class OutputSink {
  public:
    explicit OutputSink(const std::string& path) : to_stdout_(path == "-") {
        if (!to_stdout_) {
            file_.open(path, std::ios::binary | std::ios::trunc);
        }
    }
    bool good() const { return to_stdout_ || file_.good(); }
    void write_line(const std::string& line) {
        if (to_stdout_) {
            std::cout << line << "\n";
        } else {
            file_ << line << "\n";
        }
    }
    bool close() {
        if (to_stdout_) {
            std::cout.flush();
            return static_cast<bool>(std::cout);
        }
        file_.flush();
        return static_cast<bool>(file_);
    }

  private:
    bool to_stdout_;
    std::ofstream file_;
};

// ------------------------------------------------------------------ convert

struct ConvertArgs {
    std::string grammar_path;
    std::string input;
    std::string output;
    std::string source_override;
    std::string provenance;
    bool strict = false;
};

int run_convert(const ConvertArgs& args) {
    const auto start = Clock::now();
    auto grammar = load_grammar(args.grammar_path);
    if (!grammar.ok()) {
        std::cerr << "trajforge convert: " << grammar.error().message << "\n";
        return kExitFailure;
    }
    SourceGrammar g = std::move(grammar).take();
    if (!args.source_override.empty()) {
        g.source = args.source_override;
    }
    LineReader reader(args.input);
    if (!reader.is_open()) {
        std::cerr << "trajforge convert: cannot open input: " << args.input << "\n";
        return kExitFailure;
    }
    OutputSink sink(args.output);
    if (!sink.good()) {
        std::cerr << "trajforge convert: cannot open output: " << args.output << "\n";
        return kExitFailure;
    }
    std::ofstream provenance;
    if (!args.provenance.empty()) {
        provenance.open(args.provenance, std::ios::binary | std::ios::trunc);
        if (!provenance) {
            std::cerr << "trajforge convert: cannot open provenance log: " << args.provenance
                      << "\n";
            return kExitFailure;
        }
    }

    PipelineRunReport report;
    report.command = "convert";
    report.inputs = {args.input, args.grammar_path};
    report.outputs = {args.output};
    std::int64_t read = 0;
    std::int64_t written = 0;
    std::int64_t skipped = 0;
    while (auto line = reader.next()) {
        if (line->empty()) {
            continue;
        }
        ++read;
        RawRecord raw{g.source, *line};
        auto converted = convert_record(raw, g);
        if (!converted.ok()) {
            std::cerr << "trajforge convert: line " << reader.line_number() << ": "
                      << errc_name(converted.error().code) << ": " << converted.error().message
                      << "\n";
            if (args.strict) {
                return kExitStrictParse;
            }
            ++skipped;
            continue;
        }
        const UnifiedTrajectory& traj = converted.value();
        const ValidationReport violations = validate(traj);
        if (!violations.empty()) {
            std::cerr << "trajforge convert: line " << reader.line_number() << ": "
                      << violations.size() << " validation violation(s), first: "
                      << violation_name(violations.front().kind) << "\n";
            if (args.strict) {
                return kExitStrictParse;
            }
            ++skipped;
            continue;
        }
        sink.write_line(to_json_line(traj));
        if (provenance.is_open()) {
            ordered_json p;
            p["trajectory_id"] = traj.trajectory_id;
            p["input"] = args.input;
            p["line"] = reader.line_number();
            provenance << p.dump() << "\n";
        }
        ++written;
    }
    if (!sink.close()) {
        std::cerr << "trajforge convert: failed writing output\n";
        return kExitFailure;
    }
    report.counts["read"] = read;
    report.counts["written"] = written;
    report.counts["skipped"] = skipped;
    report.elapsed_ms = elapsed_since(start);
    print_report(report);
    return kExitOk;
}

// --------------------------------------------------------------------- rate

struct RateArgs {
    std::string input;
    std::string output;
    std::string endpoint;
    std::string model;
    std::string failures;
    std::string criteria_path;
    int concurrency = 4;
    int retries = 2;
    std::size_t max_chars = 16000;
    bool strict = false;
};

int run_rate(const RateArgs& args) {
    const auto start = Clock::now();
    RaterConfig config;
    config.endpoint_url = args.endpoint;
    config.judge_model = args.model;
    config.concurrency = args.concurrency;
    config.retries = args.retries;
    config.max_chars = args.max_chars;
    if (!args.criteria_path.empty()) {
        std::ifstream in(args.criteria_path, std::ios::binary);
        if (!in) {
            std::cerr << "trajforge rate: cannot open criteria file: " << args.criteria_path
                      << "\n";
            return kExitFailure;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        config.criteria_text = buf.str();
    }

    HttpJudgeClient client(args.endpoint, rater_key_from_env());
    if (!client.reachable()) {
        std::cerr << "trajforge rate: endpoint unreachable: " << args.endpoint << "\n";
        return kExitFailure;
    }

    LineReader reader(args.input);
    if (!reader.is_open()) {
        std::cerr << "trajforge rate: cannot open input: " << args.input << "\n";
        return kExitFailure;
    }
    const ParseMode mode = args.strict ? ParseMode::Strict : ParseMode::Lenient;
    std::vector<UnifiedTrajectory> trajectories;
    std::int64_t read = 0;
    std::int64_t malformed = 0;
    while (auto line = reader.next()) {
        if (line->empty()) continue;
        ++read;
        auto parsed = from_json_line(*line, mode);
        if (!parsed.ok()) {
            std::cerr << "trajforge rate: line " << reader.line_number() << ": "
                      << parsed.error().message << "\n";
            if (args.strict) {
                return kExitStrictParse;
            }
            ++malformed;
            continue;
        }
        trajectories.push_back(std::move(parsed).take());
    }

    std::ofstream failures;
    if (!args.failures.empty()) {
        failures.open(args.failures, std::ios::binary | std::ios::trunc);
    }
    std::vector<bool> failed(trajectories.size(), false);
    auto stats = rate_all(trajectories, config, client,
                          [&](std::size_t index, const Error& error) {
                              failed[index] = true;
                              std::cerr << "trajforge rate: trajectory "
                                        << trajectories[index].trajectory_id << ": "
                                        << errc_name(error.code) << ": " << error.message << "\n";
                          });

    OutputSink sink(args.output);
    if (!sink.good()) {
        std::cerr << "trajforge rate: cannot open output: " << args.output << "\n";
        return kExitFailure;
    }
    std::int64_t written = 0;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const std::string line = to_json_line(trajectories[i]);
        if (failed[i]) {
            if (failures.is_open()) {
                failures << line << "\n";
            }
            continue;
        }
        sink.write_line(line);
        ++written;
    }
    if (!sink.close()) {
        std::cerr << "trajforge rate: failed writing output\n";
        return kExitFailure;
    }

    PipelineRunReport report;
    report.command = "rate";
    report.inputs = {args.input};
    report.outputs = {args.output};
    if (!args.failures.empty()) {
        report.outputs.push_back(args.failures);
    }
    report.counts["read"] = read;
    report.counts["malformed"] = malformed;
    report.counts["rated"] = static_cast<std::int64_t>(stats.rated);
    report.counts["failed"] = static_cast<std::int64_t>(stats.failed);
    report.counts["written"] = written;
    report.elapsed_ms = elapsed_since(start);
    print_report(report);
    return kExitOk;
}

// ------------------------------------------------------------------- filter

struct FilterArgs {
    std::string input;
    std::string output;
    double threshold = 4.0;
    bool drop_flagged = false;
    bool strict = false;
};

int run_filter(const FilterArgs& args) {
    const auto start = Clock::now();
    LineReader reader(args.input);
    if (!reader.is_open()) {
        std::cerr << "trajforge filter: cannot open input: " << args.input << "\n";
        return kExitFailure;
    }
    OutputSink sink(args.output);
    if (!sink.good()) {
        std::cerr << "trajforge filter: cannot open output: " << args.output << "\n";
        return kExitFailure;
    }
    const ParseMode mode = args.strict ? ParseMode::Strict : ParseMode::Lenient;
    std::int64_t read = 0;
    std::int64_t written = 0;
    std::int64_t malformed = 0;
    std::map<std::string, std::int64_t> dropped;
    while (auto line = reader.next()) {
        if (line->empty()) continue;
        ++read;
        auto parsed = from_json_line(*line, mode);
        if (!parsed.ok()) {
            std::cerr << "trajforge filter: line " << reader.line_number() << ": "
                      << parsed.error().message << "\n";
            if (args.strict) {
                return kExitStrictParse;
            }
            ++malformed;
            continue;
        }
        const UnifiedTrajectory& traj = parsed.value();
        const FilterDecision decision = rater_filter_decision(traj, args.threshold);
        if (!decision.keep) {
            ++dropped[decision.drop_reason];
            continue;
        }
        if (args.drop_flagged && !heuristic_flags(traj).empty()) {
            ++dropped["flagged"];
            continue;
        }
        sink.write_line(to_json_line(traj));
        ++written;
    }
    if (!sink.close()) {
        std::cerr << "trajforge filter: failed writing output\n";
        return kExitFailure;
    }
    PipelineRunReport report;
    report.command = "filter";
    report.inputs = {args.input};
    report.outputs = {args.output};
    report.counts["read"] = read;
    report.counts["written"] = written;
    report.counts["malformed"] = malformed;
    for (const auto& [reason, count] : dropped) {
        report.counts["dropped_" + reason] = count;
    }
    report.elapsed_ms = elapsed_since(start);
    print_report(report);
    return kExitOk;
}

// -------------------------------------------------------------------- stats

struct StatsArgs {
    std::string input;
    double threshold = 4.0;
    bool as_json = false;
    bool strict = false;
};

int run_stats(const StatsArgs& args) {
    const auto start = Clock::now();
    LineReader reader(args.input);
    if (!reader.is_open()) {
        std::cerr << "trajforge stats: cannot open input: " << args.input << "\n";
        return kExitFailure;
    }
    const ParseMode mode = args.strict ? ParseMode::Strict : ParseMode::Lenient;
    StatsAccumulator acc(args.threshold);
    std::int64_t read = 0;
    std::int64_t malformed = 0;
    while (auto line = reader.next()) {
        if (line->empty()) continue;
        ++read;
        auto parsed = from_json_line(*line, mode);
        if (!parsed.ok()) {
            std::cerr << "trajforge stats: line " << reader.line_number() << ": "
                      << parsed.error().message << "\n";
            if (args.strict) {
                return kExitStrictParse;
            }
            ++malformed;
            continue;
        }
        acc.add(parsed.value());
    }
    const CorpusStats stats = acc.finish();
    if (args.as_json) {
        std::cout << render_stats_json(stats) << "\n";
    } else {
        std::cout << render_stats_table(stats);
    }
    std::cout.flush();

    PipelineRunReport report;
    report.command = "stats";
    report.inputs = {args.input};
    report.outputs = {"-"};
    report.counts["read"] = read;
    report.counts["written"] = static_cast<std::int64_t>(stats.rows.size()) + 1;
    report.counts["malformed"] = malformed;
    report.counts["duplicates"] = static_cast<std::int64_t>(stats.duplicates);
    report.elapsed_ms = elapsed_since(start);
    print_report(report);
    return kExitOk;
}

// ------------------------------------------------------------------- stream

struct StreamArgs {
    std::string mix_path;
    int rank = 0;
    int world_size = 1;
    std::int64_t limit = 0;  // 0 = drain the stream
    std::string emit = "samples";
    std::string split = "train";
};

int run_stream(const StreamArgs& args) {
    const auto start = Clock::now();
    auto spec = load_mix_spec(args.mix_path);
    if (!spec.ok()) {
        std::cerr << "trajforge stream: " << spec.error().message << "\n";
        return kExitFailure;
    }
    if (args.rank < 0 || args.world_size < 1 || args.rank >= args.world_size) {
        std::cerr << "trajforge stream: need 0 <= rank < world_size\n";
        return kExitFailure;
    }
    const EmitKind emit =
        args.emit == "trajectories" ? EmitKind::Trajectories : EmitKind::Samples;
    auto streams = make_rank_stream(spec.value(), args.rank, args.world_size, emit);
    if (!streams.ok()) {
        std::cerr << "trajforge stream: " << errc_name(streams.error().code) << ": "
                  << streams.error().message << "\n";
        return kExitFailure;
    }
    Source<StreamRecord>& stream =
        args.split == "eval" ? streams.value().eval : streams.value().train;

    std::int64_t written = 0;
    while (args.limit == 0 || written < args.limit) {
        auto record = stream();
        if (!record) {
            break;
        }
        std::cout << record->payload_json << "\n";
        ++written;
    }
    std::cout.flush();
    if (!std::cout) {
        std::cerr << "trajforge stream: failed writing stdout\n";
        return kExitFailure;
    }

    PipelineRunReport report;
    report.command = "stream";
    report.inputs = {args.mix_path};
    report.outputs = {"-"};
    report.counts["read"] = written;
    report.counts["written"] = written;
    report.elapsed_ms = elapsed_since(start);
    print_report(report);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trajectory ETL: unify agent logs, rate them, stream training mixes"};
    app.require_subcommand(1);

    ConvertArgs convert_args;
    CLI::App* convert = app.add_subcommand(
        "convert", "convert a source dump into unified trajectory JSONL");
    convert->add_option("--grammar", convert_args.grammar_path, "grammar config path")
        ->required();
    convert->add_option("--input", convert_args.input, "source JSONL file")->required();
    convert->add_option("--output", convert_args.output, "unified JSONL output, '-' for stdout")
        ->required();
    convert->add_option("--source", convert_args.source_override,
                        "override the grammar's source name");
    convert->add_option("--provenance", convert_args.provenance,
                        "write a trajectory_id -> input line log");
    convert->add_flag("--strict", convert_args.strict, "abort on the first malformed record");

    RateArgs rate_args;
    CLI::App* rate = app.add_subcommand("rate", "attach judge verdicts to trajectories");
    rate->add_option("--input", rate_args.input, "unified JSONL input")->required();
    rate->add_option("--output", rate_args.output, "rated JSONL output, '-' for stdout")
        ->required();
    rate->add_option("--endpoint", rate_args.endpoint, "chat-completions endpoint URL")
        ->required();
    rate->add_option("--model", rate_args.model, "judge model name")->required();
    rate->add_option("--concurrency", rate_args.concurrency, "max in-flight judge requests")
        ->check(CLI::PositiveNumber);
    rate->add_option("--retries", rate_args.retries, "extra attempts per trajectory")
        ->check(CLI::NonNegativeNumber);
    rate->add_option("--max-chars", rate_args.max_chars,
                     "serialization budget before truncation");
    rate->add_option("--failures", rate_args.failures, "sidecar JSONL for unrated trajectories");
    rate->add_option("--criteria", rate_args.criteria_path,
                     "file overriding the built-in criteria block");
    rate->add_flag("--strict", rate_args.strict,
                   "reject unknown fields and abort on malformed lines");

    FilterArgs filter_args;
    CLI::App* filter = app.add_subcommand("filter", "keep trajectories at or above a threshold");
    filter->add_option("--input", filter_args.input, "rated JSONL input")->required();
    filter->add_option("--output", filter_args.output, "filtered JSONL output, '-' for stdout")
        ->required();
    filter->add_option("--threshold", filter_args.threshold, "minimum rater score (default 4.0)");
    filter->add_flag("--drop-flagged", filter_args.drop_flagged,
                     "also drop trajectories with heuristic pathology flags");
    filter->add_flag("--strict", filter_args.strict,
                     "reject unknown fields and abort on malformed lines");

    StatsArgs stats_args;
    CLI::App* stats = app.add_subcommand("stats", "per-source corpus statistics");
    stats->add_option("--input", stats_args.input, "unified JSONL input")->required();
    stats->add_option("--threshold", stats_args.threshold, "rater threshold (default 4.0)");
    stats->add_flag("--json", stats_args.as_json, "machine-readable output");
    stats->add_flag("--strict", stats_args.strict,
                    "reject unknown fields and abort on malformed lines");

    StreamArgs stream_args;
    CLI::App* stream = app.add_subcommand("stream", "deterministic rank stream over a mix");
    stream->add_option("--mix", stream_args.mix_path, "mix config path")->required();
    stream->add_option("--rank", stream_args.rank, "consumer rank (default 0)");
    stream->add_option("--world-size", stream_args.world_size, "total consumers (default 1)");
    stream->add_option("--limit", stream_args.limit, "stop after N records (0 = all)");
    stream->add_option("--emit", stream_args.emit, "samples|trajectories")
        ->check(CLI::IsMember({"samples", "trajectories"}));
    stream->add_option("--split", stream_args.split, "train|eval")
        ->check(CLI::IsMember({"train", "eval"}));

    CLI11_PARSE(app, argc, argv);

    if (convert->parsed()) return run_convert(convert_args);
    if (rate->parsed()) return run_rate(rate_args);
    if (filter->parsed()) return run_filter(filter_args);
    if (stats->parsed()) return run_stats(stats_args);
    if (stream->parsed()) return run_stream(stream_args);
    return kExitFailure;
}
