#include "trajforge/stream.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <memory>
#include <sstream>

#include "trajforge/jsonl.hpp"

namespace trajforge {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string training_sample_to_json(const TrainingSample& sample) {
    ordered_json j;
    j["prompt"] = sample.prompt;
    j["chosen"] = sample.chosen;
    return j.dump();
}

Result<MixSpec> parse_mix_spec(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return make_error(Errc::ConfigError, "mix config: not a JSON object");
    }
    MixSpec spec;
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer()) {
            return make_error(Errc::ConfigError, "mix config: 'seed' must be an integer");
        }
        spec.seed = j["seed"].get<std::int64_t>();
    }
    if (j.contains("buffer_size")) {
        if (!j["buffer_size"].is_number_integer() || j["buffer_size"].get<std::int64_t>() < 1) {
            return make_error(Errc::ConfigError, "mix config: 'buffer_size' must be >= 1");
        }
        spec.buffer_size = j["buffer_size"].get<std::size_t>();
    }
    if (j.contains("strategy")) {
        const std::string s = j["strategy"].is_string() ? j["strategy"].get<std::string>() : "";
        if (s == "first_exhausted") {
            spec.strategy = ExhaustionStrategy::FirstExhausted;
        } else if (s == "all_exhausted") {
            spec.strategy = ExhaustionStrategy::AllExhausted;
        } else {
            return make_error(Errc::ConfigError,
                              "mix config: 'strategy' must be first_exhausted or all_exhausted");
        }
    }
    if (j.contains("eval_fraction")) {
        if (!j["eval_fraction"].is_number()) {
            return make_error(Errc::ConfigError, "mix config: 'eval_fraction' must be a number");
        }
        spec.eval_fraction = j["eval_fraction"].get<double>();
        if (spec.eval_fraction < 0.0 || spec.eval_fraction >= 1.0) {
            return make_error(Errc::ConfigError, "mix config: 'eval_fraction' must be in [0, 1)");
        }
    }
    if (!j.contains("entries") || !j["entries"].is_array() || j["entries"].empty()) {
        return make_error(Errc::ConfigError, "mix config: 'entries' must be a non-empty array");
    }
    double prob_sum = 0.0;
    for (const json& e : j["entries"]) {
        if (!e.is_object() || !e.contains("path") || !e["path"].is_string() ||
            !e.contains("sample_prob") || !e["sample_prob"].is_number()) {
            return make_error(Errc::ConfigError,
                              "mix config: each entry needs 'path' and numeric 'sample_prob'");
        }
        MixEntry entry;
        entry.dataset_path = e["path"].get<std::string>();
        entry.sample_prob = e["sample_prob"].get<double>();
        if (entry.sample_prob < 0.0) {
            return make_error(Errc::ConfigError, "mix config: 'sample_prob' must be >= 0");
        }
        if (e.contains("min_score") && !e["min_score"].is_null()) {
            if (!e["min_score"].is_number()) {
                return make_error(Errc::ConfigError, "mix config: 'min_score' must be a number");
            }
            entry.min_score = e["min_score"].get<double>();
        }
        prob_sum += entry.sample_prob;
        spec.entries.push_back(std::move(entry));
    }
    if (prob_sum <= 0.0) {
        return make_error(Errc::InvalidProbs, "mix config: sample probabilities sum to zero");
    }
    return spec;
}

Result<MixSpec> load_mix_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return make_error(Errc::IoError, "cannot open mix config: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_mix_spec(buf.str());
}

Source<UnifiedTrajectory> jsonl_trajectory_source(
    const std::string& path, const std::function<void(std::size_t)>& on_skip) {
    auto reader = std::make_shared<LineReader>(path);
    return [reader, on_skip]() -> std::optional<UnifiedTrajectory> {
        for (;;) {
            auto line = reader->next();
            if (!line) {
                return std::nullopt;
            }
            if (line->empty()) {
                continue;
            }
            auto parsed = from_json_line(*line, ParseMode::Lenient);
            if (parsed.ok()) {
                return std::move(parsed).take();
            }
            if (on_skip) {
                on_skip(reader->line_number());
            }
        }
    };
}

Source<TrainingSample> high_score_filter(Source<UnifiedTrajectory> upstream, double min_score) {
    struct State {
        Source<UnifiedTrajectory> upstream;
        std::vector<TrainingSample> pending;  // samples of the current trajectory
        std::size_t cursor = 0;
    };
    auto state = std::make_shared<State>();
    state->upstream = std::move(upstream);
    return [state, min_score]() -> std::optional<TrainingSample> {
        for (;;) {
            if (state->cursor < state->pending.size()) {
                return state->pending[state->cursor++];
            }
            auto traj = state->upstream();
            if (!traj) {
                return std::nullopt;
            }
            if (!traj->score || *traj->score < min_score) {
                continue;
            }
            state->pending.clear();
            state->cursor = 0;
            for (const Step& step : traj->steps) {
                if (step.input.empty() || step.output.empty()) {
                    continue;  // keep the non-empty sample invariant
                }
                state->pending.push_back({step.input, step.output});
            }
        }
    };
}

namespace {

// Per-entry record pipeline: open -> shard -> filter/expand -> shuffle.
SourceFactory<StreamRecord> entry_record_factory(const MixEntry& entry, const RankContext& ctx,
                                                 std::size_t buffer_size, EmitKind emit) {
    return [entry, ctx, buffer_size, emit]() -> Source<StreamRecord> {
        Source<UnifiedTrajectory> trajectories =
            shard(jsonl_trajectory_source(entry.dataset_path), ctx.rank, ctx.world_size);

        Source<StreamRecord> records;
        if (emit == EmitKind::Samples) {
            struct State {
                Source<UnifiedTrajectory> upstream;
                std::vector<StreamRecord> pending;
                std::size_t cursor = 0;
            };
            auto state = std::make_shared<State>();
            state->upstream = std::move(trajectories);
            const std::optional<double> min_score = entry.min_score;
            records = [state, min_score]() -> std::optional<StreamRecord> {
                for (;;) {
                    if (state->cursor < state->pending.size()) {
                        return state->pending[state->cursor++];
                    }
                    auto traj = state->upstream();
                    if (!traj) {
                        return std::nullopt;
                    }
                    if (min_score && (!traj->score || *traj->score < *min_score)) {
                        continue;
                    }
                    state->pending.clear();
                    state->cursor = 0;
                    for (const Step& step : traj->steps) {
                        if (step.input.empty() || step.output.empty()) {
                            continue;
                        }
                        StreamRecord record;
                        record.trajectory_id = traj->trajectory_id;
                        record.payload_json =
                            training_sample_to_json({step.input, step.output});
                        state->pending.push_back(std::move(record));
                    }
                }
            };
        } else {
            Source<UnifiedTrajectory> upstream = std::move(trajectories);
            const std::optional<double> min_score = entry.min_score;
            records = [upstream = std::move(upstream),
                       min_score]() -> std::optional<StreamRecord> {
                for (;;) {
                    auto traj = upstream();
                    if (!traj) {
                        return std::nullopt;
                    }
                    if (min_score && (!traj->score || *traj->score < *min_score)) {
                        continue;
                    }
                    StreamRecord record;
                    record.trajectory_id = traj->trajectory_id;
                    record.payload_json = to_json_line(*traj);
                    return record;
                }
            };
        }
        return buffered_shuffle(std::move(records),
                                static_cast<std::uint64_t>(ctx.derived_seed), buffer_size);
    };
}

}  // namespace

Result<RankStreams> make_rank_stream(const MixSpec& spec, int rank, int world_size,
                                     EmitKind emit) {
    if (world_size < 1 || rank < 0 || rank >= world_size) {
        return make_error(Errc::IndexOutOfRange, "rank must satisfy 0 <= rank < world_size");
    }
    if (spec.entries.empty()) {
        return make_error(Errc::ConfigError, "mix spec has no entries");
    }
    for (const MixEntry& entry : spec.entries) {
        std::ifstream probe_file(entry.dataset_path, std::ios::binary);
        if (!probe_file) {
            return make_error(Errc::IoError, "cannot open dataset: " + entry.dataset_path);
        }
    }
    const RankContext ctx = make_rank_context(spec.seed, rank, world_size);

    std::vector<double> probs;
    probs.reserve(spec.entries.size());
    std::vector<SourceFactory<StreamRecord>> factories;
    factories.reserve(spec.entries.size());
    for (const MixEntry& entry : spec.entries) {
        probs.push_back(entry.sample_prob);
        factories.push_back(entry_record_factory(entry, ctx, spec.buffer_size, emit));
    }

    // Both split views rebuild the interleaved stream from scratch; the
    // generator state is theirs alone, so pulling one never disturbs the other.
    const double eval_fraction = spec.eval_fraction;
    const auto split_seed = static_cast<std::uint64_t>(spec.seed);
    auto interleaved_factory = [factories, probs, ctx,
                                strategy = spec.strategy]() -> Source<StreamRecord> {
        auto interleaved = interleave<StreamRecord>(
            factories, probs, static_cast<std::uint64_t>(ctx.derived_seed), strategy);
        if (!interleaved.ok()) {
            return []() -> std::optional<StreamRecord> { return std::nullopt; };
        }
        return std::move(interleaved).take();
    };

    // Surface construction errors (EmptyMix, InvalidProbs) eagerly.
    auto probe = interleave<StreamRecord>(factories, probs,
                                          static_cast<std::uint64_t>(ctx.derived_seed),
                                          spec.strategy);
    if (!probe.ok()) {
        return probe.error();
    }

    auto [train, eval] = split_eval<StreamRecord>(
        interleaved_factory,
        [](const StreamRecord& r) -> const std::string& { return r.trajectory_id; },
        eval_fraction, split_seed);
    return RankStreams{std::move(train), std::move(eval)};
}

}  // namespace trajforge
