#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trajforge/hash.hpp"
#include "trajforge/result.hpp"
#include "trajforge/rng.hpp"
#include "trajforge/schema.hpp"

namespace trajforge {

// Pull-based stream: returns the next record or nullopt at exhaustion.
template <typename T>
using Source = std::function<std::optional<T>()>;

// Rebuilds a stream from its beginning; used when interleaving cycles an
// exhausted source.
template <typename T>
using SourceFactory = std::function<Source<T>()>;

// Rank-derived seed: seed + rank. Part of the compatibility contract:
// injective over ranks, and rank 0 reproduces the single-process stream.
inline std::int64_t init_device_seed(std::int64_t seed, int rank) {
    return seed + rank;
}

struct RankContext {
    int rank = 0;
    int world_size = 1;
    std::int64_t derived_seed = 0;
};

inline RankContext make_rank_context(std::int64_t seed, int rank, int world_size) {
    return RankContext{rank, world_size, init_device_seed(seed, rank)};
}

template <typename T>
Source<T> source_from_vector(std::vector<T> items) {
    auto state = std::make_shared<std::pair<std::vector<T>, std::size_t>>(std::move(items), 0);
    return [state]() -> std::optional<T> {
        if (state->second >= state->first.size()) {
            return std::nullopt;
        }
        return state->first[state->second++];
    };
}

// Keeps records whose 0-based position satisfies pos % world_size == rank.
// Shards over all ranks are disjoint and jointly exhaustive.
template <typename T>
Source<T> shard(Source<T> upstream, int rank, int world_size) {
    auto position = std::make_shared<std::int64_t>(-1);
    return [upstream = std::move(upstream), position, rank, world_size]() -> std::optional<T> {
        for (;;) {
            auto item = upstream();
            if (!item) {
                return std::nullopt;
            }
            ++*position;
            if (*position % world_size == rank) {
                return item;
            }
        }
    };
}

enum class ExhaustionStrategy {
    FirstExhausted,  // stop as soon as an exhausted source is drawn
    AllExhausted,    // cycle exhausted sources until every source emitted fully
};

namespace detail {

template <typename T>
struct ShuffleState {
    Source<T> upstream;
    DeterministicRng rng;
    std::vector<T> buffer;
    bool filled = false;
    explicit ShuffleState(std::uint64_t s) : rng(s) {}
};

template <typename T>
struct InterleavedSource {
    SourceFactory<T> factory;
    Source<T> current;
    std::optional<T> lookahead;
    bool covered = false;  // fully emitted at least once
};

template <typename T>
struct InterleaveState {
    std::vector<InterleavedSource<T>> sources;
    std::vector<double> cumulative;
    DeterministicRng rng;
    ExhaustionStrategy strategy = ExhaustionStrategy::FirstExhausted;
    bool done = false;
    explicit InterleaveState(std::uint64_t s) : rng(s) {}
};

}  // namespace detail

// Streaming shuffle over a window of buffer_size slots: fill, then repeatedly
// emit a uniformly drawn slot and refill it; drain remaining slots in random
// order at end. buffer_size == 1 degenerates to the identity. Holds at most
// buffer_size records; output is a permutation of the input and is fully
// determined by (input, seed, buffer_size).
template <typename T>
Source<T> buffered_shuffle(Source<T> upstream, std::uint64_t seed, std::size_t buffer_size) {
    auto state = std::make_shared<detail::ShuffleState<T>>(seed);
    state->upstream = std::move(upstream);
    return [state, buffer_size]() -> std::optional<T> {
        if (!state->filled) {
            state->filled = true;
            state->buffer.reserve(buffer_size);
            while (state->buffer.size() < buffer_size) {
                auto item = state->upstream();
                if (!item) break;
                state->buffer.push_back(std::move(*item));
            }
        }
        if (state->buffer.empty()) {
            return std::nullopt;
        }
        const std::size_t slot = state->rng.uniform_index(state->buffer.size());
        T out = std::move(state->buffer[slot]);
        if (auto incoming = state->upstream()) {
            state->buffer[slot] = std::move(*incoming);
        } else {
            state->buffer[slot] = std::move(state->buffer.back());
            state->buffer.pop_back();
        }
        return out;
    };
}

// Probability-weighted interleaving. Each draw picks a source index from the
// normalized distribution via the deterministic generator and emits that
// source's next record. Under AllExhausted an exhausted source restarts from
// its beginning and the stream ends once every source has been emitted in
// full at least once.
template <typename T>
Result<Source<T>> interleave(std::vector<SourceFactory<T>> factories, std::vector<double> probs,
                             std::uint64_t seed, ExhaustionStrategy strategy) {
    if (factories.size() != probs.size() || factories.empty()) {
        return make_error(Errc::InvalidProbs, "probs and sources must align and be non-empty");
    }
    double total = 0.0;
    for (double p : probs) {
        if (p < 0.0) {
            return make_error(Errc::InvalidProbs, "sample probabilities must be >= 0");
        }
        total += p;
    }
    if (total <= 0.0) {
        return make_error(Errc::InvalidProbs, "sample probabilities sum to zero");
    }
    std::vector<double> cumulative(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i] / total;
        cumulative[i] = acc;
    }
    cumulative.back() = 1.0;  // guard against rounding drift

    auto state = std::make_shared<detail::InterleaveState<T>>(seed);
    state->cumulative = std::move(cumulative);
    state->strategy = strategy;
    bool any_nonempty = false;
    for (std::size_t i = 0; i < factories.size(); ++i) {
        detail::InterleavedSource<T> src;
        src.factory = std::move(factories[i]);
        src.current = src.factory();
        src.lookahead = src.current();
        if (src.lookahead) {
            any_nonempty = true;
        } else {
            src.covered = true;  // empty source counts as fully emitted
        }
        if (probs[i] <= 0.0) {
            src.covered = true;  // unreachable under the distribution
        }
        state->sources.push_back(std::move(src));
    }
    if (!any_nonempty) {
        return make_error(Errc::EmptyMix, "every source in the mix is empty");
    }

    Source<T> out = [state]() -> std::optional<T> {
        for (;;) {
            if (state->done) {
                return std::nullopt;
            }
            if (state->strategy == ExhaustionStrategy::AllExhausted) {
                bool all_covered = true;
                for (const auto& src : state->sources) {
                    if (!src.covered) {
                        all_covered = false;
                        break;
                    }
                }
                if (all_covered) {
                    state->done = true;
                    return std::nullopt;
                }
            }
            const double u = state->rng.uniform_unit();
            std::size_t pick = 0;
            while (pick + 1 < state->cumulative.size() && u >= state->cumulative[pick]) {
                ++pick;
            }
            detail::InterleavedSource<T>& src = state->sources[pick];
            if (!src.lookahead) {
                if (state->strategy == ExhaustionStrategy::FirstExhausted) {
                    state->done = true;
                    return std::nullopt;
                }
                // AllExhausted: restart the drawn source from its beginning.
                src.current = src.factory();
                src.lookahead = src.current();
                if (!src.lookahead) {
                    continue;  // genuinely empty source, redraw
                }
            }
            T record = std::move(*src.lookahead);
            src.lookahead = src.current();
            if (!src.lookahead) {
                src.covered = true;
            }
            return record;
        }
    };
    return out;
}

// Split assignment for one record id: eval iff
//   seeded_id_hash(id, seed) mod 10^6  <  round(eval_fraction * 10^6).
// Depends only on (id, seed), so the assignment is stable under any stream
// order and a trajectory can never land in both splits.
inline bool eval_assignment(std::string_view trajectory_id, double eval_fraction,
                            std::uint64_t seed) {
    const auto threshold = static_cast<std::uint64_t>(eval_fraction * 1e6 + 0.5);
    return seeded_id_hash(trajectory_id, seed) % 1000000ULL < threshold;
}

// Builds independent train/eval views over the same underlying stream; each
// view re-opens the stream through the factory and filters by assignment.
template <typename T, typename IdFn>
std::pair<Source<T>, Source<T>> split_eval(SourceFactory<T> factory, IdFn id_of,
                                           double eval_fraction, std::uint64_t seed) {
    auto filtered = [factory, id_of, eval_fraction, seed](bool want_eval) -> Source<T> {
        Source<T> upstream = factory();
        return [upstream = std::move(upstream), id_of, eval_fraction, seed,
                want_eval]() -> std::optional<T> {
            for (;;) {
                auto item = upstream();
                if (!item) {
                    return std::nullopt;
                }
                if (eval_assignment(id_of(*item), eval_fraction, seed) == want_eval) {
                    return item;
                }
            }
        };
    };
    return {filtered(false), filtered(true)};
}

// ---------------------------------------------------------------------------
// Mix configuration and the full per-rank pipeline over unified JSONL files.

struct TrainingSample {
    std::string prompt;  // step input
    std::string chosen;  // step output

    bool operator==(const TrainingSample&) const = default;
};

std::string training_sample_to_json(const TrainingSample& sample);

struct MixEntry {
    std::string dataset_path;
    double sample_prob = 0.0;
    std::optional<double> min_score;  // environment-score filter; unset = keep all
};

struct MixSpec {
    std::vector<MixEntry> entries;
    std::int64_t seed = 42;
    std::size_t buffer_size = 1000;
    ExhaustionStrategy strategy = ExhaustionStrategy::FirstExhausted;
    double eval_fraction = 0.005;
};

Result<MixSpec> parse_mix_spec(std::string_view json_text);
Result<MixSpec> load_mix_spec(const std::string& path);

// Emits one TrainingSample per step of every trajectory whose environment
// score is present and >= min_score; unscored trajectories are skipped.
// Steps whose input or output is empty are dropped so samples always satisfy
// the non-empty invariant.
Source<TrainingSample> high_score_filter(Source<UnifiedTrajectory> upstream, double min_score);

// Streams trajectories out of a unified JSONL file; malformed lines are
// skipped (counted via on_skip when provided).
Source<UnifiedTrajectory> jsonl_trajectory_source(
    const std::string& path, const std::function<void(std::size_t)>& on_skip = {});

// A record flowing through the rank pipeline: the originating trajectory id
// (split assignment key) plus the serialized output line.
struct StreamRecord {
    std::string trajectory_id;
    std::string payload_json;

    bool operator==(const StreamRecord&) const = default;
};

enum class EmitKind { Samples, Trajectories };

struct RankStreams {
    Source<StreamRecord> train;
    Source<StreamRecord> eval;
};

// Full deterministic composition, per source:
//   open -> shard(rank, world) -> optional high-score filter (+ sample
//   expansion) -> buffered_shuffle(derived seed, buffer)
// then interleave over sources with the derived seed, then the train/eval
// split keyed on spec.seed (rank-independent so splits agree across ranks).
Result<RankStreams> make_rank_stream(const MixSpec& spec, int rank, int world_size,
                                     EmitKind emit = EmitKind::Samples);

}  // namespace trajforge
