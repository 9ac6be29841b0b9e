#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "test_helpers.hpp"
#include "trajforge/hash.hpp"
#include "trajforge/schema.hpp"
#include "trajforge/stream.hpp"

using namespace trajforge;

namespace {

std::vector<int> drain(Source<int> source) {
    std::vector<int> out;
    while (auto item = source()) {
        out.push_back(*item);
    }
    return out;
}

std::vector<int> iota_vec(int n) {
    std::vector<int> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

SourceFactory<int> iota_factory(int n) {
    return [n]() { return source_from_vector(iota_vec(n)); };
}

// Writes a synthetic rated corpus and returns the ids in file order.
std::vector<std::string> write_corpus(const testutil::TempFile& file, const std::string& tag,
                                      int count, int steps_per_traj, double score) {
    std::vector<std::string> lines;
    std::vector<std::string> ids;
    for (int i = 0; i < count; ++i) {
        UnifiedTrajectory t =
            testutil::make_synthetic(tag + "-" + std::to_string(i), tag, steps_per_traj);
        t.score = score;
        lines.push_back(to_json_line(t));
        ids.push_back(t.trajectory_id);
    }
    file.write_lines(lines);
    return ids;
}

}  // namespace

TEST_CASE("device seeds derive by addition and stay distinct per rank") {
    CHECK(init_device_seed(42, 0) == 42);
    CHECK(init_device_seed(42, 3) == 45);
    std::set<std::int64_t> seeds;
    for (int rank = 0; rank < 8; ++rank) {
        seeds.insert(init_device_seed(42, rank));
    }
    CHECK(seeds.size() == 8);
    CHECK(make_rank_context(42, 3, 8).derived_seed == 45);
}

TEST_CASE("sharding picks positions congruent to the rank") {
    CHECK(drain(shard(source_from_vector(iota_vec(10)), 0, 1)) == iota_vec(10));
    CHECK(drain(shard(source_from_vector(iota_vec(10)), 1, 4)) == std::vector<int>{1, 5, 9});
}

TEST_CASE("shards partition the stream for any world size") {
    for (int world_size : {2, 3, 4, 8}) {
        std::vector<int> merged;
        for (int rank = 0; rank < world_size; ++rank) {
            const auto part = drain(shard(source_from_vector(iota_vec(103)), rank, world_size));
            // disjointness: positions are congruent to the rank
            for (std::size_t i = 0; i < part.size(); ++i) {
                CHECK(part[i] % world_size == rank);
            }
            merged.insert(merged.end(), part.begin(), part.end());
        }
        std::sort(merged.begin(), merged.end());
        CHECK(merged == iota_vec(103));
    }
}

TEST_CASE("buffer size one makes the shuffle an identity") {
    CHECK(drain(buffered_shuffle(source_from_vector(iota_vec(50)), 42, 1)) == iota_vec(50));
}

TEST_CASE("shuffling is deterministic in the seed and permutes the input") {
    const auto first = drain(buffered_shuffle(source_from_vector(iota_vec(100)), 42, 16));
    const auto second = drain(buffered_shuffle(source_from_vector(iota_vec(100)), 42, 16));
    CHECK(first == second);

    const auto other_seed = drain(buffered_shuffle(source_from_vector(iota_vec(100)), 43, 16));
    CHECK(first != other_seed);

    for (std::size_t buffer_size : {2ul, 7ul, 100ul, 1000ul}) {
        auto shuffled = drain(buffered_shuffle(source_from_vector(iota_vec(100)), 7, buffer_size));
        REQUIRE(shuffled.size() == 100);
        std::sort(shuffled.begin(), shuffled.end());
        CHECK(shuffled == iota_vec(100));
    }
}

TEST_CASE("high_score_filter expands kept trajectories into per-step samples") {
    std::vector<UnifiedTrajectory> corpus;
    UnifiedTrajectory keep = testutil::make_synthetic("hs-keep", "demo", 3);
    keep.score = 0.9;
    UnifiedTrajectory boundary = testutil::make_synthetic("hs-boundary", "demo", 2);
    boundary.score = 0.8;
    UnifiedTrajectory low = testutil::make_synthetic("hs-low", "demo", 4);
    low.score = 0.79;
    UnifiedTrajectory unscored = testutil::make_synthetic("hs-null", "demo", 4);
    corpus = {keep, boundary, low, unscored};

    std::vector<TrainingSample> samples;
    auto stream = high_score_filter(source_from_vector(corpus), 0.8);
    while (auto s = stream()) {
        samples.push_back(*s);
    }
    REQUIRE(samples.size() == 5);  // 3 + 2, low and unscored skipped
    CHECK(samples[0].prompt == keep.steps[0].input);
    CHECK(samples[0].chosen == keep.steps[0].output);
    CHECK(samples[3].prompt == boundary.steps[0].input);
    for (const TrainingSample& s : samples) {
        CHECK(!s.prompt.empty());
        CHECK(!s.chosen.empty());
    }
}

namespace {

// Source of n values starting at `base`, so interleaved outputs can be
// attributed unambiguously.
SourceFactory<int> range_factory(int base, int n) {
    return [base, n]() {
        std::vector<int> values(n);
        std::iota(values.begin(), values.end(), base);
        return source_from_vector(values);
    };
}

}  // namespace

TEST_CASE("interleave follows a degenerate distribution exactly") {
    auto result = interleave<int>({iota_factory(5), iota_factory(9)}, {1.0, 0.0}, 42,
                                  ExhaustionStrategy::FirstExhausted);
    REQUIRE(result.ok());
    CHECK(drain(std::move(result).take()) == iota_vec(5));
}

TEST_CASE("interleave is invariant under probability normalization") {
    auto a = interleave<int>({iota_factory(40), iota_factory(40)}, {0.2, 0.2}, 42,
                             ExhaustionStrategy::FirstExhausted);
    auto b = interleave<int>({iota_factory(40), iota_factory(40)}, {0.5, 0.5}, 42,
                             ExhaustionStrategy::FirstExhausted);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    CHECK(drain(std::move(a).take()) == drain(std::move(b).take()));
}

TEST_CASE("interleave construction errors") {
    auto empty = interleave<int>({iota_factory(0), iota_factory(0)}, {0.5, 0.5}, 42,
                                 ExhaustionStrategy::FirstExhausted);
    REQUIRE(!empty.ok());
    CHECK(empty.error().code == Errc::EmptyMix);

    auto zero_probs = interleave<int>({iota_factory(3)}, {0.0}, 42,
                                      ExhaustionStrategy::FirstExhausted);
    REQUIRE(!zero_probs.ok());
    CHECK(zero_probs.error().code == Errc::InvalidProbs);

    auto negative = interleave<int>({iota_factory(3)}, {-1.0}, 42,
                                    ExhaustionStrategy::FirstExhausted);
    REQUIRE(!negative.ok());
    CHECK(negative.error().code == Errc::InvalidProbs);

    auto mismatch = interleave<int>({iota_factory(3)}, {0.5, 0.5}, 42,
                                    ExhaustionStrategy::FirstExhausted);
    CHECK(!mismatch.ok());
}

TEST_CASE("first-exhausted stops once the short stream runs dry") {
    auto result = interleave<int>({range_factory(0, 2), range_factory(100, 1000)}, {0.5, 0.5}, 42,
                                  ExhaustionStrategy::FirstExhausted);
    REQUIRE(result.ok());
    const auto merged = drain(std::move(result).take());
    // Exactly two records came from the short stream, and the output ends
    // within a handful of draws of its exhaustion.
    const auto short_count = std::count_if(merged.begin(), merged.end(),
                                           [](int v) { return v < 100; });
    CHECK(short_count == 2);
    CHECK(merged.size() < 40);
}

TEST_CASE("all-exhausted covers every record of every source") {
    auto result = interleave<int>({range_factory(0, 7), range_factory(100, 23)}, {0.8, 0.2}, 42,
                                  ExhaustionStrategy::AllExhausted);
    REQUIRE(result.ok());
    const auto merged = drain(std::move(result).take());
    std::set<int> seen(merged.begin(), merged.end());
    for (int v = 0; v < 7; ++v) {
        CHECK(seen.count(v) == 1);
    }
    for (int v = 100; v < 123; ++v) {
        CHECK(seen.count(v) == 1);
    }
    // the short high-probability source cycled
    CHECK(std::count(merged.begin(), merged.end(), 0) >= 2);
}

TEST_CASE("interleave frequencies track the sampling probabilities") {
    auto result = interleave<int>({range_factory(0, 40000), range_factory(1000000, 40000)},
                                  {0.7, 0.3}, 42, ExhaustionStrategy::AllExhausted);
    REQUIRE(result.ok());
    auto stream = std::move(result).take();
    int from_first = 0;
    int total = 0;
    for (int draw = 0; draw < 20000; ++draw) {
        auto item = stream();
        REQUIRE(item.has_value());
        ++total;
        if (*item < 1000000) ++from_first;
    }
    const double observed = static_cast<double>(from_first) / total;
    CHECK(observed > 0.68);
    CHECK(observed < 0.72);
}

TEST_CASE("eval assignment matches the frozen reference hashes") {
    // splitmix64(fnv1a64(id) ^ seed), values derived independently
    CHECK(seeded_id_hash("traj-001", 42) == 6439704861643331012ULL);
    CHECK(seeded_id_hash("traj-001", 43) == 15117164598741090114ULL);
    CHECK(seeded_id_hash("webshop-0001", 42) == 17222641673686633335ULL);
    CHECK(seeded_id_hash("", 0) == 14087677454934409008ULL);

    // 331012 >= 10000, so this id trains at a 1% holdout
    CHECK(!eval_assignment("traj-001", 0.01, 42));
    // and is eval at a 35% holdout
    CHECK(eval_assignment("traj-001", 0.35, 42));
    CHECK(!eval_assignment("traj-001", 0.0, 42));
}

TEST_CASE("split assignment is order independent and near the target fraction") {
    std::vector<std::string> ids;
    for (int i = 0; i < 100000; ++i) {
        ids.push_back("id-" + std::to_string(i));
    }
    int eval_count = 0;
    for (const std::string& id : ids) {
        if (eval_assignment(id, 0.01, 42)) ++eval_count;
    }
    // binomial: 1000 +- 3 sigma (~94)
    CHECK(eval_count > 900);
    CHECK(eval_count < 1100);

    std::mt19937_64 rng(3);
    std::shuffle(ids.begin(), ids.end(), rng);
    int eval_count_shuffled = 0;
    for (const std::string& id : ids) {
        if (eval_assignment(id, 0.01, 42)) ++eval_count_shuffled;
    }
    CHECK(eval_count_shuffled == eval_count);
}

TEST_CASE("split_eval partitions a stream without overlap") {
    std::vector<std::string> ids;
    for (int i = 0; i < 500; ++i) {
        ids.push_back("s-" + std::to_string(i));
    }
    auto factory = [ids]() { return source_from_vector(ids); };
    auto [train, eval] = split_eval<std::string>(
        factory, [](const std::string& s) { return s; }, 0.25, 9);
    std::set<std::string> train_set;
    std::set<std::string> eval_set;
    while (auto item = train()) train_set.insert(*item);
    while (auto item = eval()) eval_set.insert(*item);
    CHECK(train_set.size() + eval_set.size() == ids.size());
    for (const std::string& id : eval_set) {
        CHECK(train_set.count(id) == 0);
    }

    auto [all_train, no_eval] = split_eval<std::string>(
        factory, [](const std::string& s) { return s; }, 0.0, 9);
    std::size_t train_count = 0;
    while (all_train()) ++train_count;
    CHECK(train_count == ids.size());
    CHECK(!no_eval().has_value());
}

TEST_CASE("mix specs parse with defaults and reject bad values") {
    auto spec = parse_mix_spec(R"({"entries":[{"path":"a.jsonl","sample_prob":1.0}]})");
    REQUIRE(spec.ok());
    CHECK(spec.value().seed == 42);
    CHECK(spec.value().buffer_size == 1000);
    CHECK(spec.value().strategy == ExhaustionStrategy::FirstExhausted);
    CHECK(spec.value().eval_fraction == 0.005);
    CHECK(!spec.value().entries[0].min_score.has_value());

    auto full = parse_mix_spec(
        R"({"seed":7,"buffer_size":64,"strategy":"all_exhausted","eval_fraction":0.1,
            "entries":[{"path":"a.jsonl","sample_prob":0.7,"min_score":0.8},
                       {"path":"b.jsonl","sample_prob":0.3}]})");
    REQUIRE(full.ok());
    CHECK(full.value().strategy == ExhaustionStrategy::AllExhausted);
    CHECK(full.value().entries[0].min_score == 0.8);

    CHECK(!parse_mix_spec(R"({"entries":[]})").ok());
    CHECK(!parse_mix_spec(R"({"entries":[{"path":"a","sample_prob":0.0}]})").ok());
    CHECK(!parse_mix_spec(R"({"entries":[{"path":"a","sample_prob":-0.4}]})").ok());
    CHECK(!parse_mix_spec(R"({"buffer_size":0,"entries":[{"path":"a","sample_prob":1}]})").ok());
    CHECK(!parse_mix_spec(R"({"eval_fraction":1.0,"entries":[{"path":"a","sample_prob":1}]})").ok());
    CHECK(!parse_mix_spec("not json").ok());
}

TEST_CASE("rank streams with randomness disabled preserve file order") {
    testutil::TempFile corpus("rank_plain");
    write_corpus(corpus, "plain", 6, 2, 1.0);

    MixSpec spec;
    spec.entries = {{corpus.path(), 1.0, std::nullopt}};
    spec.buffer_size = 1;
    spec.eval_fraction = 0.0;
    auto streams = make_rank_stream(spec, 0, 1, EmitKind::Samples);
    REQUIRE(streams.ok());
    std::vector<std::string> payloads;
    while (auto record = streams.value().train()) {
        payloads.push_back(record->payload_json);
    }
    REQUIRE(payloads.size() == 12);  // 6 trajectories x 2 steps, in order
    CHECK(payloads[0].find("plain-0") != std::string::npos);
    CHECK(payloads[11].find("plain-5") != std::string::npos);
    for (std::size_t i = 0; i + 1 < payloads.size(); i += 2) {
        CHECK(payloads[i].find("-1]") != std::string::npos);  // step 1 before step 2
    }
}

TEST_CASE("rank streams are deterministic and disjoint across ranks") {
    testutil::TempFile corpus("rank_det");
    write_corpus(corpus, "det", 50, 2, 1.0);

    MixSpec spec;
    spec.entries = {{corpus.path(), 1.0, std::nullopt}};
    spec.buffer_size = 8;
    spec.seed = 42;
    spec.eval_fraction = 0.0;

    auto run = [&](int rank, int world) {
        auto streams = make_rank_stream(spec, rank, world, EmitKind::Trajectories);
        REQUIRE(streams.ok());
        std::vector<std::string> out;
        while (auto record = streams.value().train()) {
            out.push_back(record->trajectory_id);
        }
        return out;
    };

    const auto rank0_a = run(0, 2);
    const auto rank0_b = run(0, 2);
    CHECK(rank0_a == rank0_b);

    const auto rank1 = run(1, 2);
    std::set<std::string> ids0(rank0_a.begin(), rank0_a.end());
    for (const std::string& id : rank1) {
        CHECK(ids0.count(id) == 0);
    }
    CHECK(rank0_a.size() + rank1.size() == 50);
}

TEST_CASE("make_rank_stream validates its inputs") {
    MixSpec spec;
    spec.entries = {{"/nonexistent/corpus.jsonl", 1.0, std::nullopt}};
    auto missing = make_rank_stream(spec, 0, 1);
    REQUIRE(!missing.ok());
    CHECK(missing.error().code == Errc::IoError);

    testutil::TempFile corpus("rank_args");
    write_corpus(corpus, "args", 3, 1, 1.0);
    spec.entries = {{corpus.path(), 1.0, std::nullopt}};
    CHECK(!make_rank_stream(spec, 2, 2).ok());
    CHECK(!make_rank_stream(spec, -1, 2).ok());
}

TEST_CASE("per-entry min_score gates samples by environment score") {
    testutil::TempFile high("min_high");
    testutil::TempFile low("min_low");
    write_corpus(high, "hi", 4, 2, 0.9);
    write_corpus(low, "lo", 4, 2, 0.5);

    MixSpec spec;
    spec.entries = {{high.path(), 0.5, 0.8}, {low.path(), 0.5, 0.8}};
    spec.buffer_size = 1;
    spec.eval_fraction = 0.0;
    spec.strategy = ExhaustionStrategy::AllExhausted;
    auto streams = make_rank_stream(spec, 0, 1, EmitKind::Samples);
    REQUIRE(streams.ok());
    std::size_t count = 0;
    while (auto record = streams.value().train()) {
        CHECK(record->payload_json.find("lo-") == std::string::npos);
        ++count;
    }
    CHECK(count == 8);  // only the high-score corpus passes the gate
}

TEST_CASE("training samples serialize with the prompt/chosen shape") {
    CHECK(training_sample_to_json({"in", "out"}) == R"({"prompt":"in","chosen":"out"})");
}
