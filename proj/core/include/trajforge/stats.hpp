#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "trajforge/schema.hpp"

namespace trajforge {

// Per-source corpus counters. avg_turns is the mean step count over the
// trajectories that pass the rater threshold, and renders as "n/a" when
// nothing passed.
struct SourceStats {
    std::string source;
    std::uint64_t sampled = 0;
    std::uint64_t filtered = 0;
    std::uint64_t filtered_turns = 0;

    double avg_turns() const {
        return filtered == 0 ? 0.0
                             : static_cast<double>(filtered_turns) / static_cast<double>(filtered);
    }
};

struct CorpusStats {
    std::vector<SourceStats> rows;  // sorted by source name
    SourceStats total;              // turn-weighted mean over all filtered trajectories
    std::uint64_t duplicates = 0;   // records dropped by trajectory_id dedup
    double threshold = 4.0;
};

// Streaming fold; merge() makes parallel partial aggregation possible.
class StatsAccumulator {
  public:
    explicit StatsAccumulator(double threshold) : threshold_(threshold) {}

    void add(const UnifiedTrajectory& traj);
    void merge(const StatsAccumulator& other);
    CorpusStats finish() const;

  private:
    struct Counters {
        std::uint64_t sampled = 0;
        std::uint64_t filtered = 0;
        std::uint64_t filtered_turns = 0;
    };
    double threshold_;
    std::uint64_t duplicates_ = 0;
    std::unordered_set<std::string> seen_ids_;
    std::vector<std::pair<std::string, Counters>> per_source_;  // insertion order

    Counters* find(const std::string& source);
};

// Counts are taken after deduplication by trajectory_id; "filtered" counts
// rater verdicts with score >= threshold, and avg_turns averages step counts
// over the filtered set only.
CorpusStats compute_stats(std::span<const UnifiedTrajectory> corpus, double threshold);

// Aligned text table in source/sampled/filtered/avg-turns column order, with
// a header note about deduplication and a trailing total row.
std::string render_stats_table(const CorpusStats& stats);

// Machine-readable form; avg_turns is null when filtered == 0.
std::string render_stats_json(const CorpusStats& stats);

// One decimal, matching the table presentation ("2.5", "13.5").
std::string format_avg_turns(double value);

}  // namespace trajforge
