#include "trajforge/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

namespace trajforge {

using ordered_json = nlohmann::ordered_json;

StatsAccumulator::Counters* StatsAccumulator::find(const std::string& source) {
    for (auto& [name, counters] : per_source_) {
        if (name == source) {
            return &counters;
        }
    }
    per_source_.emplace_back(source, Counters{});
    return &per_source_.back().second;
}

void StatsAccumulator::add(const UnifiedTrajectory& traj) {
    if (!seen_ids_.insert(traj.trajectory_id).second) {
        ++duplicates_;
        return;
    }
    Counters* c = find(traj.source);
    ++c->sampled;
    if (traj.rater && static_cast<double>(traj.rater->score) >= threshold_) {
        ++c->filtered;
        c->filtered_turns += traj.steps.size();
    }
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
    for (const std::string& id : other.seen_ids_) {
        if (!seen_ids_.insert(id).second) {
            ++duplicates_;
        }
    }
    duplicates_ += other.duplicates_;
    for (const auto& [name, counters] : other.per_source_) {
        Counters* c = find(name);
        c->sampled += counters.sampled;
        c->filtered += counters.filtered;
        c->filtered_turns += counters.filtered_turns;
    }
}

CorpusStats StatsAccumulator::finish() const {
    CorpusStats stats;
    stats.threshold = threshold_;
    stats.duplicates = duplicates_;
    for (const auto& [name, counters] : per_source_) {
        SourceStats row;
        row.source = name;
        row.sampled = counters.sampled;
        row.filtered = counters.filtered;
        row.filtered_turns = counters.filtered_turns;
        stats.rows.push_back(std::move(row));
    }
    std::sort(stats.rows.begin(), stats.rows.end(),
              [](const SourceStats& a, const SourceStats& b) { return a.source < b.source; });
    stats.total.source = "total";
    for (const SourceStats& row : stats.rows) {
        stats.total.sampled += row.sampled;
        stats.total.filtered += row.filtered;
        stats.total.filtered_turns += row.filtered_turns;
    }
    return stats;
}

CorpusStats compute_stats(std::span<const UnifiedTrajectory> corpus, double threshold) {
    StatsAccumulator acc(threshold);
    for (const UnifiedTrajectory& traj : corpus) {
        acc.add(traj);
    }
    return acc.finish();
}

std::string format_avg_turns(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", value);
    return buf;
}

namespace {

std::string avg_cell(const SourceStats& row) {
    return row.filtered == 0 ? "n/a" : format_avg_turns(row.avg_turns());
}

}  // namespace

std::string render_stats_table(const CorpusStats& stats) {
    std::size_t name_width = std::string("source").size();
    for (const SourceStats& row : stats.rows) {
        name_width = std::max(name_width, row.source.size());
    }
    name_width = std::max(name_width, stats.total.source.size());

    std::ostringstream out;
    out << "# trajectory counts are post-deduplication by trajectory_id";
    if (stats.duplicates > 0) {
        out << " (" << stats.duplicates << " duplicate record" << (stats.duplicates == 1 ? "" : "s")
            << " ignored)";
    }
    out << "\n";
    out << "# filtered = rater score >= " << format_avg_turns(stats.threshold) << "\n";
    out << std::left << std::setw(static_cast<int>(name_width)) << "source" << std::right
        << std::setw(10) << "sampled" << std::setw(10) << "filtered" << std::setw(11)
        << "avg_turns" << "\n";
    auto emit_row = [&](const SourceStats& row) {
        out << std::left << std::setw(static_cast<int>(name_width)) << row.source << std::right
            << std::setw(10) << row.sampled << std::setw(10) << row.filtered << std::setw(11)
            << avg_cell(row) << "\n";
    };
    for (const SourceStats& row : stats.rows) {
        emit_row(row);
    }
    emit_row(stats.total);
    return out.str();
}

std::string render_stats_json(const CorpusStats& stats) {
    ordered_json j;
    j["threshold"] = stats.threshold;
    j["duplicates_ignored"] = stats.duplicates;
    ordered_json rows = ordered_json::array();
    auto row_json = [](const SourceStats& row) {
        ordered_json r;
        r["source"] = row.source;
        r["sampled"] = row.sampled;
        r["filtered"] = row.filtered;
        if (row.filtered == 0) {
            r["avg_turns"] = nullptr;
        } else {
            r["avg_turns"] = row.avg_turns();
        }
        return r;
    };
    for (const SourceStats& row : stats.rows) {
        rows.push_back(row_json(row));
    }
    j["rows"] = std::move(rows);
    j["total"] = row_json(stats.total);
    return j.dump();
}

}  // namespace trajforge
