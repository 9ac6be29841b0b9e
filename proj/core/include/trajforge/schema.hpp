#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trajforge/result.hpp"

namespace trajforge {

// Separator and labels used when a step's input is rebuilt from history:
//   input_i = input_{i-1} SEP "Action: " output_{i-1} SEP
//             "Observation: " observation_{i-1} SEP
inline constexpr std::string_view kHistorySep = "\n";
inline constexpr std::string_view kActionLabel = "Action: ";
inline constexpr std::string_view kObservationLabel = "Observation: ";

// One interaction turn: the fully aggregated prompt context, the model's
// prediction for the turn, and the environment feedback that followed.
struct Step {
    int index = 0;  // 1-based, contiguous
    std::string input;
    std::string output;
    std::string next_observation;  // empty on a terminal turn

    bool operator==(const Step&) const = default;
};

// Judge verdict: integer score 0-5 plus a free-text justification.
struct RaterVerdict {
    int score = 0;
    std::string explanation;
    std::string rater_model;

    bool operator==(const RaterVerdict&) const = default;
};

// One agent episode in the unified multi-turn format. Immutable value object
// once built; safe to copy across workers.
struct UnifiedTrajectory {
    std::string trajectory_id;
    std::string source;
    std::string user_query;
    std::string model_name;  // empty when the source does not record it
    std::optional<double> score;  // environment reward, stored as given
    std::optional<RaterVerdict> rater;
    std::vector<Step> steps;
    std::map<std::string, std::string> other_information;

    bool operator==(const UnifiedTrajectory&) const = default;
};

enum class ViolationKind {
    EmptySteps,
    NonContiguousIndex,
    UserQueryNotInInput,
    AggregationMismatch,
    RaterScoreOutOfRange,
};

const char* violation_name(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    int step_index;  // 0 when not tied to a step
    std::string detail;
};

using ValidationReport = std::vector<Violation>;

// Pure structural check; violations are data, not errors. An empty report
// means the trajectory satisfies every schema invariant: steps indexed 1..N
// without gaps, user_query contained in steps[1].input, inputs of later
// steps exactly matching the history recursion, rater score within 0..5.
// Empty outputs are legal (they surface as rater heuristic flags instead).
ValidationReport validate(const UnifiedTrajectory& traj);

enum class ParseMode { Strict, Lenient };

// Canonical single-line JSON for the unified JSONL interchange format.
// Field order and compact separators are stable so that identical
// trajectories serialize to identical bytes.
std::string to_json_line(const UnifiedTrajectory& traj);

// Parses one JSONL line. Strict mode rejects unknown fields; lenient mode
// folds them into other_information (step-level unknowns get a
// "step{i}." key prefix). Missing or mistyped required fields fail in
// both modes.
Result<UnifiedTrajectory> from_json_line(std::string_view line, ParseMode mode);

}  // namespace trajforge
