#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trajforge/result.hpp"
#include "trajforge/schema.hpp"

namespace trajforge {

class JudgeClient;

// Pathologies detected without a judge model. A high environment reward can
// coexist with these, so they are reported regardless of score.
struct QualityFlag {
    enum class Kind { InvalidAction, EmptyOutput };
    Kind kind;
    int step_index;

    bool operator==(const QualityFlag&) const = default;
};

const char* quality_flag_name(QualityFlag::Kind kind);

struct RaterConfig {
    std::string endpoint_url;
    std::string judge_model;
    std::size_t max_chars = 16000;  // serialization budget for the rated trajectory
    int concurrency = 4;
    int retries = 2;
    double threshold = 4.0;
    std::string criteria_text;  // empty selects the built-in criteria block
};

// The built-in rating criteria (coherence, action validity, task progress,
// final outcome). Override through RaterConfig::criteria_text.
const std::string& default_criteria_text();

// Assembles the judge prompt: criteria block, the serialized trajectory
// (user query, then per step "Action:"/"Observation:" lines; inputs are
// omitted because they duplicate history), and the fixed answer-format
// instruction. Serialization longer than max_chars is cut head-preserving
// and terminated with a "[TRUNCATED]" marker.
Result<std::string> build_rater_prompt(const UnifiedTrajectory& traj, const RaterConfig& config);

// Parses a judge response. Strict grammar: a first line that is exactly
// "score: <digit>" (case-insensitive, flexible spacing), digit <= 5;
// explanation is the text after an "explanation:" label, else the remainder
// of the response. Lenient fallback: the first standalone integer 0-5 in the
// first three lines, with an empty explanation. Digits inside decimal
// fractions never match.
Result<RaterVerdict> parse_verdict(std::string_view response_text, std::string_view judge_model);

// build_rater_prompt -> chat completion -> parse_verdict, retrying up to
// config.retries extra attempts on transport errors and unparseable replies.
Result<RaterVerdict> rate_trajectory(const UnifiedTrajectory& traj, const RaterConfig& config,
                                     JudgeClient& client);

// InvalidAction where the trimmed observation equals "Invalid action!",
// EmptyOutput where the trimmed output is empty; ordered by step, with
// EmptyOutput reported before InvalidAction within a step.
std::vector<QualityFlag> heuristic_flags(const UnifiedTrajectory& traj);

inline constexpr const char* kDropReasonUnrated = "unrated";
inline constexpr const char* kDropReasonBelowThreshold = "below_threshold";

struct FilterDecision {
    bool keep;
    const char* drop_reason;  // nullptr when kept
};

// Keep iff a verdict is present and rater.score >= threshold (inclusive).
FilterDecision rater_filter_decision(const UnifiedTrajectory& traj, double threshold);

struct FilterOutcome {
    std::vector<UnifiedTrajectory> kept;
    std::map<std::string, std::size_t> dropped;  // reason -> count
};

FilterOutcome filter_by_rater_score(std::span<const UnifiedTrajectory> trajectories,
                                    double threshold);

struct RateBatchStats {
    std::size_t rated = 0;
    std::size_t failed = 0;
};

// Rates a batch with up to config.concurrency in-flight judge calls.
// Results are written back into the trajectories (rater field overwritten);
// failures invoke on_failure with the trajectory index and error. Input
// order is preserved.
RateBatchStats rate_all(std::vector<UnifiedTrajectory>& trajectories, const RaterConfig& config,
                        JudgeClient& client,
                        const std::function<void(std::size_t, const Error&)>& on_failure = {});

}  // namespace trajforge
