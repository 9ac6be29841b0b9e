#pragma once

#include <span>
#include <string>
#include <vector>

#include "trajforge/grammar.hpp"
#include "trajforge/result.hpp"
#include "trajforge/schema.hpp"

namespace trajforge {

// One source record before unification. `payload_json` is kept as the raw
// bytes read from the dump; it doubles as the trajectory_id preimage, so
// conversion of the same bytes always yields the same id.
struct RawRecord {
    std::string source;
    std::string payload_json;
};

// Per-step pieces before history aggregation. local_prompt is the text the
// source contributes for the turn beyond accumulated history; it is empty
// for every turn after the first in the shipped grammars.
struct StepLocal {
    std::string local_prompt;
    std::string output;
    std::string next_observation;
};

// Input context for 1-based step i:
//   input_1 = local_prompt_1
//   input_i = input_{i-1} SEP "Action: " output_{i-1} SEP
//             "Observation: " observation_{i-1} SEP local_prompt_i
// Fails with IndexOutOfRange when i is not in [1, locals.size()].
Result<std::string> aggregate_history(std::span<const StepLocal> locals, std::size_t i);

// Materializes all steps (indices 1..N) with inputs built incrementally by
// the same recursion.
std::vector<Step> build_steps(std::span<const StepLocal> locals);

// Parses a single-string episode by scanning for grammar markers at line
// starts. Requires layout == MonolithicPrompt.
Result<UnifiedTrajectory> convert_monolithic(const RawRecord& raw, const SourceGrammar& grammar);

// Builds an episode from aligned prompt/output/observation lists. Accepts
// len(observations) == N-1 when the final output starts with a terminal
// action (the missing terminal observation becomes ""). Requires
// layout == StepTriplets.
Result<UnifiedTrajectory> convert_triplets(const RawRecord& raw, const SourceGrammar& grammar);

// Dispatches on grammar.layout.
Result<UnifiedTrajectory> convert_record(const RawRecord& raw, const SourceGrammar& grammar);

}  // namespace trajforge
