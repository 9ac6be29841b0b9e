#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "trajforge/result.hpp"

namespace trajforge {

enum class GrammarLayout {
    MonolithicPrompt,  // whole episode as one string under a prompt key
    StepTriplets,      // aligned per-step prompt/output/observation lists
};

// Literal line-start delimiters. A marker may carry a "{i}" placeholder
// that must match the running step counter ("Action {i}:" matches
// "Action 3:" only while parsing step 3); markers without a placeholder
// match verbatim. Matching is anchored at line starts only.
struct MarkerSet {
    std::string query;
    std::string thought;
    std::string action;
    std::string observation;
};

// Payload field names for the source dump. Which ones apply depends on the
// layout; score/model_name are optional extraction hooks for any layout.
struct PayloadKeys {
    std::string prompt = "prompt";            // MonolithicPrompt
    std::string prompts = "prompts";          // StepTriplets
    std::string outputs = "outputs";          // StepTriplets
    std::string observations = "observations";  // StepTriplets
    std::string score;       // empty = source has no score field
    std::string model_name;  // empty = source has no model field
};

struct SourceGrammar {
    std::string source;
    MarkerSet markers;
    GrammarLayout layout = GrammarLayout::MonolithicPrompt;
    std::vector<std::string> terminal_actions;  // action prefixes ending an episode
    PayloadKeys keys;
};

// Expands the "{i}" placeholder (if any) for step `index`.
std::string expand_marker(std::string_view marker, int index);

Result<SourceGrammar> parse_grammar(std::string_view json_text);
Result<SourceGrammar> load_grammar(const std::string& path);

}  // namespace trajforge
