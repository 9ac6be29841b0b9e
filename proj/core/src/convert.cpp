#include "trajforge/convert.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstddef>
#include <optional>
#include <sstream>

#include "trajforge/hash.hpp"

namespace trajforge {

using nlohmann::json;

Result<std::string> aggregate_history(std::span<const StepLocal> locals, std::size_t i) {
    if (i < 1 || i > locals.size()) {
        std::ostringstream msg;
        msg << "step index " << i << " outside [1, " << locals.size() << "]";
        return make_error(Errc::IndexOutOfRange, msg.str());
    }
    if (i == 1) {
        return locals[0].local_prompt;
    }
    auto prev = aggregate_history(locals, i - 1);
    std::string input = std::move(prev).take();
    const StepLocal& last = locals[i - 2];
    input.append(kHistorySep);
    input.append(kActionLabel);
    input.append(last.output);
    input.append(kHistorySep);
    input.append(kObservationLabel);
    input.append(last.next_observation);
    input.append(kHistorySep);
    input.append(locals[i - 1].local_prompt);
    return input;
}

std::vector<Step> build_steps(std::span<const StepLocal> locals) {
    std::vector<Step> steps;
    steps.reserve(locals.size());
    std::string input;
    for (std::size_t i = 0; i < locals.size(); ++i) {
        if (i == 0) {
            input = locals[0].local_prompt;
        } else {
            const StepLocal& prev = locals[i - 1];
            input.append(kHistorySep);
            input.append(kActionLabel);
            input.append(prev.output);
            input.append(kHistorySep);
            input.append(kObservationLabel);
            input.append(prev.next_observation);
            input.append(kHistorySep);
            input.append(locals[i].local_prompt);
        }
        Step step;
        step.index = static_cast<int>(i) + 1;
        step.input = input;
        step.output = locals[i].output;
        step.next_observation = locals[i].next_observation;
        steps.push_back(std::move(step));
    }
    return steps;
}

namespace {

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string join_lines(std::span<const std::string> lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out.append(lines[i]);
    }
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Matches `marker` (with {i} expanded to `index`) at the start of the line.
// Returns the remainder after the marker with one leading space dropped.
std::optional<std::string> match_marker(const std::string& line, std::string_view marker,
                                        int index) {
    const std::string expanded = expand_marker(marker, index);
    if (!line.starts_with(expanded)) {
        return std::nullopt;
    }
    std::string rest = line.substr(expanded.size());
    if (!rest.empty() && rest.front() == ' ') {
        rest.erase(rest.begin());
    }
    return rest;
}

// Extracts the user query relative to the query marker inside the first
// prompt: the remainder of the marker line, or the following line when the
// marker line carries nothing. Falls back to the trimmed prompt when the
// marker never appears, which keeps the query a substring of the input.
std::string extract_user_query(const std::string& first_prompt, const std::string& query_marker) {
    const std::vector<std::string> lines = split_lines(first_prompt);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto rest = match_marker(lines[i], query_marker, 1);
        if (!rest) {
            continue;
        }
        const std::string same_line = trim(*rest);
        if (!same_line.empty()) {
            return same_line;
        }
        if (i + 1 < lines.size()) {
            return trim(lines[i + 1]);
        }
        return "";
    }
    return trim(first_prompt);
}

Result<std::optional<double>> extract_score(const json& payload, const std::string& key) {
    if (key.empty() || !payload.contains(key)) {
        return std::optional<double>{};
    }
    if (!payload[key].is_number()) {
        return make_error(Errc::ParseError, "score field '" + key + "' is not a number");
    }
    return std::optional<double>{payload[key].get<double>()};
}

std::string extract_model_name(const json& payload, const std::string& key) {
    if (key.empty() || !payload.contains(key) || !payload[key].is_string()) {
        return "";
    }
    return payload[key].get<std::string>();
}

Result<UnifiedTrajectory> finish_trajectory(const RawRecord& raw, const SourceGrammar& grammar,
                                            const json& payload,
                                            std::vector<StepLocal> locals) {
    UnifiedTrajectory traj;
    traj.trajectory_id = trajectory_id_of(grammar.source, raw.payload_json);
    traj.source = grammar.source;
    traj.user_query = extract_user_query(locals.front().local_prompt, grammar.markers.query);
    traj.model_name = extract_model_name(payload, grammar.keys.model_name);
    auto score = extract_score(payload, grammar.keys.score);
    if (!score.ok()) {
        return score.error();
    }
    traj.score = score.value();
    traj.steps = build_steps(locals);
    return traj;
}

bool is_terminal_action(const std::string& output, const SourceGrammar& grammar) {
    return std::any_of(grammar.terminal_actions.begin(), grammar.terminal_actions.end(),
                       [&](const std::string& prefix) { return output.starts_with(prefix); });
}

}  // namespace

Result<UnifiedTrajectory> convert_monolithic(const RawRecord& raw, const SourceGrammar& grammar) {
    json payload = json::parse(raw.payload_json, nullptr, false);
    if (payload.is_discarded() || !payload.is_object()) {
        return make_error(Errc::ParseError, "payload is not a JSON object");
    }
    const std::string& prompt_key = grammar.keys.prompt;
    if (!payload.contains(prompt_key) || !payload[prompt_key].is_string()) {
        return make_error(Errc::MissingPromptKey,
                          "payload has no string field '" + prompt_key + "'");
    }
    const std::string prompt = payload[prompt_key].get<std::string>();
    const std::vector<std::string> lines = split_lines(prompt);

    // Line-start state machine over the transcript. Step k's output segment
    // opens at thought(k) or action(k) and is complete once action(k) has
    // been seen; observation(k) collects feedback until the next step opens.
    enum class State { Preamble, Output, Observation };
    State state = State::Preamble;
    int k = 0;                // current step while in Output/Observation
    bool has_action = false;  // action(k) seen inside the current output
    std::size_t preamble_end = 0;

    std::vector<std::string> current;  // lines of the open segment
    std::vector<StepLocal> locals;
    std::string pending_observation_head;

    auto close_output = [&]() {
        StepLocal local;
        local.output = join_lines(current);
        locals.push_back(std::move(local));
        current.clear();
    };
    auto close_observation = [&]() {
        std::vector<std::string> obs_lines;
        obs_lines.push_back(pending_observation_head);
        obs_lines.insert(obs_lines.end(), current.begin(), current.end());
        locals.back().next_observation = join_lines(obs_lines);
        current.clear();
    };

    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::string& line = lines[li];
        switch (state) {
            case State::Preamble: {
                if (match_marker(line, grammar.markers.observation, 1)) {
                    return make_error(Errc::MarkerOrderViolation,
                                      "observation 1 precedes action 1");
                }
                const bool thought = match_marker(line, grammar.markers.thought, 1).has_value();
                const bool action = match_marker(line, grammar.markers.action, 1).has_value();
                if (thought || action) {
                    preamble_end = li;
                    k = 1;
                    has_action = action;
                    state = State::Output;
                    current.push_back(line);
                }
                break;
            }
            case State::Output: {
                if (has_action) {
                    if (auto obs = match_marker(line, grammar.markers.observation, k)) {
                        close_output();
                        pending_observation_head = *obs;
                        state = State::Observation;
                        break;
                    }
                    const bool thought_next =
                        match_marker(line, grammar.markers.thought, k + 1).has_value();
                    const bool action_next =
                        match_marker(line, grammar.markers.action, k + 1).has_value();
                    if (thought_next || action_next) {
                        close_output();
                        locals.back().next_observation = "";
                        ++k;
                        has_action = action_next;
                        state = State::Output;
                        current.push_back(line);
                        break;
                    }
                } else {
                    if (match_marker(line, grammar.markers.observation, k)) {
                        return make_error(Errc::MarkerOrderViolation,
                                          "observation " + std::to_string(k) +
                                              " precedes action " + std::to_string(k));
                    }
                    if (match_marker(line, grammar.markers.action, k)) {
                        has_action = true;
                    }
                }
                current.push_back(line);
                break;
            }
            case State::Observation: {
                const bool thought_next =
                    match_marker(line, grammar.markers.thought, k + 1).has_value();
                const bool action_next =
                    match_marker(line, grammar.markers.action, k + 1).has_value();
                if (thought_next || action_next) {
                    close_observation();
                    ++k;
                    has_action = action_next;
                    state = State::Output;
                    current.push_back(line);
                    break;
                }
                if (match_marker(line, grammar.markers.observation, k + 1)) {
                    return make_error(Errc::MarkerOrderViolation,
                                      "observation " + std::to_string(k + 1) + " precedes action " +
                                          std::to_string(k + 1));
                }
                current.push_back(line);
                break;
            }
        }
    }
    switch (state) {
        case State::Preamble:
            return make_error(Errc::NoStepsFound, "no action markers matched");
        case State::Output:
            if (!has_action) {
                return make_error(Errc::NoStepsFound, "no action markers matched");
            }
            close_output();
            locals.back().next_observation = "";
            break;
        case State::Observation:
            close_observation();
            break;
    }

    // The raw prefix before the first output marker is step 1's prompt.
    std::vector<std::string> preamble(lines.begin(),
                                      lines.begin() + static_cast<std::ptrdiff_t>(preamble_end));
    locals.front().local_prompt = join_lines(preamble);

    return finish_trajectory(raw, grammar, payload, std::move(locals));
}

Result<UnifiedTrajectory> convert_triplets(const RawRecord& raw, const SourceGrammar& grammar) {
    json payload = json::parse(raw.payload_json, nullptr, false);
    if (payload.is_discarded() || !payload.is_object()) {
        return make_error(Errc::ParseError, "payload is not a JSON object");
    }
    auto string_list = [&](const std::string& key) -> Result<std::vector<std::string>> {
        if (!payload.contains(key) || !payload[key].is_array()) {
            return make_error(Errc::MissingPromptKey,
                              "payload has no array field '" + key + "'");
        }
        std::vector<std::string> out;
        for (const json& item : payload[key]) {
            if (!item.is_string()) {
                return make_error(Errc::ParseError, "field '" + key + "' has non-string entries");
            }
            out.push_back(item.get<std::string>());
        }
        return out;
    };

    auto prompts = string_list(grammar.keys.prompts);
    if (!prompts.ok()) return prompts.error();
    auto outputs = string_list(grammar.keys.outputs);
    if (!outputs.ok()) return outputs.error();
    auto observations = string_list(grammar.keys.observations);
    if (!observations.ok()) return observations.error();

    const std::size_t n = outputs.value().size();
    if (n == 0) {
        return make_error(Errc::EmptyEpisode, "outputs list is empty");
    }
    if (prompts.value().empty() || (prompts.value().size() != 1 && prompts.value().size() != n)) {
        std::ostringstream msg;
        msg << "prompts length " << prompts.value().size() << " does not align with " << n
            << " outputs";
        return make_error(Errc::LengthMismatch, msg.str());
    }
    std::vector<std::string> obs = std::move(observations).take();
    if (obs.size() == n - 1 && is_terminal_action(outputs.value().back(), grammar)) {
        obs.push_back("");  // terminal turn, observation omitted by the source
    } else if (obs.size() != n) {
        std::ostringstream msg;
        msg << "observations length " << obs.size() << " does not align with " << n << " outputs";
        return make_error(Errc::LengthMismatch, msg.str());
    }

    // Later prompts restate accumulated history; the unified inputs are
    // rebuilt from the recursion instead, so only the first prompt is kept.
    std::vector<StepLocal> locals(n);
    locals[0].local_prompt = prompts.value().front();
    for (std::size_t i = 0; i < n; ++i) {
        locals[i].output = outputs.value()[i];
        locals[i].next_observation = obs[i];
    }
    return finish_trajectory(raw, grammar, payload, std::move(locals));
}

Result<UnifiedTrajectory> convert_record(const RawRecord& raw, const SourceGrammar& grammar) {
    switch (grammar.layout) {
        case GrammarLayout::MonolithicPrompt:
            return convert_monolithic(raw, grammar);
        case GrammarLayout::StepTriplets:
            return convert_triplets(raw, grammar);
    }
    return make_error(Errc::ConfigError, "unknown grammar layout");
}

}  // namespace trajforge
