#include "trajforge/schema.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

namespace trajforge {

using ordered_json = nlohmann::ordered_json;

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::MissingPromptKey: return "MissingPromptKey";
        case Errc::NoStepsFound: return "NoStepsFound";
        case Errc::MarkerOrderViolation: return "MarkerOrderViolation";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::EmptyEpisode: return "EmptyEpisode";
        case Errc::ParseError: return "ParseError";
        case Errc::ConfigError: return "ConfigError";
        case Errc::EmptyTrajectory: return "EmptyTrajectory";
        case Errc::UnparseableVerdict: return "UnparseableVerdict";
        case Errc::RaterUnavailable: return "RaterUnavailable";
        case Errc::IndexOutOfRange: return "IndexOutOfRange";
        case Errc::EmptyMix: return "EmptyMix";
        case Errc::InvalidProbs: return "InvalidProbs";
        case Errc::IoError: return "IoError";
    }
    return "UnknownError";
}

const char* violation_name(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::EmptySteps: return "EmptySteps";
        case ViolationKind::NonContiguousIndex: return "NonContiguousIndex";
        case ViolationKind::UserQueryNotInInput: return "UserQueryNotInInput";
        case ViolationKind::AggregationMismatch: return "AggregationMismatch";
        case ViolationKind::RaterScoreOutOfRange: return "RaterScoreOutOfRange";
    }
    return "UnknownViolation";
}

namespace {

std::string expected_next_input(const Step& prev) {
    std::string out;
    out.reserve(prev.input.size() + prev.output.size() + prev.next_observation.size() + 32);
    out.append(prev.input);
    out.append(kHistorySep);
    out.append(kActionLabel);
    out.append(prev.output);
    out.append(kHistorySep);
    out.append(kObservationLabel);
    out.append(prev.next_observation);
    out.append(kHistorySep);
    return out;
}

}  // namespace

ValidationReport validate(const UnifiedTrajectory& traj) {
    ValidationReport report;
    if (traj.steps.empty()) {
        report.push_back({ViolationKind::EmptySteps, 0, "trajectory has no steps"});
        return report;
    }
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        const int expected = static_cast<int>(i) + 1;
        if (traj.steps[i].index != expected) {
            std::ostringstream msg;
            msg << "step at position " << i << " has index " << traj.steps[i].index
                << ", expected " << expected;
            report.push_back({ViolationKind::NonContiguousIndex, traj.steps[i].index, msg.str()});
        }
    }
    if (traj.steps[0].input.find(traj.user_query) == std::string::npos) {
        report.push_back({ViolationKind::UserQueryNotInInput, 1,
                          "user_query is not contained in steps[1].input"});
    }
    for (std::size_t i = 1; i < traj.steps.size(); ++i) {
        if (traj.steps[i].input != expected_next_input(traj.steps[i - 1])) {
            report.push_back({ViolationKind::AggregationMismatch, static_cast<int>(i) + 1,
                              "input does not match the history recursion"});
        }
    }
    if (traj.rater && (traj.rater->score < 0 || traj.rater->score > 5)) {
        report.push_back({ViolationKind::RaterScoreOutOfRange, 0,
                          "rater score " + std::to_string(traj.rater->score) + " outside 0..5"});
    }
    return report;
}

std::string to_json_line(const UnifiedTrajectory& traj) {
    ordered_json j;
    j["trajectory_id"] = traj.trajectory_id;
    j["source"] = traj.source;
    j["user_query"] = traj.user_query;
    j["model_name"] = traj.model_name;
    if (traj.score) {
        j["score"] = *traj.score;
    } else {
        j["score"] = nullptr;
    }
    if (traj.rater) {
        ordered_json r;
        r["score"] = traj.rater->score;
        r["explanation"] = traj.rater->explanation;
        r["rater_model"] = traj.rater->rater_model;
        j["rater"] = std::move(r);
    } else {
        j["rater"] = nullptr;
    }
    ordered_json steps = ordered_json::array();
    for (const Step& s : traj.steps) {
        ordered_json step;
        step["index"] = s.index;
        step["input"] = s.input;
        step["output"] = s.output;
        step["next_observation"] = s.next_observation;
        steps.push_back(std::move(step));
    }
    j["steps"] = std::move(steps);
    ordered_json other = ordered_json::object();
    for (const auto& [key, value] : traj.other_information) {
        other[key] = value;
    }
    j["other_information"] = std::move(other);
    return j.dump();
}

namespace {

Error field_error(const std::string& what) {
    return make_error(Errc::ParseError, what);
}

// Unknown-field policy shared by the top level and step objects.
Result<bool> handle_unknown(const std::string& key, const ordered_json& value, ParseMode mode,
                            const std::string& prefix, UnifiedTrajectory& out) {
    if (mode == ParseMode::Strict) {
        return field_error("unknown field '" + prefix + key + "' in strict mode");
    }
    out.other_information[prefix + key] =
        value.is_string() ? value.get<std::string>() : value.dump();
    return true;
}

}  // namespace

Result<UnifiedTrajectory> from_json_line(std::string_view line, ParseMode mode) {
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return field_error("line is not a JSON object");
    }
    UnifiedTrajectory traj;
    bool saw_steps = false;
    static const char* kRequired[] = {"trajectory_id", "source", "user_query", "model_name"};
    for (const char* name : kRequired) {
        auto it = j.find(name);
        if (it == j.end() || !it->is_string()) {
            return field_error(std::string("missing or non-string field '") + name + "'");
        }
    }
    traj.trajectory_id = j["trajectory_id"].get<std::string>();
    traj.source = j["source"].get<std::string>();
    traj.user_query = j["user_query"].get<std::string>();
    traj.model_name = j["model_name"].get<std::string>();

    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const ordered_json& value = it.value();
        if (key == "trajectory_id" || key == "source" || key == "user_query" ||
            key == "model_name") {
            continue;
        }
        if (key == "score") {
            if (value.is_null()) {
                traj.score.reset();
            } else if (value.is_number()) {
                traj.score = value.get<double>();
            } else {
                return field_error("field 'score' must be a number or null");
            }
        } else if (key == "rater") {
            if (value.is_null()) {
                traj.rater.reset();
            } else if (value.is_object()) {
                RaterVerdict v;
                if (!value.contains("score") || !value["score"].is_number_integer()) {
                    return field_error("rater.score must be an integer");
                }
                v.score = value["score"].get<int>();
                if (value.contains("explanation") && value["explanation"].is_string()) {
                    v.explanation = value["explanation"].get<std::string>();
                }
                if (value.contains("rater_model") && value["rater_model"].is_string()) {
                    v.rater_model = value["rater_model"].get<std::string>();
                }
                traj.rater = std::move(v);
            } else {
                return field_error("field 'rater' must be an object or null");
            }
        } else if (key == "steps") {
            if (!value.is_array()) {
                return field_error("field 'steps' must be an array");
            }
            int position = 0;
            for (const ordered_json& sj : value) {
                ++position;
                if (!sj.is_object()) {
                    return field_error("steps[" + std::to_string(position) + "] is not an object");
                }
                Step step;
                if (!sj.contains("index") || !sj["index"].is_number_integer()) {
                    return field_error("step " + std::to_string(position) + " lacks integer 'index'");
                }
                step.index = sj["index"].get<int>();
                for (const char* sname : {"input", "output", "next_observation"}) {
                    if (!sj.contains(sname) || !sj[sname].is_string()) {
                        return field_error("step " + std::to_string(position) +
                                           " lacks string '" + sname + "'");
                    }
                }
                step.input = sj["input"].get<std::string>();
                step.output = sj["output"].get<std::string>();
                step.next_observation = sj["next_observation"].get<std::string>();
                for (auto sit = sj.begin(); sit != sj.end(); ++sit) {
                    const std::string& skey = sit.key();
                    if (skey == "index" || skey == "input" || skey == "output" ||
                        skey == "next_observation") {
                        continue;
                    }
                    auto handled = handle_unknown(skey, sit.value(), mode,
                                                  "step" + std::to_string(step.index) + ".", traj);
                    if (!handled.ok()) {
                        return handled.error();
                    }
                }
                traj.steps.push_back(std::move(step));
            }
            saw_steps = true;
        } else if (key == "other_information") {
            if (!value.is_object()) {
                return field_error("field 'other_information' must be an object");
            }
            for (auto oit = value.begin(); oit != value.end(); ++oit) {
                if (!oit.value().is_string()) {
                    return field_error("other_information values must be strings");
                }
                traj.other_information[oit.key()] = oit.value().get<std::string>();
            }
        } else {
            auto handled = handle_unknown(key, value, mode, "", traj);
            if (!handled.ok()) {
                return handled.error();
            }
        }
    }
    if (!saw_steps) {
        return field_error("missing field 'steps'");
    }
    return traj;
}

}  // namespace trajforge
