#include "trajforge/grammar.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace trajforge {

using nlohmann::json;

std::string expand_marker(std::string_view marker, int index) {
    const auto pos = marker.find("{i}");
    if (pos == std::string_view::npos) {
        return std::string(marker);
    }
    std::string out(marker.substr(0, pos));
    out += std::to_string(index);
    out += marker.substr(pos + 3);
    return out;
}

namespace {

Error config_error(const std::string& what) {
    return make_error(Errc::ConfigError, what);
}

Result<std::string> required_string(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
        return config_error(std::string("grammar: missing or non-string '") + key + "'");
    }
    return j[key].get<std::string>();
}

}  // namespace

Result<SourceGrammar> parse_grammar(std::string_view json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return config_error("grammar: not a JSON object");
    }
    SourceGrammar g;

    auto source = required_string(j, "source");
    if (!source.ok()) return source.error();
    g.source = source.value();

    auto layout = required_string(j, "layout");
    if (!layout.ok()) return layout.error();
    if (layout.value() == "monolithic_prompt") {
        g.layout = GrammarLayout::MonolithicPrompt;
    } else if (layout.value() == "step_triplets") {
        g.layout = GrammarLayout::StepTriplets;
    } else {
        return config_error("grammar: unknown layout '" + layout.value() + "'");
    }

    if (!j.contains("markers") || !j["markers"].is_object()) {
        return config_error("grammar: missing 'markers' object");
    }
    const json& m = j["markers"];
    auto query = required_string(m, "query");
    auto thought = required_string(m, "thought");
    auto action = required_string(m, "action");
    auto observation = required_string(m, "observation");
    for (const auto* r : {&query, &thought, &action, &observation}) {
        if (!r->ok()) return r->error();
    }
    g.markers = {query.value(), thought.value(), action.value(), observation.value()};

    const std::string* names[] = {&g.markers.query, &g.markers.thought, &g.markers.action,
                                  &g.markers.observation};
    for (std::size_t a = 0; a < 4; ++a) {
        if (names[a]->empty()) {
            return config_error("grammar: markers must be non-empty");
        }
        for (std::size_t b = a + 1; b < 4; ++b) {
            if (*names[a] == *names[b]) {
                return config_error("grammar: markers must be pairwise distinct, got duplicate '" +
                                    *names[a] + "'");
            }
        }
    }

    if (j.contains("terminal_actions")) {
        if (!j["terminal_actions"].is_array()) {
            return config_error("grammar: 'terminal_actions' must be an array");
        }
        for (const json& t : j["terminal_actions"]) {
            if (!t.is_string()) {
                return config_error("grammar: terminal_actions entries must be strings");
            }
            g.terminal_actions.push_back(t.get<std::string>());
        }
    }

    if (j.contains("keys")) {
        if (!j["keys"].is_object()) {
            return config_error("grammar: 'keys' must be an object");
        }
        const json& k = j["keys"];
        auto read = [&](const char* name, std::string& target) {
            if (k.contains(name) && k[name].is_string()) {
                target = k[name].get<std::string>();
            }
        };
        read("prompt", g.keys.prompt);
        read("prompts", g.keys.prompts);
        read("outputs", g.keys.outputs);
        read("observations", g.keys.observations);
        read("score", g.keys.score);
        read("model_name", g.keys.model_name);
    }
    return g;
}

Result<SourceGrammar> load_grammar(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return make_error(Errc::IoError, "cannot open grammar file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_grammar(buf.str());
}

}  // namespace trajforge
