// Scripted chat-completions endpoint for tests and local pipeline runs.
// Speaks the same contract as the real judge backend: POST with
// {model, messages, temperature}, reply with choices[0].message.content.
//
// The script file maps substring rules to canned responses:
//   {
//     "default_response": "Score: 5\nExplanation: solid",
//     "rules": [
//       {"contains": "gluten free popcorn", "response": "Score: 2\nExplanation: weak"},
//       {"contains": "flaky", "status": 500}
//     ]
//   }
// Rules are checked in order against the raw request body; first match wins.

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

struct Rule {
    std::string contains;
    std::string response;
    int status = 200;
};

struct Script {
    std::string default_response = "Score: 5\nExplanation: acceptable trajectory.";
    std::vector<Rule> rules;
};

bool load_script(const std::string& path, Script& script) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "mock-judge: cannot open script: " << path << "\n";
        return false;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        std::cerr << "mock-judge: script is not a JSON object\n";
        return false;
    }
    if (j.contains("default_response") && j["default_response"].is_string()) {
        script.default_response = j["default_response"].get<std::string>();
    }
    if (j.contains("rules") && j["rules"].is_array()) {
        for (const json& r : j["rules"]) {
            Rule rule;
            if (r.contains("contains") && r["contains"].is_string()) {
                rule.contains = r["contains"].get<std::string>();
            }
            if (r.contains("response") && r["response"].is_string()) {
                rule.response = r["response"].get<std::string>();
            }
            if (r.contains("status") && r["status"].is_number_integer()) {
                rule.status = r["status"].get<int>();
            }
            script.rules.push_back(std::move(rule));
        }
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scripted mock judge endpoint"};
    int port = 8089;
    std::string host = "127.0.0.1";
    std::string script_path;
    app.add_option("--port", port, "listen port");
    app.add_option("--host", host, "bind address");
    app.add_option("--script", script_path, "response script JSON");
    CLI11_PARSE(app, argc, argv);

    Script script;
    if (!script_path.empty() && !load_script(script_path, script)) {
        return 1;
    }

    httplib::Server server;
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });
    server.Post(R"(.*)", [&script](const httplib::Request& req, httplib::Response& res) {
        std::string text = script.default_response;
        int status = 200;
        for (const Rule& rule : script.rules) {
            if (!rule.contains.empty() && req.body.find(rule.contains) != std::string::npos) {
                text = rule.response;
                status = rule.status;
                break;
            }
        }
        if (status != 200) {
            res.status = status;
            res.set_content("scripted failure", "text/plain");
            return;
        }
        json reply;
        reply["choices"] = json::array(
            {json{{"message", json{{"role", "assistant"}, {"content", text}}}}});
        res.set_content(reply.dump(), "application/json");
    });

    std::cerr << "mock-judge: listening on " << host << ":" << port << "\n";
    if (!server.listen(host, port)) {
        std::cerr << "mock-judge: failed to bind " << host << ":" << port << "\n";
        return 1;
    }
    return 0;
}
