#include "trajforge/judge_client.hpp"

// cpp-httplib uses select() by default; keep the dependency header-only.
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>

namespace trajforge {

using nlohmann::json;

namespace {

// Splits "http://host:port/path" into base ("http://host:port") and path.
void split_url(const std::string& url, std::string& base, std::string& path) {
    const std::size_t scheme = url.find("://");
    const std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const std::size_t slash = url.find('/', host_start);
    if (slash == std::string::npos) {
        base = url;
        path = "/";
    } else {
        base = url.substr(0, slash);
        path = url.substr(slash);
    }
}

}  // namespace

std::string rater_key_from_env() {
    const char* key = std::getenv("TRAJFORGE_RATER_KEY");
    return key ? key : "";
}

HttpJudgeClient::HttpJudgeClient(std::string endpoint_url, std::string api_key,
                                 int timeout_seconds)
    : api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
    split_url(endpoint_url, base_, path_);
}

bool HttpJudgeClient::reachable() const {
    httplib::Client client(base_);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(5, 0);
    auto res = client.Get("/healthz");
    if (res) {
        return true;
    }
    // Some backends reject unknown paths at the connection layer only when
    // down; any HTTP-level answer on the real path also counts.
    auto probe = client.Head(path_);
    return static_cast<bool>(probe);
}

Result<std::string> HttpJudgeClient::complete(const ChatRequest& request) {
    json body;
    body["model"] = request.model;
    json messages = json::array();
    for (const ChatMessage& m : request.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    body["messages"] = std::move(messages);
    body["temperature"] = request.temperature;

    // One client per call; httplib clients are not safe for concurrent use.
    httplib::Client client(base_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
        return make_error(Errc::RaterUnavailable,
                          "transport error: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        return make_error(Errc::RaterUnavailable,
                          "endpoint returned HTTP " + std::to_string(res->status));
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) {
        return make_error(Errc::RaterUnavailable, "endpoint returned non-JSON body");
    }
    if (reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
        const json& first = reply["choices"][0];
        if (first.contains("message") && first["message"].contains("content") &&
            first["message"]["content"].is_string()) {
            return first["message"]["content"].get<std::string>();
        }
    }
    return make_error(Errc::RaterUnavailable, "endpoint reply lacks choices[0].message.content");
}

}  // namespace trajforge
