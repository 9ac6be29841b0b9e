#pragma once

#include <string>
#include <vector>

#include "trajforge/result.hpp"

namespace trajforge {

struct ChatMessage {
    std::string role;
    std::string content;
};

// One chat-completion call. Temperature stays 0 so verdicts are reproducible.
struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
};

// Abstract judge backend; implementations must tolerate concurrent calls.
class JudgeClient {
  public:
    virtual ~JudgeClient() = default;

    // Returns the assistant message text, or RaterUnavailable on transport
    // or protocol failure.
    virtual Result<std::string> complete(const ChatRequest& request) = 0;
};

// Talks to an OpenAI-style chat-completions HTTP endpoint. The request body
// is {"model", "messages":[{"role","content"}...], "temperature"} and the
// reply is read from choices[0].message.content. The API key, when
// non-empty, is sent as a bearer token.
class HttpJudgeClient : public JudgeClient {
  public:
    HttpJudgeClient(std::string endpoint_url, std::string api_key,
                    int timeout_seconds = 120);

    // True when the endpoint answers anything at all over HTTP (any status
    // counts; only connection failures are unreachable).
    bool reachable() const;

    Result<std::string> complete(const ChatRequest& request) override;

  private:
    std::string base_;  // scheme://host:port
    std::string path_;
    std::string api_key_;
    int timeout_seconds_;
};

// Reads TRAJFORGE_RATER_KEY from the environment; empty when unset.
std::string rater_key_from_env();

}  // namespace trajforge
