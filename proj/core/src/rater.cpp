#include "trajforge/rater.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <mutex>
#include <thread>

#include "trajforge/judge_client.hpp"

namespace trajforge {

const char* quality_flag_name(QualityFlag::Kind kind) {
    switch (kind) {
        case QualityFlag::Kind::InvalidAction: return "InvalidAction";
        case QualityFlag::Kind::EmptyOutput: return "EmptyOutput";
    }
    return "UnknownFlag";
}

namespace {

constexpr std::string_view kInvalidActionText = "Invalid action!";
constexpr std::string_view kTruncationMarker = "[TRUNCATED]";
constexpr std::string_view kFormatInstruction =
    "Respond with 'Score: <0-5>' on the first line, then 'Explanation: <text>'.";

std::string_view trim_view(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

const std::string& default_criteria_text() {
    static const std::string criteria =
        "Rate the agent trajectory below on a 0-5 scale against these criteria:\n"
        "1. Coherence: each action follows logically from the task and prior observations.\n"
        "2. Action validity: actions are well-formed, non-empty, and accepted by the "
        "environment (no 'Invalid action!' feedback, no empty responses).\n"
        "3. Task progress: the agent advances toward the user's goal without aimless or "
        "repeated moves.\n"
        "4. Final outcome: the episode ends with the user's request resolved.\n"
        "5 means a flawless trajectory, 0 means no meaningful progress. A good final "
        "outcome does not by itself justify a high score if intermediate steps are flawed.";
    return criteria;
}

Result<std::string> build_rater_prompt(const UnifiedTrajectory& traj, const RaterConfig& config) {
    if (traj.steps.empty()) {
        return make_error(Errc::EmptyTrajectory, "cannot rate a trajectory with no steps");
    }
    std::string serialized;
    serialized.append("User query: ");
    serialized.append(traj.user_query);
    for (const Step& step : traj.steps) {
        serialized.push_back('\n');
        serialized.append("Action: ");
        serialized.append(step.output);
        serialized.push_back('\n');
        serialized.append("Observation: ");
        serialized.append(step.next_observation);
    }
    if (serialized.size() > config.max_chars) {
        serialized.resize(config.max_chars);
        serialized.push_back('\n');
        serialized.append(kTruncationMarker);
    }
    const std::string& criteria =
        config.criteria_text.empty() ? default_criteria_text() : config.criteria_text;

    std::string prompt;
    prompt.reserve(criteria.size() + serialized.size() + 128);
    prompt.append(criteria);
    prompt.append("\n\nTrajectory:\n");
    prompt.append(serialized);
    prompt.append("\n\n");
    prompt.append(kFormatInstruction);
    return prompt;
}

namespace {

std::vector<std::string_view> first_lines(std::string_view text, std::size_t max_lines) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size() && lines.size() < max_lines) {
        const std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

bool iequals_prefix(std::string_view text, std::string_view prefix) {
    if (text.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

// Strict form: the whole first line is "score : <digit>" modulo case and
// spacing. Returns the digit or -1.
int match_strict_score_line(std::string_view line) {
    std::string_view s = trim_view(line);
    if (!iequals_prefix(s, "score")) return -1;
    s.remove_prefix(5);
    s = trim_view(s);
    if (s.empty() || s.front() != ':') return -1;
    s.remove_prefix(1);
    s = trim_view(s);
    if (s.size() != 1 || !std::isdigit(static_cast<unsigned char>(s.front()))) return -1;
    return s.front() - '0';
}

// A digit counts as standalone when it has no adjacent alphanumerics and is
// not part of a decimal fraction ("4.5" offers no standalone digit, but a
// trailing period as in "score:5." is fine).
int find_standalone_digit(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
        if (i > 0) {
            const unsigned char prev = static_cast<unsigned char>(text[i - 1]);
            if (std::isalnum(prev) || prev == '.') continue;
        }
        if (i + 1 < text.size()) {
            const unsigned char next = static_cast<unsigned char>(text[i + 1]);
            if (std::isalnum(next)) continue;
            if (next == '.' && i + 2 < text.size() &&
                std::isdigit(static_cast<unsigned char>(text[i + 2]))) {
                continue;
            }
        }
        const int digit = text[i] - '0';
        if (digit <= 5) return digit;
    }
    return -1;
}

// Explanation text following a case-insensitive "explanation:" label, or
// everything after the first line when no label is present.
std::string extract_explanation(std::string_view text) {
    static constexpr std::string_view kLabel = "explanation";
    for (std::size_t i = 0; i + kLabel.size() < text.size(); ++i) {
        if (!iequals_prefix(text.substr(i), kLabel)) continue;
        std::size_t j = i + kLabel.size();
        while (j < text.size() && (text[j] == ' ' || text[j] == '\t')) ++j;
        if (j < text.size() && text[j] == ':') {
            return std::string(trim_view(text.substr(j + 1)));
        }
    }
    const std::size_t nl = text.find('\n');
    if (nl == std::string_view::npos) return "";
    return std::string(trim_view(text.substr(nl + 1)));
}

}  // namespace

Result<RaterVerdict> parse_verdict(std::string_view response_text, std::string_view judge_model) {
    const auto lines = first_lines(response_text, 3);
    if (!lines.empty()) {
        const int strict = match_strict_score_line(lines.front());
        if (strict >= 0) {
            if (strict > 5) {
                return make_error(Errc::UnparseableVerdict,
                                  "score digit " + std::to_string(strict) + " exceeds 5");
            }
            RaterVerdict verdict;
            verdict.score = strict;
            verdict.explanation = extract_explanation(response_text);
            verdict.rater_model = std::string(judge_model);
            return verdict;
        }
    }
    for (std::string_view line : lines) {
        const int digit = find_standalone_digit(line);
        if (digit >= 0) {
            RaterVerdict verdict;
            verdict.score = digit;
            verdict.rater_model = std::string(judge_model);
            return verdict;
        }
    }
    return make_error(Errc::UnparseableVerdict, "no score found in judge response");
}

Result<RaterVerdict> rate_trajectory(const UnifiedTrajectory& traj, const RaterConfig& config,
                                     JudgeClient& client) {
    auto prompt = build_rater_prompt(traj, config);
    if (!prompt.ok()) {
        return prompt.error();
    }
    ChatRequest request;
    request.model = config.judge_model;
    request.messages.push_back({"user", prompt.value()});
    request.temperature = 0.0;

    Error last = make_error(Errc::RaterUnavailable, "no attempt made");
    const int attempts = config.retries + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        auto response = client.complete(request);
        if (!response.ok()) {
            last = response.error();
            continue;
        }
        auto verdict = parse_verdict(response.value(), config.judge_model);
        if (verdict.ok()) {
            return verdict;
        }
        last = verdict.error();
    }
    return last;
}

std::vector<QualityFlag> heuristic_flags(const UnifiedTrajectory& traj) {
    std::vector<QualityFlag> flags;
    for (const Step& step : traj.steps) {
        if (trim_view(step.output).empty()) {
            flags.push_back({QualityFlag::Kind::EmptyOutput, step.index});
        }
        if (trim_view(step.next_observation) == kInvalidActionText) {
            flags.push_back({QualityFlag::Kind::InvalidAction, step.index});
        }
    }
    return flags;
}

FilterDecision rater_filter_decision(const UnifiedTrajectory& traj, double threshold) {
    if (!traj.rater) {
        return {false, kDropReasonUnrated};
    }
    if (static_cast<double>(traj.rater->score) >= threshold) {
        return {true, nullptr};
    }
    return {false, kDropReasonBelowThreshold};
}

FilterOutcome filter_by_rater_score(std::span<const UnifiedTrajectory> trajectories,
                                    double threshold) {
    FilterOutcome outcome;
    for (const UnifiedTrajectory& traj : trajectories) {
        const FilterDecision decision = rater_filter_decision(traj, threshold);
        if (decision.keep) {
            outcome.kept.push_back(traj);
        } else {
            ++outcome.dropped[decision.drop_reason];
        }
    }
    return outcome;
}

RateBatchStats rate_all(std::vector<UnifiedTrajectory>& trajectories, const RaterConfig& config,
                        JudgeClient& client,
                        const std::function<void(std::size_t, const Error&)>& on_failure) {
    RateBatchStats stats;
    std::mutex mu;
    std::atomic<std::size_t> cursor{0};
    const int workers = std::max(1, std::min<int>(config.concurrency,
                                                  static_cast<int>(trajectories.size())));

    auto work = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= trajectories.size()) break;
            auto verdict = rate_trajectory(trajectories[i], config, client);
            std::lock_guard<std::mutex> lock(mu);
            if (verdict.ok()) {
                trajectories[i].rater = std::move(verdict).take();
                ++stats.rated;
            } else {
                ++stats.failed;
                if (on_failure) {
                    on_failure(i, verdict.error());
                }
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    return stats;
}

}  // namespace trajforge
