#pragma once

#include <cassert>
#include <string>
#include <utility>
#include <variant>

namespace trajforge {

enum class Errc {
    // conversion
    MissingPromptKey,
    NoStepsFound,
    MarkerOrderViolation,
    LengthMismatch,
    EmptyEpisode,
    // serialization / config
    ParseError,
    ConfigError,
    // rater
    EmptyTrajectory,
    UnparseableVerdict,
    RaterUnavailable,
    // dataloader
    IndexOutOfRange,
    EmptyMix,
    InvalidProbs,
    // generic
    IoError,
};

const char* errc_name(Errc code);

struct Error {
    Errc code;
    std::string message;
};

inline Error make_error(Errc code, std::string message) {
    return Error{code, std::move(message)};
}

// Minimal success-or-error carrier; value access asserts on the wrong arm.
template <typename T>
class Result {
  public:
    Result(T value) : state_(std::move(value)) {}
    Result(Error error) : state_(std::move(error)) {}

    bool ok() const { return std::holds_alternative<T>(state_); }
    explicit operator bool() const { return ok(); }

    const T& value() const& {
        assert(ok());
        return std::get<T>(state_);
    }
    T& value() & {
        assert(ok());
        return std::get<T>(state_);
    }
    T&& take() && {
        assert(ok());
        return std::get<T>(std::move(state_));
    }

    const Error& error() const {
        assert(!ok());
        return std::get<Error>(state_);
    }

  private:
    std::variant<T, Error> state_;
};

}  // namespace trajforge
