#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace trajforge {

// Line-oriented reader for JSONL files. Strips a trailing '\r' so CRLF
// input hashes and parses the same as LF input.
class LineReader {
  public:
    explicit LineReader(const std::string& path) : in_(path, std::ios::binary) {}

    bool good() const { return in_.good() || in_.eof(); }
    bool is_open() const { return in_.is_open(); }

    std::optional<std::string> next() {
        std::string line;
        if (!std::getline(in_, line)) {
            return std::nullopt;
        }
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        ++line_number_;
        return line;
    }

    std::size_t line_number() const { return line_number_; }

  private:
    std::ifstream in_;
    std::size_t line_number_ = 0;
};

std::vector<std::string> read_all_lines(const std::string& path);

}  // namespace trajforge
