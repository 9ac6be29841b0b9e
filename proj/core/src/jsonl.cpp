#include "trajforge/jsonl.hpp"

namespace trajforge {

std::vector<std::string> read_all_lines(const std::string& path) {
    std::vector<std::string> lines;
    LineReader reader(path);
    while (auto line = reader.next()) {
        lines.push_back(std::move(*line));
    }
    return lines;
}

}  // namespace trajforge
