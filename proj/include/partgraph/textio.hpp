#pragma once

#include "partgraph/errors.hpp"

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace partgraph {

// Shortest decimal form that reparses to the identical double; the basis of
// every bit-exact text round-trip in this project.
inline std::string format_double(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view token) {
    double value = 0.0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        throw ParseError("bad number: '" + std::string(token) + "'");
    }
    return value;
}

inline unsigned long long parse_uint64(std::string_view token) {
    unsigned long long value = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        throw ParseError("bad unsigned integer: '" + std::string(token) + "'");
    }
    return value;
}

inline long long parse_int(std::string_view token) {
    long long value = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        throw ParseError("bad integer: '" + std::string(token) + "'");
    }
    return value;
}

inline std::vector<std::string_view> split_tokens(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
            ++i;
        }
        if (i > start) {
            tokens.push_back(line.substr(start, i - start));
        }
    }
    return tokens;
}

// Iterates lines of a text buffer, skipping blank lines and '#' comments.
class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}

    // Next meaningful line, or empty optional-like pair {false, ...} at EOF.
    bool next(std::string_view& line) {
        while (pos_ < text_.size()) {
            std::size_t end = text_.find('\n', pos_);
            if (end == std::string_view::npos) {
                end = text_.size();
            }
            std::string_view candidate = text_.substr(pos_, end - pos_);
            pos_ = end + 1;
            std::size_t first = candidate.find_first_not_of(" \t\r");
            if (first == std::string_view::npos || candidate[first] == '#') {
                continue;
            }
            line = candidate;
            return true;
        }
        return false;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

} // namespace partgraph
