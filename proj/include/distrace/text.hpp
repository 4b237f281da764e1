#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace distrace {

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim_view(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

/// Case-insensitive ASCII comparison.
inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        char x = a[i], y = b[i];
        if (x >= 'A' && x <= 'Z') x = static_cast<char>(x - 'A' + 'a');
        if (y >= 'A' && y <= 'Z') y = static_cast<char>(y - 'A' + 'a');
        if (x != y) return false;
    }
    return true;
}

/// Case-insensitive substring search; npos when absent.
size_t ifind(std::string_view haystack, std::string_view needle, size_t from = 0);

std::vector<std::string> split_lines(std::string_view text);

/// Removes every whitespace character; used for whitespace-insensitive
/// fidelity comparisons.
std::string strip_whitespace(std::string_view s);

std::string replace_all(std::string text, std::string_view from, std::string_view to);

}  // namespace distrace
