#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace unidm::text {

inline bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim_view(std::string_view s) noexcept {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

/// ASCII-only lowercasing; bytes >= 0x80 pass through untouched.
inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

inline bool is_word_char(char c) noexcept {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) != 0 || c == '_' || u >= 0x80;
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

inline bool is_trailing_punct(char c) noexcept {
    return c == '.' || c == '?' || c == '!' || c == ',' || c == ';' || c == ':';
}

/// Canonical comparison form for answers: lowercase, whitespace runs collapsed
/// to one space, trimmed, trailing [.?!,;:] stripped. Idempotent.
inline std::string normalize_answer(std::string_view raw) {
    std::string out = join(split_whitespace(to_lower(raw)), " ");
    for (;;) {
        std::size_t before = out.size();
        while (!out.empty() && is_trailing_punct(out.back())) out.pop_back();
        while (!out.empty() && is_space(out.back())) out.pop_back();
        if (out.size() == before) break;
    }
    return out;
}

/// Splits a line-oriented buffer; a trailing newline does not yield an empty
/// final line, and CRLF endings are accepted.
inline std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < s.size()) {
        std::size_t nl = s.find('\n', start);
        std::size_t end = nl == std::string_view::npos ? s.size() : nl;
        std::string_view line = s.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return lines;
}

} // namespace unidm::text
