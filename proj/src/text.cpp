#include "nmem/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <unordered_map>

namespace nmem::text {

namespace {

bool is_alnum(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::isalnum(u);
}

bool is_space(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::isspace(u);
}

constexpr std::array<std::string_view, 112> kStopwords = {
    "a", "about", "after", "again", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "been", "before", "being", "but", "by", "can",
    "could", "did", "do", "does", "doing", "down", "for", "from", "get", "got",
    "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his",
    "how", "i", "if", "in", "into", "is", "it", "its", "just", "like",
    "me", "mine", "more", "most", "my", "no", "not", "now", "of", "oh",
    "ok", "okay", "on", "once", "only", "or", "other", "our", "out", "over",
    "own", "really", "same", "she", "should", "so", "some", "such", "than", "that",
    "the", "their", "them", "then", "there", "these", "they", "this", "those", "to",
    "too", "up", "us", "very", "was", "we", "well", "were", "what", "when",
    "where", "which", "who", "whom", "why", "will", "with", "would", "yes", "you",
    "your", "yours",
};

} // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (is_alnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

bool is_stopword(std::string_view lowered_token) {
    return std::find(kStopwords.begin(), kStopwords.end(), lowered_token) != kStopwords.end();
}

std::vector<std::string> content_tokens(std::string_view s) {
    auto toks = tokenize(s);
    std::erase_if(toks, [](const std::string& t) { return t.size() < 2 || is_stopword(t); });
    return toks;
}

std::vector<std::string> split_sentences(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        auto t = trim(cur);
        while (!t.empty() && (t.back() == '.' || t.back() == '!' || t.back() == '?')) t.pop_back();
        t = trim(t);
        if (!t.empty()) out.push_back(std::move(t));
        cur.clear();
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '\n') {
            flush();
            continue;
        }
        cur.push_back(c);
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == s.size() || is_space(s[i + 1]))) flush();
    }
    flush();
    return out;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto nl = s.find('\n', start);
        if (nl == std::string_view::npos) nl = s.size();
        auto line = s.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.emplace_back(line);
        start = nl + 1;
    }
    return out;
}

std::string utf8_prefix(std::string_view s, std::size_t n_codepoints) {
    std::size_t i = 0;
    std::size_t count = 0;
    while (i < s.size() && count < n_codepoints) {
        const auto u = static_cast<unsigned char>(s[i]);
        std::size_t len = 1;
        if (u >= 0xF0) len = 4;
        else if (u >= 0xE0) len = 3;
        else if (u >= 0xC0) len = 2;
        i = std::min(s.size(), i + len);
        ++count;
    }
    return std::string(s.substr(0, i));
}

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (char c : s) {
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
    }
    return n;
}

bool contains_word(std::string_view s, std::string_view word) {
    if (word.empty()) return false;
    std::size_t pos = 0;
    while ((pos = s.find(word, pos)) != std::string_view::npos) {
        const bool left_ok = pos == 0 || !is_alnum(s[pos - 1]);
        const std::size_t end = pos + word.size();
        const bool right_ok = end >= s.size() || !is_alnum(s[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

std::string normalize_for_match(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        const auto u = static_cast<unsigned char>(c);
        if (u < 0x80 && std::ispunct(u)) continue;
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : c);
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

std::vector<std::string> top_tokens(const std::vector<std::string>& texts, std::size_t limit,
                                    const std::vector<std::string>& exclude) {
    std::vector<std::string> order;
    std::unordered_map<std::string, std::size_t> counts;
    std::vector<std::string> excluded;
    for (const auto& e : exclude) {
        for (auto& t : tokenize(e)) excluded.push_back(std::move(t));
    }
    for (const auto& t : texts) {
        for (auto& tok : content_tokens(t)) {
            if (std::find(excluded.begin(), excluded.end(), tok) != excluded.end()) continue;
            if (counts[tok]++ == 0) order.push_back(tok);
        }
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](const std::string& a, const std::string& b) { return counts[a] > counts[b]; });
    if (order.size() > limit) order.resize(limit);
    return order;
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace nmem::text
