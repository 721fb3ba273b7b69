#include "nmem/llm.hpp"

#include "nmem/text.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace nmem {

namespace {

const std::string& var(const ChatRequest& r, const std::string& name) {
    static const std::string empty;
    auto it = r.variables.find(name);
    return it == r.variables.end() ? empty : it->second;
}

// Drops the marker plus one following space, line by line.
std::string strip_markers(std::string_view s) {
    std::string out(s);
    std::size_t pos;
    while ((pos = out.find(kTopicChangeMarker)) != std::string::npos) {
        std::size_t len = kTopicChangeMarker.size();
        if (pos + len < out.size() && out[pos + len] == ' ') ++len;
        out.erase(pos, len);
    }
    return out;
}

std::string strip_marker(std::string_view s) { return text::trim(strip_markers(s)); }

int count_words(std::string_view s) {
    int n = 0;
    bool in_word = false;
    for (char c : s) {
        const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

std::string capitalize(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

std::string title_from(const std::vector<std::string>& texts, const std::vector<std::string>& exclude,
                       const std::string& fallback) {
    auto toks = text::top_tokens(texts, 3, exclude);
    if (toks.empty()) return fallback;
    for (auto& t : toks) t = capitalize(t);
    return text::join(toks, ", ");
}

std::set<std::string> token_set(std::string_view s) {
    auto toks = text::content_tokens(s);
    return {toks.begin(), toks.end()};
}

bool shares_token(const std::set<std::string>& query, std::string_view title) {
    for (const auto& t : text::content_tokens(title)) {
        if (query.contains(t)) return true;
    }
    return false;
}

// "N | speaker: text" lines -> "N: TC|TD" lines.
std::string segment_batch(const std::string& utterances) {
    std::ostringstream out;
    for (const auto& line : text::split_lines(utterances)) {
        const auto bar = line.find(" | ");
        if (bar == std::string::npos) continue;
        const auto n = text::trim(line.substr(0, bar));
        const bool tc = n == "0" || line.find(kTopicChangeMarker) != std::string::npos;
        out << n << ": " << (tc ? "TC" : "TD") << "\n";
    }
    return out.str();
}

std::string extract(const ChatRequest& r) {
    const auto& speaker = var(r, "speaker");
    std::ostringstream out;
    for (const auto& sentence : text::split_sentences(strip_marker(var(r, "current")))) {
        if (text::tokenize(sentence).size() < 2) continue;
        out << speaker << " | " << sentence << "\n";
    }
    const auto caption = text::trim(var(r, "caption"));
    if (!caption.empty()) out << speaker << " | image: " << caption << "\n";
    return out.str();
}

std::string distill(const ChatRequest& r) {
    const auto& user = var(r, "user");
    std::string_view summary = var(r, "summary");
    if (summary.starts_with("SUMMARY:")) summary.remove_prefix(8);
    std::vector<std::string> kept;
    for (const auto& line : text::split_lines(summary)) {
        if (text::contains_word(line, user)) kept.push_back(line);
    }
    return kept.empty() ? "NONE" : text::join(kept, "\n");
}

std::string select(const ChatRequest& r) {
    const auto query = token_set(var(r, "query"));
    std::vector<std::string> ids;
    for (const auto& line : text::split_lines(var(r, "candidates"))) {
        const auto bar = line.find(" | ");
        if (bar == std::string::npos) continue;
        if (shares_token(query, std::string_view(line).substr(bar + 3))) ids.push_back(text::trim(line.substr(0, bar)));
    }
    return text::join(ids, "\n");
}

// Picks the sentences sharing the most distinct query tokens across every
// "### id" memory block, and cites the blocks they came from.
std::string answer(const ChatRequest& r) {
    const auto query = token_set(var(r, "question"));
    struct Candidate {
        std::string sentence;
        std::string id;
        std::size_t score;
    };
    std::vector<Candidate> candidates;
    for (const char* section : {"episodic", "semantic", "threads"}) {
        std::string current_id;
        for (const auto& line : text::split_lines(var(r, section))) {
            if (line.rfind("### ", 0) == 0) {
                current_id = text::trim(line.substr(4));
                continue;
            }
            if (current_id.empty()) continue;
            for (auto& sentence : text::split_sentences(line)) {
                std::size_t score = 0;
                for (const auto& t : token_set(sentence)) score += query.contains(t) ? 1 : 0;
                if (score > 0) candidates.push_back({std::move(sentence), current_id, score});
            }
        }
    }
    std::size_t best = 0;
    for (const auto& c : candidates) best = std::max(best, c.score);
    if (best == 0) return "I don't know.";

    std::vector<std::string> sentences;
    std::vector<std::string> seen;
    std::vector<std::string> ids;
    for (const auto& c : candidates) {
        if (c.score != best) continue;
        if (std::find(ids.begin(), ids.end(), c.id) == ids.end()) ids.push_back(c.id);
        auto norm = text::normalize_for_match(c.sentence);
        if (std::find(seen.begin(), seen.end(), norm) != seen.end() || sentences.size() >= 5) continue;
        seen.push_back(std::move(norm));
        sentences.push_back(c.sentence);
    }
    std::string out = text::join(sentences, ". ") + ".";
    for (const auto& id : ids) out += " [[" + id + "]]";
    return out;
}

} // namespace

EmbeddingVector mock_embedding(std::string_view s, std::size_t dimension) {
    EmbeddingVector v(dimension, 0.0);
    const auto toks = text::tokenize(s);
    if (toks.empty()) {
        v[0] = 1.0;
        return v;
    }
    for (const auto& t : toks) v[text::fnv1a64(t) % dimension] += 1.0;
    return v;
}

std::string MockBackend::reply(const ChatRequest& r) const {
    switch (r.template_id) {
        case TemplateId::Segment: {
            const bool tc = var(r, "is_first") == "true" ||
                            var(r, "current").find(kTopicChangeMarker) != std::string::npos;
            return tc ? "TC" : "TD";
        }
        case TemplateId::SegmentBatch:
            return segment_batch(var(r, "utterances"));
        case TemplateId::ExtractSemantics:
            return extract(r);
        case TemplateId::SummarizeEpisode:
            return "SUMMARY:" + text::utf8_prefix(strip_markers(var(r, "episode_text")), 400);
        case TemplateId::DistillExperience:
            return distill(r);
        case TemplateId::SummarizeThread: {
            const auto lines = text::split_lines(var(r, "traces"));
            std::vector<std::string> traces;
            for (const auto& l : lines) {
                if (!text::trim(l).empty()) traces.push_back(l);
            }
            return "<title>" + title_from(traces, {var(r, "user")}, "Untitled thread") + "</title>\n<summary>" +
                   text::join(traces, "\n") + "</summary>";
        }
        case TemplateId::TitleTopic:
            return title_from(text::split_lines(var(r, "thread_titles")), {var(r, "user")}, "Miscellaneous");
        case TemplateId::TitleTheme: {
            const auto& user = var(r, "user");
            return user + "'s Journey: " +
                   title_from(text::split_lines(var(r, "section_titles")), {user}, "Memories");
        }
        case TemplateId::SelectCards:
        case TemplateId::SelectThreads:
            return select(r);
        case TemplateId::Answer:
            return answer(r);
        case TemplateId::Judge: {
            const auto gold = text::normalize_for_match(var(r, "gold"));
            const auto pred = text::normalize_for_match(var(r, "predicted"));
            const bool ok = gold.empty() ? pred.empty() : pred.find(gold) != std::string::npos;
            return ok ? "CORRECT" : "WRONG";
        }
    }
    return {};
}

ChatResponse MockBackend::chat(const ChatRequest& request, const std::string& rendered_prompt) {
    ChatResponse resp;
    resp.text = reply(request);
    resp.prompt_tokens = count_words(rendered_prompt);
    resp.completion_tokens = count_words(resp.text);
    return resp;
}

std::vector<EmbeddingVector> MockBackend::embed(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(mock_embedding(t, dimension_));
    return out;
}

} // namespace nmem
