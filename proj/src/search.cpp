#include "nmem/search.hpp"

#include "nmem/errors.hpp"
#include "nmem/text.hpp"

#include <algorithm>
#include <set>

namespace nmem {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<SearchMode, std::string_view>, 5> kModeNames = {{
    {SearchMode::Full, "full"},
    {SearchMode::EpisodicOnly, "episodic-only"},
    {SearchMode::EpisodicSemantic20, "semantic-20"},
    {SearchMode::EpisodicSemantic40, "semantic-40"},
    {SearchMode::NoAgentic, "no-agentic"},
}};

constexpr std::size_t kPassiveThreadCount = 5;

std::string block(const std::string& id, const std::string& payload) { return "### " + id + "\n" + payload; }

std::string blocks(const std::vector<std::string>& ids, const std::vector<std::string>& payloads) {
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < ids.size(); ++i) parts.push_back(block(ids[i], payloads[i]));
    return text::join(parts, "\n\n");
}

std::string blocks(const std::vector<SearchHit>& hits) {
    std::vector<std::string> parts;
    for (const auto& h : hits) parts.push_back(block(h.id, h.payload));
    return text::join(parts, "\n\n");
}

void warn(std::vector<std::string>* sink, std::string message) {
    if (sink) sink->push_back(std::move(message));
}

std::vector<std::string> reply_ids(const std::string& reply) {
    std::vector<std::string> ids;
    for (auto line : text::split_lines(reply)) {
        line = text::trim(line);
        if (line.rfind("- ", 0) == 0) line = text::trim(line.substr(2));
        if (line.size() >= 2 && line.front() == '`' && line.back() == '`') line = line.substr(1, line.size() - 2);
        if (!line.empty() && line != "NONE" && std::find(ids.begin(), ids.end(), line) == ids.end()) ids.push_back(line);
    }
    return ids;
}

} // namespace

std::string_view to_string(SearchMode mode) {
    for (const auto& [m, name] : kModeNames) {
        if (m == mode) return name;
    }
    return "full";
}

SearchMode parse_search_mode(std::string_view s) {
    for (const auto& [m, name] : kModeNames) {
        if (name == s) return m;
    }
    fail(ErrorCode::Usage, "unknown mode '" + std::string(s) +
                               "' (expected full, episodic-only, semantic-20, semantic-40, no-agentic)");
}

std::vector<SearchHit> retrieve_episodic(Gateway& gateway, const VectorIndex& index, const Query& query) {
    if (index.size(Namespace::Episode) == 0) fail(ErrorCode::EmptyStore, "no episodes indexed; run consolidate first");
    return index.search(gateway.embed_one(query.text), Namespace::Episode, query.k);
}

std::vector<MemoryCard> select_cards(Gateway& gateway, const Query& query, std::span<const MemoryCard> cards,
                                     std::vector<std::string>* warnings) {
    if (query.user_hint) {
        for (const auto& c : cards) {
            if (c.user_id == *query.user_hint) return {c};
        }
        throw NotFoundError({*query.user_hint}, "no memory card for user");
    }
    if (cards.empty()) return {};

    std::vector<std::string> lines;
    for (const auto& c : cards) {
        std::vector<std::string> titles{c.theme_title};
        for (const auto& s : c.sections) titles.push_back(s.title);
        lines.push_back(c.user_id + " | " + text::join(titles, "; "));
    }
    const auto reply =
        ask(gateway, TemplateId::SelectCards, {{"query", query.text}, {"candidates", text::join(lines, "\n")}}, 128);
    std::vector<MemoryCard> chosen;
    for (const auto& id : reply_ids(reply)) {
        const auto it = std::find_if(cards.begin(), cards.end(), [&](const MemoryCard& c) { return c.user_id == id; });
        if (it == cards.end()) {
            warn(warnings, "card selection named unknown user '" + id + "'");
        } else {
            chosen.push_back(*it);
        }
    }
    if (chosen.empty()) chosen.assign(cards.begin(), cards.end());
    return chosen;
}

std::vector<std::string> select_threads(Gateway& gateway, const Query& query, const MemoryCard& card,
                                        std::vector<std::string>* warnings) {
    const auto known = card.thread_ids();
    if (known.empty()) return {};
    std::vector<std::string> lines;
    for (const auto& s : card.sections) {
        for (const auto& e : s.entries) lines.push_back(e.thread_id + " | " + s.title + ": " + e.title);
    }
    const auto reply = ask(gateway, TemplateId::SelectThreads,
                           {{"query", query.text}, {"card", card.theme_title}, {"candidates", text::join(lines, "\n")}},
                           256);
    std::vector<std::string> chosen;
    for (const auto& id : reply_ids(reply)) {
        if (std::find(known.begin(), known.end(), id) == known.end()) {
            warn(warnings, "thread selection named unknown id '" + id + "'");
        } else {
            chosen.push_back(id);
        }
    }
    return chosen;
}

std::vector<std::string> parse_citations(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = s.find("[[", pos)) != std::string::npos) {
        const auto close = s.find("]]", pos + 2);
        if (close == std::string::npos) break;
        auto id = text::trim(std::string_view(s).substr(pos + 2, close - pos - 2));
        if (!id.empty() && std::find(out.begin(), out.end(), id) == out.end()) out.push_back(std::move(id));
        pos = close + 2;
    }
    return out;
}

QueryResult answer_query(Gateway& gateway, const VectorIndex& index, std::span<const MemoryCard> cards,
                         const Query& query, SearchMode mode) {
    if (text::trim(query.text).empty()) fail(ErrorCode::Usage, "query text is empty");
    if (query.k == 0) fail(ErrorCode::Usage, "k must be at least 1");

    QueryResult result;
    auto& bundle = result.bundle;
    bundle.episodic_hits = retrieve_episodic(gateway, index, query);

    if (mode == SearchMode::EpisodicSemantic20 || mode == SearchMode::EpisodicSemantic40) {
        const std::size_t n = mode == SearchMode::EpisodicSemantic20 ? 20 : 40;
        bundle.fact_hits = index.search(gateway.embed_one(query.text), Namespace::Fact, n);
    } else if (mode == SearchMode::NoAgentic) {
        for (auto& h : index.search(gateway.embed_one(query.text), Namespace::Thread, kPassiveThreadCount)) {
            bundle.selected_thread_ids.push_back(h.id);
            bundle.resolved_thread_ids.push_back(h.id);
            bundle.thread_contents.push_back(std::move(h.payload));
        }
    } else if (mode == SearchMode::Full && !cards.empty()) {
        for (const auto& card : select_cards(gateway, query, cards, &bundle.warnings)) {
            bundle.selected_cards.push_back(card.user_id);
            for (auto& id : select_threads(gateway, query, card, &bundle.warnings)) {
                if (std::find(bundle.selected_thread_ids.begin(), bundle.selected_thread_ids.end(), id) ==
                    bundle.selected_thread_ids.end()) {
                    bundle.selected_thread_ids.push_back(std::move(id));
                }
            }
        }
        auto fetched = index.fetch(Namespace::Thread, bundle.selected_thread_ids);
        for (auto& rec : fetched.records) {
            bundle.resolved_thread_ids.push_back(rec.id);
            bundle.thread_contents.push_back(std::move(rec.payload));
        }
        bundle.missing_thread_ids = std::move(fetched.missing);
        for (const auto& id : bundle.missing_thread_ids) bundle.warnings.push_back("thread '" + id + "' not in index");
    }

    const auto reply = ask(gateway, TemplateId::Answer,
                           {{"episodic", blocks(bundle.episodic_hits)},
                            {"semantic", blocks(bundle.fact_hits)},
                            {"threads", blocks(bundle.resolved_thread_ids, bundle.thread_contents)},
                            {"question", query.text}},
                           512);
    result.answer.text = text::trim(reply);

    std::set<std::string> episodes, facts, threads(bundle.resolved_thread_ids.begin(), bundle.resolved_thread_ids.end());
    for (const auto& h : bundle.episodic_hits) episodes.insert(h.id);
    for (const auto& h : bundle.fact_hits) facts.insert(h.id);
    for (const auto& id : parse_citations(result.answer.text)) {
        if (episodes.contains(id)) {
            result.answer.cited_episode_ids.push_back(id);
        } else if (threads.contains(id)) {
            result.answer.cited_thread_ids.push_back(id);
        } else if (facts.contains(id)) {
            result.answer.cited_fact_ids.push_back(id);
        } else {
            bundle.warnings.push_back("answer cited '" + id + "', which was not retrieved");
        }
    }
    return result;
}

json to_json(const QueryResult& r) {
    json hits = json::array();
    for (const auto& h : r.bundle.episodic_hits) hits.push_back({{"id", h.id}, {"score", h.score}});
    json facts = json::array();
    for (const auto& h : r.bundle.fact_hits) facts.push_back({{"id", h.id}, {"score", h.score}});
    return {{"answer", r.answer.text},
            {"citations",
             {{"episodes", r.answer.cited_episode_ids},
              {"threads", r.answer.cited_thread_ids},
              {"facts", r.answer.cited_fact_ids}}},
            {"bundle",
             {{"episodic_hits", std::move(hits)},
              {"fact_hits", std::move(facts)},
              {"selected_cards", r.bundle.selected_cards},
              {"selected_threads", r.bundle.selected_thread_ids},
              {"missing_threads", r.bundle.missing_thread_ids},
              {"warnings", r.bundle.warnings}}}};
}

} // namespace nmem
