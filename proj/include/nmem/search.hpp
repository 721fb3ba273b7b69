#pragma once

#include "nmem/cards.hpp"
#include "nmem/vector_index.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nmem {

// Retrieval configurations; everything except Full is an ablation.
enum class SearchMode {
    Full,                // episodic top-k + card selection + thread fetch by id
    EpisodicOnly,        // episodic top-k only
    EpisodicSemantic20,  // episodic top-k + 20 nearest semantic facts
    EpisodicSemantic40,  // episodic top-k + 40 nearest semantic facts
    NoAgentic,           // episodic top-k + 5 nearest threads, no card/thread selection
};

std::string_view to_string(SearchMode mode);
SearchMode parse_search_mode(std::string_view s);  // throws Usage

struct Query {
    std::string text;
    std::optional<std::string> user_hint;
    std::size_t k = 10;
};

struct RetrievalBundle {
    std::vector<SearchHit> episodic_hits;
    std::vector<SearchHit> fact_hits;
    std::vector<std::string> selected_cards;  // user ids
    std::vector<std::string> selected_thread_ids;
    std::vector<std::string> thread_contents;  // parallel to resolved_thread_ids
    std::vector<std::string> resolved_thread_ids;
    std::vector<std::string> missing_thread_ids;
    std::vector<std::string> warnings;
};

struct Answer {
    std::string text;
    std::vector<std::string> cited_episode_ids;
    std::vector<std::string> cited_thread_ids;
    std::vector<std::string> cited_fact_ids;
};

struct QueryResult {
    Answer answer;
    RetrievalBundle bundle;
};

// Top-k cosine hits over episode summaries. EmptyStore when nothing is indexed.
std::vector<SearchHit> retrieve_episodic(Gateway& gateway, const VectorIndex& index, const Query& query);

// A user_hint picks that user's card directly; an empty selection falls back
// to every card.
std::vector<MemoryCard> select_cards(Gateway& gateway, const Query& query, std::span<const MemoryCard> cards,
                                     std::vector<std::string>* warnings = nullptr);

// Ids not present on the card are dropped (with a warning).
std::vector<std::string> select_threads(Gateway& gateway, const Query& query, const MemoryCard& card,
                                        std::vector<std::string>* warnings = nullptr);

QueryResult answer_query(Gateway& gateway, const VectorIndex& index, std::span<const MemoryCard> cards,
                         const Query& query, SearchMode mode = SearchMode::Full);

// [[id]] markers in order of first appearance.
std::vector<std::string> parse_citations(const std::string& text);

nlohmann::json to_json(const QueryResult& result);

} // namespace nmem
