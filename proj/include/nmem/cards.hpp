#pragma once

#include "nmem/cluster.hpp"
#include "nmem/vector_index.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <vector>

namespace nmem {

struct ThreadEntry {
    std::string thread_id;
    std::string title;
    std::string summary;

    bool operator==(const ThreadEntry&) const = default;
};

struct TopicSection {
    int topic_id = 0;
    std::string title;
    std::vector<ThreadEntry> entries;

    bool operator==(const TopicSection&) const = default;
};

// Theme title -> topic sections -> thread entries.
struct MemoryCard {
    std::string user_id;
    std::string theme_title;
    std::vector<TopicSection> sections;
    int version = 1;
    Timestamp built_at = Timestamp::from_epoch(0);

    std::vector<std::string> thread_ids() const;
    bool operator==(const MemoryCard&) const = default;
};

// Asks for a title and summary, then upserts the thread payload (summary
// followed by the ordered trace texts) into the Thread namespace.
ThreadEntry summarize_thread(Gateway& gateway, VectorIndex& index, const std::string& user_id,
                             const cluster::Thread& thread, std::span<const std::string> trace_texts);

// Payload stored for a thread: "<summary>\n<trace 1>\n<trace 2>...".
std::string thread_payload(const std::string& summary, std::span<const std::string> trace_texts);

struct CardBuildOptions {
    int version = 1;
    Timestamp built_at = Timestamp::from_epoch(0);
};

// One section per topic, one entry per thread, theme title over all sections.
MemoryCard build_card(Gateway& gateway, VectorIndex& index, const std::string& user_id,
                      std::span<const cluster::TopicCluster> topics, std::span<const cluster::Thread> threads,
                      std::span<const ExperienceTrace> traces, const CardBuildOptions& options = {});

enum class CardFormat { Json, Markdown };

std::string render_card(const MemoryCard& card, CardFormat format);
nlohmann::json to_json(const MemoryCard& card);
MemoryCard card_from_json(const nlohmann::json& j);

} // namespace nmem
