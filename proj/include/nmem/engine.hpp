#pragma once

#include "nmem/cards.hpp"
#include "nmem/cluster.hpp"
#include "nmem/config.hpp"
#include "nmem/eval.hpp"
#include "nmem/search.hpp"
#include "nmem/synaptic.hpp"
#include "nmem/vector_index.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nmem {

// Clustering result for one user, as persisted in clusters.json.
struct UserClusters {
    std::vector<cluster::TopicCluster> topics;
    std::vector<cluster::Thread> threads;
};

struct IngestResult {
    std::string conversation_id;
    std::size_t sessions = 0;
    std::size_t utterances = 0;
    bool replaced = false;
};

struct ConsolidationReport {
    ConsolidationStats stats;
    std::size_t episodes = 0;
    std::size_t facts = 0;
    std::map<std::string, std::size_t> traces_per_user;
    std::map<std::string, std::size_t> topics_per_user;
    std::map<std::string, std::size_t> threads_per_user;
    std::map<std::string, long> zero_trace_episodes;
};

// Holds the exclusive lock on a data directory for its lifetime.
class DataDirLock {
public:
    explicit DataDirLock(const std::filesystem::path& data_dir);
    ~DataDirLock();
    DataDirLock(const DataDirLock&) = delete;
    DataDirLock& operator=(const DataDirLock&) = delete;

private:
    int fd_ = -1;
};

// Per conversation, <data_dir>/<conversation_id>/ holds conversation.json,
// episodes.json, synaptic.json, clusters.json, index.jsonl, stats.json and
// cards/<user>.json.
class Engine {
public:
    explicit Engine(EngineConfig config, std::shared_ptr<Backend> backend = nullptr);

    const EngineConfig& config() const noexcept { return config_; }
    Gateway& gateway() noexcept { return *gateway_; }

    IngestResult ingest(const std::filesystem::path& conversation_file);
    ConsolidationReport consolidate(const std::string& conversation_id);
    std::vector<MemoryCard> build_cards(const std::string& conversation_id);

    QueryResult query(const std::string& conversation_id, const Query& query, SearchMode mode);
    EvalReport eval(const std::string& conversation_id, const std::vector<QAItem>& qa, SearchMode mode,
                    ScoringMode scoring, std::size_t k);

    ConsolidationStats stats(const std::string& conversation_id) const;
    MemoryCard card(const std::string& conversation_id, const std::string& user_id) const;
    std::vector<MemoryCard> cards(const std::string& conversation_id) const;
    std::map<std::string, UserClusters> clusters(const std::string& conversation_id) const;
    VectorIndex load_index(const std::string& conversation_id) const;

    std::filesystem::path conversation_dir(const std::string& conversation_id) const;
    std::filesystem::path card_path(const std::string& conversation_id, const std::string& user_id) const;

private:
    Conversation load_ingested(const std::string& conversation_id) const;
    std::vector<MemoryCard> write_cards(const std::string& conversation_id, const Conversation& conversation,
                                        const SynapticOutput& synaptic,
                                        const std::map<std::string, UserClusters>& clusters, VectorIndex& index);

    EngineConfig config_;
    std::unique_ptr<DataDirLock> lock_;
    std::unique_ptr<Gateway> gateway_;
};

nlohmann::json to_json(const ConsolidationReport& report);
nlohmann::json to_json(const std::map<std::string, UserClusters>& clusters);
std::map<std::string, UserClusters> clusters_from_json(const nlohmann::json& j);

// Writes via a temporary file and rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

} // namespace nmem
