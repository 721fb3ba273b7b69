#pragma once

#include "nmem/stm.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nmem {

struct EpisodeSummary {
    std::string episode_id;
    std::string title;
    std::string summary_text;
    Timestamp start;  // time range of the episode's utterances
    Timestamp end;
    std::vector<std::string> participants;  // speakers present in the episode

    bool operator==(const EpisodeSummary&) const = default;
};

struct ExperienceTrace {
    std::string trace_id;
    std::string user_id;
    std::string text;
    Timestamp timestamp;  // start of the source episode
    std::string source_episode;
    std::vector<std::string> source_fact_ids;

    bool operator==(const ExperienceTrace&) const = default;
};

// Discard accounting over episodes shared by both users:
// n_discard = n_episodes - n_experiences / 2, discard_rate = n_discard / n_episodes.
struct ConsolidationStats {
    long n_episodes = 0;
    long n_experiences = 0;
    long n_threads = 0;
    double n_discard = 0.0;
    double discard_rate = 0.0;

    bool operator==(const ConsolidationStats&) const = default;
};

ConsolidationStats compute_stats(long n_episodes, long n_experiences, long n_threads);

// Keys follow the statistics table columns: Episode, Exper., Thread, Discard, Dis. Rate.
nlohmann::json to_json(const ConsolidationStats& s);
ConsolidationStats stats_from_json(const nlohmann::json& j);

EpisodeSummary summarize_episode(Gateway& gateway, const Episode& episode, std::span<const Utterance> utterances);

// Zero traces is the "discard" outcome for this (episode, user) pair.
std::vector<ExperienceTrace> distill_experiences(Gateway& gateway, const EpisodeSummary& summary,
                                                 std::span<const SemanticFact> facts, const std::string& user);

struct SynapticOutput {
    std::vector<EpisodeSummary> summaries;                              // episode order
    std::map<std::string, std::vector<ExperienceTrace>> traces_by_user;  // timestamp order
    std::map<std::string, long> zero_trace_episodes;                     // per user
};

SynapticOutput consolidate(Gateway& gateway, const Conversation& conversation, const StmOutput& stm);

nlohmann::json to_json(const SynapticOutput& out);
SynapticOutput synaptic_output_from_json(const nlohmann::json& j);

} // namespace nmem
