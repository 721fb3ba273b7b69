#pragma once

#include "nmem/llm.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

namespace nmem {

struct ClusterThresholds {
    int n_neighbors = 10;
    int min_cluster_size = 5;
};

struct EngineConfig {
    BackendConfig backend;
    std::size_t embedding_dimension = kMockDimension;
    ClusterThresholds topic{10, 5};
    ClusterThresholds thread{2, 2};
    std::size_t retrieval_k = 10;
    double variance_target = 0.95;
    std::uint64_t seed = 42;
    std::filesystem::path data_dir = "nmem-data";
    std::optional<std::filesystem::path> templates_dir;

    void validate() const;  // throws Usage
};

// Settings are addressed as "section.key", e.g. "backend.kind" or
// "clustering.topic_n_neighbors". Unknown keys are a Usage error.
void apply_setting(EngineConfig& config, const std::string& key, const std::string& value);

// INI file with [backend], [engine] and [clustering] sections.
void apply_config_file(EngineConfig& config, const std::filesystem::path& path);

// NMEM_<SECTION>_<KEY> variables, e.g. NMEM_BACKEND_KIND=remote.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
void apply_environment(EngineConfig& config, const EnvLookup& lookup);
EnvLookup process_environment();

// Defaults, then file, then environment. Command-line flags are applied by
// the caller afterwards.
EngineConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& lookup);

std::vector<std::string> config_keys();

} // namespace nmem
