#pragma once

#include "nmem/llm.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace nmem {

enum class Namespace { Episode, Trace, Thread, Fact };

inline constexpr std::array<Namespace, 4> kAllNamespaces = {Namespace::Episode, Namespace::Trace,
                                                             Namespace::Thread, Namespace::Fact};

std::string_view to_string(Namespace ns);
Namespace parse_namespace(std::string_view s);

using Metadata = std::map<std::string, std::string>;
using MetadataFilter = std::function<bool(const Metadata&)>;

// Filter accepting records whose metadata contains every given key/value.
MetadataFilter match_all(Metadata required);

struct VectorRecord {
    std::string id;
    Namespace ns = Namespace::Episode;
    EmbeddingVector vector;
    std::string payload;
    Metadata metadata;

    bool operator==(const VectorRecord&) const = default;
};

struct SearchHit {
    std::string id;
    double score = 0.0;
    std::string payload;
    Metadata metadata;

    bool operator==(const SearchHit&) const = default;
};

struct FetchResult {
    std::vector<VectorRecord> records;  // found ids, request order
    std::vector<std::string> missing;

    void require() const;  // throws NotFoundError when anything is missing
};

// Exact cosine-similarity store. Records live in contiguous per-namespace
// row-major buffers; search is a full scan. Scores are dot products of unit
// vectors; ties rank by ascending id.
class VectorIndex {
public:
    static constexpr int kFormatVersion = 1;

    explicit VectorIndex(std::size_t dimension);
    VectorIndex(VectorIndex&& other) noexcept;
    VectorIndex& operator=(VectorIndex&& other) noexcept;

    std::size_t dimension() const noexcept { return dimension_; }

    // Insert or replace by (namespace, id). Vectors within 1e-6 of unit norm
    // are stored as given, others are normalized first.
    std::size_t upsert(std::vector<VectorRecord> records);

    std::vector<SearchHit> search(std::span<const double> query, Namespace ns, std::size_t k,
                                  const MetadataFilter& filter = {}) const;

    FetchResult fetch(Namespace ns, const std::vector<std::string>& ids) const;

    std::size_t size() const;
    std::size_t size(Namespace ns) const;
    std::size_t count(Namespace ns, const MetadataFilter& filter) const;
    std::vector<VectorRecord> records(Namespace ns) const;  // insertion order

    // Header line {"format_version":1,"dimension":D}, then one JSON record per line.
    void persist(const std::filesystem::path& path) const;
    static VectorIndex load(const std::filesystem::path& path);

private:
    struct Shard {
        std::vector<std::string> ids;
        std::vector<double> rows;
        std::vector<std::string> payloads;
        std::vector<Metadata> metadata;
        std::unordered_map<std::string, std::size_t> position;
    };

    const Shard& shard(Namespace ns) const { return shards_[static_cast<std::size_t>(ns)]; }
    Shard& shard(Namespace ns) { return shards_[static_cast<std::size_t>(ns)]; }
    VectorRecord record_at(const Shard& s, Namespace ns, std::size_t i) const;

    std::size_t dimension_;
    std::array<Shard, 4> shards_;
    mutable std::shared_mutex mutex_;
};

} // namespace nmem
