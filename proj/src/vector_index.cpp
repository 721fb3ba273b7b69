#include "nmem/vector_index.hpp"

#include "nmem/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>

namespace nmem {

using nlohmann::json;

std::string_view to_string(Namespace ns) {
    switch (ns) {
        case Namespace::Episode: return "episode";
        case Namespace::Trace:   return "trace";
        case Namespace::Thread:  return "thread";
        case Namespace::Fact:    return "fact";
    }
    return "episode";
}

Namespace parse_namespace(std::string_view s) {
    for (auto ns : kAllNamespaces) {
        if (to_string(ns) == s) return ns;
    }
    fail(ErrorCode::MalformedInput, "unknown namespace '" + std::string(s) + "'");
}

MetadataFilter match_all(Metadata required) {
    return [required = std::move(required)](const Metadata& m) {
        for (const auto& [k, v] : required) {
            auto it = m.find(k);
            if (it == m.end() || it->second != v) return false;
        }
        return true;
    };
}

void FetchResult::require() const {
    if (!missing.empty()) throw NotFoundError(missing, "records not found");
}

VectorIndex::VectorIndex(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0) fail(ErrorCode::DimensionMismatch, "index dimension must be > 0");
}

VectorIndex::VectorIndex(VectorIndex&& other) noexcept : dimension_(other.dimension_) {
    std::unique_lock lock(other.mutex_);
    shards_ = std::move(other.shards_);
}

VectorIndex& VectorIndex::operator=(VectorIndex&& other) noexcept {
    if (this != &other) {
        std::scoped_lock lock(mutex_, other.mutex_);
        dimension_ = other.dimension_;
        shards_ = std::move(other.shards_);
    }
    return *this;
}

std::size_t VectorIndex::upsert(std::vector<VectorRecord> records) {
    for (auto& r : records) {
        if (r.vector.size() != dimension_) {
            fail(ErrorCode::DimensionMismatch, "record '" + r.id + "' has dimension " +
                                                   std::to_string(r.vector.size()) + ", index expects " +
                                                   std::to_string(dimension_));
        }
        const double norm = std::sqrt(dot(r.vector, r.vector));
        if (std::abs(norm - 1.0) > 1e-6) normalize_l2(r.vector);
    }
    std::unique_lock lock(mutex_);
    for (auto& r : records) {
        auto& s = shard(r.ns);
        auto it = s.position.find(r.id);
        if (it != s.position.end()) {
            const std::size_t i = it->second;
            std::copy(r.vector.begin(), r.vector.end(), s.rows.begin() + static_cast<std::ptrdiff_t>(i * dimension_));
            s.payloads[i] = std::move(r.payload);
            s.metadata[i] = std::move(r.metadata);
            continue;
        }
        s.position.emplace(r.id, s.ids.size());
        s.ids.push_back(std::move(r.id));
        s.rows.insert(s.rows.end(), r.vector.begin(), r.vector.end());
        s.payloads.push_back(std::move(r.payload));
        s.metadata.push_back(std::move(r.metadata));
    }
    return records.size();
}

std::vector<SearchHit> VectorIndex::search(std::span<const double> query, Namespace ns, std::size_t k,
                                           const MetadataFilter& filter) const {
    if (query.size() != dimension_) {
        fail(ErrorCode::DimensionMismatch, "query has dimension " + std::to_string(query.size()) +
                                               ", index expects " + std::to_string(dimension_));
    }
    if (k == 0) fail(ErrorCode::Usage, "search k must be >= 1");
    std::shared_lock lock(mutex_);
    const auto& s = shard(ns);
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(s.ids.size());
    for (std::size_t i = 0; i < s.ids.size(); ++i) {
        if (filter && !filter(s.metadata[i])) continue;
        scored.emplace_back(dot(query, std::span<const double>(s.rows.data() + i * dimension_, dimension_)), i);
    }
    const auto better = [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return s.ids[a.second] < s.ids[b.second];
    };
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
    std::vector<SearchHit> hits;
    hits.reserve(take);
    for (std::size_t j = 0; j < take; ++j) {
        const auto i = scored[j].second;
        hits.push_back({s.ids[i], scored[j].first, s.payloads[i], s.metadata[i]});
    }
    return hits;
}

VectorRecord VectorIndex::record_at(const Shard& s, Namespace ns, std::size_t i) const {
    VectorRecord r;
    r.id = s.ids[i];
    r.ns = ns;
    r.vector.assign(s.rows.begin() + static_cast<std::ptrdiff_t>(i * dimension_),
                    s.rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * dimension_));
    r.payload = s.payloads[i];
    r.metadata = s.metadata[i];
    return r;
}

FetchResult VectorIndex::fetch(Namespace ns, const std::vector<std::string>& ids) const {
    std::shared_lock lock(mutex_);
    const auto& s = shard(ns);
    FetchResult out;
    for (const auto& id : ids) {
        auto it = s.position.find(id);
        if (it == s.position.end()) {
            out.missing.push_back(id);
        } else {
            out.records.push_back(record_at(s, ns, it->second));
        }
    }
    return out;
}

std::size_t VectorIndex::size() const {
    std::shared_lock lock(mutex_);
    std::size_t n = 0;
    for (const auto& s : shards_) n += s.ids.size();
    return n;
}

std::size_t VectorIndex::size(Namespace ns) const {
    std::shared_lock lock(mutex_);
    return shard(ns).ids.size();
}

std::size_t VectorIndex::count(Namespace ns, const MetadataFilter& filter) const {
    std::shared_lock lock(mutex_);
    const auto& s = shard(ns);
    if (!filter) return s.ids.size();
    return static_cast<std::size_t>(std::count_if(s.metadata.begin(), s.metadata.end(), filter));
}

std::vector<VectorRecord> VectorIndex::records(Namespace ns) const {
    std::shared_lock lock(mutex_);
    const auto& s = shard(ns);
    std::vector<VectorRecord> out;
    out.reserve(s.ids.size());
    for (std::size_t i = 0; i < s.ids.size(); ++i) out.push_back(record_at(s, ns, i));
    return out;
}

void VectorIndex::persist(const std::filesystem::path& path) const {
    std::string buffer;
    {
        std::shared_lock lock(mutex_);
        buffer = json{{"format_version", kFormatVersion}, {"dimension", dimension_}}.dump() + "\n";
        for (auto ns : kAllNamespaces) {
            const auto& s = shard(ns);
            for (std::size_t i = 0; i < s.ids.size(); ++i) {
                const auto r = record_at(s, ns, i);
                buffer += json{{"namespace", std::string(to_string(ns))},
                               {"id", r.id},
                               {"vector", r.vector},
                               {"payload", r.payload},
                               {"metadata", r.metadata}}
                              .dump();
                buffer += "\n";
            }
        }
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::IoFailure, "cannot write " + tmp.string());
        out << buffer;
        if (!out.flush()) fail(ErrorCode::IoFailure, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot rename " + tmp.string() + ": " + ec.message());
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::IoFailure, path.string() + ": missing header");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedInput, path.string() + ": bad header: " + e.what());
    }
    if (!header.is_object() || !header.contains("format_version") || !header["format_version"].is_number_integer() ||
        !header.contains("dimension") || !header["dimension"].is_number_unsigned()) {
        fail(ErrorCode::MalformedInput, path.string() + ": header needs integer format_version and dimension");
    }
    const int version = header["format_version"].get<int>();
    if (version != kFormatVersion) {
        fail(ErrorCode::FormatVersionMismatch, path.string() + ": format_version " + std::to_string(version) +
                                                   " (supported: " + std::to_string(kFormatVersion) + ")");
    }
    VectorIndex index(header["dimension"].get<std::size_t>());
    std::vector<VectorRecord> batch;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            VectorRecord r;
            r.ns = parse_namespace(j.at("namespace").get<std::string>());
            r.id = j.at("id").get<std::string>();
            r.vector = j.at("vector").get<EmbeddingVector>();
            r.payload = j.at("payload").get<std::string>();
            r.metadata = j.at("metadata").get<Metadata>();
            batch.push_back(std::move(r));
        } catch (const json::exception& e) {
            fail(ErrorCode::MalformedInput, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    index.upsert(std::move(batch));
    return index;
}

} // namespace nmem
