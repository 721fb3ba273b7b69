#include "nmem/cluster.hpp"

#include "nmem/errors.hpp"

#include <algorithm>
#include <map>

namespace nmem::cluster {

ClusteringParams topic_params(std::uint64_t seed) {
    ClusteringParams p;
    p.n_neighbors = 10;
    p.min_cluster_size = 5;
    p.seed = seed;
    return p;
}

ClusteringParams thread_params(std::uint64_t seed) {
    ClusteringParams p;
    p.n_neighbors = 2;
    p.min_cluster_size = 2;
    p.seed = seed;
    return p;
}

namespace {

PipelineResult single_cluster(Eigen::Index n) {
    PipelineResult r;
    r.labels.assign(static_cast<std::size_t>(n), 0);
    r.n_clusters = n > 0 ? 1 : 0;
    r.fallback = true;
    return r;
}

} // namespace

PipelineResult cluster_rows(const Matrix& X, const ClusteringParams& params) {
    const auto n = X.rows();
    if (n < std::max(params.n_neighbors + 1, params.min_cluster_size)) return single_cluster(n);

    PCAResult pca;
    try {
        pca = fit_pca(X, params.variance_target);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateInput) throw;
        return single_cluster(n);
    }

    ManifoldParams mp;
    mp.n_neighbors = params.n_neighbors;
    mp.n_components = params.n_components;
    mp.min_dist = params.min_dist;
    mp.n_epochs = params.n_epochs;
    mp.seed = params.seed;
    Matrix layout = manifold_embed(pca.reduced, mp);

    DensityParams dp;
    dp.min_cluster_size = params.min_cluster_size;
    dp.min_samples = params.min_samples > 0 ? params.min_samples : params.min_cluster_size;
    const auto assignment = density_cluster(layout, dp);
    const auto reassigned = knn_reassign(layout, assignment, params.k_vote);
    if (reassigned.all_noise || assignment.n_clusters == 0) return single_cluster(n);

    PipelineResult r;
    r.labels = reassigned.assignment.labels;
    r.n_clusters = reassigned.assignment.n_clusters;
    r.layout = std::move(layout);
    return r;
}

namespace {

Matrix gather_rows(const std::vector<std::string>& ids, const EmbeddingMatrix& vectors) {
    Matrix X(static_cast<Eigen::Index>(ids.size()), vectors.rows.cols());
    std::map<std::string, Eigen::Index> where;
    for (std::size_t i = 0; i < vectors.row_ids.size(); ++i) where.emplace(vectors.row_ids[i], static_cast<Eigen::Index>(i));
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto it = where.find(ids[i]);
        if (it == where.end()) {
            missing.push_back(ids[i]);
            continue;
        }
        X.row(static_cast<Eigen::Index>(i)) = vectors.rows.row(it->second);
    }
    if (!missing.empty()) throw NotFoundError(missing, "no embedding for trace");
    return X;
}

} // namespace

std::vector<TopicCluster> cluster_topics(std::span<const ExperienceTrace> traces, const EmbeddingMatrix& vectors,
                                         const ClusteringParams& params) {
    std::vector<TopicCluster> topics;
    if (traces.empty()) return topics;
    std::vector<std::string> ids;
    for (const auto& t : traces) ids.push_back(t.trace_id);
    const auto result = cluster_rows(gather_rows(ids, vectors), params);
    topics.resize(static_cast<std::size_t>(result.n_clusters));
    for (int c = 0; c < result.n_clusters; ++c) topics[static_cast<std::size_t>(c)].topic_id = c;
    for (std::size_t i = 0; i < ids.size(); ++i) topics[static_cast<std::size_t>(result.labels[i])].trace_ids.push_back(ids[i]);
    std::erase_if(topics, [](const TopicCluster& t) { return t.trace_ids.empty(); });
    return topics;
}

std::vector<Thread> cluster_threads(const TopicCluster& topic, std::span<const ExperienceTrace> traces,
                                    const EmbeddingMatrix& vectors, const std::string& thread_id_prefix,
                                    const ClusteringParams& params) {
    std::map<std::string, const ExperienceTrace*> by_id;
    for (const auto& t : traces) by_id.emplace(t.trace_id, &t);
    std::vector<const ExperienceTrace*> members;
    std::vector<std::string> missing;
    for (const auto& id : topic.trace_ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) {
            missing.push_back(id);
        } else {
            members.push_back(it->second);
        }
    }
    if (!missing.empty()) throw NotFoundError(missing, "topic references unknown trace");
    std::stable_sort(members.begin(), members.end(),
                     [](const ExperienceTrace* a, const ExperienceTrace* b) { return a->timestamp < b->timestamp; });

    std::vector<Thread> threads;
    if (members.empty()) return threads;
    std::vector<std::string> ids;
    for (const auto* m : members) ids.push_back(m->trace_id);
    const auto result = cluster_rows(gather_rows(ids, vectors), params);

    std::vector<std::vector<const ExperienceTrace*>> groups(static_cast<std::size_t>(result.n_clusters));
    for (std::size_t i = 0; i < members.size(); ++i) groups[static_cast<std::size_t>(result.labels[i])].push_back(members[i]);
    std::erase_if(groups, [](const auto& g) { return g.empty(); });
    // Members are chronological, so groups already sort by their first trace.
    std::stable_sort(groups.begin(), groups.end(),
                     [](const auto& a, const auto& b) { return a.front()->timestamp < b.front()->timestamp; });
    for (std::size_t j = 0; j < groups.size(); ++j) {
        Thread th;
        th.thread_id = thread_id_prefix + "T" + std::to_string(topic.topic_id) + "." + std::to_string(j);
        th.topic_id = topic.topic_id;
        for (const auto* m : groups[j]) th.trace_ids.push_back(m->trace_id);
        th.start = groups[j].front()->timestamp;
        th.end = groups[j].back()->timestamp;
        threads.push_back(std::move(th));
    }
    return threads;
}

} // namespace nmem::cluster
