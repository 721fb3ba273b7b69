#pragma once

#include "nmem/synaptic.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Systems-consolidation numerics: PCA -> manifold layout -> density
// clustering -> KNN noise reassignment, used twice (topics, then threads
// within each topic). Matrices hold one point per row.
namespace nmem::cluster {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct EmbeddingMatrix {
    Matrix rows;
    std::vector<std::string> row_ids;

    std::size_t size() const { return row_ids.size(); }
    std::optional<Eigen::Index> find(const std::string& id) const;
};

// ---- PCA ----------------------------------------------------------------

struct PCAModel {
    Vector mean;                 // d
    Matrix components;           // p x d, orthonormal rows
    Vector explained_variance;   // p, non-increasing (sample covariance, n-1 denominator)
    double total_variance = 0.0;
};

struct PCAResult {
    PCAModel model;
    Matrix reduced;  // n x p
};

// Keeps the smallest p whose cumulative explained-variance ratio reaches
// variance_target. DegenerateInput when n < 2 or the data has no variance.
PCAResult fit_pca(const Matrix& X, double variance_target);
Matrix pca_project(const PCAModel& model, const Matrix& X);
Matrix pca_reconstruct(const PCAModel& model, const Matrix& reduced);  // back to centered coordinates

// ---- manifold layout ----------------------------------------------------

struct ManifoldParams {
    int n_neighbors = 15;  // counts the point itself, so n_neighbors - 1 true neighbors
    int n_components = 5;
    double min_dist = 0.1;
    int n_epochs = 200;
    std::uint64_t seed = 42;
    // Curve 1 / (1 + a d^(2b)); the standard fit for min_dist = 0.1.
    double a = 1.577;
    double b = 0.895;
    int negative_sample_rate = 5;
};

struct KnnGraph {
    std::vector<std::vector<int>> indices;       // per point, nearest first, self excluded
    std::vector<std::vector<double>> distances;
};

KnnGraph exact_knn(const Matrix& X, int k);

struct SmoothDistances {
    std::vector<double> rho;    // distance to nearest neighbor
    std::vector<double> sigma;  // bandwidth
};

// Per point, binary-searches sigma so that sum_j exp(-max(0, d_j - rho) / sigma)
// equals log2(n_neighbors) over the point's n_neighbors - 1 neighbors.
SmoothDistances smooth_knn_distances(const KnnGraph& knn, int n_neighbors);

struct WeightedEdge {
    int head = 0;
    int tail = 0;
    double weight = 0.0;
};

// Fuzzy union of the directed membership graphs, w = a + b - a*b. Each
// undirected edge appears twice (both directions), sorted by (head, tail).
std::vector<WeightedEdge> fuzzy_graph(const KnnGraph& knn, const SmoothDistances& smooth);

// n x n_components layout. When n <= n_neighbors the first n_components
// columns of X (zero-padded) are returned instead.
Matrix manifold_embed(const Matrix& X, const ManifoldParams& params);

// ---- density clustering ---------------------------------------------------

struct DensityParams {
    int min_cluster_size = 5;
    int min_samples = 5;
};

struct ClusterAssignment {
    std::vector<int> labels;  // -1 = noise, others dense in [0, n_clusters)
    int n_clusters = 0;

    bool operator==(const ClusterAssignment&) const = default;
};

struct MstEdge {
    int a = 0;
    int b = 0;
    double weight = 0.0;
};

// Distance to the min_samples-th nearest point, counting the point itself.
std::vector<double> core_distances(const Matrix& Y, int min_samples);
double mutual_reachability(const Matrix& Y, const std::vector<double>& core, int i, int j);
// Prim's algorithm over the complete mutual-reachability graph.
std::vector<MstEdge> mutual_reachability_mst(const Matrix& Y, int min_samples);

struct LinkageRow {
    int left = 0;
    int right = 0;
    double distance = 0.0;
    int size = 0;
};

// Single-linkage dendrogram from MST edges; merged nodes are numbered n, n+1, ...
std::vector<LinkageRow> single_linkage(std::vector<MstEdge> mst, int n);

struct CondensedRow {
    int parent = 0;
    int child = 0;  // < n: a point; >= n: a cluster
    double lambda = 0.0;
    int child_size = 0;
};

std::vector<CondensedRow> condense_tree(const std::vector<LinkageRow>& linkage, int n, int min_cluster_size);

// Excess-of-mass extraction. If the hierarchy never splits into two clusters
// of at least min_cluster_size, every point goes into a single cluster (when
// n >= min_cluster_size) rather than all becoming noise. Cluster ids are
// ordered by their smallest member index.
ClusterAssignment density_cluster(const Matrix& Y, const DensityParams& params);

struct ReassignResult {
    ClusterAssignment assignment;
    bool all_noise = false;  // nothing to vote with; labels returned unchanged
};

// Each noise point takes the distance-weighted majority label of its k_vote
// nearest non-noise points; vote ties go to the nearest neighbor's label, and
// equidistant neighbors prefer the smaller cluster id.
ReassignResult knn_reassign(const Matrix& Y, const ClusterAssignment& labels, int k_vote);

// ---- two-stage pipeline -------------------------------------------------

struct ClusteringParams {
    int n_neighbors = 10;
    int min_cluster_size = 5;
    int min_samples = 0;  // 0: same as min_cluster_size
    double variance_target = 0.95;
    int n_components = 5;
    double min_dist = 0.1;
    int n_epochs = 200;
    int k_vote = 3;
    std::uint64_t seed = 42;
};

ClusteringParams topic_params(std::uint64_t seed = 42);   // n_neighbors 10, min_cluster_size 5
ClusteringParams thread_params(std::uint64_t seed = 42);  // n_neighbors 2, min_cluster_size 2

struct PipelineResult {
    std::vector<int> labels;  // dense, no noise
    int n_clusters = 0;
    bool fallback = false;    // small n, zero variance, or all noise: one cluster
    Matrix layout;            // manifold coordinates (empty on fallback)
};

PipelineResult cluster_rows(const Matrix& X, const ClusteringParams& params);

struct TopicCluster {
    int topic_id = 0;
    std::vector<std::string> trace_ids;

    bool operator==(const TopicCluster&) const = default;
};

struct Thread {
    std::string thread_id;
    int topic_id = 0;
    std::vector<std::string> trace_ids;  // chronological
    Timestamp start;
    Timestamp end;

    bool operator==(const Thread&) const = default;
};

// Traces of one user; `vectors` must hold a row for every trace id.
std::vector<TopicCluster> cluster_topics(std::span<const ExperienceTrace> traces, const EmbeddingMatrix& vectors,
                                         const ClusteringParams& params = topic_params());

// Thread ids are "<prefix>T<topic>.<j>", threads ordered by start time.
std::vector<Thread> cluster_threads(const TopicCluster& topic, std::span<const ExperienceTrace> traces,
                                    const EmbeddingMatrix& vectors, const std::string& thread_id_prefix,
                                    const ClusteringParams& params = thread_params());

} // namespace nmem::cluster
