#include "support/testkit.hpp"

#include "nmem/cluster.hpp"
#include "nmem/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <set>

using namespace nmem;
using namespace nmem::cluster;
using testkit::error_code_of;

namespace {

Matrix column(std::initializer_list<double> xs) {
    Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
    Eigen::Index i = 0;
    for (double x : xs) m(i++, 0) = x;
    return m;
}

double orthonormality_error(const Matrix& c) {
    const Matrix g = c * c.transpose();
    return (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

bool bytes_equal(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

void check_dense(const ClusterAssignment& a) {
    std::set<int> seen;
    for (int l : a.labels) {
        CHECK(l >= -1);
        CHECK(l < a.n_clusters);
        if (l >= 0) seen.insert(l);
    }
    CHECK(static_cast<int>(seen.size()) == a.n_clusters);
}

// The star-shaped sub-stories: a hub line carrying every story word, leaves
// sharing the story's opening words plus two of their own.
const std::vector<std::string> kStories = {
    "Melanie pottery class bought clay",
    "Melanie camping trip lake tent",
    "Melanie pottery class shaped bowl",
    "Melanie camping trip kids marshmallows",
    "Melanie pottery class bought clay shaped bowl applied glaze fired kiln",
    "Melanie camping trip lake tent kids marshmallows saw meteors",
    "Melanie pottery class applied glaze",
    "Melanie camping trip saw meteors",
};

} // namespace

// ---- PCA --------------------------------------------------------------------

TEST_CASE("PCA picks the dominant axis") {
    Matrix x(4, 2);
    x << 1, 0, -1, 0, 0, 0.1, 0, -0.1;
    const auto r = fit_pca(x, 0.9);
    REQUIRE(r.model.components.rows() == 1);
    CHECK(std::abs(r.model.components(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(r.model.components(0, 1)) == doctest::Approx(0.0));
    CHECK(r.reduced.rows() == 4);
    CHECK(r.reduced.cols() == 1);
}

TEST_CASE("PCA explained variance matches an independent Jacobi eigensolver") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto rows = testkit::random_matrix(10, 5, seed);
        const auto r = fit_pca(testkit::to_eigen(rows), 1.0);
        const auto ev = testkit::jacobi_eigenvalues(testkit::sample_covariance(rows));
        REQUIRE(r.model.explained_variance.size() == 5);
        double total = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(std::abs(r.model.explained_variance(static_cast<Eigen::Index>(i)) - ev[i]) <= 1e-6 * std::abs(ev[i]));
            total += ev[i];
        }
        CHECK(r.model.total_variance == doctest::Approx(total).epsilon(1e-9));
        CHECK(orthonormality_error(r.model.components) <= 1e-8);
        for (Eigen::Index i = 1; i < r.model.explained_variance.size(); ++i)
            CHECK(r.model.explained_variance(i) <= r.model.explained_variance(i - 1));
    }
}

TEST_CASE("PCA with every component reconstructs the centered data") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 3 + rng() % 20, d = 2 + rng() % 8;
        const auto x = testkit::to_eigen(testkit::random_matrix(n, d, 50 + static_cast<std::uint64_t>(trial)));
        const auto r = fit_pca(x, 1.0);
        const Matrix centered = x.rowwise() - x.colwise().mean();
        const Matrix back = pca_reconstruct(r.model, r.reduced);
        CHECK((back - centered).norm() <= 1e-6 * centered.norm());
        CHECK((pca_project(r.model, x) - r.reduced).cwiseAbs().maxCoeff() <= 1e-9);
        CHECK(orthonormality_error(r.model.components) <= 1e-8);
    }
}

TEST_CASE("PCA keeps the smallest sufficient number of components") {
    const auto rows = testkit::random_matrix(30, 6, 8);
    const auto ev = testkit::jacobi_eigenvalues(testkit::sample_covariance(rows));
    double total = 0.0;
    for (double v : ev) total += v;
    for (double target : {0.3, 0.5, 0.8, 0.95, 0.999}) {
        std::size_t p = 0;
        double acc = 0.0;
        while (acc / total < target) acc += ev[p++];
        CHECK(static_cast<std::size_t>(fit_pca(testkit::to_eigen(rows), target).model.components.rows()) == p);
    }
}

TEST_CASE("PCA degenerate inputs") {
    CHECK(error_code_of([] { fit_pca(Matrix::Ones(1, 4), 0.9); }) == ErrorCode::DegenerateInput);
    CHECK(error_code_of([] { fit_pca(Matrix::Ones(5, 4), 0.9); }) == ErrorCode::DegenerateInput);
}

// ---- manifold ---------------------------------------------------------------

TEST_CASE("manifold falls back to leading coordinates for tiny inputs") {
    Matrix x(3, 2);
    x << 1, 2, 3, 4, 5, 7;
    ManifoldParams p;
    p.n_neighbors = 10;
    p.n_components = 5;
    const auto y = manifold_embed(x, p);
    REQUIRE(y.rows() == 3);
    REQUIRE(y.cols() == 5);
    CHECK(y.leftCols(2) == x);
    CHECK(y.rightCols(3).isZero());
}

TEST_CASE("smoothed distances hit the log2(k) target") {
    const auto pts = testkit::to_eigen(testkit::random_matrix(40, 4, 2));
    for (int nn : {3, 5, 10}) {
        const auto knn = exact_knn(pts, nn - 1);
        const auto sm = smooth_knn_distances(knn, nn);
        for (std::size_t i = 0; i < knn.indices.size(); ++i) {
            CHECK(knn.indices[i].size() == static_cast<std::size_t>(nn - 1));
            CHECK(sm.rho[i] == knn.distances[i][0]);
            double sum = 0.0;
            for (double d : knn.distances[i]) sum += std::exp(-std::max(0.0, d - sm.rho[i]) / sm.sigma[i]);
            CHECK(sum == doctest::Approx(std::log2(nn)).epsilon(1e-3));
        }
    }
}

TEST_CASE("exact kNN agrees with a scan") {
    const auto rows = testkit::random_matrix(25, 3, 12);
    const auto knn = exact_knn(testkit::to_eigen(rows), 4);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<std::pair<double, int>> d;
        for (std::size_t j = 0; j < rows.size(); ++j)
            if (j != i) d.emplace_back(testkit::euclidean(rows[i], rows[j]), static_cast<int>(j));
        std::sort(d.begin(), d.end());
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(knn.indices[i][k] == d[k].second);
            CHECK(knn.distances[i][k] == doctest::Approx(d[k].first));
        }
    }
}

TEST_CASE("fuzzy graph is a symmetric union") {
    const auto pts = testkit::to_eigen(testkit::random_matrix(30, 3, 6));
    const auto knn = exact_knn(pts, 5);
    const auto edges = fuzzy_graph(knn, smooth_knn_distances(knn, 6));
    std::map<std::pair<int, int>, double> w;
    for (const auto& e : edges) {
        CHECK(e.head != e.tail);
        CHECK(e.weight > 0.0);
        CHECK(e.weight <= 1.0 + 1e-12);
        w[{e.head, e.tail}] = e.weight;
    }
    for (const auto& [k, v] : w) CHECK(w.at({k.second, k.first}) == v);
}

TEST_CASE("manifold layout separates topical blobs and is deterministic") {
    const auto planted = testkit::planted_topics(2, 30, 3);
    const auto reduced = fit_pca(planted.vectors.rows, 0.95).reduced;
    ManifoldParams p;
    p.n_neighbors = 10;
    p.seed = 17;
    const auto y = manifold_embed(reduced, p);
    CHECK(y.cols() == 5);
    double intra = 0, inter = 0;
    long ni = 0, nx = 0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < y.rows(); ++j) {
            const double d = (y.row(i) - y.row(j)).norm();
            if (planted.truth[static_cast<std::size_t>(i)] == planted.truth[static_cast<std::size_t>(j)]) {
                intra += d;
                ++ni;
            } else {
                inter += d;
                ++nx;
            }
        }
    }
    CHECK(intra / static_cast<double>(ni) < inter / static_cast<double>(nx));
    CHECK(bytes_equal(y, manifold_embed(reduced, p)));
    CHECK(y.allFinite());
}

// ---- density clustering -----------------------------------------------------

TEST_CASE("mutual reachability is symmetric and dominates distance") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto rows = testkit::random_matrix(20, 3, seed);
        const auto y = testkit::to_eigen(rows);
        const int ms = 1 + static_cast<int>(seed % 6);
        const auto core = core_distances(y, ms);
        const auto oracle = testkit::mutual_reachability_matrix(rows, ms);
        for (int i = 0; i < 20; ++i) {
            for (int j = 0; j < 20; ++j) {
                if (i == j) continue;
                const double mr = mutual_reachability(y, core, i, j);
                CHECK(mr == mutual_reachability(y, core, j, i));
                CHECK(mr >= (y.row(i) - y.row(j)).norm());
                CHECK(mr == doctest::Approx(oracle[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]));
            }
        }
    }
}

TEST_CASE("MST weight equals the exhaustive spanning-tree minimum") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 6);
        testkit::DenseMatrix pts(static_cast<std::size_t>(n), std::vector<double>(2));
        for (auto& p : pts)
            for (auto& v : p) v = static_cast<double>(rng() % 10);
        const int ms = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
        const auto mr = testkit::mutual_reachability_matrix(pts, ms);
        const double best = testkit::exhaustive_mst_weight(
            n, [&](int a, int b) { return mr[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]; });
        auto mst = mutual_reachability_mst(testkit::to_eigen(pts), ms);
        REQUIRE(mst.size() == static_cast<std::size_t>(n - 1));
        std::vector<double> w;
        for (const auto& e : mst) w.push_back(e.weight);
        std::sort(w.begin(), w.end());
        double total = 0.0;
        for (double x : w) total += x;
        CHECK(total == best);
    }
}

TEST_CASE("single linkage merges everything once") {
    const auto y = testkit::to_eigen(testkit::random_matrix(15, 2, 31));
    const auto link = single_linkage(mutual_reachability_mst(y, 3), 15);
    REQUIRE(link.size() == 14);
    CHECK(link.back().size == 15);
    for (std::size_t i = 1; i < link.size(); ++i) CHECK(link[i - 1].distance <= link[i].distance);
    std::set<int> used;
    for (const auto& r : link) {
        CHECK(used.insert(r.left).second);
        CHECK(used.insert(r.right).second);
    }
}

TEST_CASE("two 1-D blobs") {
    const auto y = column({0, 0.1, 0.2, 10, 10.1, 10.2});
    const auto a = density_cluster(y, {2, 2});
    CHECK(a.n_clusters == 2);
    CHECK(a.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
    const auto r = knn_reassign(y, a, 3);
    CHECK(r.assignment == a);
    CHECK_FALSE(r.all_noise);
}

TEST_CASE("density clustering boundaries") {
    const auto one = density_cluster(column({4.2}), {2, 2});
    CHECK(one.labels == std::vector<int>{-1});
    CHECK(one.n_clusters == 0);

    const auto same = density_cluster(Matrix::Constant(7, 3, 1.5), {3, 3});
    CHECK(same.n_clusters == 1);
    CHECK(same.labels == std::vector<int>(7, 0));

    const auto small = density_cluster(column({0, 1, 2}), {5, 5});
    CHECK(small.labels == std::vector<int>(3, -1));
}

TEST_CASE("density clustering finds planted 2-D blobs") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 0.3);
    Matrix y(60, 2);
    std::vector<int> truth;
    const double cx[3] = {0, 8, 0}, cy[3] = {0, 0, 8};
    for (int i = 0; i < 60; ++i) {
        y(i, 0) = cx[i / 20] + g(rng);
        y(i, 1) = cy[i / 20] + g(rng);
        truth.push_back(i / 20);
    }
    const auto a = density_cluster(y, {5, 5});
    check_dense(a);
    const auto r = knn_reassign(y, a, 3);
    CHECK(r.assignment.n_clusters == 3);
    CHECK(testkit::adjusted_rand_index(r.assignment.labels, truth) == doctest::Approx(1.0));
}

TEST_CASE("knn reassignment") {
    SUBCASE("noise joins the cluster of its neighbours") {
        const auto y = column({0, 0.1, 0.2, 10, 10.1, 10.2, 0.3});
        ClusterAssignment a{{0, 0, 0, 1, 1, 1, -1}, 2};
        const auto r = knn_reassign(y, a, 3);
        CHECK(r.assignment.labels[6] == 0);
    }
    SUBCASE("all noise passes through with a flag") {
        const auto y = column({0, 1, 2});
        ClusterAssignment a{{-1, -1, -1}, 0};
        const auto r = knn_reassign(y, a, 3);
        CHECK(r.all_noise);
        CHECK(r.assignment == a);
    }
    SUBCASE("equidistant noise takes the smaller cluster id") {
        const auto y = column({0, 1, 5.5, 10, 11});
        CHECK(knn_reassign(y, {{1, 1, -1, 0, 0}, 2}, 2).assignment.labels[2] == 0);
        CHECK(knn_reassign(y, {{0, 0, -1, 1, 1}, 2}, 2).assignment.labels[2] == 0);
        CHECK(knn_reassign(y, {{0, 0, -1, 1, 1}, 2}, 4).assignment.labels[2] == 0);
    }
    SUBCASE("no noise remains and ids stay dense") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            const auto y = testkit::to_eigen(testkit::random_matrix(30, 2, 200 + static_cast<std::uint64_t>(trial)));
            ClusterAssignment a;
            a.n_clusters = 3;
            for (int i = 0; i < 30; ++i) a.labels.push_back(i < 3 ? i : static_cast<int>(rng() % 4) - 1);
            const auto r = knn_reassign(y, a, 3);
            for (int l : r.assignment.labels) CHECK(l >= 0);
            check_dense(r.assignment);
            for (int i = 0; i < 30; ++i)
                if (a.labels[static_cast<std::size_t>(i)] >= 0)
                    CHECK(r.assignment.labels[static_cast<std::size_t>(i)] == a.labels[static_cast<std::size_t>(i)]);
        }
    }
}

// ---- pipeline -----------------------------------------------------------------

TEST_CASE("published thresholds") {
    CHECK(topic_params().n_neighbors == 10);
    CHECK(topic_params().min_cluster_size == 5);
    CHECK(thread_params().n_neighbors == 2);
    CHECK(thread_params().min_cluster_size == 2);
}

TEST_CASE("topic clustering recovers planted topics") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto p = testkit::planted_topics(3, 20, seed);
        const auto topics = cluster_topics(p.traces, p.vectors, topic_params(seed));
        std::vector<int> labels(p.traces.size(), -1);
        std::set<std::string> seen;
        for (const auto& t : topics) {
            for (const auto& id : t.trace_ids) {
                CHECK(seen.insert(id).second);
                labels[static_cast<std::size_t>(std::stoi(id.substr(1)))] = t.topic_id;
            }
        }
        CHECK(seen.size() == p.traces.size());
        CHECK(testkit::adjusted_rand_index(labels, p.truth) >= 0.9);
        CHECK(cluster_topics(p.traces, p.vectors, topic_params(seed)) == topics);
    }
}

TEST_CASE("small topic inputs fall back to one cluster") {
    const auto p = testkit::planted_topics(2, 2, 1);
    const auto topics = cluster_topics(p.traces, p.vectors);
    REQUIRE(topics.size() == 1);
    CHECK(topics[0].trace_ids.size() == 4);
    CHECK(cluster_topics({}, p.vectors).empty());

    const auto r = cluster_rows(Matrix::Constant(12, 4, 0.5), topic_params());
    CHECK(r.fallback);
    CHECK(r.n_clusters == 1);
}

TEST_CASE("threads split star-shaped sub-stories") {
    int exact = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto p = testkit::traces_from_texts(kStories, {0, 1, 0, 1, 0, 1, 0, 1});
        TopicCluster topic{0, {}};
        for (const auto& t : p.traces) topic.trace_ids.push_back(t.trace_id);
        const auto threads = cluster_threads(topic, p.traces, p.vectors, "c:Melanie:", thread_params(seed));
        std::vector<int> labels(8, -1);
        std::set<std::string> seen;
        for (std::size_t j = 0; j < threads.size(); ++j) {
            const auto& th = threads[j];
            CHECK(th.thread_id == "c:Melanie:T0." + std::to_string(j));
            CHECK(th.topic_id == 0);
            for (std::size_t k = 0; k < th.trace_ids.size(); ++k) {
                const auto i = static_cast<std::size_t>(std::stoi(th.trace_ids[k].substr(1)));
                labels[i] = static_cast<int>(j);
                CHECK(seen.insert(th.trace_ids[k]).second);
                if (k > 0) CHECK(std::stoi(th.trace_ids[k - 1].substr(1)) < std::stoi(th.trace_ids[k].substr(1)));
            }
            CHECK(th.start == p.traces[static_cast<std::size_t>(std::stoi(th.trace_ids.front().substr(1)))].timestamp);
            CHECK(th.end == p.traces[static_cast<std::size_t>(std::stoi(th.trace_ids.back().substr(1)))].timestamp);
            if (j > 0) CHECK(threads[j - 1].start <= th.start);
        }
        CHECK(seen.size() == 8);
        if (threads.size() == 2 && testkit::adjusted_rand_index(labels, {0, 1, 0, 1, 0, 1, 0, 1}) == 1.0) ++exact;
    }
    CHECK(exact == 10);
}

TEST_CASE("a single-trace topic is one singleton thread") {
    const auto p = testkit::traces_from_texts({"Melanie went hiking"}, {0});
    const auto threads = cluster_threads(TopicCluster{3, {"x0"}}, p.traces, p.vectors, "c:Melanie:");
    REQUIRE(threads.size() == 1);
    CHECK(threads[0].thread_id == "c:Melanie:T3.0");
    CHECK(threads[0].trace_ids == std::vector<std::string>{"x0"});
}

TEST_CASE("pipeline outputs partition traces and are deterministic") {
    const auto p = testkit::planted_topics(4, 15, 12);
    const auto topics = cluster_topics(p.traces, p.vectors, topic_params(7));
    std::set<std::string> all;
    for (const auto& t : topics) {
        CHECK_FALSE(t.trace_ids.empty());
        const auto threads = cluster_threads(t, p.traces, p.vectors, "c:M:", thread_params(7));
        CHECK(threads == cluster_threads(t, p.traces, p.vectors, "c:M:", thread_params(7)));
        std::multiset<std::string> in_threads;
        for (const auto& th : threads) in_threads.insert(th.trace_ids.begin(), th.trace_ids.end());
        CHECK(in_threads == std::multiset<std::string>(t.trace_ids.begin(), t.trace_ids.end()));
        all.insert(t.trace_ids.begin(), t.trace_ids.end());
    }
    CHECK(all.size() == p.traces.size());
}
