#include "nmem/cluster.hpp"

#include "nmem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace nmem::cluster {

namespace {

double row_distance(const Matrix& X, Eigen::Index i, Eigen::Index j) { return (X.row(i) - X.row(j)).norm(); }

double clip(double v) { return std::clamp(v, -4.0, 4.0); }

} // namespace

KnnGraph exact_knn(const Matrix& X, int k) {
    const int n = static_cast<int>(X.rows());
    KnnGraph g;
    g.indices.resize(static_cast<std::size_t>(n));
    g.distances.resize(static_cast<std::size_t>(n));
    const int take = std::clamp(k, 0, std::max(0, n - 1));
    std::vector<std::pair<double, int>> cand;
    for (int i = 0; i < n; ++i) {
        cand.clear();
        for (int j = 0; j < n; ++j) {
            if (j != i) cand.emplace_back(row_distance(X, i, j), j);
        }
        std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
        for (int r = 0; r < take; ++r) {
            g.indices[static_cast<std::size_t>(i)].push_back(cand[static_cast<std::size_t>(r)].second);
            g.distances[static_cast<std::size_t>(i)].push_back(cand[static_cast<std::size_t>(r)].first);
        }
    }
    return g;
}

SmoothDistances smooth_knn_distances(const KnnGraph& knn, int n_neighbors) {
    const std::size_t n = knn.distances.size();
    const double target = std::log2(static_cast<double>(std::max(2, n_neighbors)));
    SmoothDistances out;
    out.rho.assign(n, 0.0);
    out.sigma.assign(n, 1.0);

    double global_sum = 0.0;
    std::size_t global_count = 0;
    for (const auto& row : knn.distances) {
        for (double d : row) global_sum += d;
        global_count += row.size();
    }
    const double global_mean = global_count ? global_sum / static_cast<double>(global_count) : 0.0;

    for (std::size_t i = 0; i < n; ++i) {
        const auto& dists = knn.distances[i];
        for (double d : dists) {
            if (d > 0.0) {
                out.rho[i] = d;
                break;
            }
        }
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        double mid = 1.0;
        for (int iter = 0; iter < 64; ++iter) {
            double psum = 0.0;
            for (double d : dists) {
                const double gap = d - out.rho[i];
                psum += gap > 0.0 ? std::exp(-gap / mid) : 1.0;
            }
            if (std::fabs(psum - target) < 1e-5) break;
            if (psum > target) {
                hi = mid;
                mid = (lo + hi) / 2.0;
            } else {
                lo = mid;
                mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
            }
        }
        double mean_i = 0.0;
        for (double d : dists) mean_i += d;
        if (!dists.empty()) mean_i /= static_cast<double>(dists.size());
        const double floor = 1e-3 * (out.rho[i] > 0.0 ? mean_i : global_mean);
        out.sigma[i] = std::max(mid, floor);
    }
    return out;
}

std::vector<WeightedEdge> fuzzy_graph(const KnnGraph& knn, const SmoothDistances& smooth) {
    std::map<std::pair<int, int>, double> directed;
    for (std::size_t i = 0; i < knn.indices.size(); ++i) {
        for (std::size_t r = 0; r < knn.indices[i].size(); ++r) {
            const int j = knn.indices[i][r];
            const double gap = knn.distances[i][r] - smooth.rho[i];
            const double w = (gap <= 0.0 || smooth.sigma[i] == 0.0) ? 1.0 : std::exp(-gap / smooth.sigma[i]);
            directed[{static_cast<int>(i), j}] = w;
        }
    }
    std::map<std::pair<int, int>, double> merged;
    for (const auto& [key, w] : directed) {
        const auto rev = directed.find({key.second, key.first});
        const double other = rev == directed.end() ? 0.0 : rev->second;
        const double combined = w + other - w * other;
        merged[key] = combined;
        merged[{key.second, key.first}] = combined;
    }
    std::vector<WeightedEdge> edges;
    for (const auto& [key, w] : merged) {
        if (w > 0.0) edges.push_back({key.first, key.second, w});
    }
    return edges;
}

Matrix manifold_embed(const Matrix& X, const ManifoldParams& params) {
    const int n = static_cast<int>(X.rows());
    const int dim = params.n_components;
    if (n < 2) fail(ErrorCode::DegenerateInput, "manifold layout needs at least two points");
    if (dim < 1) fail(ErrorCode::InvariantViolation, "n_components must be positive");

    Matrix Y = Matrix::Zero(n, dim);
    const Eigen::Index copy_cols = std::min<Eigen::Index>(dim, X.cols());
    if (n <= params.n_neighbors) {
        Y.leftCols(copy_cols) = X.leftCols(copy_cols);
        return Y;
    }

    std::mt19937_64 rng(params.seed);
    auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

    // Initial positions: leading input coordinates rescaled to [0, 10] per axis.
    Y.leftCols(copy_cols) = X.leftCols(copy_cols);
    for (int c = 0; c < dim; ++c) {
        const double lo = Y.col(c).minCoeff();
        const double hi = Y.col(c).maxCoeff();
        for (int i = 0; i < n; ++i) {
            const double base = hi > lo ? 10.0 * (Y(i, c) - lo) / (hi - lo) : 0.0;
            Y(i, c) = base + 1e-4 * (uniform() - 0.5);
        }
    }

    const auto knn = exact_knn(X, params.n_neighbors - 1);
    const auto smooth = smooth_knn_distances(knn, params.n_neighbors);
    auto edges = fuzzy_graph(knn, smooth);
    if (edges.empty()) return Y;

    double max_w = 0.0;
    for (const auto& e : edges) max_w = std::max(max_w, e.weight);
    const double epochs = static_cast<double>(params.n_epochs);
    std::erase_if(edges, [&](const WeightedEdge& e) { return e.weight < max_w / epochs; });

    const std::size_t m = edges.size();
    std::vector<double> per_sample(m), next_sample(m), per_negative(m), next_negative(m);
    for (std::size_t e = 0; e < m; ++e) {
        per_sample[e] = max_w / edges[e].weight;
        next_sample[e] = per_sample[e];
        per_negative[e] = per_sample[e] / params.negative_sample_rate;
        next_negative[e] = per_negative[e];
    }

    const double a = params.a;
    const double b = params.b;
    for (int epoch = 0; epoch < params.n_epochs; ++epoch) {
        const double alpha = 1.0 - static_cast<double>(epoch) / epochs;
        for (std::size_t e = 0; e < m; ++e) {
            if (next_sample[e] > epoch) continue;
            const int head = edges[e].head;
            const int tail = edges[e].tail;
            double dist2 = (Y.row(head) - Y.row(tail)).squaredNorm();
            double coeff = 0.0;
            if (dist2 > 0.0) coeff = -2.0 * a * b * std::pow(dist2, b - 1.0) / (a * std::pow(dist2, b) + 1.0);
            for (int c = 0; c < dim; ++c) {
                const double g = clip(coeff * (Y(head, c) - Y(tail, c)));
                Y(head, c) += g * alpha;
                Y(tail, c) -= g * alpha;
            }
            next_sample[e] += per_sample[e];

            const int n_neg = std::max(0, static_cast<int>((epoch - next_negative[e]) / per_negative[e]));
            for (int p = 0; p < n_neg; ++p) {
                const int other = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
                if (other == head) continue;
                dist2 = (Y.row(head) - Y.row(other)).squaredNorm();
                if (dist2 > 0.0) {
                    coeff = 2.0 * b / ((0.001 + dist2) * (a * std::pow(dist2, b) + 1.0));
                    for (int c = 0; c < dim; ++c) Y(head, c) += clip(coeff * (Y(head, c) - Y(other, c))) * alpha;
                } else {
                    for (int c = 0; c < dim; ++c) Y(head, c) += 4.0 * alpha;
                }
            }
            next_negative[e] += n_neg * per_negative[e];
        }
    }
    return Y;
}

} // namespace nmem::cluster
