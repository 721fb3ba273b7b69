#include "nmem/cluster.hpp"

#include "nmem/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>

namespace nmem::cluster {

std::optional<Eigen::Index> EmbeddingMatrix::find(const std::string& id) const {
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
        if (row_ids[i] == id) return static_cast<Eigen::Index>(i);
    }
    return std::nullopt;
}

PCAResult fit_pca(const Matrix& X, double variance_target) {
    const auto n = X.rows();
    const auto d = X.cols();
    if (n < 2) fail(ErrorCode::DegenerateInput, "PCA needs at least two points");
    if (d < 1) fail(ErrorCode::DegenerateInput, "PCA needs at least one dimension");

    PCAResult out;
    out.model.mean = X.colwise().mean().transpose();
    const Matrix centered = X.rowwise() - out.model.mean.transpose();
    const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    if (solver.info() != Eigen::Success) fail(ErrorCode::DegenerateInput, "eigendecomposition failed");

    // Eigen returns ascending eigenvalues.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    const Vector& values = solver.eigenvalues();
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values(a) > values(b); });

    std::vector<double> sorted;
    for (auto k : order) sorted.push_back(std::max(0.0, values(k)));
    const double total = std::accumulate(sorted.begin(), sorted.end(), 0.0);
    if (!(total > 1e-300)) fail(ErrorCode::DegenerateInput, "data has zero variance");
    out.model.total_variance = total;

    const double target = std::clamp(variance_target, 0.0, 1.0);
    Eigen::Index keep = 0;
    double cumulative = 0.0;
    while (keep < d) {
        cumulative += sorted[static_cast<std::size_t>(keep)];
        ++keep;
        if (cumulative / total >= target - 1e-12) break;
    }

    out.model.components.resize(keep, d);
    out.model.explained_variance.resize(keep);
    for (Eigen::Index r = 0; r < keep; ++r) {
        Vector v = solver.eigenvectors().col(order[static_cast<std::size_t>(r)]);
        // Sign convention: largest-magnitude coordinate is positive.
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        out.model.components.row(r) = v.transpose();
        out.model.explained_variance(r) = sorted[static_cast<std::size_t>(r)];
    }
    out.reduced = centered * out.model.components.transpose();
    return out;
}

Matrix pca_project(const PCAModel& model, const Matrix& X) {
    if (X.cols() != model.mean.size()) fail(ErrorCode::DimensionMismatch, "PCA input has wrong dimension");
    return (X.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Matrix pca_reconstruct(const PCAModel& model, const Matrix& reduced) {
    if (reduced.cols() != model.components.rows()) fail(ErrorCode::DimensionMismatch, "reduced data has wrong width");
    return reduced * model.components;
}

} // namespace nmem::cluster
