#include "nmem/cluster.hpp"

#include "nmem/errors.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace nmem::cluster {

ReassignResult knn_reassign(const Matrix& Y, const ClusterAssignment& labels, int k_vote) {
    const int n = static_cast<int>(Y.rows());
    if (static_cast<int>(labels.labels.size()) != n) {
        fail(ErrorCode::DimensionMismatch, "label count does not match point count");
    }
    if (k_vote < 1) fail(ErrorCode::InvariantViolation, "k_vote must be positive");

    ReassignResult out;
    out.assignment = labels;
    std::vector<int> anchors;
    for (int i = 0; i < n; ++i) {
        if (labels.labels[static_cast<std::size_t>(i)] >= 0) anchors.push_back(i);
    }
    if (anchors.empty()) {
        out.all_noise = n > 0;
        return out;
    }

    std::vector<std::tuple<double, int, int>> cand;  // (distance, label, index)
    for (int i = 0; i < n; ++i) {
        if (labels.labels[static_cast<std::size_t>(i)] >= 0) continue;
        cand.clear();
        for (int j : anchors) cand.emplace_back((Y.row(i) - Y.row(j)).norm(), labels.labels[static_cast<std::size_t>(j)], j);
        const auto take = std::min<std::size_t>(static_cast<std::size_t>(k_vote), cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());

        std::map<int, double> votes;
        for (std::size_t r = 0; r < take; ++r) {
            const auto [d, label, _] = cand[r];
            votes[label] += 1.0 / std::max(d, 1e-12);
        }
        const int nearest = std::get<1>(cand.front());
        int winner = nearest;
        double best = votes[nearest];
        for (const auto& [label, weight] : votes) {
            if (weight > best * (1.0 + 1e-12)) {
                winner = label;
                best = weight;
            }
        }
        out.assignment.labels[static_cast<std::size_t>(i)] = winner;
    }
    return out;
}

} // namespace nmem::cluster
