#include "nmem/cluster.hpp"

#include "nmem/errors.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace nmem::cluster {

std::vector<double> core_distances(const Matrix& Y, int min_samples) {
    const int n = static_cast<int>(Y.rows());
    std::vector<double> core(static_cast<std::size_t>(n), 0.0);
    if (n == 0) return core;
    // Position min_samples - 1 in the sorted list that includes the point itself (distance 0).
    const int rank = std::clamp(min_samples - 1, 0, n - 1);
    std::vector<double> d(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) d[static_cast<std::size_t>(j)] = (Y.row(i) - Y.row(j)).norm();
        std::nth_element(d.begin(), d.begin() + rank, d.end());
        core[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(rank)];
    }
    return core;
}

double mutual_reachability(const Matrix& Y, const std::vector<double>& core, int i, int j) {
    const double d = (Y.row(i) - Y.row(j)).norm();
    return std::max({core[static_cast<std::size_t>(i)], core[static_cast<std::size_t>(j)], d});
}

std::vector<MstEdge> mutual_reachability_mst(const Matrix& Y, int min_samples) {
    const int n = static_cast<int>(Y.rows());
    std::vector<MstEdge> mst;
    if (n < 2) return mst;
    const auto core = core_distances(Y, min_samples);

    std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
    std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<int> link(static_cast<std::size_t>(n), -1);
    int current = 0;
    in_tree[0] = true;
    for (int added = 1; added < n; ++added) {
        int next = -1;
        for (int j = 0; j < n; ++j) {
            if (in_tree[static_cast<std::size_t>(j)]) continue;
            const double w = mutual_reachability(Y, core, current, j);
            if (w < best[static_cast<std::size_t>(j)]) {
                best[static_cast<std::size_t>(j)] = w;
                link[static_cast<std::size_t>(j)] = current;
            }
            if (next < 0 || best[static_cast<std::size_t>(j)] < best[static_cast<std::size_t>(next)]) next = j;
        }
        in_tree[static_cast<std::size_t>(next)] = true;
        mst.push_back({link[static_cast<std::size_t>(next)], next, best[static_cast<std::size_t>(next)]});
        current = next;
    }
    return mst;
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    std::vector<int> size;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)), size(static_cast<std::size_t>(n), 1) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
};

double lambda_of(double distance) { return 1.0 / std::max(distance, 1e-12); }

} // namespace

std::vector<LinkageRow> single_linkage(std::vector<MstEdge> mst, int n) {
    std::stable_sort(mst.begin(), mst.end(), [](const MstEdge& x, const MstEdge& y) { return x.weight < y.weight; });
    // Union-find over points; each root remembers which dendrogram node it currently is.
    UnionFind uf(n);
    std::vector<int> node_of(static_cast<std::size_t>(n));
    std::iota(node_of.begin(), node_of.end(), 0);
    std::vector<LinkageRow> rows;
    for (const auto& e : mst) {
        const int ra = uf.find(e.a);
        const int rb = uf.find(e.b);
        if (ra == rb) continue;
        LinkageRow row;
        row.left = node_of[static_cast<std::size_t>(ra)];
        row.right = node_of[static_cast<std::size_t>(rb)];
        row.distance = e.weight;
        row.size = uf.size[static_cast<std::size_t>(ra)] + uf.size[static_cast<std::size_t>(rb)];
        uf.parent[static_cast<std::size_t>(rb)] = ra;
        uf.size[static_cast<std::size_t>(ra)] = row.size;
        node_of[static_cast<std::size_t>(ra)] = n + static_cast<int>(rows.size());
        rows.push_back(row);
    }
    return rows;
}

std::vector<CondensedRow> condense_tree(const std::vector<LinkageRow>& linkage, int n, int min_cluster_size) {
    std::vector<CondensedRow> out;
    if (linkage.empty()) return out;
    const int root = n + static_cast<int>(linkage.size()) - 1;

    auto size_of = [&](int node) { return node < n ? 1 : linkage[static_cast<std::size_t>(node - n)].size; };
    auto leaves = [&](int node) {
        std::vector<int> pts;
        std::vector<int> stack{node};
        while (!stack.empty()) {
            const int x = stack.back();
            stack.pop_back();
            if (x < n) {
                pts.push_back(x);
            } else {
                stack.push_back(linkage[static_cast<std::size_t>(x - n)].right);
                stack.push_back(linkage[static_cast<std::size_t>(x - n)].left);
            }
        }
        return pts;
    };

    std::map<int, int> relabel;
    relabel[root] = n;
    int next_label = n + 1;
    std::deque<int> queue{root};
    while (!queue.empty()) {
        const int node = queue.front();
        queue.pop_front();
        if (node < n) continue;
        const auto& row = linkage[static_cast<std::size_t>(node - n)];
        const double lambda = lambda_of(row.distance);
        const int parent = relabel.at(node);
        const int left_size = size_of(row.left);
        const int right_size = size_of(row.right);
        const bool left_big = left_size >= min_cluster_size;
        const bool right_big = right_size >= min_cluster_size;

        auto fall_out = [&](int child) {
            for (int p : leaves(child)) out.push_back({parent, p, lambda, 1});
        };
        if (left_big && right_big) {
            for (int child : {row.left, row.right}) {
                relabel[child] = next_label++;
                out.push_back({parent, relabel[child], lambda, size_of(child)});
                queue.push_back(child);
            }
        } else if (!left_big && !right_big) {
            fall_out(row.left);
            fall_out(row.right);
        } else if (!left_big) {
            fall_out(row.left);
            relabel[row.right] = parent;
            queue.push_back(row.right);
        } else {
            fall_out(row.right);
            relabel[row.left] = parent;
            queue.push_back(row.left);
        }
    }
    return out;
}

ClusterAssignment density_cluster(const Matrix& Y, const DensityParams& params) {
    const int n = static_cast<int>(Y.rows());
    if (params.min_cluster_size < 2) fail(ErrorCode::InvariantViolation, "min_cluster_size must be at least 2");
    ClusterAssignment result;
    result.labels.assign(static_cast<std::size_t>(n), -1);
    if (n < params.min_cluster_size || n < 2) return result;

    const auto linkage = single_linkage(mutual_reachability_mst(Y, params.min_samples), n);
    const auto tree = condense_tree(linkage, n, params.min_cluster_size);
    const int root = n;

    std::map<int, double> birth{{root, 0.0}};
    std::map<int, int> cluster_parent;
    std::map<int, std::vector<int>> child_clusters;
    for (const auto& r : tree) {
        if (r.child >= n) {
            birth[r.child] = r.lambda;
            cluster_parent[r.child] = r.parent;
            child_clusters[r.parent].push_back(r.child);
        }
    }
    std::map<int, double> stability;
    for (const auto& [c, _] : birth) stability[c] = 0.0;
    for (const auto& r : tree) stability[r.parent] += (r.lambda - birth[r.parent]) * r.child_size;

    std::set<int> selected;
    if (birth.size() == 1) {
        // Root never split: one cluster holding everything.
        selected.insert(root);
    } else {
        std::map<int, bool> is_cluster;
        for (const auto& [c, _] : birth) is_cluster[c] = c != root;
        std::function<void(int)> deselect_below = [&](int c) {
            for (int ch : child_clusters[c]) {
                is_cluster[ch] = false;
                deselect_below(ch);
            }
        };
        for (auto it = birth.rbegin(); it != birth.rend(); ++it) {
            const int c = it->first;
            if (c == root) continue;
            double children = 0.0;
            for (int ch : child_clusters[c]) children += stability[ch];
            if (!child_clusters[c].empty() && children > stability[c]) {
                is_cluster[c] = false;
                stability[c] = children;
            } else {
                deselect_below(c);
            }
        }
        for (const auto& [c, keep] : is_cluster) {
            if (keep) selected.insert(c);
        }
    }

    std::vector<int> raw(static_cast<std::size_t>(n), -1);
    for (const auto& r : tree) {
        if (r.child >= n) continue;
        int c = r.parent;
        while (!selected.count(c) && c != root) c = cluster_parent.at(c);
        if (selected.count(c)) raw[static_cast<std::size_t>(r.child)] = c;
    }
    if (selected.count(root)) std::fill(raw.begin(), raw.end(), root);

    // Dense ids in order of each cluster's first member.
    std::map<int, int> dense;
    for (int i = 0; i < n; ++i) {
        const int c = raw[static_cast<std::size_t>(i)];
        if (c < 0) continue;
        auto [it, inserted] = dense.emplace(c, static_cast<int>(dense.size()));
        result.labels[static_cast<std::size_t>(i)] = it->second;
    }
    result.n_clusters = static_cast<int>(dense.size());
    return result;
}

} // namespace nmem::cluster
