#pragma once

#include "common.hpp"
#include "dbscan.hpp"

#include <numeric>
#include <optional>

namespace sweepscope {

struct MstEdge {
    std::size_t a = 0;
    std::size_t b = 0;
    double weight = 0.0;
};

/// One row of the condensed tree. Children below n_points are items, others clusters.
struct CondensedNode {
    std::size_t parent = 0;
    std::size_t child = 0;
    double lambda = 0.0;
    std::size_t child_size = 0;
};

struct HdbscanModel {
    int min_cluster_size = 2;
    int min_samples = 2;
    std::size_t n_points = 0;
    Labels labels;
    std::vector<double> probabilities;
    std::vector<double> glosh;
    std::vector<double> core_distances;
    std::vector<MstEdge> mst;
    std::vector<CondensedNode> condensed_tree;
    std::vector<std::size_t> cluster_nodes;  // condensed node id per output label
    std::vector<double> stabilities;         // per output label
    int n_clusters = 0;
    std::vector<std::size_t> medoids;
    std::optional<std::size_t> noise_medoid;

    double mst_weight() const
    {
        double w = 0.0;
        for (const auto& e : mst)
            w += e.weight;
        return w;
    }
};

namespace detail {

// Zero distances (duplicate points) would give infinite density levels.
inline constexpr double kMaxLambda = 1e12;

inline double to_lambda(double distance)
{
    return distance > 0.0 ? std::min(1.0 / distance, kMaxLambda) : kMaxLambda;
}

struct LinkageRow {
    std::size_t left = 0;
    std::size_t right = 0;
    double distance = 0.0;
    std::size_t size = 0;
};

}  // namespace detail

/// Distance to the min_samples-th nearest neighbor, counting the point itself.
inline std::vector<double> core_distances(const Matrix& dist, int min_samples)
{
    const auto n = static_cast<std::size_t>(dist.rows());
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(min_samples, 1)), n);
    std::vector<double> out(n, 0.0);
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            row[j] = dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
        out[i] = row[k - 1];
    }
    return out;
}

inline Matrix mutual_reachability(const Matrix& dist, const std::vector<double>& core)
{
    Matrix out = dist;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j)
            if (i != j)
                out(i, j) = std::max({dist(i, j), core[static_cast<std::size_t>(i)], core[static_cast<std::size_t>(j)]});
    return out;
}

/// Prim's algorithm over a complete graph given as a dense weight matrix.
inline std::vector<MstEdge> minimum_spanning_tree(const Matrix& weights)
{
    const auto n = static_cast<std::size_t>(weights.rows());
    std::vector<MstEdge> edges;
    if (n < 2)
        return edges;
    std::vector<bool> in_tree(n, false);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> from(n, 0);
    std::size_t current = 0;
    in_tree[0] = true;
    for (std::size_t step = 1; step < n; ++step) {
        for (std::size_t j = 0; j < n; ++j) {
            if (in_tree[j])
                continue;
            const double w = weights(static_cast<Eigen::Index>(current), static_cast<Eigen::Index>(j));
            if (w < best[j]) {
                best[j] = w;
                from[j] = current;
            }
        }
        std::size_t next = n;
        for (std::size_t j = 0; j < n; ++j)
            if (!in_tree[j] && (next == n || best[j] < best[next]))
                next = j;
        in_tree[next] = true;
        edges.push_back({std::min(from[next], next), std::max(from[next], next), best[next]});
        current = next;
    }
    return edges;
}

/// HDBSCAN* with Excess-of-Mass selection over the exact mutual-reachability MST.
inline HdbscanModel fit_hdbscan(const Matrix& x, int min_cluster_size, int min_samples = 0)
{
    if (min_cluster_size < 2)
        throw InvalidArgument("min_cluster_size must be >= 2");
    if (min_samples <= 0)
        min_samples = min_cluster_size;

    const auto n = static_cast<std::size_t>(x.rows());
    HdbscanModel model;
    model.min_cluster_size = min_cluster_size;
    model.min_samples = min_samples;
    model.n_points = n;
    model.labels.assign(n, kNoise);
    model.probabilities.assign(n, 0.0);
    model.glosh.assign(n, 0.0);
    if (n < 2) {
        model.core_distances.assign(n, 0.0);
        if (n == 1)
            model.noise_medoid = 0;
        return model;
    }

    const Matrix dist = pairwise_distances(x);
    model.core_distances = core_distances(dist, min_samples);
    model.mst = minimum_spanning_tree(mutual_reachability(dist, model.core_distances));

    // single-linkage hierarchy; internal node ids start at n
    std::vector<MstEdge> sorted = model.mst;
    std::stable_sort(sorted.begin(), sorted.end(), [](const MstEdge& a, const MstEdge& b) {
        if (a.weight != b.weight)
            return a.weight < b.weight;
        if (a.a != b.a)
            return a.a < b.a;
        return a.b < b.b;
    });
    std::vector<std::size_t> parent(2 * n - 1);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<std::size_t> size(2 * n - 1, 1);
    auto find = [&](std::size_t v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    };
    std::vector<detail::LinkageRow> linkage;
    linkage.reserve(n - 1);
    for (std::size_t e = 0; e < sorted.size(); ++e) {
        const auto ra = find(sorted[e].a);
        const auto rb = find(sorted[e].b);
        const std::size_t node = n + e;
        parent[ra] = node;
        parent[rb] = node;
        size[node] = size[ra] + size[rb];
        linkage.push_back({ra, rb, sorted[e].weight, size[node]});
    }

    const std::size_t root = 2 * n - 2;
    const auto mcs = static_cast<std::size_t>(min_cluster_size);
    auto node_size = [&](std::size_t v) { return v < n ? std::size_t{1} : linkage[v - n].size; };
    auto subtree_points = [&](std::size_t v, auto&& emit) {
        std::vector<std::size_t> stack{v};
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            if (u < n) {
                emit(u);
            } else {
                stack.push_back(linkage[u - n].right);
                stack.push_back(linkage[u - n].left);
            }
        }
    };

    // condense: walk top-down; cluster labels start at n with the root
    std::vector<std::size_t> relabel(2 * n - 1, 0);
    std::vector<bool> ignore(2 * n - 1, false);
    relabel[root] = n;
    std::size_t next_label = n + 1;
    std::vector<std::size_t> order{root};
    for (std::size_t q = 0; q < order.size(); ++q) {
        const auto v = order[q];
        if (v >= n) {
            order.push_back(linkage[v - n].left);
            order.push_back(linkage[v - n].right);
        }
    }
    auto& tree = model.condensed_tree;
    for (const auto v : order) {
        if (ignore[v] || v < n)
            continue;
        const auto& row = linkage[v - n];
        const double lambda = detail::to_lambda(row.distance);
        const auto left_n = node_size(row.left);
        const auto right_n = node_size(row.right);
        auto fall_out = [&](std::size_t side) {
            subtree_points(side, [&](std::size_t p) { tree.push_back({relabel[v], p, lambda, 1}); });
            std::vector<std::size_t> stack{side};
            while (!stack.empty()) {
                const auto u = stack.back();
                stack.pop_back();
                ignore[u] = true;
                if (u >= n) {
                    stack.push_back(linkage[u - n].left);
                    stack.push_back(linkage[u - n].right);
                }
            }
        };
        if (left_n >= mcs && right_n >= mcs) {
            relabel[row.left] = next_label++;
            tree.push_back({relabel[v], relabel[row.left], lambda, left_n});
            relabel[row.right] = next_label++;
            tree.push_back({relabel[v], relabel[row.right], lambda, right_n});
        } else if (left_n < mcs && right_n < mcs) {
            fall_out(row.left);
            fall_out(row.right);
        } else if (left_n < mcs) {
            relabel[row.right] = relabel[v];
            fall_out(row.left);
        } else {
            relabel[row.left] = relabel[v];
            fall_out(row.right);
        }
    }

    const std::size_t n_nodes = next_label;  // labels n .. next_label-1 are clusters
    std::vector<double> birth(n_nodes, 0.0);
    std::vector<std::size_t> cluster_parent(n_nodes, n_nodes);
    std::vector<double> death(n_nodes, 0.0);  // max lambda over direct child rows
    for (const auto& r : tree) {
        if (r.child >= n) {
            birth[r.child] = r.lambda;
            cluster_parent[r.child] = r.parent;
        }
        death[r.parent] = std::max(death[r.parent], r.lambda);
    }
    std::vector<double> stability(n_nodes, 0.0);
    for (const auto& r : tree)
        stability[r.parent] += (r.lambda - birth[r.parent]) * static_cast<double>(r.child_size);

    // excess of mass; children carry larger labels than their parents
    std::vector<bool> selected(n_nodes, false);
    std::vector<std::vector<std::size_t>> children(n_nodes);
    for (const auto& r : tree)
        if (r.child >= n)
            children[r.parent].push_back(r.child);
    std::vector<double> eom = stability;
    for (std::size_t c = n_nodes; c-- > n + 1;) {
        selected[c] = true;
        double sub = 0.0;
        for (auto ch : children[c])
            sub += eom[ch];
        if (sub > eom[c]) {
            selected[c] = false;
            eom[c] = sub;
        } else {
            std::vector<std::size_t> stack(children[c].begin(), children[c].end());
            while (!stack.empty()) {
                const auto u = stack.back();
                stack.pop_back();
                selected[u] = false;
                stack.insert(stack.end(), children[u].begin(), children[u].end());
            }
        }
    }

    std::vector<int> out_label(n_nodes, kNoise);
    for (std::size_t c = n + 1; c < n_nodes; ++c)
        if (selected[c]) {
            out_label[c] = model.n_clusters++;
            model.cluster_nodes.push_back(c);
            model.stabilities.push_back(stability[c]);
        }

    std::vector<double> subtree_death = death;
    for (std::size_t c = n_nodes; c-- > n + 1;)
        if (cluster_parent[c] < n_nodes)
            subtree_death[cluster_parent[c]] = std::max(subtree_death[cluster_parent[c]], subtree_death[c]);

    for (const auto& r : tree) {
        if (r.child >= n)
            continue;
        const auto p = r.child;
        std::size_t c = r.parent;
        while (c != n && !selected[c])
            c = cluster_parent[c];
        if (c != n && selected[c]) {
            model.labels[p] = out_label[c];
            const double max_lambda = death[c];
            model.probabilities[p] = max_lambda <= 0.0 ? 1.0 : std::min(r.lambda, max_lambda) / max_lambda;
        }
        const double top = subtree_death[r.parent];
        model.glosh[p] = top <= 0.0 ? 0.0 : std::clamp((top - r.lambda) / top, 0.0, 1.0);
    }

    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(model.n_clusters));
    std::vector<std::size_t> noise;
    for (std::size_t i = 0; i < n; ++i)
        (model.labels[i] == kNoise ? noise : members[static_cast<std::size_t>(model.labels[i])]).push_back(i);
    for (const auto& m : members)
        model.medoids.push_back(medoid(x, m));
    if (!noise.empty())
        model.noise_medoid = medoid(x, noise);
    return model;
}

}  // namespace sweepscope
