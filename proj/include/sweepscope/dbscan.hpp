#pragma once

#include "common.hpp"

#include <array>
#include <deque>
#include <map>
#include <optional>

namespace sweepscope {

/// Member minimizing the summed distance to its co-members; ties go to the lower index.
inline std::size_t medoid(const Matrix& x, const std::vector<std::size_t>& members)
{
    if (members.empty())
        throw InvalidArgument("medoid of empty group");
    std::size_t best = members.front();
    double best_sum = std::numeric_limits<double>::infinity();
    for (auto i : members) {
        double s = 0.0;
        for (auto j : members)
            if (i != j)
                s += row_distance(x, i, j);
        if (s < best_sum) {
            best_sum = s;
            best = i;
        }
    }
    return best;
}

/// Exact fixed-radius neighbor queries: uniform grid for <= 3 dims, brute force above.
class RadiusIndex {
public:
    RadiusIndex(const Matrix& x, double radius) : x_(x), radius_(radius)
    {
        use_grid_ = x.cols() <= 3 && radius > 0.0 && std::isfinite(radius) && x.size() > 0 &&
                    x.cwiseAbs().maxCoeff() / radius < 1e15;
        if (!use_grid_)
            return;
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            cells_[cell_of(i)].push_back(static_cast<std::size_t>(i));
    }

    bool uses_grid() const { return use_grid_; }

    /// Neighbors within radius (inclusive), including the query point, ascending.
    std::vector<std::size_t> query(std::size_t i) const
    {
        std::vector<std::size_t> out;
        const double r2 = radius_ * radius_;
        if (!use_grid_) {
            for (Eigen::Index j = 0; j < x_.rows(); ++j)
                if ((x_.row(static_cast<Eigen::Index>(i)) - x_.row(j)).squaredNorm() <= r2)
                    out.push_back(static_cast<std::size_t>(j));
            return out;
        }
        const auto base = cell_of(static_cast<Eigen::Index>(i));
        const auto dims = static_cast<int>(x_.cols());
        std::array<long long, 3> offset{0, 0, 0};
        const int combos = dims == 1 ? 3 : dims == 2 ? 9 : 27;
        for (int c = 0; c < combos; ++c) {
            int rem = c;
            Cell key = base;
            for (int d = 0; d < dims; ++d) {
                offset[static_cast<std::size_t>(d)] = rem % 3 - 1;
                rem /= 3;
                key[static_cast<std::size_t>(d)] += offset[static_cast<std::size_t>(d)];
            }
            auto it = cells_.find(key);
            if (it == cells_.end())
                continue;
            for (auto j : it->second)
                if ((x_.row(static_cast<Eigen::Index>(i)) - x_.row(static_cast<Eigen::Index>(j))).squaredNorm() <= r2)
                    out.push_back(j);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    using Cell = std::array<long long, 3>;

    Cell cell_of(Eigen::Index i) const
    {
        Cell c{0, 0, 0};
        for (Eigen::Index d = 0; d < x_.cols(); ++d)
            c[static_cast<std::size_t>(d)] = static_cast<long long>(std::floor(x_(i, d) / radius_));
        return c;
    }

    const Matrix& x_;
    double radius_;
    bool use_grid_ = false;
    std::map<Cell, std::vector<std::size_t>> cells_;
};

struct DbscanModel {
    double eps = 0.0;
    int min_samples = 1;
    Labels labels;
    std::vector<bool> core;
    std::vector<std::size_t> medoids;  // per cluster
    std::optional<std::size_t> noise_medoid;
    int n_clusters = 0;
};

/// Core/border/noise expansion scanning items in ascending order.
inline DbscanModel fit_dbscan(const Matrix& x, double eps, int min_samples)
{
    if (!(eps > 0.0))
        throw InvalidArgument("eps must be positive");
    if (min_samples < 1)
        throw InvalidArgument("min_samples must be >= 1");

    const auto n = static_cast<std::size_t>(x.rows());
    RadiusIndex index(x, eps);
    std::vector<std::vector<std::size_t>> neighbors(n);
    DbscanModel model;
    model.eps = eps;
    model.min_samples = min_samples;
    model.core.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        neighbors[i] = index.query(i);
        model.core[i] = neighbors[i].size() >= static_cast<std::size_t>(min_samples);
    }

    constexpr int unvisited = -2;
    model.labels.assign(n, unvisited);
    int cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (model.labels[i] != unvisited)
            continue;
        if (!model.core[i]) {
            model.labels[i] = kNoise;
            continue;
        }
        std::deque<std::size_t> queue{i};
        model.labels[i] = cluster;
        while (!queue.empty()) {
            const auto p = queue.front();
            queue.pop_front();
            if (!model.core[p])
                continue;
            for (auto q : neighbors[p]) {
                if (model.labels[q] == unvisited || model.labels[q] == kNoise) {
                    const bool fresh = model.labels[q] == unvisited;
                    model.labels[q] = cluster;
                    if (fresh && model.core[q])
                        queue.push_back(q);
                }
            }
        }
        ++cluster;
    }
    model.n_clusters = cluster;

    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(cluster));
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
