#pragma once

#include "common.hpp"

#include <random>

namespace sweepscope {

struct KMeansOptions {
    int k = 2;
    std::uint64_t seed = 0;
    int max_iter = 300;
    double tol = 1e-8;  // max center movement
};

struct KMeansModel {
    Matrix centroids;
    Labels labels;
    std::vector<double> distances;  // to own centroid
    double sse = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> sse_trace;  // after every Lloyd step
    int iterations = 0;
};

namespace detail {

inline Matrix kmeans_plus_plus(const Matrix& x, int k, std::mt19937_64& rng)
{
    const auto n = x.rows();
    Matrix centers(k, x.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centers.row(0) = x.row(pick(rng));
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        d2[static_cast<std::size_t>(i)] = (x.row(i) - centers.row(0)).squaredNorm();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2)
            total += v;
        Eigen::Index chosen = 0;
        if (total <= 0.0) {
            chosen = pick(rng);
        } else {
            const double target = unif(rng) * total;
            double acc = 0.0;
            chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[static_cast<std::size_t>(i)];
                if (acc > target) {
                    chosen = i;
                    break;
                }
            }
        }
        centers.row(c) = x.row(chosen);
        for (Eigen::Index i = 0; i < n; ++i)
            d2[static_cast<std::size_t>(i)] =
                std::min(d2[static_cast<std::size_t>(i)], (x.row(i) - centers.row(c)).squaredNorm());
    }
    return centers;
}

/// Nearest-center assignment; ties go to the lowest center index.
inline bool assign_nearest(const Matrix& x, const Matrix& centers, Labels& labels, std::vector<double>& d2)
{
    bool changed = false;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        int best = 0;
        double best_d = (x.row(i) - centers.row(0)).squaredNorm();
        for (Eigen::Index c = 1; c < centers.rows(); ++c) {
            const double d = (x.row(i) - centers.row(c)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        const auto ui = static_cast<std::size_t>(i);
        if (labels[ui] != best)
            changed = true;
        labels[ui] = best;
        d2[ui] = best_d;
    }
    return changed;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding and farthest-point repair of empty clusters.
inline KMeansModel fit_kmeans(const Matrix& x, const KMeansOptions& options)
{
    const auto n = x.rows();
    const int k = options.k;
    if (k < 1)
        throw InvalidArgument("K must be >= 1");
    if (k > n)
        throw InvalidArgument("K=" + std::to_string(k) + " exceeds item count " + std::to_string(n));

    std::mt19937_64 rng(options.seed);
    KMeansModel model;
    model.seed = options.seed;
    model.centroids = detail::kmeans_plus_plus(x, k, rng);
    model.labels.assign(static_cast<std::size_t>(n), -1);
    std::vector<double> d2(static_cast<std::size_t>(n), 0.0);

    for (int it = 0; it < options.max_iter; ++it) {
        detail::assign_nearest(x, model.centroids, model.labels, d2);

        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (int l : model.labels)
            ++counts[static_cast<std::size_t>(l)];
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] != 0)
                continue;
            // move the empty center onto the point farthest from its own centroid
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < d2.size(); ++i)
                if (counts[static_cast<std::size_t>(model.labels[i])] > 1 && d2[i] > far_d) {
                    far_d = d2[i];
                    far = i;
                }
            if (far_d < 0.0)
                break;
            --counts[static_cast<std::size_t>(model.labels[far])];
            model.labels[far] = c;
            counts[static_cast<std::size_t>(c)] = 1;
            d2[far] = 0.0;
            model.centroids.row(c) = x.row(static_cast<Eigen::Index>(far));
        }

        Matrix updated = Matrix::Zero(k, x.cols());
        for (Eigen::Index i = 0; i < n; ++i)
            updated.row(model.labels[static_cast<std::size_t>(i)]) += x.row(i);
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0)
                updated.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
            else
                updated.row(c) = model.centroids.row(c);
        }
        const double movement = (updated - model.centroids).rowwise().norm().maxCoeff();
        model.centroids = std::move(updated);

        double sse = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            sse += (x.row(i) - model.centroids.row(model.labels[static_cast<std::size_t>(i)])).squaredNorm();
        model.sse_trace.push_back(sse);
        model.iterations = it + 1;

        if (movement < options.tol) {
            Labels check = model.labels;
            if (!detail::assign_nearest(x, model.centroids, check, d2))
                break;
        }
    }

    model.distances.resize(static_cast<std::size_t>(n));
    model.sse = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (x.row(i) - model.centroids.row(model.labels[static_cast<std::size_t>(i)])).norm();
        model.distances[static_cast<std::size_t>(i)] = d;
        model.sse += d * d;
    }
    return model;
}

}  // namespace sweepscope
