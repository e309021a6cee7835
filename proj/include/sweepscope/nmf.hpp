#pragma once

#include "common.hpp"

#include <random>

namespace sweepscope {

struct NmfOptions {
    int k = 2;
    std::uint64_t seed = 0;
    int max_iter = 400;
    double tol = 1e-6;  // relative objective change
};

/// V ~ W H with W (documents x topics) and H (topics x terms) non-negative.
struct NmfModel {
    Matrix W;
    Matrix H;
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<double> objective_trace;  // squared Frobenius loss, initial value first
    int iterations = 0;

    /// Dominant topic per document; ties resolve to the lowest topic index.
    Labels labels() const
    {
        Labels out(static_cast<std::size_t>(W.rows()));
        for (Eigen::Index d = 0; d < W.rows(); ++d) {
            Eigen::Index best = 0;
            for (Eigen::Index t = 1; t < W.cols(); ++t)
                if (W(d, t) > W(d, best))
                    best = t;
            out[static_cast<std::size_t>(d)] = static_cast<int>(best);
        }
        return out;
    }
};

inline double nmf_loss(const Matrix& v, const Matrix& w, const Matrix& h)
{
    return (v - w * h).squaredNorm();
}

/// Lee-Seung multiplicative updates for the squared Frobenius objective.
inline NmfModel fit_nmf(const SparseMatrix& v_sparse, const NmfOptions& options)
{
    const auto n_docs = v_sparse.rows();
    const auto n_terms = v_sparse.cols();
    if (options.k < 2 || options.k > std::min(n_docs, n_terms))
        throw InvalidArgument("NMF needs 2 <= K <= min(n_docs, n_terms); got K=" + std::to_string(options.k));
    if (options.max_iter < 0)
        throw InvalidArgument("max_iter must be non-negative");

    const Matrix v = Matrix(v_sparse);
    if ((v.array() < 0.0).any())
        throw InvalidArgument("NMF input has negative entries");
    const double mean = v.mean();
    if (!(mean > 0.0))
        throw InvalidArgument("NMF input is all zero");

    const int k = options.k;
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unif(0.0, std::sqrt(mean / k));

    NmfModel model;
    model.k = k;
    model.seed = options.seed;
    model.W.resize(n_docs, k);
    model.H.resize(k, n_terms);
    for (Eigen::Index i = 0; i < model.W.size(); ++i)
        model.W.data()[i] = unif(rng);
    for (Eigen::Index i = 0; i < model.H.size(); ++i)
        model.H.data()[i] = unif(rng);

    constexpr double eps = std::numeric_limits<double>::epsilon();
    double prev = nmf_loss(v, model.W, model.H);
    model.objective_trace.push_back(prev);
    for (int it = 0; it < options.max_iter; ++it) {
        const Matrix wt_v = model.W.transpose() * v_sparse;
        const Matrix wt_w_h = (model.W.transpose() * model.W) * model.H;
        model.H.array() *= wt_v.array() / (wt_w_h.array() + eps);

        const Matrix v_ht = v_sparse * model.H.transpose();
        const Matrix w_h_ht = model.W * (model.H * model.H.transpose());
        model.W.array() *= v_ht.array() / (w_h_ht.array() + eps);

        const double cur = nmf_loss(v, model.W, model.H);
        model.objective_trace.push_back(cur);
        model.iterations = it + 1;
        const double rel = prev > 0.0 ? (prev - cur) / prev : 0.0;
        prev = cur;
        if (rel < options.tol || cur == 0.0)
            break;
    }
    return model;
}

}  // namespace sweepscope
