#pragma once

#include "common.hpp"

#include <map>
#include <optional>
#include <random>

namespace sweepscope {

/// Per-item silhouette among non-noise items; noise items and singletons get 0.
/// Returns std::nullopt when fewer than two non-noise groups exist.
inline std::optional<std::vector<double>> silhouette_samples(const Matrix& x, const Labels& labels)
{
    const auto n = labels.size();
    std::map<int, int> dense;
    for (int l : labels)
        if (l != kNoise)
            dense.emplace(l, 0);
    if (dense.size() < 2)
        return std::nullopt;
    int next = 0;
    for (auto& kv : dense)
        kv.second = next++;
    const auto k = dense.size();

    std::vector<int> g(n, -1);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i)
        if (labels[i] != kNoise) {
            g[i] = dense[labels[i]];
            ++count[static_cast<std::size_t>(g[i])];
        }

    std::vector<double> out(n, 0.0);
    std::vector<double> sums(k);
    for (std::size_t i = 0; i < n; ++i) {
        if (g[i] < 0)
            continue;
        const auto own = static_cast<std::size_t>(g[i]);
        if (count[own] == 1)
            continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (g[j] >= 0 && j != i)
                sums[static_cast<std::size_t>(g[j])] += row_distance(x, i, j);
        const double a = sums[own] / static_cast<double>(count[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (c != own)
                b = std::min(b, sums[c] / static_cast<double>(count[c]));
        const double denom = std::max(a, b);
        out[i] = denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return out;
}

struct SilhouetteScore {
    double value = 0.0;
    bool sampled = false;
};

/// Mean silhouette over non-noise items; above max_exact items a per-label
/// stratified sample of max_exact items (fixed seed) is scored instead.
inline std::optional<SilhouetteScore> silhouette_score(const Matrix& x, const Labels& labels,
                                                       std::size_t max_exact = 20000, std::uint64_t seed = 0)
{
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != kNoise)
            kept.push_back(i);
    bool sampled = false;
    if (kept.size() > max_exact) {
        std::map<int, std::vector<std::size_t>> strata;
        for (auto i : kept)
            strata[labels[i]].push_back(i);
        std::mt19937_64 rng(seed);
        std::vector<std::size_t> chosen;
        const double frac = static_cast<double>(max_exact) / static_cast<double>(kept.size());
        for (auto& [label, items] : strata) {
            std::shuffle(items.begin(), items.end(), rng);
            auto take = static_cast<std::size_t>(std::llround(frac * static_cast<double>(items.size())));
            take = std::clamp<std::size_t>(take, 1, items.size());
            chosen.insert(chosen.end(), items.begin(), items.begin() + static_cast<std::ptrdiff_t>(take));
        }
        std::sort(chosen.begin(), chosen.end());
        kept = std::move(chosen);
        sampled = true;
    }
    Matrix sub(static_cast<Eigen::Index>(kept.size()), x.cols());
    Labels sub_labels(kept.size());
    for (std::size_t r = 0; r < kept.size(); ++r) {
        sub.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(kept[r]));
        sub_labels[r] = labels[kept[r]];
    }
    auto s = silhouette_samples(sub, sub_labels);
    if (!s)
        return std::nullopt;
    double total = 0.0;
    for (double v : *s)
        total += v;
    return SilhouetteScore{total / static_cast<double>(s->size()), sampled};
}

}  // namespace sweepscope
