#pragma once

#include "common.hpp"
#include "grouping.hpp"
#include "silhouette.hpp"

namespace sweepscope {

struct UncertaintyRecord {
    std::size_t item = 0;
    double membership = 0.0;
    double outlier = 0.0;
};

/// (silhouette + 1) / 2 per item; noise items get 0.
inline std::vector<double> membership_silhouette(const Matrix& x, const Labels& labels, Warnings* warnings = nullptr)
{
    auto s = silhouette_samples(x, labels);
    std::vector<double> out(labels.size(), 0.5);
    if (!s) {
        warn(warnings, "fewer than 2 non-noise groups; membership set to 0.5");
        return out;
    }
    for (std::size_t i = 0; i < labels.size(); ++i)
        out[i] = labels[i] == kNoise ? 0.0 : std::clamp(((*s)[i] + 1.0) / 2.0, 0.0, 1.0);
    return out;
}

/// Share of the mixture held by the dominant topic.
inline double membership_nmf(const Eigen::Ref<const Vector>& w, Warnings* warnings = nullptr)
{
    if ((w.array() < 0.0).any())
        throw InvalidArgument("topic mixture has negative weight");
    const double total = w.sum();
    if (!(total > 0.0)) {
        warn(warnings, "all-zero topic mixture; membership set to 1/K");
        return 1.0 / static_cast<double>(w.size());
    }
    return w.maxCoeff() / total;
}

/// d_i / max over the group; a singleton or zero-spread group gives 0.
inline std::vector<double> outlier_distance_ratio(const std::vector<double>& distances)
{
    std::vector<double> out(distances.size(), 0.0);
    if (distances.size() < 2)
        return out;
    const double top = *std::max_element(distances.begin(), distances.end());
    if (!(top > 0.0))
        return out;
    for (std::size_t i = 0; i < distances.size(); ++i)
        out[i] = distances[i] == top ? 1.0 : std::clamp(distances[i] / top, 0.0, 1.0);
    return out;
}

/// Shannon entropy of the normalized row divided by ln K.
inline double outlier_entropy(const Eigen::Ref<const Vector>& w, Warnings* warnings = nullptr)
{
    if ((w.array() < 0.0).any())
        throw InvalidArgument("topic mixture has negative weight");
    const auto k = w.size();
    if (k < 2)
        return 0.0;
    const double total = w.sum();
    if (!(total > 0.0)) {
        warn(warnings, "all-zero topic mixture; diffuse topic membership");
        return 1.0;
    }
    double h = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        const double p = w[i] / total;
        if (p > 0.0)
            h -= p * std::log(p);
    }
    return std::clamp(h / std::log(static_cast<double>(k)), 0.0, 1.0);
}

/// Distance-ratio outlier score computed group by group.
inline std::vector<double> grouped_outlier_ratio(const Labels& labels, const std::vector<double>& distances)
{
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i)
        groups[labels[i]].push_back(i);
    std::vector<double> out(labels.size(), 0.0);
    for (const auto& [g, items] : groups) {
        std::vector<double> d;
        d.reserve(items.size());
        for (auto i : items)
            d.push_back(distances[i]);
        const auto r = outlier_distance_ratio(d);
        for (std::size_t j = 0; j < items.size(); ++j)
            out[items[j]] = r[j];
    }
    return out;
}

/// Distances of each item to its group's medoid (noise items to the noise medoid).
template <class DensityModel>
std::vector<double> medoid_distances(const Matrix& x, const DensityModel& m)
{
    std::vector<double> d(m.labels.size(), 0.0);
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        const int l = m.labels[i];
        const std::size_t ref = l == kNoise ? *m.noise_medoid : m.medoids[static_cast<std::size_t>(l)];
        d[i] = row_distance(x, i, ref);
    }
    return d;
}

/// Method-specific membership and outlier indicators for every item.
/// `x` is the matrix the model was fitted on (unused for NMF and HDBSCAN).
inline std::vector<UncertaintyRecord> uncertainty_for(const FittedModel& model, const Matrix& x,
                                                      Warnings* warnings = nullptr)
{
    std::vector<double> membership, outlier;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, NmfModel>) {
                for (Eigen::Index d = 0; d < m.W.rows(); ++d) {
                    const Vector row = m.W.row(d).transpose();
                    membership.push_back(membership_nmf(row, warnings));
                    outlier.push_back(outlier_entropy(row, warnings));
                }
            } else if constexpr (std::is_same_v<T, KMeansModel>) {
                membership = membership_silhouette(x, m.labels, warnings);
                outlier = grouped_outlier_ratio(m.labels, m.distances);
            } else if constexpr (std::is_same_v<T, DbscanModel>) {
                membership = membership_silhouette(x, m.labels, warnings);
                outlier = grouped_outlier_ratio(m.labels, medoid_distances(x, m));
            } else {
                membership = m.probabilities;
                outlier = m.glosh;
            }
        },
        model);
    std::vector<UncertaintyRecord> out(membership.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = {i, membership[i], outlier[i]};
    return out;
}

inline std::vector<UncertaintyRecord> uncertainty_for(std::string_view method, const FittedModel& model,
                                                      const Matrix& x, Warnings* warnings = nullptr)
{
    if (parse_method(method) != method_of(model))
        throw InvalidArgument("model does not match method '" + std::string(method) + "'");
    return uncertainty_for(model, x, warnings);
}

}  // namespace sweepscope
