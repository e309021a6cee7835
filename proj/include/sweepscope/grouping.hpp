#pragma once

#include "core_model.hpp"
#include "dbscan.hpp"
#include "hdbscan.hpp"
#include "kmeans.hpp"
#include "nmf.hpp"

#include <variant>

namespace sweepscope {

using FittedModel = std::variant<NmfModel, KMeansModel, DbscanModel, HdbscanModel>;

inline Method method_of(const FittedModel& model)
{
    switch (model.index()) {
    case 0: return Method::nmf;
    case 1: return Method::kmeans;
    case 2: return Method::dbscan;
    default: return Method::hdbscan;
    }
}

inline Labels model_labels(const FittedModel& model)
{
    return std::visit(
        [](const auto& m) -> Labels {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, NmfModel>)
                return m.labels();
            else
                return m.labels;
        },
        model);
}

inline int model_group_count(const FittedModel& model)
{
    return std::visit(
        [](const auto& m) -> int {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, NmfModel>)
                return m.k;
            else if constexpr (std::is_same_v<T, KMeansModel>)
                return static_cast<int>(m.centroids.rows());
            else
                return m.n_clusters;
        },
        model);
}

struct Representative {
    int group_id = 0;
    Vector vector;
    bool is_noise = false;
};

/// Centroids (K-means), medoids with a trailing noise medoid (density methods) or H rows (NMF).
/// `x` is the feature matrix the model was fitted on; unused for NMF.
inline std::vector<Representative> group_representatives(const FittedModel& model, const Matrix& x)
{
    std::vector<Representative> out;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, NmfModel>) {
                for (Eigen::Index t = 0; t < m.H.rows(); ++t)
                    out.push_back({static_cast<int>(t), m.H.row(t).transpose(), false});
            } else if constexpr (std::is_same_v<T, KMeansModel>) {
                for (Eigen::Index c = 0; c < m.centroids.rows(); ++c)
                    out.push_back({static_cast<int>(c), m.centroids.row(c).transpose(), false});
            } else {
                for (std::size_t c = 0; c < m.medoids.size(); ++c)
                    out.push_back({static_cast<int>(c), x.row(static_cast<Eigen::Index>(m.medoids[c])).transpose(), false});
                if (m.noise_medoid)
                    out.push_back({kNoise, x.row(static_cast<Eigen::Index>(*m.noise_medoid)).transpose(), true});
            }
        },
        model);
    return out;
}

}  // namespace sweepscope
