#pragma once

#include "common.hpp"
#include "core_model.hpp"
#include "hdbscan.hpp"

#include <Eigen/SVD>
#include <set>

namespace sweepscope {

struct PooledRow {
    std::string iteration_key;
    int group_id = 0;
    bool is_noise = false;
    std::size_t group_size = 0;
};

struct PooledMatrix {
    std::vector<PooledRow> rows;
    Matrix raw;        // representatives as pooled
    Matrix processed;  // standardized, optionally PCA-reduced, L2-normalized
    Vector column_means;
    Vector column_stds;
    Matrix pca_basis;  // features x retained; empty when PCA was skipped
    std::size_t retained_dims = 0;
    double explained_variance_ratio = 1.0;
    std::size_t n_iterations = 0;

    std::size_t size() const { return rows.size(); }

    std::size_t find(const std::string& key, int group_id) const
    {
        for (std::size_t r = 0; r < rows.size(); ++r)
            if (rows[r].iteration_key == key && rows[r].group_id == group_id)
                return r;
        throw NotFound("no pooled row for " + key + "." + std::to_string(group_id));
    }
};

struct PoolOptions {
    std::size_t pca_min_features = 10;  // PCA runs only above this many columns
    double pca_variance = 0.95;
};

/// Stacks every group representative of every iteration, noise groups included.
inline PooledMatrix pool(const SweepRun& run, const PoolOptions& options = {}, Warnings* warnings = nullptr)
{
    PooledMatrix pm;
    pm.n_iterations = run.iterations.size();
    std::vector<const GroupRecord*> groups;
    for (const auto& it : run.iterations)
        for (const auto& g : it.groups) {
            groups.push_back(&g);
            pm.rows.push_back({it.key, g.group_id, g.is_noise, g.members.size()});
        }
    if (groups.size() < 3)
        throw InvalidArgument("need at least 3 pooled rows, got " + std::to_string(groups.size()));
    const auto dim = groups.front()->representative.size();
    pm.raw.resize(static_cast<Eigen::Index>(groups.size()), dim);
    for (std::size_t r = 0; r < groups.size(); ++r) {
        if (groups[r]->representative.size() != dim)
            throw InvalidArgument("representative dimensions differ across iterations");
        pm.raw.row(static_cast<Eigen::Index>(r)) = groups[r]->representative.transpose();
    }

    const auto n = static_cast<double>(pm.raw.rows());
    pm.column_means = pm.raw.colwise().mean().transpose();
    Matrix z = pm.raw.rowwise() - pm.column_means.transpose();
    pm.column_stds = (z.colwise().squaredNorm() / n).cwiseSqrt().transpose();
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        if (pm.column_stds[c] > 0.0)
            z.col(c) /= pm.column_stds[c];
        else
            z.col(c).setZero();
    }

    pm.retained_dims = static_cast<std::size_t>(z.cols());
    if (static_cast<std::size_t>(z.cols()) > options.pca_min_features) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vector s = svd.singularValues();
        const double total = s.squaredNorm();
        if (total > 0.0) {
            Eigen::Index r = 0;
            double acc = 0.0;
            while (r < s.size() && acc / total < options.pca_variance) {
                acc += s[r] * s[r];
                ++r;
            }
            r = std::max<Eigen::Index>(r, 1);
            Matrix basis = svd.matrixV().leftCols(r);
            for (Eigen::Index c = 0; c < r; ++c) {
                Eigen::Index arg = 0;
                basis.col(c).cwiseAbs().maxCoeff(&arg);
                if (basis(arg, c) < 0.0)
                    basis.col(c) *= -1.0;
            }
            pm.pca_basis = basis;
            pm.retained_dims = static_cast<std::size_t>(r);
            pm.explained_variance_ratio = acc / total;
            z = z * basis;
        }
    }

    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double norm = z.row(r).norm();
        if (norm > 0.0)
            z.row(r) /= norm;
        else
            warn(warnings, "pooled row " + pm.rows[static_cast<std::size_t>(r)].iteration_key + "." +
                               std::to_string(pm.rows[static_cast<std::size_t>(r)].group_id) +
                               " equals the column means and stays at the origin");
    }
    pm.processed = std::move(z);
    return pm;
}

/// max(2, floor(N_iterations / 2)).
inline int default_threshold(std::size_t n_iterations)
{
    return std::max(2, static_cast<int>(n_iterations / 2));
}

struct DetectOptions {
    bool count_noise_archetypes = true;  // whether completeness requires noise archetypes
};

struct ArchetypeModel {
    int threshold = 2;
    int min_samples = 2;
    Labels archetype_labels;         // pooled row -> archetype or -1
    std::vector<double> probabilities;
    Matrix archetype_centroids;      // in processed space
    std::vector<bool> noise_archetype;  // majority of member rows are noise groups
    std::vector<std::size_t> archetype_sizes;
    std::set<std::string> complete_iterations;
    bool count_noise_archetypes = true;

    int n_archetypes() const { return static_cast<int>(archetype_centroids.rows()); }

    int n_cluster_archetypes() const
    {
        int c = 0;
        for (bool b : noise_archetype)
            c += b ? 0 : 1;
        return c;
    }

    double noise_pct() const
    {
        if (archetype_labels.empty())
            return 0.0;
        const auto noise = std::count(archetype_labels.begin(), archetype_labels.end(), kNoise);
        return 100.0 * static_cast<double>(noise) / static_cast<double>(archetype_labels.size());
    }
};

/// Iterations whose groups cover every counted archetype.
inline std::set<std::string> complete_iterations(const PooledMatrix& pm, const Labels& labels,
                                                 const std::vector<bool>& counted, const std::vector<std::string>& keys)
{
    std::map<std::string, std::set<int>> seen;
    for (std::size_t r = 0; r < pm.rows.size(); ++r)
        if (labels[r] != kNoise)
            seen[pm.rows[r].iteration_key].insert(labels[r]);
    std::set<std::string> out;
    for (const auto& key : keys) {
        bool ok = true;
        for (std::size_t a = 0; a < counted.size() && ok; ++a)
            if (counted[a] && !seen[key].count(static_cast<int>(a)))
                ok = false;
        if (ok)
            out.insert(key);
    }
    return out;
}

inline std::vector<std::string> pooled_iteration_keys(const PooledMatrix& pm)
{
    std::vector<std::string> keys;
    for (const auto& r : pm.rows)
        if (keys.empty() || keys.back() != r.iteration_key)
            if (std::find(keys.begin(), keys.end(), r.iteration_key) == keys.end())
                keys.push_back(r.iteration_key);
    return keys;
}

/// Meta-HDBSCAN over the pooled rows. `keys` lists every iteration (including
/// any that contributed no rows); defaults to the pooled keys.
inline ArchetypeModel detect(const PooledMatrix& pm, int min_cluster_size, const DetectOptions& options = {},
                             std::vector<std::string> keys = {})
{
    if (min_cluster_size < 2)
        throw InvalidArgument("archetype threshold must be >= 2");
    if (static_cast<std::size_t>(min_cluster_size) >= pm.size())
        throw InvalidArgument("archetype threshold " + std::to_string(min_cluster_size) + " must be below the " +
                              std::to_string(pm.size()) + " pooled rows");
    if (keys.empty())
        keys = pooled_iteration_keys(pm);

    ArchetypeModel am;
    am.threshold = min_cluster_size;
    am.min_samples = std::min(min_cluster_size, 5);
    am.count_noise_archetypes = options.count_noise_archetypes;
    const auto h = fit_hdbscan(pm.processed, min_cluster_size, am.min_samples);
    am.archetype_labels = h.labels;
    am.probabilities = h.probabilities;

    const auto k = static_cast<std::size_t>(h.n_clusters);
    am.archetype_centroids = Matrix::Zero(static_cast<Eigen::Index>(k), pm.processed.cols());
    am.archetype_sizes.assign(k, 0);
    std::vector<std::size_t> noise_rows(k, 0);
    for (std::size_t r = 0; r < pm.size(); ++r) {
        const int a = h.labels[r];
        if (a == kNoise)
            continue;
        const auto ai = static_cast<std::size_t>(a);
        am.archetype_centroids.row(a) += pm.processed.row(static_cast<Eigen::Index>(r));
        ++am.archetype_sizes[ai];
        noise_rows[ai] += pm.rows[r].is_noise ? 1 : 0;
    }
    for (std::size_t a = 0; a < k; ++a) {
        am.archetype_centroids.row(static_cast<Eigen::Index>(a)) /= static_cast<double>(am.archetype_sizes[a]);
        am.noise_archetype.push_back(2 * noise_rows[a] > am.archetype_sizes[a]);
    }
    std::vector<bool> counted(k, true);
    if (!options.count_noise_archetypes)
        for (std::size_t a = 0; a < k; ++a)
            counted[a] = !am.noise_archetype[a];
    am.complete_iterations = complete_iterations(pm, am.archetype_labels, counted, keys);
    return am;
}

struct SweepPoint {
    int threshold = 0;
    int archetypes = 0;
    double noise_pct = 0.0;
};

/// detect() at every threshold in [2, N_iterations - 1]. Thresholds at or
/// above the pooled row count report 0 archetypes and 100 % noise.
inline std::vector<SweepPoint> threshold_sweep(const PooledMatrix& pm, std::size_t n_iterations = 0)
{
    if (pm.size() < 3)
        throw InvalidArgument("need at least 3 pooled rows");
    if (n_iterations == 0)
        n_iterations = pm.n_iterations;
    std::vector<SweepPoint> curve;
    for (int t = 2; t + 1 <= static_cast<int>(n_iterations); ++t) {
        if (static_cast<std::size_t>(t) >= pm.size()) {
            curve.push_back({t, 0, 100.0});
            continue;
        }
        const auto am = detect(pm, t);
        curve.push_back({t, am.n_archetypes(), am.noise_pct()});
    }
    return curve;
}

/// Min-max scaled per-row attribute for dot sizes. Names: "group_size",
/// "hdbscan_probability" (needs `model`) or any per-group metric.
inline std::vector<double> size_attribute(const SweepRun& run, const PooledMatrix& pm, const std::string& attribute,
                                          const ArchetypeModel* model = nullptr)
{
    std::vector<double> raw(pm.size(), 0.0);
    if (attribute == "group_size") {
        for (std::size_t r = 0; r < pm.size(); ++r)
            raw[r] = static_cast<double>(pm.rows[r].group_size);
    } else if (attribute == "hdbscan_probability") {
        if (model == nullptr)
            throw InvalidArgument("hdbscan_probability needs an archetype model");
        raw = model->probabilities;
    } else {
        for (std::size_t r = 0; r < pm.size(); ++r) {
            const auto& it = run.iterations[run.find_iteration(pm.rows[r].iteration_key)];
            const auto& g = it.group(pm.rows[r].group_id);
            auto m = g.metrics.find(attribute);
            if (m == g.metrics.end())
                throw NotFound("unknown group attribute '" + attribute + "'");
            raw[r] = m->second;
        }
    }
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    const double a = *lo, b = *hi;
    std::vector<double> out(raw.size(), 0.5);
    if (b > a)
        for (std::size_t r = 0; r < raw.size(); ++r)
            out[r] = (raw[r] - a) / (b - a);
    return out;
}

}  // namespace sweepscope
