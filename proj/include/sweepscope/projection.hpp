#pragma once

#include "archetypes.hpp"
#include "common.hpp"
#include "core_model.hpp"

#include <Eigen/Eigenvalues>
#include <functional>
#include <mutex>
#include <random>

namespace sweepscope {

namespace detail {

// Flip each column so its largest-magnitude entry is positive.
inline void fix_signs(Matrix& vectors)
{
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        Eigen::Index arg = 0;
        vectors.col(c).cwiseAbs().maxCoeff(&arg);
        if (vectors(arg, c) < 0.0)
            vectors.col(c) *= -1.0;
    }
}

}  // namespace detail

/// Torgerson MDS of a distance matrix.
inline Matrix classical_mds(const Matrix& distances, int dims, Warnings* warnings = nullptr)
{
    const auto n = distances.rows();
    if (distances.cols() != n)
        throw InvalidArgument("distance matrix must be square");
    if (dims < 1)
        throw InvalidArgument("dims must be >= 1");
    if (n < dims + 1)
        throw InvalidArgument("classical MDS needs at least dims+1 rows");
    if (distances.maxCoeff() <= 0.0) {
        warn(warnings, "all rows identical; MDS positions set to zero");
        return Matrix::Zero(n, dims);
    }
    const Eigen::MatrixXd d2 = distances.array().square().matrix();
    const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    Eigen::MatrixXd b = -0.5 * j * d2 * j;
    b = 0.5 * (b + b.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    Matrix vecs(n, dims);
    Vector vals(dims);
    for (int k = 0; k < dims; ++k) {
        const Eigen::Index src = n - 1 - k;
        vecs.col(k) = es.eigenvectors().col(src);
        vals[k] = std::max(0.0, es.eigenvalues()[src]);
    }
    detail::fix_signs(vecs);
    Matrix out(n, dims);
    for (int k = 0; k < dims; ++k)
        out.col(k) = vecs.col(k) * std::sqrt(vals[k]);
    return out;
}

inline Matrix classical_mds_rows(const Matrix& rows, int dims, Warnings* warnings = nullptr)
{
    return classical_mds(pairwise_distances(rows), dims, warnings);
}

/// Raw MDS stress: sum over pairs of (embedded distance - input distance)^2.
inline double mds_stress(const Matrix& distances, const Matrix& positions)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < distances.rows(); ++i)
        for (Eigen::Index j = i + 1; j < distances.rows(); ++j) {
            const double e = (positions.row(i) - positions.row(j)).norm() - distances(i, j);
            s += e * e;
        }
    return s;
}

struct TsneOptions {
    int dims = 2;
    double perplexity = 30.0;
    std::uint64_t seed = 0;
    int iterations = 1000;
    double learning_rate = 0.0;  // <= 0: max(n / early_exaggeration / 4, 50)
    double early_exaggeration = 12.0;
};

struct TsneResult {
    Matrix positions;
    double perplexity = 0.0;
    double kl_initial = 0.0;
    double kl_final = 0.0;
};

namespace detail {

inline Matrix tsne_affinities(const Matrix& d2, double perplexity)
{
    const auto n = d2.rows();
    const double target = std::log(perplexity);
    Matrix p = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double dmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i)
                dmin = std::min(dmin, d2(i, j));
        for (int step = 0; step < 200; ++step) {
            double sum = 0.0, weighted = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i)
                    continue;
                const double v = std::exp(-beta * (d2(i, j) - dmin));
                p(i, j) = v;
                sum += v;
                weighted += v * (d2(i, j) - dmin);
            }
            const double entropy = std::log(sum) + beta * weighted / sum;
            for (Eigen::Index j = 0; j < n; ++j)
                p(i, j) /= sum;
            const double diff = entropy - target;
            if (std::abs(diff) < 1e-10)
                break;
            if (diff > 0.0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
    }
    Matrix sym = (p + p.transpose()) / (2.0 * static_cast<double>(n));
    return sym.cwiseMax(1e-12);
}

inline double tsne_kl(const Matrix& p, const Matrix& y)
{
    const auto n = y.rows();
    Matrix num(n, n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            num(i, j) = i == j ? 0.0 : 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
            total += num(i, j);
        }
    double kl = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j)
                kl += p(i, j) * std::log(p(i, j) / std::max(num(i, j) / total, 1e-300));
    return kl;
}

}  // namespace detail

/// Exact-gradient t-SNE with PCA initialization; the seed only drives a tiny jitter.
inline TsneResult tsne_exact(const Matrix& rows, const TsneOptions& options = {}, Warnings* warnings = nullptr)
{
    const auto n = rows.rows();
    if (n < 4)
        throw InvalidArgument("t-SNE needs at least 4 rows");
    if (options.dims < 1)
        throw InvalidArgument("dims must be >= 1");
    TsneResult res;
    res.perplexity = options.perplexity;
    const double limit = static_cast<double>(n - 1) / 3.0;
    if (!(res.perplexity < limit)) {
        res.perplexity = std::max(1.0, 0.99 * limit);
        warn(warnings, "perplexity " + format_double(options.perplexity) + " clamped to " + format_double(res.perplexity));
    }
    const Matrix dist = pairwise_distances(rows);
    const Matrix p = detail::tsne_affinities(dist.array().square().matrix(), res.perplexity);

    const Matrix centered = rows.rowwise() - rows.colwise().mean();
    Matrix y = Matrix::Zero(n, options.dims);
    if (centered.norm() > 0.0) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto r = std::min<Eigen::Index>(options.dims, svd.singularValues().size());
        Matrix v = svd.matrixV().leftCols(r);
        detail::fix_signs(v);
        y.leftCols(r) = centered * v;
    }
    const double sd0 = std::sqrt((y.col(0).array() - y.col(0).mean()).square().mean());
    if (sd0 > 0.0)
        y *= 1e-4 / sd0;
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> jitter(0.0, 1e-8);
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y.data()[i] += jitter(rng);

    res.kl_initial = detail::tsne_kl(p, y);
    Matrix update = Matrix::Zero(n, options.dims);
    Matrix gains = Matrix::Ones(n, options.dims);
    Matrix grad(n, options.dims);
    Matrix num(n, n);
    const int exaggerated = options.iterations / 4;
    const double rate = options.learning_rate > 0.0
                            ? options.learning_rate
                            : std::max(static_cast<double>(n) / options.early_exaggeration / 4.0, 50.0);
    for (int it = 0; it < options.iterations; ++it) {
        const double exag = it < exaggerated ? options.early_exaggeration : 1.0;
        const double momentum = it < exaggerated ? 0.5 : 0.8;
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                num(i, j) = i == j ? 0.0 : 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
                total += num(i, j);
            }
        grad.setZero();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j)
                    continue;
                const double coef = (exag * p(i, j) - num(i, j) / total) * num(i, j);
                grad.row(i) += 4.0 * coef * (y.row(i) - y.row(j));
            }
        for (Eigen::Index k = 0; k < grad.size(); ++k) {
            double& g = gains.data()[k];
            const bool same = (grad.data()[k] > 0.0) == (update.data()[k] > 0.0);
            g = same ? std::max(g * 0.8, 0.01) : g + 0.2;
            update.data()[k] = momentum * update.data()[k] - rate * g * grad.data()[k];
        }
        y += update;
        y = y.rowwise() - y.colwise().mean();
    }
    res.kl_final = detail::tsne_kl(p, y);
    res.positions = std::move(y);
    return res;
}

/// (rows, dims, seed) -> positions.
using ProjectionFn = std::function<Matrix(const Matrix& rows, int dims, std::uint64_t seed)>;

class ProjectionRegistry {
public:
    ProjectionRegistry()
    {
        add("mds", [](const Matrix& rows, int dims, std::uint64_t) { return classical_mds_rows(rows, dims); });
        add("tsne", [](const Matrix& rows, int dims, std::uint64_t seed) {
            TsneOptions o;
            o.dims = dims;
            o.seed = seed;
            return tsne_exact(rows, o).positions;
        });
    }

    void add(const std::string& name, ProjectionFn fn)
    {
        std::lock_guard lock(mutex_);
        fns_[name] = std::move(fn);
    }

    bool has(const std::string& name) const
    {
        std::lock_guard lock(mutex_);
        return fns_.count(name) != 0;
    }

    std::vector<std::string> names() const
    {
        std::lock_guard lock(mutex_);
        std::vector<std::string> out;
        for (const auto& [k, v] : fns_)
            out.push_back(k);
        return out;
    }

    Matrix run(const std::string& name, const Matrix& rows, int dims, std::uint64_t seed) const
    {
        ProjectionFn fn;
        {
            std::lock_guard lock(mutex_);
            auto it = fns_.find(name);
            if (it == fns_.end())
                throw NotFound("unknown projection method '" + name + "'");
            fn = it->second;
        }
        Matrix out = fn(rows, dims, seed);
        if (out.rows() != rows.rows() || out.cols() != dims || !out.allFinite())
            throw Error("projection '" + name + "' returned an invalid layout");
        return out;
    }

private:
    mutable std::mutex mutex_;
    std::map<std::string, ProjectionFn> fns_;
};

inline ProjectionRegistry& projection_registry()
{
    static ProjectionRegistry registry;
    return registry;
}

struct AxisOrder {
    std::string iteration_key;
    std::vector<int> group_ids;  // top to bottom
};

/// Per-iteration group order from 1D positions of pooled rows; ties by group id, noise last.
inline std::vector<AxisOrder> order_1d(const SweepRun& run, const PooledMatrix& pm, const std::vector<double>& positions)
{
    if (positions.size() != pm.size())
        throw InvalidArgument("1D positions do not match pooled rows");
    std::vector<AxisOrder> out;
    for (const auto& it : run.iterations) {
        std::vector<std::pair<double, int>> keyed;
        bool has_noise = false;
        for (const auto& g : it.groups) {
            if (g.is_noise) {
                has_noise = true;
                continue;
            }
            keyed.emplace_back(positions[pm.find(it.key, g.group_id)], g.group_id);
        }
        std::sort(keyed.begin(), keyed.end());
        AxisOrder ax{it.key, {}};
        for (const auto& [v, g] : keyed)
            ax.group_ids.push_back(g);
        if (has_noise)
            ax.group_ids.push_back(kNoise);
        out.push_back(std::move(ax));
    }
    return out;
}

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

inline std::string to_hex(const Rgb& c)
{
    static const char* digits = "0123456789abcdef";
    std::string out = "#";
    for (auto v : {c.r, c.g, c.b}) {
        out += digits[v >> 4];
        out += digits[v & 15];
    }
    return out;
}

inline constexpr Rgb kCornerRed{255, 0, 0};      // (0, 0)
inline constexpr Rgb kCornerYellow{255, 255, 0};  // (1, 0)
inline constexpr Rgb kCornerBlue{0, 0, 255};      // (0, 1)
inline constexpr Rgb kCornerGreen{0, 255, 0};     // (1, 1)
inline constexpr Rgb kGray{128, 128, 128};

/// Bilinear blend of the four corner colors at (u, v) in the unit square.
inline Rgb four_corner(double u, double v)
{
    u = std::clamp(u, 0.0, 1.0);
    v = std::clamp(v, 0.0, 1.0);
    auto mix = [&](std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
        const double x = (1 - u) * (1 - v) * a + u * (1 - v) * b + (1 - u) * v * c + u * v * d;
        return static_cast<std::uint8_t>(std::clamp<long>(std::lround(x), 0, 255));
    };
    return {mix(kCornerRed.r, kCornerYellow.r, kCornerBlue.r, kCornerGreen.r),
            mix(kCornerRed.g, kCornerYellow.g, kCornerBlue.g, kCornerGreen.g),
            mix(kCornerRed.b, kCornerYellow.b, kCornerBlue.b, kCornerGreen.b)};
}

/// Shared MDS layout of pooled rows plus every archetype centroid from the
/// threshold sweep, normalized to the unit square.
struct ColorLayout {
    Matrix rows;                            // pooled rows, unit square
    std::map<int, Matrix> centroids;        // threshold -> archetype centroids, unit square
    bool degenerate = false;
};

inline ColorLayout build_color_layout(const PooledMatrix& pm, const std::vector<ArchetypeModel>& sweep_models,
                                      Warnings* warnings = nullptr)
{
    Eigen::Index total = pm.processed.rows();
    for (const auto& m : sweep_models)
        total += m.archetype_centroids.rows();
    Matrix stacked(total, pm.processed.cols());
    stacked.topRows(pm.processed.rows()) = pm.processed;
    Eigen::Index at = pm.processed.rows();
    for (const auto& m : sweep_models) {
        stacked.middleRows(at, m.archetype_centroids.rows()) = m.archetype_centroids;
        at += m.archetype_centroids.rows();
    }
    ColorLayout layout;
    Matrix pos = Matrix::Zero(total, 2);
    if (total >= 3)
        pos = classical_mds_rows(stacked, 2, warnings);
    layout.degenerate = true;
    for (Eigen::Index c = 0; c < 2; ++c) {
        const double lo = pos.col(c).minCoeff(), hi = pos.col(c).maxCoeff();
        const double span = hi - lo;
        if (span > 1e-12 * std::max(1.0, std::abs(hi))) {
            pos.col(c) = (pos.col(c).array() - lo) / span;
            layout.degenerate = false;
        } else {
            pos.col(c).setConstant(0.5);
        }
    }
    layout.rows = pos.topRows(pm.processed.rows());
    at = pm.processed.rows();
    for (const auto& m : sweep_models) {
        layout.centroids[m.threshold] = pos.middleRows(at, m.archetype_centroids.rows());
        at += m.archetype_centroids.rows();
    }
    return layout;
}

enum class ColorMode { by_item, by_archetype };

inline std::string to_string(ColorMode m) { return m == ColorMode::by_item ? "by_item" : "by_archetype"; }

inline ColorMode parse_color_mode(std::string_view s)
{
    if (s == "by_item")
        return ColorMode::by_item;
    if (s == "by_archetype")
        return ColorMode::by_archetype;
    throw InvalidArgument("unknown color mode '" + std::string(s) + "'");
}

struct ColorAssignment {
    std::vector<Rgb> rows;
    std::vector<Rgb> archetypes;
};

inline ColorAssignment assign_colors(const ColorLayout& layout, const ArchetypeModel& model, ColorMode mode)
{
    ColorAssignment out;
    const auto n = layout.rows.rows();
    auto color_at = [&](double u, double v) { return layout.degenerate ? kGray : four_corner(u, v); };

    Matrix centroids;
    if (auto it = layout.centroids.find(model.threshold);
        it != layout.centroids.end() && it->second.rows() == model.archetype_centroids.rows()) {
        centroids = it->second;
    } else {
        centroids = Matrix::Zero(model.archetype_centroids.rows(), 2);
        std::vector<double> count(static_cast<std::size_t>(centroids.rows()), 0.0);
        for (Eigen::Index r = 0; r < n; ++r)
            if (const int a = model.archetype_labels[static_cast<std::size_t>(r)]; a != kNoise) {
                centroids.row(a) += layout.rows.row(r);
                count[static_cast<std::size_t>(a)] += 1.0;
            }
        for (Eigen::Index a = 0; a < centroids.rows(); ++a)
            centroids.row(a) /= count[static_cast<std::size_t>(a)];
    }
    for (Eigen::Index a = 0; a < centroids.rows(); ++a)
        out.archetypes.push_back(color_at(centroids(a, 0), centroids(a, 1)));
    for (Eigen::Index r = 0; r < n; ++r) {
        const int a = mode == ColorMode::by_archetype ? model.archetype_labels[static_cast<std::size_t>(r)] : kNoise;
        out.rows.push_back(a == kNoise ? color_at(layout.rows(r, 0), layout.rows(r, 1))
                                       : out.archetypes[static_cast<std::size_t>(a)]);
    }
    return out;
}

enum class ViolinChannel { membership, outlier, split };

inline std::string to_string(ViolinChannel c)
{
    switch (c) {
    case ViolinChannel::membership: return "membership";
    case ViolinChannel::outlier: return "outlier";
    case ViolinChannel::split: return "split";
    }
    return "membership";
}

inline ViolinChannel parse_violin_channel(std::string_view s)
{
    if (s == "membership")
        return ViolinChannel::membership;
    if (s == "outlier")
        return ViolinChannel::outlier;
    if (s == "split")
        return ViolinChannel::split;
    throw InvalidArgument("unknown violin channel '" + std::string(s) + "'");
}

inline constexpr int kViolinGrid = 64;

/// Silverman bandwidth 0.9 * min(sd, IQR/1.34) * n^(-1/5), floored at one grid step.
inline double silverman_bandwidth(const std::vector<double>& values)
{
    const double floor = 1.0 / (kViolinGrid - 1);
    if (values.size() < 2)
        return floor;
    double mean = 0.0;
    for (double v : values)
        mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values)
        var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(values.size() - 1));
    const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0))
        spread = sd;
    const double h = 0.9 * spread * std::pow(static_cast<double>(values.size()), -0.2);
    return std::max(h, floor);
}

inline std::vector<double> kde_grid(const std::vector<double>& values, double bandwidth)
{
    std::vector<double> out(kViolinGrid, 0.0);
    if (values.empty())
        return out;
    const double norm = 1.0 / (static_cast<double>(values.size()) * bandwidth * std::sqrt(2.0 * M_PI));
    for (int k = 0; k < kViolinGrid; ++k) {
        const double x = static_cast<double>(k) / (kViolinGrid - 1);
        double s = 0.0;
        for (double v : values) {
            const double z = (x - v) / bandwidth;
            s += std::exp(-0.5 * z * z);
        }
        out[static_cast<std::size_t>(k)] = s * norm;
    }
    return out;
}

struct ViolinSide {
    std::vector<double> density;
    double median = 0.0, q1 = 0.0, q3 = 0.0;
};

struct ViolinStats {
    std::string iteration_key;
    int group_id = 0;
    ViolinChannel channel = ViolinChannel::membership;
    std::size_t size = 0;
    ViolinSide primary;                  // membership or outlier; membership for split
    std::optional<ViolinSide> secondary;  // outlier side for split
    double width_scale = 1.0;
    double bandwidth = 0.0;
    bool render_as_bar = false;
};

/// Violin data for every group of the listed iterations with one run-wide width scale.
inline std::vector<ViolinStats> compute_violins(const SweepRun& run, ViolinChannel channel,
                                                const std::vector<std::string>& keys = {})
{
    std::vector<const IterationResult*> its;
    if (keys.empty())
        for (const auto& it : run.iterations)
            its.push_back(&it);
    else
        for (const auto& k : keys)
            its.push_back(&run.iterations[run.find_iteration(k)]);

    auto values_of = [](const IterationResult& it, const GroupRecord& g, bool outlier) {
        std::vector<double> v;
        for (auto i : g.members)
            v.push_back(outlier ? it.outlier[i] : it.membership[i]);
        return v;
    };
    auto global_bandwidth = [&](bool outlier) {
        std::vector<double> pooled;
        for (const auto& it : run.iterations)
            for (const auto& g : it.groups)
                if (!g.is_noise)
                    for (auto i : g.members)
                        pooled.push_back(outlier ? it.outlier[i] : it.membership[i]);
        return silverman_bandwidth(pooled);
    };
    const bool split = channel == ViolinChannel::split;
    const bool first_outlier = channel == ViolinChannel::outlier;
    const double h1 = global_bandwidth(first_outlier);
    const double h2 = split ? global_bandwidth(true) : 0.0;

    auto side = [](const std::vector<double>& v, double h, bool with_density) {
        ViolinSide s;
        if (with_density)
            s.density = kde_grid(v, h);
        if (!v.empty()) {
            s.median = quantile(v, 0.5);
            s.q1 = quantile(v, 0.25);
            s.q3 = quantile(v, 0.75);
        }
        return s;
    };

    std::vector<ViolinStats> out;
    double peak = 0.0;
    for (const auto* it : its)
        for (const auto& g : it->groups) {
            ViolinStats vs;
            vs.iteration_key = it->key;
            vs.group_id = g.group_id;
            vs.channel = channel;
            vs.size = g.members.size();
            vs.bandwidth = h1;
            vs.render_as_bar = g.is_noise;
            vs.primary = side(values_of(*it, g, first_outlier), h1, !g.is_noise);
            if (split)
                vs.secondary = side(values_of(*it, g, true), h2, !g.is_noise);
            for (double d : vs.primary.density)
                peak = std::max(peak, d);
            if (vs.secondary)
                for (double d : vs.secondary->density)
                    peak = std::max(peak, d);
            out.push_back(std::move(vs));
        }
    // the scale covers every iteration of the run, not just the listed ones
    if (!keys.empty()) {
        peak = 0.0;
        for (const auto& it : run.iterations)
            for (const auto& g : it.groups) {
                if (g.is_noise || g.members.empty())
                    continue;
                for (double d : kde_grid(values_of(it, g, first_outlier), h1))
                    peak = std::max(peak, d);
                if (split)
                    for (double d : kde_grid(values_of(it, g, true), h2))
                        peak = std::max(peak, d);
            }
    }
    const double scale = peak > 0.0 ? 1.0 / peak : 1.0;
    for (auto& vs : out)
        vs.width_scale = scale;
    return out;
}

/// 1D and 2D display positions of pooled rows plus colors from the shared layout.
struct EmbeddingLayout {
    std::string method;
    std::vector<double> positions_1d;
    Matrix positions_2d;
    std::vector<Rgb> colors;
    std::vector<Rgb> archetype_colors;
    ColorMode color_mode = ColorMode::by_item;
};

inline EmbeddingLayout compute_embedding(const PooledMatrix& pm, const std::string& method, std::uint64_t seed,
                                         const ColorAssignment& colors, ColorMode mode,
                                         const ProjectionRegistry& registry = projection_registry())
{
    EmbeddingLayout el;
    el.method = method;
    el.positions_2d = registry.run(method, pm.processed, 2, seed);
    const Matrix one = registry.run(method, pm.processed, 1, seed);
    el.positions_1d.assign(one.data(), one.data() + one.rows());
    el.colors = colors.rows;
    el.archetype_colors = colors.archetypes;
    el.color_mode = mode;
    return el;
}

}  // namespace sweepscope
