#pragma once

#include "common.hpp"
#include "core_model.hpp"
#include "silhouette.hpp"
#include "text.hpp"

#include <map>
#include <unordered_map>

namespace sweepscope {

/// Per-iteration metric names and preferred directions by method family.
inline std::vector<std::pair<std::string, Direction>> metric_directions(Method method)
{
    using D = Direction;
    if (method == Method::nmf)
        return {{"reconstruction_pct", D::higher_better}, {"frobenius_norm", D::lower_better},
                {"diversity", D::higher_better},          {"exclusivity", D::higher_better},
                {"coherence_cv", D::higher_better},       {"document_sparsity", D::higher_better},
                {"topic_sparsity", D::higher_better},     {"silhouette", D::higher_better}};
    std::vector<std::pair<std::string, Direction>> out = {{"sse", D::lower_better},
                                                          {"variance_explained_pct", D::higher_better},
                                                          {"silhouette", D::higher_better},
                                                          {"calinski_harabasz", D::higher_better},
                                                          {"davies_bouldin", D::lower_better}};
    if (is_density_method(method)) {
        out.emplace_back("noise_pct", D::lower_better);
        out.emplace_back("k_discovered", D::info);
    }
    return out;
}

namespace detail {

inline Direction direction_of(Method method, const std::string& name)
{
    for (const auto& [n, d] : metric_directions(method))
        if (n == name)
            return d;
    throw NotFound("metric '" + name + "' not defined for " + to_string(method));
}

}  // namespace detail

struct ClusteringMetricOptions {
    bool density = false;
    std::size_t silhouette_max_exact = 20000;
    std::uint64_t silhouette_seed = 0;
};

/// SSE, variance explained, silhouette, Calinski-Harabasz and Davies-Bouldin
/// over non-noise items, plus noise share and discovered K for density methods.
inline MetricRecord clustering_metrics(const Matrix& x, const Labels& labels, const ClusteringMetricOptions& options = {})
{
    const Method fam = options.density ? Method::dbscan : Method::kmeans;
    auto dir = [&](const char* name) { return detail::direction_of(fam, name); };
    MetricRecord rec;

    std::map<int, std::vector<std::size_t>> groups;
    std::size_t noise = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == kNoise)
            ++noise;
        else
            groups[labels[i]].push_back(i);
    }
    if (options.density) {
        rec.set("noise_pct", labels.empty() ? 0.0 : 100.0 * static_cast<double>(noise) / static_cast<double>(labels.size()),
                dir("noise_pct"));
        rec.set("k_discovered", static_cast<double>(groups.size()), dir("k_discovered"));
    }
    const std::size_t n = labels.size() - noise;
    const std::size_t k = groups.size();
    if (k == 0) {
        for (const char* name : {"sse", "variance_explained_pct", "silhouette", "calinski_harabasz", "davies_bouldin"})
            rec.set_missing(name, dir(name));
        return rec;
    }

    Vector global = Vector::Zero(x.cols());
    std::vector<Vector> centroids;
    for (const auto& [g, items] : groups) {
        Vector c = Vector::Zero(x.cols());
        for (auto i : items)
            c += x.row(static_cast<Eigen::Index>(i)).transpose();
        global += c;
        centroids.push_back(c / static_cast<double>(items.size()));
    }
    global /= static_cast<double>(n);

    double sse = 0.0, tss = 0.0, between = 0.0;
    std::vector<double> scatter;
    std::size_t gi = 0;
    for (const auto& [g, items] : groups) {
        double s = 0.0;
        for (auto i : items) {
            const Vector row = x.row(static_cast<Eigen::Index>(i)).transpose();
            sse += (row - centroids[gi]).squaredNorm();
            tss += (row - global).squaredNorm();
            s += (row - centroids[gi]).norm();
        }
        scatter.push_back(s / static_cast<double>(items.size()));
        between += static_cast<double>(items.size()) * (centroids[gi] - global).squaredNorm();
        ++gi;
    }
    rec.set("sse", sse, dir("sse"));
    rec.set("variance_explained_pct", tss > 0.0 ? std::clamp(100.0 * (1.0 - sse / tss), 0.0, 100.0) : 0.0,
            dir("variance_explained_pct"));

    if (k < 2) {
        rec.set_missing("silhouette", dir("silhouette"));
        rec.set_missing("calinski_harabasz", dir("calinski_harabasz"));
        rec.set_missing("davies_bouldin", dir("davies_bouldin"));
        return rec;
    }

    if (auto s = silhouette_score(x, labels, options.silhouette_max_exact, options.silhouette_seed)) {
        rec.set("silhouette", s->value, dir("silhouette"));
        if (s->sampled)
            rec.flags.insert("silhouette_sampled");
    } else {
        rec.set_missing("silhouette", dir("silhouette"));
    }

    if (n > k && sse > 0.0)
        rec.set("calinski_harabasz",
                (between / static_cast<double>(k - 1)) / (sse / static_cast<double>(n - k)), dir("calinski_harabasz"));
    else
        rec.set_missing("calinski_harabasz", dir("calinski_harabasz"));

    double db = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j)
                continue;
            const double d = (centroids[i] - centroids[j]).norm();
            if (d > 0.0)
                worst = std::max(worst, (scatter[i] + scatter[j]) / d);
        }
        db += worst;
    }
    rec.set("davies_bouldin", db / static_cast<double>(k), dir("davies_bouldin"));
    return rec;
}

/// Sliding-window co-occurrence statistics for a fixed term set.
struct WindowCounts {
    std::size_t windows = 0;
    std::vector<std::size_t> single;
    Eigen::Matrix<std::size_t, Eigen::Dynamic, Eigen::Dynamic> joint;
};

/// Boolean sliding windows of `window` tokens; a shorter non-empty document is one window.
inline WindowCounts count_windows(const std::vector<std::string>& terms, const TokenizedDocs& docs, std::size_t window)
{
    if (window < 1)
        throw InvalidArgument("window must be >= 1");
    std::unordered_map<std::string, std::size_t> id;
    for (std::size_t i = 0; i < terms.size(); ++i)
        id.emplace(terms[i], i);
    const auto m = terms.size();
    WindowCounts wc;
    wc.single.assign(m, 0);
    wc.joint.setZero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    std::vector<std::size_t> in_window(m, 0);
    std::vector<std::size_t> present;

    auto tally = [&] {
        present.clear();
        for (std::size_t t = 0; t < m; ++t)
            if (in_window[t] > 0)
                present.push_back(t);
        for (std::size_t a = 0; a < present.size(); ++a) {
            ++wc.single[present[a]];
            for (std::size_t b = 0; b < present.size(); ++b)
                ++wc.joint(static_cast<Eigen::Index>(present[a]), static_cast<Eigen::Index>(present[b]));
        }
        ++wc.windows;
    };

    for (const auto& doc : docs) {
        if (doc.empty())
            continue;
        std::vector<long> ids(doc.size(), -1);
        for (std::size_t i = 0; i < doc.size(); ++i)
            if (auto it = id.find(doc[i]); it != id.end())
                ids[i] = static_cast<long>(it->second);
        std::fill(in_window.begin(), in_window.end(), 0);
        const std::size_t span = std::min(window, doc.size());
        for (std::size_t i = 0; i < span; ++i)
            if (ids[i] >= 0)
                ++in_window[static_cast<std::size_t>(ids[i])];
        tally();
        for (std::size_t start = 1; start + window <= doc.size(); ++start) {
            if (ids[start - 1] >= 0)
                --in_window[static_cast<std::size_t>(ids[start - 1])];
            if (ids[start + window - 1] >= 0)
                ++in_window[static_cast<std::size_t>(ids[start + window - 1])];
            tally();
        }
    }
    return wc;
}

inline constexpr double kNpmiEpsilon = 1e-12;

/// Normalized PMI from window probabilities with additive smoothing.
inline double npmi(double p_joint, double p_a, double p_b)
{
    const double pmi = std::log((p_joint + kNpmiEpsilon) / (p_a * p_b));
    return pmi / -std::log(p_joint + kNpmiEpsilon);
}

/// C_V coherence per topic: one-set segmentation, NPMI context vectors, cosine.
inline std::vector<double> coherence_cv(const std::vector<std::vector<std::string>>& topics, const TokenizedDocs& docs,
                                        std::size_t window = 110, Warnings* warnings = nullptr)
{
    std::vector<std::string> uni;
    std::unordered_map<std::string, std::size_t> id;
    for (const auto& topic : topics)
        for (const auto& t : topic)
            if (id.emplace(t, uni.size()).second)
                uni.push_back(t);
    const auto wc = count_windows(uni, docs, window);
    const double n = static_cast<double>(wc.windows);

    std::vector<double> out;
    for (const auto& topic : topics) {
        const auto m = topic.size();
        if (m == 0) {
            out.push_back(0.0);
            continue;
        }
        Matrix ctx = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        for (std::size_t a = 0; a < m; ++a) {
            const auto ia = id.at(topic[a]);
            if (wc.single[ia] == 0) {
                warn(warnings, "term '" + topic[a] + "' occurs in no window");
                continue;
            }
            for (std::size_t b = 0; b < m; ++b) {
                const auto ib = id.at(topic[b]);
                if (wc.single[ib] == 0)
                    continue;
                const double pa = static_cast<double>(wc.single[ia]) / n;
                const double pb = static_cast<double>(wc.single[ib]) / n;
                const double pab = static_cast<double>(wc.joint(static_cast<Eigen::Index>(ia), static_cast<Eigen::Index>(ib))) / n;
                ctx(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = npmi(pab, pa, pb);
            }
        }
        const Vector total = ctx.colwise().sum().transpose();
        double sum = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            const Vector v = ctx.row(static_cast<Eigen::Index>(a)).transpose();
            const double denom = v.norm() * total.norm();
            sum += denom > 0.0 ? v.dot(total) / denom : 0.0;
        }
        out.push_back(sum / static_cast<double>(m));
    }
    return out;
}

/// Hoyer sparseness; zero rows score 0.
inline double hoyer_sparseness(const Eigen::Ref<const Vector>& x)
{
    const auto n = static_cast<double>(x.size());
    if (n < 2)
        return 0.0;
    const double l2 = x.norm();
    if (!(l2 > 0.0))
        return 0.0;
    const double l1 = x.cwiseAbs().sum();
    return std::clamp((std::sqrt(n) - l1 / l2) / (std::sqrt(n) - 1.0), 0.0, 1.0);
}

struct TopicMetricOptions {
    std::size_t top_n = 10;
    std::size_t window = 110;
    std::size_t silhouette_max_exact = 20000;
    std::uint64_t silhouette_seed = 0;
};

struct TopicEvaluation {
    MetricRecord record;
    std::vector<std::vector<std::size_t>> top_terms;  // term indices per topic
    std::vector<double> coherence;
    std::vector<double> exclusivity;
    std::vector<double> uniqueness;  // share of a topic's top terms in no other top list
};

inline std::vector<std::vector<std::size_t>> topic_top_terms(const Matrix& h, std::size_t top_n)
{
    std::vector<std::vector<std::size_t>> out;
    for (Eigen::Index k = 0; k < h.rows(); ++k) {
        std::vector<double> row(h.row(k).data(), h.row(k).data() + h.cols());
        out.push_back(top_indices(row, top_n));
    }
    return out;
}

/// Distinct terms across all topics' top lists over (top_n * K).
inline double topic_diversity(const std::vector<std::vector<std::size_t>>& top)
{
    std::set<std::size_t> distinct;
    std::size_t slots = 0;
    for (const auto& t : top) {
        distinct.insert(t.begin(), t.end());
        slots += t.size();
    }
    return slots == 0 ? 0.0 : static_cast<double>(distinct.size()) / static_cast<double>(slots);
}

/// Mean over a topic's top terms of H[k,t] / sum over topics of H[.,t].
inline std::vector<double> topic_exclusivity(const Matrix& h, const std::vector<std::vector<std::size_t>>& top)
{
    const Vector col_sum = h.colwise().sum().transpose();
    std::vector<double> out;
    for (std::size_t k = 0; k < top.size(); ++k) {
        double s = 0.0;
        for (auto t : top[k]) {
            const double total = col_sum[static_cast<Eigen::Index>(t)];
            s += total > 0.0 ? h(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) / total
                             : 1.0 / static_cast<double>(h.rows());
        }
        out.push_back(top[k].empty() ? 0.0 : s / static_cast<double>(top[k].size()));
    }
    return out;
}

inline TopicEvaluation topic_metrics(const SparseMatrix& v, const Matrix& w, const Matrix& h, const TokenizedDocs& docs,
                                     const Dictionary& dict, const TopicMetricOptions& options = {},
                                     Warnings* warnings = nullptr)
{
    auto dir = [](const char* name) { return detail::direction_of(Method::nmf, name); };
    TopicEvaluation ev;
    const Matrix dense = Matrix(v);
    const double v_norm = dense.norm();
    const double resid = (dense - w * h).norm();
    ev.record.set("reconstruction_pct", v_norm > 0.0 ? 100.0 * (1.0 - resid / v_norm) : 0.0, dir("reconstruction_pct"));
    ev.record.set("frobenius_norm", resid, dir("frobenius_norm"));

    const std::size_t top_n = std::min<std::size_t>(options.top_n, static_cast<std::size_t>(h.cols()));
    ev.top_terms = topic_top_terms(h, top_n);
    ev.record.set("diversity", topic_diversity(ev.top_terms), dir("diversity"));

    ev.exclusivity = topic_exclusivity(h, ev.top_terms);
    double excl = 0.0;
    for (double e : ev.exclusivity)
        excl += e;
    ev.record.set("exclusivity", excl / static_cast<double>(ev.exclusivity.size()), dir("exclusivity"));

    std::vector<std::vector<std::string>> words;
    for (const auto& t : ev.top_terms) {
        std::vector<std::string> ws;
        for (auto i : t)
            ws.push_back(dict.terms[i]);
        words.push_back(std::move(ws));
    }
    ev.coherence = coherence_cv(words, docs, options.window, warnings);
    double coh = 0.0;
    for (double c : ev.coherence)
        coh += c;
    ev.record.set("coherence_cv", coh / static_cast<double>(ev.coherence.size()), dir("coherence_cv"));

    std::map<std::size_t, std::size_t> owners;
    for (const auto& t : ev.top_terms)
        for (auto i : t)
            ++owners[i];
    for (const auto& t : ev.top_terms) {
        std::size_t unique = 0;
        for (auto i : t)
            unique += owners[i] == 1 ? 1 : 0;
        ev.uniqueness.push_back(t.empty() ? 0.0 : static_cast<double>(unique) / static_cast<double>(t.size()));
    }

    double ds = 0.0, ts = 0.0;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        ds += hoyer_sparseness(w.row(r).transpose());
    for (Eigen::Index r = 0; r < h.rows(); ++r)
        ts += hoyer_sparseness(h.row(r).transpose());
    ev.record.set("document_sparsity", w.rows() ? ds / static_cast<double>(w.rows()) : 0.0, dir("document_sparsity"));
    ev.record.set("topic_sparsity", h.rows() ? ts / static_cast<double>(h.rows()) : 0.0, dir("topic_sparsity"));

    Labels labels(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index d = 0; d < w.rows(); ++d) {
        Eigen::Index best = 0;
        for (Eigen::Index t = 1; t < w.cols(); ++t)
            if (w(d, t) > w(d, best))
                best = t;
        labels[static_cast<std::size_t>(d)] = static_cast<int>(best);
    }
    if (auto s = silhouette_score(dense, labels, options.silhouette_max_exact, options.silhouette_seed)) {
        ev.record.set("silhouette", s->value, dir("silhouette"));
        if (s->sampled)
            ev.record.flags.insert("silhouette_sampled");
    } else {
        ev.record.set_missing("silhouette", dir("silhouette"));
    }
    return ev;
}

/// Prevalence and distance statistics of one group against its representative.
/// `items` are the vectors the representative lives with (features or tf-idf rows).
inline std::map<std::string, double> per_group_metrics(const std::vector<std::size_t>& members, const Vector& representative,
                                                       const Matrix& items, std::size_t n_items)
{
    std::map<std::string, double> out;
    out["prevalence"] = n_items == 0 ? 0.0 : static_cast<double>(members.size()) / static_cast<double>(n_items);
    double sum = 0.0, top = 0.0;
    for (auto i : members) {
        const double d = (items.row(static_cast<Eigen::Index>(i)).transpose() - representative).norm();
        sum += d;
        top = std::max(top, d);
    }
    out["mean_distance"] = members.empty() ? 0.0 : sum / static_cast<double>(members.size());
    out["max_distance"] = top;
    return out;
}

}  // namespace sweepscope
