#pragma once

#include "archetypes.hpp"
#include "config.hpp"
#include "grouping.hpp"
#include "metrics.hpp"
#include "projection.hpp"
#include "text.hpp"
#include "uncertainty.hpp"

#include <atomic>
#include <thread>

namespace sweepscope {

inline constexpr const char* kEngineVersion = "sweepscope 1.0.0";

struct Failure {
    std::string key;
    std::string message;
};

/// Inputs built once per run and shared read-only by every task.
struct SharedInputs {
    ItemTable table;
    std::optional<PreparedCorpus> corpus;
    Matrix dense_tfidf;

    const Matrix& item_vectors() const { return table.kind == TableKind::text ? dense_tfidf : table.features; }
};

struct ArchetypeState {
    PooledMatrix pooled;
    ArchetypeModel model;
    std::vector<ArchetypeModel> sweep_models;
    std::vector<SweepPoint> curve;
    ColorLayout layout;
    ColorAssignment colors;  // by_item
};

struct RunOutput {
    RunConfig config;
    SharedInputs inputs;
    SweepRun run;
    std::vector<Failure> failures;
    Warnings warnings;
    std::optional<ArchetypeState> archetypes;
    std::map<std::string, EmbeddingLayout> embeddings;
};

inline std::size_t resolve_workers(std::size_t requested)
{
    if (requested > 0)
        return requested;
    const auto cores = static_cast<std::size_t>(std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, cores > 0 ? cores - 1 : 1);
}

inline SharedInputs prepare_inputs(const RunConfig& config, ItemTable raw, Warnings* warnings)
{
    SharedInputs s;
    s.table = validate_table(std::move(raw), ValidationOptions{config.preprocessing.strip_patterns}, warnings);
    const bool text = s.table.kind == TableKind::text;
    if ((config.method == Method::nmf) != text)
        throw InvalidArgument(config.method == Method::nmf ? "nmf needs a text table" :
                                                             to_string(config.method) + " needs a numeric table");
    if (text) {
        TextPipelineOptions tp;
        if (!config.preprocessing.stopwords_path.empty())
            tp.stopwords = load_stopwords(config.preprocessing.stopwords_path);
        tp.min_df = config.preprocessing.min_df;
        tp.n_bigrams = config.preprocessing.n_bigrams;
        tp.max_unigrams = config.preprocessing.max_unigrams;
        tp.max_bigrams = config.preprocessing.max_bigrams;
        s.corpus = prepare_corpus(s.table.documents, tp, warnings);
        s.dense_tfidf = Matrix(s.corpus->tfidf.values);
    }
    return s;
}

namespace detail {

inline int int_param(double v, const char* name)
{
    if (v != std::round(v) || v < 0 || v > 1e9)
        throw InvalidArgument(std::string("parameter '") + name + "' must be a non-negative integer");
    return static_cast<int>(v);
}

}  // namespace detail

/// Fits one configuration and assembles its IterationResult.
inline IterationResult run_iteration(const RunConfig& c, const SharedInputs& s, std::size_t index,
                                     Warnings* warnings = nullptr)
{
    const double value = c.values.at(index);
    const std::string& key = c.keys.at(index);
    auto p = [&](const std::string& name, double fallback) {
        return name == c.sweep_param ? value : c.fixed_or(name, fallback);
    };
    const Matrix& x = s.item_vectors();
    const auto n = x.rows() > 0 ? static_cast<std::size_t>(x.rows()) : s.table.size();

    FittedModel fm;
    MetricRecord metrics;
    std::optional<TopicEvaluation> topics;
    switch (c.method) {
    case Method::kmeans: {
        KMeansOptions o;
        o.k = detail::int_param(p("k", 3), "k");
        o.seed = static_cast<std::uint64_t>(detail::int_param(p("seed", 0), "seed"));
        o.max_iter = detail::int_param(p("max_iter", o.max_iter), "max_iter");
        o.tol = p("tol", o.tol);
        fm = fit_kmeans(x, o);
        metrics = clustering_metrics(x, std::get<KMeansModel>(fm).labels);
        break;
    }
    case Method::dbscan: {
        const double eps = p("eps", 0.5);
        fm = fit_dbscan(x, eps, detail::int_param(p("min_samples", 5), "min_samples"));
        metrics = clustering_metrics(x, std::get<DbscanModel>(fm).labels, {true});
        break;
    }
    case Method::hdbscan: {
        fm = fit_hdbscan(x, detail::int_param(p("min_cluster_size", 5), "min_cluster_size"),
                         detail::int_param(p("min_samples", 0), "min_samples"));
        metrics = clustering_metrics(x, std::get<HdbscanModel>(fm).labels, {true});
        break;
    }
    case Method::nmf: {
        NmfOptions o;
        o.k = detail::int_param(p("k", 4), "k");
        o.seed = static_cast<std::uint64_t>(detail::int_param(p("seed", 0), "seed"));
        o.max_iter = detail::int_param(p("max_iter", o.max_iter), "max_iter");
        o.tol = p("tol", o.tol);
        fm = fit_nmf(s.corpus->tfidf.values, o);
        const auto& m = std::get<NmfModel>(fm);
        TopicMetricOptions to;
        to.top_n = static_cast<std::size_t>(detail::int_param(p("top_n", 10), "top_n"));
        to.window = static_cast<std::size_t>(detail::int_param(p("window", 110), "window"));
        topics = topic_metrics(s.corpus->tfidf.values, m.W, m.H, s.corpus->docs, s.corpus->tfidf.dictionary, to, warnings);
        metrics = topics->record;
        break;
    }
    }

    const Labels labels = model_labels(fm);
    const auto unc = uncertainty_for(fm, x, warnings);
    std::vector<double> membership, outlier;
    for (const auto& u : unc) {
        membership.push_back(u.membership);
        outlier.push_back(u.outlier);
    }

    auto groups = groups_from_labels(labels, model_group_count(fm));
    const auto reps = group_representatives(fm, x);
    for (auto& g : groups) {
        for (const auto& r : reps)
            if (r.group_id == g.group_id)
                g.representative = r.vector;
        Vector reference = g.representative;
        if (topics) {
            const double norm = reference.norm();
            if (norm > 0.0)
                reference /= norm;
        }
        g.metrics = per_group_metrics(g.members, reference, x, n);
        double mm = 0.0, mo = 0.0;
        for (auto i : g.members) {
            mm += membership[i];
            mo += outlier[i];
        }
        g.metrics["mean_membership"] = g.members.empty() ? 0.0 : mm / static_cast<double>(g.members.size());
        g.metrics["mean_outlier"] = g.members.empty() ? 0.0 : mo / static_cast<double>(g.members.size());
        g.metrics["size"] = static_cast<double>(g.members.size());
        if (topics && !g.is_noise) {
            const auto t = static_cast<std::size_t>(g.group_id);
            g.metrics["coherence"] = topics->coherence[t];
            g.metrics["exclusivity"] = topics->exclusivity[t];
            g.metrics["diversity"] = topics->uniqueness[t];
        }
        if (const auto* h = std::get_if<HdbscanModel>(&fm); h && !g.is_noise)
            g.metrics["stability"] = h->stabilities[static_cast<std::size_t>(g.group_id)];
    }
    AssembleOptions ao;
    ao.allow_empty_groups = c.method == Method::nmf;
    return assemble_iteration(key, value, labels, std::move(membership), std::move(outlier), std::move(groups),
                              std::move(metrics), ao);
}

/// Display projection of pooled rows; t-SNE honours the configured perplexity.
inline Matrix project_rows(const Matrix& rows, const std::string& method, int dims, std::uint64_t seed,
                           double perplexity, Warnings* warnings = nullptr)
{
    if (method == "tsne") {
        TsneOptions o;
        o.dims = dims;
        o.seed = seed;
        o.perplexity = perplexity;
        return tsne_exact(rows, o, warnings).positions;
    }
    return projection_registry().run(method, rows, dims, seed);
}

inline EmbeddingLayout embed(const ArchetypeState& a, const std::string& method, std::uint64_t seed, double perplexity,
                             Warnings* warnings = nullptr)
{
    EmbeddingLayout el;
    el.method = method;
    el.positions_2d = project_rows(a.pooled.processed, method, 2, seed, perplexity, warnings);
    const Matrix one = project_rows(a.pooled.processed, method, 1, seed, perplexity, warnings);
    el.positions_1d.assign(one.data(), one.data() + one.rows());
    el.colors = a.colors.rows;
    el.archetype_colors = a.colors.archetypes;
    el.color_mode = ColorMode::by_item;
    return el;
}

inline ArchetypeModel empty_archetype_model(std::size_t rows, int threshold, std::size_t cols)
{
    ArchetypeModel m;
    m.threshold = threshold;
    m.archetype_labels.assign(rows, kNoise);
    m.probabilities.assign(rows, 0.0);
    m.archetype_centroids = Matrix::Zero(0, static_cast<Eigen::Index>(cols));
    return m;
}

/// Pooling, meta-clustering at every threshold, the shared color layout and colors.
inline std::optional<ArchetypeState> analyze_archetypes(const SweepRun& run, std::optional<int> threshold,
                                                        bool count_noise, Warnings* warnings = nullptr)
{
    std::size_t rows = 0;
    for (const auto& it : run.iterations)
        rows += it.groups.size();
    if (rows < 3) {
        warn(warnings, "fewer than 3 pooled groups; archetype detection skipped");
        return std::nullopt;
    }
    ArchetypeState a;
    a.pooled = pool(run, {}, warnings);
    std::vector<std::string> keys;
    for (const auto& it : run.iterations)
        keys.push_back(it.key);
    const auto n_iter = run.iterations.size();
    DetectOptions opts{count_noise};
    for (int t = 2; t + 1 <= static_cast<int>(n_iter); ++t) {
        if (static_cast<std::size_t>(t) >= a.pooled.size()) {
            a.curve.push_back({t, 0, 100.0});
            continue;
        }
        a.sweep_models.push_back(detect(a.pooled, t, opts, keys));
        a.curve.push_back({t, a.sweep_models.back().n_archetypes(), a.sweep_models.back().noise_pct()});
    }
    const int chosen = threshold.value_or(default_threshold(n_iter));
    if (chosen >= 2 && static_cast<std::size_t>(chosen) < a.pooled.size()) {
        a.model = detect(a.pooled, chosen, opts, keys);
    } else {
        warn(warnings, "archetype threshold " + std::to_string(chosen) + " is outside [2, " +
                           std::to_string(a.pooled.size() - 1) + "]; no archetypes detected");
        a.model = empty_archetype_model(a.pooled.size(), chosen, static_cast<std::size_t>(a.pooled.processed.cols()));
        a.model.count_noise_archetypes = count_noise;
    }
    a.layout = build_color_layout(a.pooled, a.sweep_models, warnings);
    a.colors = assign_colors(a.layout, a.model, ColorMode::by_item);
    return a;
}

struct SweepOptions {
    std::optional<std::size_t> workers;  // overrides the config
};

/// Runs every configuration across the worker pool and the run-level analyses.
inline RunOutput run_sweep(const RunConfig& config, ItemTable raw, const SweepOptions& options = {})
{
    RunOutput out;
    out.config = config;
    out.inputs = prepare_inputs(config, std::move(raw), &out.warnings);

    const auto n_tasks = config.values.size();
    std::vector<std::optional<IterationResult>> results(n_tasks);
    std::vector<std::string> errors(n_tasks);
    std::vector<Warnings> task_warnings(n_tasks);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) {
            try {
                results[i] = run_iteration(config, out.inputs, i, &task_warnings[i]);
            } catch (const std::exception& e) {
                errors[i] = e.what();
                if (errors[i].empty())
                    errors[i] = "unknown failure";
            }
        }
    };
    const auto n_workers = std::min(resolve_workers(options.workers.value_or(config.workers)), std::max<std::size_t>(n_tasks, 1));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_workers; ++w)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }

    out.run.method = config.method;
    out.run.sweep_param = config.sweep_param;
    for (std::size_t i = 0; i < n_tasks; ++i) {
        for (auto& w : task_warnings[i])
            out.warnings.push_back(config.keys[i] + ": " + w);
        if (results[i])
            out.run.iterations.push_back(std::move(*results[i]));
        else
            out.failures.push_back({config.keys[i], errors[i]});
    }
    out.run.visible.assign(out.run.iterations.size(), true);

    out.archetypes = analyze_archetypes(out.run, config.archetype_threshold, config.count_noise_archetypes, &out.warnings);
    if (out.archetypes) {
        std::set<std::string> methods{"mds", config.projection.method};
        for (const auto& m : methods) {
            try {
                out.embeddings[m] = embed(*out.archetypes, m, config.projection.seed, config.projection.perplexity,
                                          &out.warnings);
            } catch (const std::exception& e) {
                warn(&out.warnings, "embedding '" + m + "' failed: " + e.what());
            }
        }
    }
    return out;
}

}  // namespace sweepscope
