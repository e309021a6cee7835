#pragma once

#include "common.hpp"
#include "core_model.hpp"
#include "io.hpp"
#include "synthetic.hpp"
#include "text.hpp"

#include <optional>

namespace sweepscope {

enum class InputKind { synthetic, csv, jsonl };
enum class Storage { csv, binary };

struct InputSpec {
    InputKind kind = InputKind::synthetic;
    SyntheticSpec synthetic;
    std::string path;
    CsvTableOptions csv;
    JsonlTableOptions jsonl;
};

struct PreprocessingSpec {
    std::string stopwords_path;
    std::size_t min_df = 1;
    std::size_t n_bigrams = 0;
    std::size_t max_unigrams = 0;
    std::size_t max_bigrams = 0;
    std::vector<std::string> strip_patterns;
};

struct ProjectionSpec {
    std::string method = "mds";
    std::uint64_t seed = 0;
    double perplexity = 30.0;
};

struct RunConfig {
    Method method = Method::kmeans;
    std::string sweep_param;
    std::vector<double> values;
    std::vector<std::string> keys;
    std::map<std::string, double> fixed;
    InputSpec input;
    PreprocessingSpec preprocessing;
    std::size_t workers = 0;  // 0: max(1, cores - 1)
    std::string output;
    ProjectionSpec projection;
    std::optional<int> archetype_threshold;
    bool count_noise_archetypes = true;
    Storage storage = Storage::csv;
    Json echo;

    double fixed_or(const std::string& name, double fallback) const
    {
        auto it = fixed.find(name);
        return it == fixed.end() ? fallback : it->second;
    }
};

inline std::vector<std::string> sweepable_params(Method m)
{
    switch (m) {
    case Method::nmf: return {"k", "seed"};
    case Method::kmeans: return {"k", "seed"};
    case Method::dbscan: return {"eps", "min_samples"};
    case Method::hdbscan: return {"min_cluster_size", "min_samples"};
    }
    return {};
}

inline std::vector<std::string> fixed_params(Method m)
{
    switch (m) {
    case Method::nmf: return {"k", "seed", "max_iter", "tol", "top_n", "window"};
    case Method::kmeans: return {"k", "seed", "max_iter", "tol"};
    case Method::dbscan: return {"eps", "min_samples"};
    case Method::hdbscan: return {"min_cluster_size", "min_samples"};
    }
    return {};
}

inline bool integer_param(const std::string& name) { return name != "eps" && name != "tol"; }

/// "start + i*step" for i while the value stays within stop (inclusive, 1e-9 slack).
inline std::vector<double> range_values(double start, double stop, double step)
{
    if (!(step > 0.0))
        throw InvalidArgument("sweep step must be positive");
    if (stop < start)
        throw InvalidArgument("sweep range is empty");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> out;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(start + static_cast<double>(i) * step);
    return out;
}

inline std::string iteration_key(const std::string& param, double value)
{
    return param == "seed" ? "seed-" + format_param(value) : format_param(value);
}

namespace detail {

template <class T>
T json_get(const Json& j, const char* key, T fallback)
{
    if (!j.contains(key) || j[key].is_null())
        return fallback;
    try {
        return j[key].get<T>();
    } catch (const Json::exception& e) {
        throw InvalidArgument(std::string("config field '") + key + "': " + e.what());
    }
}

inline SyntheticSpec synthetic_from_json(const Json& j)
{
    SyntheticSpec s;
    s.kind = parse_synthetic_kind(json_get<std::string>(j, "kind", "blobs"));
    s.n_items = json_get<std::size_t>(j, "n_items", s.n_items);
    s.seed = json_get<std::uint64_t>(j, "seed", s.seed);
    s.centers = json_get<int>(j, "centers", s.centers);
    s.dims = json_get<int>(j, "dims", s.dims);
    s.separation = json_get<double>(j, "separation", s.separation);
    s.spread = json_get<double>(j, "spread", s.spread);
    s.noise_fraction = json_get<double>(j, "noise_fraction", s.noise_fraction);
    s.moon_jitter = json_get<double>(j, "moon_jitter", s.moon_jitter);
    s.topics = json_get<int>(j, "topics", s.topics);
    s.vocabulary = json_get<int>(j, "vocabulary", s.vocabulary);
    s.doc_length = json_get<int>(j, "doc_length", s.doc_length);
    s.fillers = json_get<int>(j, "fillers", s.fillers);
    s.filler_rate = json_get<double>(j, "filler_rate", s.filler_rate);
    s.duplicate_topics = json_get<bool>(j, "duplicate_topics", s.duplicate_topics);
    return s;
}

}  // namespace detail

inline SyntheticSpec parse_synthetic_spec(const Json& j)
{
    if (!j.is_object())
        throw InvalidArgument("synthetic spec must be an object");
    return detail::synthetic_from_json(j);
}

inline RunConfig parse_config(const Json& j)
{
    using detail::json_get;
    if (!j.is_object())
        throw InvalidArgument("config must be a JSON object");
    RunConfig c;
    c.echo = j;
    c.method = parse_method(json_get<std::string>(j, "method", ""));

    if (!j.contains("sweep") || !j["sweep"].is_object())
        throw InvalidArgument("config needs a 'sweep' object");
    const auto& sw = j["sweep"];
    c.sweep_param = json_get<std::string>(sw, "param", "");
    const auto allowed = sweepable_params(c.method);
    if (std::find(allowed.begin(), allowed.end(), c.sweep_param) == allowed.end())
        throw InvalidArgument("parameter '" + c.sweep_param + "' cannot be swept for " + to_string(c.method));
    if (sw.contains("values")) {
        c.values = json_get<std::vector<double>>(sw, "values", {});
    } else {
        if (!sw.contains("start") || !sw.contains("stop"))
            throw InvalidArgument("sweep needs 'values' or 'start'/'stop'");
        c.values = range_values(json_get<double>(sw, "start", 0.0), json_get<double>(sw, "stop", 0.0),
                                json_get<double>(sw, "step", 1.0));
    }
    if (c.values.empty())
        throw InvalidArgument("sweep range is empty");
    std::set<std::string> seen;
    for (double v : c.values) {
        if (!std::isfinite(v))
            throw InvalidArgument("sweep values must be finite");
        if (integer_param(c.sweep_param) && v != std::round(v))
            throw InvalidArgument("parameter '" + c.sweep_param + "' takes integer values");
        auto key = iteration_key(c.sweep_param, v);
        if (!seen.insert(key).second)
            throw InvalidArgument("duplicate sweep value " + key);
        c.keys.push_back(std::move(key));
    }

    if (j.contains("fixed")) {
        const auto fp = fixed_params(c.method);
        for (const auto& [name, value] : j["fixed"].items()) {
            if (std::find(fp.begin(), fp.end(), name) == fp.end())
                throw InvalidArgument("parameter '" + name + "' does not apply to " + to_string(c.method));
            if (name == c.sweep_param)
                throw InvalidArgument("parameter '" + name + "' is both swept and fixed");
            if (!value.is_number())
                throw InvalidArgument("fixed parameter '" + name + "' must be a number");
            c.fixed[name] = value.get<double>();
        }
    }
    if (c.sweep_param == "seed" && !c.fixed.count("k"))
        throw InvalidArgument("a seed sweep needs a fixed 'k'");
    if (c.method == Method::dbscan && !c.fixed.count(c.sweep_param == "eps" ? "min_samples" : "eps"))
        throw InvalidArgument("dbscan needs both eps and min_samples");

    if (!j.contains("input") || !j["input"].is_object())
        throw InvalidArgument("config needs an 'input' object");
    const auto& in = j["input"];
    if (in.contains("synthetic")) {
        c.input.kind = InputKind::synthetic;
        c.input.synthetic = parse_synthetic_spec(in["synthetic"]);
    } else if (in.contains("csv")) {
        c.input.kind = InputKind::csv;
        c.input.path = json_get<std::string>(in, "csv", "");
        c.input.csv.id_column = json_get<std::string>(in, "id_column", "");
        c.input.csv.text_column = json_get<std::string>(in, "text_column", "");
        c.input.csv.feature_columns = json_get<std::vector<std::string>>(in, "feature_columns", {});
        c.input.csv.attribute_columns = json_get<std::vector<std::string>>(in, "attribute_columns", {});
        c.input.csv.ignore_columns = json_get<std::vector<std::string>>(in, "ignore_columns", {});
    } else if (in.contains("jsonl")) {
        c.input.kind = InputKind::jsonl;
        c.input.path = json_get<std::string>(in, "jsonl", "");
        c.input.jsonl.id_field = json_get<std::string>(in, "id_field", "");
        c.input.jsonl.text_field = json_get<std::string>(in, "text_field", "text");
        c.input.jsonl.attribute_fields = json_get<std::vector<std::string>>(in, "attribute_fields", {});
    } else {
        throw InvalidArgument("input needs one of 'synthetic', 'csv', 'jsonl'");
    }

    if (j.contains("preprocessing")) {
        const auto& p = j["preprocessing"];
        c.preprocessing.stopwords_path = json_get<std::string>(p, "stopwords", "");
        c.preprocessing.min_df = json_get<std::size_t>(p, "min_df", 1);
        c.preprocessing.n_bigrams = json_get<std::size_t>(p, "n_bigrams", 0);
        c.preprocessing.max_unigrams = json_get<std::size_t>(p, "max_unigrams", 0);
        c.preprocessing.max_bigrams = json_get<std::size_t>(p, "max_bigrams", 0);
        c.preprocessing.strip_patterns = json_get<std::vector<std::string>>(p, "strip_patterns", {});
    }
    c.workers = json_get<std::size_t>(j, "workers", 0);
    c.output = json_get<std::string>(j, "output", "");
    if (j.contains("projection")) {
        const auto& p = j["projection"];
        c.projection.method = json_get<std::string>(p, "method", "mds");
        c.projection.seed = json_get<std::uint64_t>(p, "seed", 0);
        c.projection.perplexity = json_get<double>(p, "perplexity", 30.0);
    }
    if (j.contains("archetype_threshold") && !j["archetype_threshold"].is_null())
        c.archetype_threshold = json_get<int>(j, "archetype_threshold", 0);
    c.count_noise_archetypes = json_get<bool>(j, "count_noise_archetypes", true);
    const auto storage = json_get<std::string>(j, "storage", "csv");
    if (storage == "csv")
        c.storage = Storage::csv;
    else if (storage == "binary")
        c.storage = Storage::binary;
    else
        throw InvalidArgument("storage must be 'csv' or 'binary'");
    return c;
}

inline RunConfig load_config(const std::string& path)
{
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw InvalidArgument("config '" + path + "': " + e.what());
    }
    return parse_config(j);
}

/// Raw table for the configured input, plus ground truth for synthetic inputs.
inline ItemTable load_input(const InputSpec& in)
{
    switch (in.kind) {
    case InputKind::synthetic: {
        auto data = generate(in.synthetic);
        Attribute truth{"truth", {}};
        for (int l : data.truth)
            truth.values.push_back(std::to_string(l));
        data.table.attributes.push_back(std::move(truth));
        return std::move(data.table);
    }
    case InputKind::csv: return table_from_csv(read_file(in.path), in.csv);
    case InputKind::jsonl: return table_from_jsonl(read_file(in.path), in.jsonl);
    }
    throw InvalidArgument("unknown input kind");
}

}  // namespace sweepscope
