#pragma once

#include "io.hpp"
#include "sweep.hpp"
#include "transitions.hpp"

#include <bit>
#include <chrono>
#include <ctime>
#include <filesystem>

namespace sweepscope {

namespace fs = std::filesystem;

/// Thrown when a run directory is still being written.
class RunInProgress : public Error {
public:
    using Error::Error;
};

inline Json metric_json(const Metric& m)
{
    Json j;
    j["value"] = m.missing ? Json(nullptr) : Json(m.value);
    j["direction"] = to_string(m.direction);
    j["missing"] = m.missing;
    return j;
}

inline Json metrics_json(const MetricRecord& r)
{
    Json values = Json::object();
    for (const auto& [name, m] : r.values)
        values[name] = metric_json(m);
    return {{"values", values}, {"flags", std::vector<std::string>(r.flags.begin(), r.flags.end())}};
}

inline Direction parse_direction(std::string_view s)
{
    if (s == "higher_better")
        return Direction::higher_better;
    if (s == "lower_better")
        return Direction::lower_better;
    return Direction::info;
}

inline MetricRecord metrics_from_json(const Json& j)
{
    MetricRecord r;
    for (const auto& [name, m] : j.at("values").items()) {
        const auto d = parse_direction(m.at("direction").get<std::string>());
        if (m.at("missing").get<bool>())
            r.set_missing(name, d);
        else
            r.set(name, m.at("value").get<double>(), d);
    }
    for (const auto& f : j.at("flags"))
        r.flags.insert(f.get<std::string>());
    return r;
}

inline Json vector_json(const Eigen::Ref<const Vector>& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const Json& j)
{
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Json matrix_json(const Matrix& m)
{
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        rows.push_back(vector_json(m.row(r).transpose()));
    return rows;
}

inline Matrix matrix_from_json(const Json& j, Eigen::Index cols_if_empty = 0)
{
    if (j.empty())
        return Matrix::Zero(0, cols_if_empty);
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    Matrix m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t r = 0; r < j.size(); ++r)
        m.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r]).transpose();
    return m;
}

inline Json groups_json(const IterationResult& it)
{
    Json arr = Json::array();
    for (const auto& g : it.groups)
        arr.push_back({{"group_id", g.group_id},
                       {"label", g.label()},
                       {"is_noise", g.is_noise},
                       {"size", g.members.size()},
                       {"members", g.members},
                       {"representative", vector_json(g.representative)},
                       {"metrics", g.metrics}});
    return arr;
}

inline Json archetypes_json(const ArchetypeModel& m, std::size_t n_iterations)
{
    return {{"threshold", m.threshold},
            {"default_threshold", default_threshold(n_iterations)},
            {"min_samples", m.min_samples},
            {"count_noise_archetypes", m.count_noise_archetypes},
            {"n_archetypes", m.n_archetypes()},
            {"n_cluster_archetypes", m.n_cluster_archetypes()},
            {"noise_pct", m.noise_pct()},
            {"labels", m.archetype_labels},
            {"probabilities", m.probabilities},
            {"centroids", matrix_json(m.archetype_centroids)},
            {"noise_archetype", m.noise_archetype},
            {"sizes", m.archetype_sizes},
            {"complete_iterations", std::vector<std::string>(m.complete_iterations.begin(), m.complete_iterations.end())}};
}

inline ArchetypeModel archetypes_from_json(const Json& j, Eigen::Index dims)
{
    ArchetypeModel m;
    m.threshold = j.at("threshold").get<int>();
    m.min_samples = j.at("min_samples").get<int>();
    m.count_noise_archetypes = j.at("count_noise_archetypes").get<bool>();
    m.archetype_labels = j.at("labels").get<Labels>();
    m.probabilities = j.at("probabilities").get<std::vector<double>>();
    m.archetype_centroids = matrix_from_json(j.at("centroids"), dims);
    m.noise_archetype = j.at("noise_archetype").get<std::vector<bool>>();
    m.archetype_sizes = j.at("sizes").get<std::vector<std::size_t>>();
    for (const auto& k : j.at("complete_iterations"))
        m.complete_iterations.insert(k.get<std::string>());
    return m;
}

inline Json curve_json(const std::vector<SweepPoint>& curve)
{
    Json arr = Json::array();
    for (const auto& p : curve)
        arr.push_back({{"threshold", p.threshold}, {"archetypes", p.archetypes}, {"noise_pct", p.noise_pct}});
    return arr;
}

inline Json layout_json(const ColorLayout& l)
{
    Json cents = Json::object();
    for (const auto& [t, m] : l.centroids)
        cents[std::to_string(t)] = matrix_json(m);
    return {{"degenerate", l.degenerate}, {"rows", matrix_json(l.rows)}, {"centroids", cents}};
}

inline ColorLayout layout_from_json(const Json& j)
{
    ColorLayout l;
    l.degenerate = j.at("degenerate").get<bool>();
    l.rows = matrix_from_json(j.at("rows"), 2);
    for (const auto& [t, m] : j.at("centroids").items())
        l.centroids[std::stoi(t)] = matrix_from_json(m, 2);
    return l;
}

inline Json colors_json(const PooledMatrix& pm, const ColorAssignment& c)
{
    Json rows = Json::array();
    for (std::size_t r = 0; r < pm.size(); ++r)
        rows.push_back({{"iteration", pm.rows[r].iteration_key}, {"group", pm.rows[r].group_id}, {"color", to_hex(c.rows[r])}});
    Json arch = Json::array();
    for (const auto& a : c.archetypes)
        arch.push_back(to_hex(a));
    return {{"rows", rows}, {"archetypes", arch}};
}

inline Json embedding_json(const PooledMatrix& pm, const EmbeddingLayout& el, const ArchetypeModel& model,
                           const std::vector<double>& size_values)
{
    Json rows = Json::array();
    for (std::size_t r = 0; r < pm.size(); ++r)
        rows.push_back({{"iteration", pm.rows[r].iteration_key},
                        {"group", pm.rows[r].group_id},
                        {"is_noise", pm.rows[r].is_noise},
                        {"x", el.positions_2d(static_cast<Eigen::Index>(r), 0)},
                        {"y", el.positions_2d(static_cast<Eigen::Index>(r), 1)},
                        {"x1d", el.positions_1d[r]},
                        {"color", to_hex(el.colors[r])},
                        {"archetype", model.archetype_labels[r]},
                        {"size_value", size_values[r]}});
    Json arch = Json::array();
    for (const auto& a : el.archetype_colors)
        arch.push_back(to_hex(a));
    return {{"method", el.method}, {"color_mode", to_string(el.color_mode)}, {"rows", rows}, {"archetype_colors", arch}};
}

inline Json transition_json(const TransitionMatrix& tm)
{
    Json counts = Json::array();
    for (std::size_t i = 0; i < tm.rows(); ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < tm.cols(); ++j)
            row.push_back(tm.at(i, j));
        counts.push_back(row);
    }
    return {{"from", tm.from_key}, {"to", tm.to_key}, {"from_groups", tm.from_groups}, {"to_groups", tm.to_groups},
            {"counts", counts}};
}

inline std::string pair_file_name(const std::string& a, const std::string& b) { return a + "__" + b + ".json"; }

namespace detail {

inline std::string le_doubles(const Matrix& m)
{
    std::string out;
    out.reserve(static_cast<std::size_t>(m.size()) * 8);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const auto bits = std::bit_cast<std::uint64_t>(m(r, c));
            for (int b = 0; b < 8; ++b)
                out += static_cast<char>((bits >> (8 * b)) & 0xff);
        }
    return out;
}

inline Matrix le_doubles_from(std::string_view bytes, Eigen::Index rows)
{
    if (rows == 0 || bytes.size() % 8 != 0 || (bytes.size() / 8) % static_cast<std::size_t>(rows) != 0)
        throw InvalidArgument("binary pooled matrix has an unexpected size");
    const auto cols = static_cast<Eigen::Index>(bytes.size() / 8 / static_cast<std::size_t>(rows));
    Matrix m(rows, cols);
    std::size_t at = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b)
                bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at++])) << (8 * b);
            m(r, c) = std::bit_cast<double>(bits);
        }
    return m;
}

inline std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

/// Writes files under a run directory and records their hashes.
class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path root) : root_(std::move(root)) {}

    void write(const std::string& rel, const std::string& content)
    {
        const auto path = root_ / rel;
        fs::create_directories(path.parent_path());
        write_file(path.string(), content);
        inventory_[rel] = sha256_hex(content);
    }

    void write_json(const std::string& rel, const Json& j) { write(rel, j.dump(1) + "\n"); }

    const std::map<std::string, std::string>& inventory() const { return inventory_; }
    const fs::path& root() const { return root_; }

    void load_inventory(const Json& inv)
    {
        for (const auto& [k, v] : inv.items())
            inventory_[k] = v.get<std::string>();
    }

private:
    fs::path root_;
    std::map<std::string, std::string> inventory_;
};

inline Json manifest_json(const RunOutput& out, const std::string& status, const std::map<std::string, std::string>& inventory)
{
    Json failures = Json::array();
    for (const auto& f : out.failures)
        failures.push_back({{"key", f.key}, {"message", f.message}});
    std::vector<std::string> keys;
    for (const auto& it : out.run.iterations)
        keys.push_back(it.key);
    return {{"status", status},
            {"engine_version", kEngineVersion},
            {"created", detail::utc_timestamp()},
            {"config", out.config.echo},
            {"method", to_string(out.run.method)},
            {"sweep_param", out.run.sweep_param},
            {"requested_keys", out.config.keys},
            {"keys", keys},
            {"n_items", out.inputs.table.size()},
            {"failures", failures},
            {"warnings", out.warnings},
            {"inventory", inventory}};
}

inline std::string items_csv(const ItemTable& t)
{
    CsvRow header{"item_id"};
    for (const auto& a : t.attributes)
        header.push_back(a.name);
    std::string s = csv_line(header);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CsvRow row{t.item_ids[i]};
        for (const auto& a : t.attributes)
            row.push_back(a.values[i]);
        s += csv_line(row);
    }
    return s;
}

/// Persists every artifact of a run; the manifest flips from running to complete last.
inline std::map<std::string, std::string> persist_run(const RunOutput& out, const std::string& dir)
{
    const fs::path root(dir);
    fs::create_directories(root);
    write_file((root / "manifest.json").string(), manifest_json(out, "running", {}).dump(1) + "\n");
    ArtifactWriter w(root);
    const auto& ids = out.inputs.table.item_ids;

    w.write("run/items.csv", items_csv(out.inputs.table));
    for (const auto& it : out.run.iterations) {
        const std::string base = "iterations/" + it.key + "/";
        std::string a = csv_line({"item_id", "group_id"});
        std::string u = csv_line({"item_id", "membership", "outlier"});
        for (std::size_t i = 0; i < it.n_items(); ++i) {
            a += csv_line({ids[i], std::to_string(it.assignments[i])});
            u += csv_line({ids[i], format_double(it.membership[i]), format_double(it.outlier[i])});
        }
        w.write(base + "assignments.csv", a);
        w.write(base + "uncertainty.csv", u);
        w.write_json(base + "groups.json", groups_json(it));
        w.write_json(base + "metrics.json", {{"key", it.key}, {"param_value", it.param_value}, {"metrics", metrics_json(it.metrics)}});
    }
    for (std::size_t i = 0; i + 1 < out.run.iterations.size(); ++i) {
        const auto& a = out.run.iterations[i];
        const auto& b = out.run.iterations[i + 1];
        w.write_json("run/transitions/" + pair_file_name(a.key, b.key), transition_json(overlap(a, b)));
    }
    if (out.inputs.corpus) {
        std::string tokens;
        for (const auto& d : out.inputs.corpus->docs)
            tokens += Json(d).dump() + "\n";
        w.write("run/tokens.jsonl", tokens);
        const auto& dict = out.inputs.corpus->tfidf.dictionary;
        std::string dc = csv_line({"term", "doc_freq", "is_bigram"});
        for (std::size_t t = 0; t < dict.size(); ++t)
            dc += csv_line({dict.terms[t], std::to_string(dict.doc_freq[t]), dict.is_bigram[t] ? "1" : "0"});
        w.write("run/dictionary.csv", dc);
    }
    if (out.archetypes) {
        const auto& a = *out.archetypes;
        const auto& pm = a.pooled;
        CsvRow head{"iteration_key", "group_id", "is_noise", "group_size"};
        const bool binary = out.config.storage == Storage::binary;
        if (!binary)
            for (Eigen::Index c = 0; c < pm.processed.cols(); ++c)
                head.push_back("p" + std::to_string(c));
        std::string s = csv_line(head);
        for (std::size_t r = 0; r < pm.size(); ++r) {
            CsvRow row{pm.rows[r].iteration_key, std::to_string(pm.rows[r].group_id), pm.rows[r].is_noise ? "1" : "0",
                       std::to_string(pm.rows[r].group_size)};
            if (!binary)
                for (Eigen::Index c = 0; c < pm.processed.cols(); ++c)
                    row.push_back(format_double(pm.processed(static_cast<Eigen::Index>(r), c)));
            s += csv_line(row);
        }
        if (binary) {
            w.write("run/pooled_index.csv", s);
            w.write("run/pooled.f64", detail::le_doubles(pm.processed));
        } else {
            w.write("run/pooled.csv", s);
        }
        w.write_json("run/archetypes.json", archetypes_json(a.model, out.run.iterations.size()));
        w.write_json("run/sweep_curve.json", curve_json(a.curve));
        w.write_json("run/color_layout.json", layout_json(a.layout));
        w.write_json("run/colors.json", colors_json(pm, a.colors));
        const auto sizes = size_attribute(out.run, pm, "group_size");
        for (const auto& [m, el] : out.embeddings)
            w.write_json("run/embedding-" + m + ".json", embedding_json(pm, el, a.model, sizes));
    }
    fs::create_directories(root / "run" / "classes");
    write_file((root / "manifest.json").string(), manifest_json(out, "complete", w.inventory()).dump(1) + "\n");
    return w.inventory();
}

/// Everything the service and the CLI replay commands need from a run directory.
struct LoadedRun {
    fs::path dir;
    Json manifest;
    SweepRun run;
    std::vector<std::string> item_ids;
    std::vector<Attribute> attributes;
    std::optional<PooledMatrix> pooled;
    std::optional<ArchetypeModel> archetypes;
    std::vector<SweepPoint> curve;
    ColorLayout layout;
    ColorAssignment colors;
    TokenizedDocs tokens;
    std::vector<std::string> terms;
    std::uint64_t projection_seed = 0;
    double perplexity = 30.0;
};

inline Json read_json(const fs::path& p)
{
    try {
        return Json::parse(read_file(p.string()));
    } catch (const Json::parse_error& e) {
        throw InvalidArgument("'" + p.string() + "': " + e.what());
    }
}

inline LoadedRun load_run(const std::string& dir)
{
    LoadedRun lr;
    lr.dir = dir;
    const auto mpath = lr.dir / "manifest.json";
    if (!fs::exists(mpath))
        throw NotFound("no manifest in '" + dir + "'");
    lr.manifest = read_json(mpath);
    if (lr.manifest.value("status", "") != "complete")
        throw RunInProgress("run in '" + dir + "' is still computing");
    lr.run.method = parse_method(lr.manifest.at("method").get<std::string>());
    lr.run.sweep_param = lr.manifest.at("sweep_param").get<std::string>();
    const auto& cfg = lr.manifest.at("config");
    if (cfg.contains("projection")) {
        lr.projection_seed = cfg["projection"].value("seed", std::uint64_t{0});
        lr.perplexity = cfg["projection"].value("perplexity", 30.0);
    }

    const auto items = read_csv((lr.dir / "run/items.csv").string());
    if (items.empty())
        throw InvalidArgument("items.csv is empty");
    for (std::size_t c = 1; c < items.front().size(); ++c)
        lr.attributes.push_back({items.front()[c], {}});
    for (std::size_t r = 1; r < items.size(); ++r) {
        lr.item_ids.push_back(items[r][0]);
        for (std::size_t c = 1; c < items[r].size(); ++c)
            lr.attributes[c - 1].values.push_back(items[r][c]);
    }
    const auto n = lr.item_ids.size();

    for (const auto& kj : lr.manifest.at("keys")) {
        const auto key = kj.get<std::string>();
        const auto base = lr.dir / "iterations" / key;
        IterationResult it;
        it.key = key;
        const auto mj = read_json(base / "metrics.json");
        it.param_value = mj.at("param_value").get<double>();
        it.metrics = metrics_from_json(mj.at("metrics"));
        const auto a = read_csv((base / "assignments.csv").string());
        const auto u = read_csv((base / "uncertainty.csv").string());
        if (a.size() != n + 1 || u.size() != n + 1)
            throw InvalidArgument("iteration '" + key + "' has the wrong number of rows");
        for (std::size_t i = 1; i <= n; ++i) {
            it.assignments.push_back(std::stoi(a[i][1]));
            it.membership.push_back(parse_double(u[i][1]));
            it.outlier.push_back(parse_double(u[i][2]));
        }
        for (const auto& gj : read_json(base / "groups.json")) {
            GroupRecord g;
            g.group_id = gj.at("group_id").get<int>();
            g.iteration_key = key;
            g.is_noise = gj.at("is_noise").get<bool>();
            g.members = gj.at("members").get<std::vector<std::size_t>>();
            g.representative = vector_from_json(gj.at("representative"));
            g.metrics = gj.at("metrics").get<std::map<std::string, double>>();
            it.groups.push_back(std::move(g));
        }
        lr.run.iterations.push_back(std::move(it));
    }
    lr.run.visible.assign(lr.run.iterations.size(), true);

    const bool binary = fs::exists(lr.dir / "run/pooled.f64");
    const auto pooled_index = lr.dir / (binary ? "run/pooled_index.csv" : "run/pooled.csv");
    if (fs::exists(pooled_index)) {
        PooledMatrix pm;
        pm.n_iterations = lr.run.iterations.size();
        const auto rows = read_csv(pooled_index.string());
        for (std::size_t r = 1; r < rows.size(); ++r)
            pm.rows.push_back({rows[r][0], std::stoi(rows[r][1]), rows[r][2] == "1",
                               static_cast<std::size_t>(std::stoull(rows[r][3]))});
        if (binary) {
            pm.processed = detail::le_doubles_from(read_file((lr.dir / "run/pooled.f64").string()),
                                                   static_cast<Eigen::Index>(pm.rows.size()));
        } else {
            const auto cols = rows.front().size() - 4;
            pm.processed.resize(static_cast<Eigen::Index>(pm.rows.size()), static_cast<Eigen::Index>(cols));
            for (std::size_t r = 1; r < rows.size(); ++r)
                for (std::size_t c = 0; c < cols; ++c)
                    pm.processed(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = parse_double(rows[r][4 + c]);
        }
        pm.retained_dims = static_cast<std::size_t>(pm.processed.cols());
        lr.archetypes = archetypes_from_json(read_json(lr.dir / "run/archetypes.json"), pm.processed.cols());
        for (const auto& p : read_json(lr.dir / "run/sweep_curve.json"))
            lr.curve.push_back({p.at("threshold").get<int>(), p.at("archetypes").get<int>(), p.at("noise_pct").get<double>()});
        lr.layout = layout_from_json(read_json(lr.dir / "run/color_layout.json"));
        lr.colors = assign_colors(lr.layout, *lr.archetypes, ColorMode::by_item);
        lr.pooled = std::move(pm);
    }

    if (fs::exists(lr.dir / "run/tokens.jsonl")) {
        const auto text = read_file((lr.dir / "run/tokens.jsonl").string());
        std::size_t start = 0;
        while (start < text.size()) {
            auto end = text.find('\n', start);
            if (end == std::string::npos)
                end = text.size();
            if (end > start)
                lr.tokens.push_back(Json::parse(text.substr(start, end - start)).get<std::vector<std::string>>());
            start = end + 1;
        }
        const auto dict = read_csv((lr.dir / "run/dictionary.csv").string());
        for (std::size_t r = 1; r < dict.size(); ++r)
            lr.terms.push_back(dict[r][0]);
    }
    return lr;
}

/// Rewrites one artifact of a finished run and refreshes its manifest hash.
inline void update_artifact(const std::string& dir, const std::string& rel, const std::string& content)
{
    const fs::path root(dir);
    auto manifest = read_json(root / "manifest.json");
    ArtifactWriter w(root);
    w.write(rel, content);
    manifest["inventory"][rel] = w.inventory().at(rel);
    write_file((root / "manifest.json").string(), manifest.dump(1) + "\n");
}

/// Inventory entries whose file is missing or whose hash differs.
inline std::vector<std::string> verify_inventory(const std::string& dir)
{
    const fs::path root(dir);
    const auto manifest = read_json(root / "manifest.json");
    std::vector<std::string> bad;
    for (const auto& [rel, hash] : manifest.at("inventory").items()) {
        const auto p = root / rel;
        if (!fs::exists(p) || sha256_hex(read_file(p.string())) != hash.get<std::string>())
            bad.push_back(rel);
    }
    return bad;
}

}  // namespace sweepscope
