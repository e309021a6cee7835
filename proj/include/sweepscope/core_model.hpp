#pragma once

#include "common.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sweepscope {

enum class TableKind { numeric, text };

enum class Method { nmf, kmeans, dbscan, hdbscan };

inline std::string to_string(Method m)
{
    switch (m) {
    case Method::nmf: return "nmf";
    case Method::kmeans: return "kmeans";
    case Method::dbscan: return "dbscan";
    case Method::hdbscan: return "hdbscan";
    }
    return "unknown";
}

inline Method parse_method(std::string_view name)
{
    if (name == "nmf") return Method::nmf;
    if (name == "kmeans") return Method::kmeans;
    if (name == "dbscan") return Method::dbscan;
    if (name == "hdbscan") return Method::hdbscan;
    throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

inline bool is_density_method(Method m) { return m == Method::dbscan || m == Method::hdbscan; }

/// A named per-item column carried through to exports untouched.
struct Attribute {
    std::string name;
    std::vector<std::string> values;
};

/// The immutable input of a sweep: a numeric feature matrix or a corpus.
struct ItemTable {
    TableKind kind = TableKind::numeric;
    std::vector<std::string> item_ids;

    Matrix features;
    std::vector<std::string> feature_names;

    std::vector<std::string> documents;

    std::vector<Attribute> attributes;

    // Standardization record; persisted but never applied to new items.
    std::vector<double> column_means;
    std::vector<double> column_stds;
    std::vector<std::string> dropped_columns;

    std::size_t size() const { return item_ids.size(); }
};

struct ValidationOptions {
    std::vector<std::string> strip_patterns;
};

inline void strip_all(std::string& text, const std::string& pattern)
{
    if (pattern.empty())
        return;
    std::size_t pos = 0;
    while ((pos = text.find(pattern, pos)) != std::string::npos)
        text.erase(pos, pattern.size());
}

/// Standardizes numeric tables (dropping constant columns) and cleans corpora.
inline ItemTable validate_table(ItemTable table, const ValidationOptions& options = {}, Warnings* warnings = nullptr)
{
    const bool has_features = table.features.size() > 0;
    const bool has_docs = !table.documents.empty();
    if (has_features == has_docs)
        throw InvalidArgument("exactly one of features or documents must be populated");

    const std::size_t n = has_features ? static_cast<std::size_t>(table.features.rows()) : table.documents.size();
    if (table.item_ids.empty()) {
        table.item_ids.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            table.item_ids.push_back(std::to_string(i));
    }
    if (table.item_ids.size() != n)
        throw InvalidArgument("item id count does not match row count");
    if (n < 2)
        throw InvalidArgument("a table needs at least 2 items");
    {
        std::unordered_set<std::string> seen;
        for (const auto& id : table.item_ids)
            if (!seen.insert(id).second)
                throw InvalidArgument("duplicate item id '" + id + "'");
    }
    for (const auto& attr : table.attributes)
        if (attr.values.size() != n)
            throw InvalidArgument("attribute '" + attr.name + "' has wrong length");

    if (has_docs) {
        table.kind = TableKind::text;
        bool any = false;
        for (auto& doc : table.documents) {
            for (const auto& p : options.strip_patterns)
                strip_all(doc, p);
            if (doc.find_first_not_of(" \t\r\n") != std::string::npos)
                any = true;
        }
        if (!any)
            throw InvalidArgument("empty corpus");
        return table;
    }

    table.kind = TableKind::numeric;
    const auto cols = table.features.cols();
    if (table.feature_names.empty())
        for (Eigen::Index c = 0; c < cols; ++c)
            table.feature_names.push_back("f" + std::to_string(c));
    if (!table.features.allFinite())
        throw InvalidArgument("feature matrix contains non-finite values");

    std::vector<Eigen::Index> keep;
    table.column_means.clear();
    table.column_stds.clear();
    table.dropped_columns.clear();
    for (Eigen::Index c = 0; c < cols; ++c) {
        const double mean = table.features.col(c).mean();
        const double var = (table.features.col(c).array() - mean).square().mean();
        const double sd = std::sqrt(var);
        if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
            table.dropped_columns.push_back(table.feature_names[static_cast<std::size_t>(c)]);
            warn(warnings, "dropping constant column '" + table.feature_names[static_cast<std::size_t>(c)] + "'");
            continue;
        }
        keep.push_back(c);
        table.column_means.push_back(mean);
        table.column_stds.push_back(sd);
    }
    if (keep.empty())
        throw InvalidArgument("all feature columns are constant");

    Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(keep.size()));
    std::vector<std::string> names;
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const auto c = keep[k];
        out.col(static_cast<Eigen::Index>(k)) =
            (table.features.col(c).array() - table.column_means[k]) / table.column_stds[k];
        names.push_back(table.feature_names[static_cast<std::size_t>(c)]);
    }
    table.features = std::move(out);
    table.feature_names = std::move(names);
    return table;
}

enum class Direction { higher_better, lower_better, info };

inline std::string to_string(Direction d)
{
    switch (d) {
    case Direction::higher_better: return "higher_better";
    case Direction::lower_better: return "lower_better";
    case Direction::info: return "info";
    }
    return "info";
}

/// One metric value; missing marks a quantity undefined for this grouping.
struct Metric {
    double value = 0.0;
    Direction direction = Direction::info;
    bool missing = false;
};

struct MetricRecord {
    std::map<std::string, Metric> values;
    std::set<std::string> flags;

    void set(const std::string& name, double v, Direction d) { values[name] = Metric{v, d, false}; }
    void set_missing(const std::string& name, Direction d) { values[name] = Metric{0.0, d, true}; }
    bool has(const std::string& name) const { return values.count(name) != 0; }
    const Metric& at(const std::string& name) const
    {
        auto it = values.find(name);
        if (it == values.end())
            throw NotFound("metric '" + name + "' not in record");
        return it->second;
    }
};

struct GroupRecord {
    int group_id = 0;
    std::string iteration_key;
    std::vector<std::size_t> members;  // item indices into the ItemTable
    Vector representative;
    bool is_noise = false;
    std::map<std::string, double> metrics;

    std::string label() const
    {
        return iteration_key + "." + (is_noise ? std::string("noise") : std::to_string(group_id));
    }
};

/// One configuration's full output.
struct IterationResult {
    std::string key;
    double param_value = 0.0;
    Labels assignments;
    std::vector<double> membership;
    std::vector<double> outlier;
    std::vector<GroupRecord> groups;  // noise last
    MetricRecord metrics;

    std::size_t n_items() const { return assignments.size(); }

    const GroupRecord* find_group(int group_id) const
    {
        for (const auto& g : groups)
            if (g.group_id == group_id)
                return &g;
        return nullptr;
    }

    const GroupRecord& group(int group_id) const
    {
        if (const auto* g = find_group(group_id))
            return *g;
        throw NotFound("iteration '" + key + "' has no group " + std::to_string(group_id));
    }
};

struct AssembleOptions {
    // Topic models keep every topic as a group even when no document picks it.
    bool allow_empty_groups = false;
};

/// Checks the partition and value ranges, orders noise last and fills prevalence.
inline IterationResult assemble_iteration(std::string key, double param_value, Labels assignments,
                                          std::vector<double> membership, std::vector<double> outlier,
                                          std::vector<GroupRecord> groups, MetricRecord metrics,
                                          const AssembleOptions& options = {})
{
    const std::size_t n = assignments.size();
    if (membership.size() != n || outlier.size() != n)
        throw InvalidArgument("membership/outlier length does not match assignments");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(membership[i] >= 0.0 && membership[i] <= 1.0))
            throw InvalidArgument("membership outside [0,1] for item " + std::to_string(i));
        if (!(outlier[i] >= 0.0 && outlier[i] <= 1.0))
            throw InvalidArgument("outlier outside [0,1] for item " + std::to_string(i));
    }

    std::vector<int> owner(n, std::numeric_limits<int>::min());
    std::set<int> ids;
    for (auto& g : groups) {
        if (g.is_noise != (g.group_id == kNoise))
            throw InvalidArgument("noise flag must match group id -1");
        if (!ids.insert(g.group_id).second)
            throw InvalidArgument("duplicate group id " + std::to_string(g.group_id));
        if (g.members.empty() && !options.allow_empty_groups)
            throw InvalidArgument("group " + std::to_string(g.group_id) + " has no members");
        for (auto item : g.members) {
            if (item >= n)
                throw InvalidArgument("member index out of range");
            if (owner[item] != std::numeric_limits<int>::min())
                throw InvalidArgument("item " + std::to_string(item) + " assigned to two groups");
            owner[item] = g.group_id;
        }
        g.iteration_key = key;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (owner[i] == std::numeric_limits<int>::min())
            throw InvalidArgument("item " + std::to_string(i) + " is in no group");
        if (owner[i] != assignments[i])
            throw InvalidArgument("group membership disagrees with assignment of item " + std::to_string(i));
    }
    if (!groups.empty()) {
        const auto dim = groups.front().representative.size();
        for (const auto& g : groups)
            if (g.representative.size() != dim)
                throw InvalidArgument("representative dimensions differ between groups");
    }

    std::stable_partition(groups.begin(), groups.end(), [](const GroupRecord& g) { return !g.is_noise; });
    for (auto& g : groups)
        g.metrics["prevalence"] = n == 0 ? 0.0 : static_cast<double>(g.members.size()) / static_cast<double>(n);

    IterationResult out;
    out.key = std::move(key);
    out.param_value = param_value;
    out.assignments = std::move(assignments);
    out.membership = std::move(membership);
    out.outlier = std::move(outlier);
    out.groups = std::move(groups);
    out.metrics = std::move(metrics);
    return out;
}

/// Builds group records (members only) from a label vector; noise last.
inline std::vector<GroupRecord> groups_from_labels(const Labels& labels, int n_groups)
{
    std::vector<GroupRecord> groups(static_cast<std::size_t>(n_groups));
    for (int g = 0; g < n_groups; ++g)
        groups[static_cast<std::size_t>(g)].group_id = g;
    GroupRecord noise;
    noise.group_id = kNoise;
    noise.is_noise = true;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int l = labels[i];
        if (l == kNoise)
            noise.members.push_back(i);
        else if (l >= 0 && l < n_groups)
            groups[static_cast<std::size_t>(l)].members.push_back(i);
        else
            throw InvalidArgument("label out of range");
    }
    if (!noise.members.empty())
        groups.push_back(std::move(noise));
    return groups;
}

/// Ordered iterations of one sweep over a single varied parameter.
struct SweepRun {
    Method method = Method::kmeans;
    std::string sweep_param;
    std::vector<IterationResult> iterations;
    std::vector<bool> visible;

    std::size_t find_iteration(const std::string& key) const
    {
        for (std::size_t i = 0; i < iterations.size(); ++i)
            if (iterations[i].key == key)
                return i;
        throw NotFound("unknown iteration '" + key + "'");
    }
};

}  // namespace sweepscope
