#pragma once

#include "common.hpp"
#include "core_model.hpp"
#include "csv.hpp"

#include <functional>
#include <memory>
#include <mutex>
#include <set>

namespace sweepscope {

/// Item-overlap counts between the groups of two iterations (noise last on both axes).
struct TransitionMatrix {
    std::string from_key;
    std::string to_key;
    std::vector<int> from_groups;
    std::vector<int> to_groups;
    std::vector<std::size_t> counts;  // row-major from x to

    std::size_t rows() const { return from_groups.size(); }
    std::size_t cols() const { return to_groups.size(); }
    std::size_t at(std::size_t i, std::size_t j) const { return counts[i * cols() + j]; }

    std::size_t row_sum(std::size_t i) const
    {
        std::size_t s = 0;
        for (std::size_t j = 0; j < cols(); ++j)
            s += at(i, j);
        return s;
    }

    std::size_t col_sum(std::size_t j) const
    {
        std::size_t s = 0;
        for (std::size_t i = 0; i < rows(); ++i)
            s += at(i, j);
        return s;
    }

    std::size_t total() const
    {
        std::size_t s = 0;
        for (auto c : counts)
            s += c;
        return s;
    }

    std::size_t count(int from_group, int to_group) const
    {
        const auto fi = std::find(from_groups.begin(), from_groups.end(), from_group);
        const auto ti = std::find(to_groups.begin(), to_groups.end(), to_group);
        if (fi == from_groups.end() || ti == to_groups.end())
            throw NotFound("group not in transition matrix");
        return at(static_cast<std::size_t>(fi - from_groups.begin()), static_cast<std::size_t>(ti - to_groups.begin()));
    }
};

inline TransitionMatrix overlap(const IterationResult& a, const IterationResult& b)
{
    if (a.n_items() != b.n_items())
        throw InvalidArgument("iterations '" + a.key + "' and '" + b.key + "' cover different item sets");
    TransitionMatrix tm;
    tm.from_key = a.key;
    tm.to_key = b.key;
    std::map<int, std::size_t> ra, cb;
    for (const auto& g : a.groups) {
        ra[g.group_id] = tm.from_groups.size();
        tm.from_groups.push_back(g.group_id);
    }
    for (const auto& g : b.groups) {
        cb[g.group_id] = tm.to_groups.size();
        tm.to_groups.push_back(g.group_id);
    }
    tm.counts.assign(tm.rows() * tm.cols(), 0);
    for (std::size_t i = 0; i < a.n_items(); ++i) {
        auto r = ra.find(a.assignments[i]);
        auto c = cb.find(b.assignments[i]);
        if (r == ra.end() || c == cb.end())
            throw InvalidArgument("assignment refers to a missing group");
        ++tm.counts[r->second * tm.cols() + c->second];
    }
    return tm;
}

/// Row, column and grand-total conservation against the two iterations.
inline bool conserves(const TransitionMatrix& tm, const IterationResult& a, const IterationResult& b)
{
    if (tm.rows() != a.groups.size() || tm.cols() != b.groups.size())
        return false;
    for (std::size_t i = 0; i < tm.rows(); ++i)
        if (tm.row_sum(i) != a.groups[i].members.size())
            return false;
    for (std::size_t j = 0; j < tm.cols(); ++j)
        if (tm.col_sum(j) != b.groups[j].members.size())
            return false;
    return tm.total() == a.n_items() && tm.total() == b.n_items();
}

inline const std::string kTransitionArrow = "\xE2\x86\x92";
inline const std::string kOtherLabel = "other";

inline std::string group_label(const std::string& key, int group_id)
{
    return key + "." + (group_id == kNoise ? std::string("noise") : std::to_string(group_id));
}

inline std::string transition_label(const std::string& from_key, int from_group, const std::string& to_key, int to_group)
{
    return group_label(from_key, from_group) + kTransitionArrow + group_label(to_key, to_group);
}

/// Categorical per-item attribute exportable as CSV.
struct ClassAttribute {
    std::string name;
    std::vector<std::string> values;   // per item
    std::vector<std::string> labels;   // declared label set, in display order
    std::map<std::string, std::string> palette;

    std::map<std::string, std::size_t> tally() const
    {
        std::map<std::string, std::size_t> out;
        for (const auto& v : values)
            ++out[v];
        return out;
    }
};

enum class FlowDirection { from, to };

inline FlowDirection parse_flow_direction(std::string_view s)
{
    if (s == "from")
        return FlowDirection::from;
    if (s == "to")
        return FlowDirection::to;
    throw InvalidArgument("direction must be 'from' or 'to'");
}

/// Maps a group label ("key.g") to a color reference; may return "" for none.
using PaletteLookup = std::function<std::string(const std::string& key, int group_id)>;

inline ClassAttribute class_full(const IterationResult& it, const PaletteLookup& palette = {})
{
    ClassAttribute ca;
    ca.name = "iteration_" + it.key;
    ca.values.resize(it.n_items());
    for (const auto& g : it.groups) {
        const auto label = group_label(it.key, g.group_id);
        ca.labels.push_back(label);
        if (palette)
            ca.palette[label] = palette(it.key, g.group_id);
        for (auto i : g.members)
            ca.values[i] = label;
    }
    return ca;
}

/// Members of one group labeled by their group in the other iteration.
/// FlowDirection::from: `group_id` belongs to `a`, members labeled by destination in `b`.
/// FlowDirection::to: `group_id` belongs to `b`, members labeled by origin in `a`.
inline ClassAttribute class_transition(const IterationResult& a, const IterationResult& b, int group_id,
                                       FlowDirection direction = FlowDirection::from, const PaletteLookup& palette = {})
{
    if (a.n_items() != b.n_items())
        throw InvalidArgument("iterations cover different item sets");
    const bool from = direction == FlowDirection::from;
    const auto& anchor = from ? a.group(group_id) : b.group(group_id);
    const auto& other = from ? b : a;
    ClassAttribute ca;
    ca.name = "transition_" + (from ? group_label(a.key, group_id) + "_to_" + b.key
                                    : a.key + "_to_" + group_label(b.key, group_id));
    ca.values.assign(a.n_items(), kOtherLabel);
    auto label_for = [&](int other_group) {
        return from ? transition_label(a.key, group_id, b.key, other_group)
                    : transition_label(a.key, other_group, b.key, group_id);
    };
    for (const auto& g : other.groups) {
        const auto label = label_for(g.group_id);
        ca.labels.push_back(label);
        if (palette)
            ca.palette[label] = palette(other.key, g.group_id);
    }
    ca.labels.push_back(kOtherLabel);
    for (auto i : anchor.members)
        ca.values[i] = label_for(other.assignments[i]);
    return ca;
}

inline const std::string kLeftOnly = "left only";
inline const std::string kShared = "shared";
inline const std::string kRightOnly = "right only";

/// Partitions the union of two groups into left only / shared / right only;
/// items outside both get "other".
inline ClassAttribute class_connector_detail(const GroupRecord& left, const GroupRecord& right, std::size_t n_items)
{
    ClassAttribute ca;
    ca.name = "connector_" + left.label() + "_" + right.label();
    ca.labels = {kLeftOnly, kShared, kRightOnly, kOtherLabel};
    ca.values.assign(n_items, kOtherLabel);
    for (auto i : left.members) {
        if (i >= n_items)
            throw InvalidArgument("member index out of range");
        ca.values[i] = kLeftOnly;
    }
    for (auto i : right.members) {
        if (i >= n_items)
            throw InvalidArgument("member index out of range");
        ca.values[i] = ca.values[i] == kLeftOnly ? kShared : kRightOnly;
    }
    return ca;
}

/// Consecutive pairs among visible iterations, as indices into run.iterations.
inline std::vector<std::pair<std::size_t, std::size_t>> visible_pairs(const SweepRun& run, const std::vector<bool>& visible)
{
    if (visible.size() != run.iterations.size())
        throw InvalidArgument("visibility flags do not match iteration count");
    std::vector<std::size_t> shown;
    for (std::size_t i = 0; i < visible.size(); ++i)
        if (visible[i])
            shown.push_back(i);
    if (shown.size() < 2)
        throw InvalidArgument("need at least 2 visible iterations");
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i + 1 < shown.size(); ++i)
        out.emplace_back(shown[i], shown[i + 1]);
    return out;
}

/// Lazily computed, shared transition matrices keyed by (from, to).
class TransitionCache {
public:
    std::shared_ptr<const TransitionMatrix> get(const SweepRun& run, const std::string& from, const std::string& to)
    {
        const auto key = std::make_pair(from, to);
        {
            std::lock_guard lock(mutex_);
            if (auto it = cache_.find(key); it != cache_.end())
                return it->second;
        }
        auto tm = std::make_shared<const TransitionMatrix>(
            overlap(run.iterations[run.find_iteration(from)], run.iterations[run.find_iteration(to)]));
        std::lock_guard lock(mutex_);
        return cache_.emplace(key, std::move(tm)).first->second;
    }

    std::size_t size() const
    {
        std::lock_guard lock(mutex_);
        return cache_.size();
    }

private:
    mutable std::mutex mutex_;
    std::map<std::pair<std::string, std::string>, std::shared_ptr<const TransitionMatrix>> cache_;
};

/// `item_id,<name>` plus optional extra attribute columns.
inline std::string class_to_csv(const ClassAttribute& ca, const std::vector<std::string>& item_ids,
                                const std::vector<Attribute>& extra = {})
{
    if (item_ids.size() != ca.values.size())
        throw InvalidArgument("item id count does not match class attribute");
    CsvRow header{"item_id", ca.name};
    for (const auto& a : extra) {
        if (a.values.size() != item_ids.size())
            throw InvalidArgument("attribute '" + a.name + "' has the wrong length");
        header.push_back(a.name);
    }
    std::string out = csv_line(header);
    for (std::size_t i = 0; i < item_ids.size(); ++i) {
        CsvRow row{item_ids[i], ca.values[i]};
        for (const auto& a : extra)
            row.push_back(a.values[i]);
        out += csv_line(row);
    }
    return out;
}

struct ParsedClass {
    std::vector<std::string> item_ids;
    ClassAttribute attribute;
};

inline ParsedClass class_from_csv(std::string_view text)
{
    auto rows = parse_csv(text);
    if (rows.empty() || rows.front().size() < 2 || rows.front()[0] != "item_id")
        throw InvalidArgument("class CSV must start with header item_id,<name>");
    ParsedClass pc;
    pc.attribute.name = rows.front()[1];
    std::set<std::string> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() < 2)
            throw InvalidArgument("class CSV row " + std::to_string(r) + " is short");
        pc.item_ids.push_back(rows[r][0]);
        pc.attribute.values.push_back(rows[r][1]);
        if (seen.insert(rows[r][1]).second)
            pc.attribute.labels.push_back(rows[r][1]);
    }
    return pc;
}

}  // namespace sweepscope
