#pragma once

#include "persist.hpp"

#include <memory>
#include <mutex>

namespace sweepscope {

/// Rejected archetype threshold (mapped to HTTP 422).
class InvalidThreshold : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct ClassSpec {
    std::string type;  // full | transition | connector
    std::string iteration;
    std::string from, to;
    int group = 0;
    FlowDirection direction = FlowDirection::from;
    std::string left_iteration, right_iteration;
    int left_group = 0, right_group = 0;
    std::vector<std::string> attributes;  // extra export columns
};

inline ClassSpec parse_class_spec(const Json& j)
{
    if (!j.is_object())
        throw InvalidArgument("class spec must be an object");
    ClassSpec s;
    s.type = j.value("type", "");
    if (j.contains("attributes"))
        s.attributes = j["attributes"].get<std::vector<std::string>>();
    try {
        if (s.type == "full") {
            s.iteration = j.at("iteration").get<std::string>();
        } else if (s.type == "transition") {
            s.from = j.at("from").get<std::string>();
            s.to = j.at("to").get<std::string>();
            s.group = j.at("group").get<int>();
            s.direction = parse_flow_direction(j.value("direction", "from"));
        } else if (s.type == "connector") {
            s.left_iteration = j.at("left").at("iteration").get<std::string>();
            s.left_group = j.at("left").at("group").get<int>();
            s.right_iteration = j.at("right").at("iteration").get<std::string>();
            s.right_group = j.at("right").at("group").get<int>();
        } else {
            throw InvalidArgument("class type must be full, transition or connector");
        }
    } catch (const Json::exception& e) {
        throw InvalidArgument(std::string("class spec: ") + e.what());
    }
    return s;
}

inline std::string class_id(const std::string& name)
{
    std::string out;
    for (unsigned char c : name)
        out += std::isalnum(c) || c == '.' || c == '-' || c == '_' ? static_cast<char>(c) : '_';
    return out;
}

/// Builds a class attribute from a spec against a loaded run.
inline ClassAttribute build_class(const LoadedRun& lr, const ClassSpec& spec)
{
    const auto& run = lr.run;
    PaletteLookup palette;
    if (lr.pooled)
        palette = [&lr](const std::string& key, int group) {
            try {
                return to_hex(lr.colors.rows[lr.pooled->find(key, group)]);
            } catch (const NotFound&) {
                return std::string();
            }
        };
    if (spec.type == "full")
        return class_full(run.iterations[run.find_iteration(spec.iteration)], palette);
    if (spec.type == "transition")
        return class_transition(run.iterations[run.find_iteration(spec.from)], run.iterations[run.find_iteration(spec.to)],
                                spec.group, spec.direction, palette);
    const auto& l = run.iterations[run.find_iteration(spec.left_iteration)].group(spec.left_group);
    const auto& r = run.iterations[run.find_iteration(spec.right_iteration)].group(spec.right_group);
    return class_connector_detail(l, r, lr.item_ids.size());
}

inline std::vector<Attribute> select_attributes(const LoadedRun& lr, const std::vector<std::string>& names)
{
    std::vector<Attribute> out;
    for (const auto& n : names) {
        auto it = std::find_if(lr.attributes.begin(), lr.attributes.end(), [&](const Attribute& a) { return a.name == n; });
        if (it == lr.attributes.end())
            throw NotFound("unknown attribute '" + n + "'");
        out.push_back(*it);
    }
    return out;
}

/// Writes run/classes/<id>.csv and returns the id.
inline std::string export_class(const std::string& dir, const LoadedRun& lr, const ClassSpec& spec)
{
    const auto ca = build_class(lr, spec);
    const auto id = class_id(ca.name);
    const auto path = fs::path(dir) / "run" / "classes" / (id + ".csv");
    fs::create_directories(path.parent_path());
    write_file(path.string(), class_to_csv(ca, lr.item_ids, select_attributes(lr, spec.attributes)));
    return id;
}

inline Json archetype_response(const LoadedRun& lr, const ArchetypeModel& m, const ColorLayout& layout)
{
    Json j = archetypes_json(m, lr.run.iterations.size());
    const auto colors = assign_colors(layout, m, ColorMode::by_item);
    Json ac = Json::array();
    for (const auto& c : colors.archetypes)
        ac.push_back(to_hex(c));
    j["archetype_colors"] = ac;
    Json rows = Json::array();
    for (std::size_t r = 0; r < lr.pooled->size(); ++r)
        rows.push_back({{"iteration", lr.pooled->rows[r].iteration_key}, {"group", lr.pooled->rows[r].group_id},
                        {"archetype", m.archetype_labels[r]}});
    j["rows"] = rows;
    return j;
}

/// Mutable view state over an immutable loaded run. Readers take a snapshot;
/// writers build a new state and swap it in.
class RunSession {
public:
    struct State {
        std::optional<ArchetypeModel> archetypes;
        std::vector<bool> visible;
        std::map<std::string, std::pair<ClassAttribute, std::vector<std::string>>> classes;  // id -> (class, extra attrs)
    };

    explicit RunSession(LoadedRun lr) : data_(std::make_shared<const LoadedRun>(std::move(lr)))
    {
        auto s = std::make_shared<State>();
        s->archetypes = data_->archetypes;
        s->visible = data_->run.visible;
        state_ = std::move(s);
    }

    std::shared_ptr<const LoadedRun> data() const { return data_; }

    std::shared_ptr<const State> state() const
    {
        std::lock_guard lock(mutex_);
        return state_;
    }

    Json run_json() const
    {
        const auto s = state();
        const auto& lr = *data_;
        Json j;
        j["manifest"] = lr.manifest;
        Json dirs = Json::object();
        for (const auto& [name, d] : metric_directions(lr.run.method))
            dirs[name] = to_string(d);
        j["directions"] = dirs;
        Json its = Json::array();
        for (std::size_t i = 0; i < lr.run.iterations.size(); ++i) {
            const auto& it = lr.run.iterations[i];
            its.push_back({{"key", it.key},
                           {"param_value", it.param_value},
                           {"visible", static_cast<bool>(s->visible[i])},
                           {"complete", s->archetypes && s->archetypes->complete_iterations.count(it.key) > 0},
                           {"metrics", metrics_json(it.metrics)}});
        }
        j["iterations"] = its;
        j["default_threshold"] = default_threshold(lr.run.iterations.size());
        return j;
    }

    Json iteration_json(const std::string& key) const
    {
        const auto& lr = *data_;
        const auto& it = lr.run.iterations[lr.run.find_iteration(key)];
        Json items = Json::array();
        for (std::size_t i = 0; i < it.n_items(); ++i)
            items.push_back({{"item_id", lr.item_ids[i]},
                             {"group", it.assignments[i]},
                             {"membership", it.membership[i]},
                             {"outlier", it.outlier[i]}});
        return {{"key", it.key}, {"param_value", it.param_value}, {"items", items}, {"groups", groups_json(it)},
                {"metrics", metrics_json(it.metrics)}};
    }

    Json transitions_json(const std::string& from, const std::string& to)
    {
        return transition_json(*cache_.get(data_->run, from, to));
    }

    Json embedding(const std::string& method, ColorMode mode = ColorMode::by_item, const std::string& size_attr = "group_size")
    {
        const auto& lr = *data_;
        if (!lr.pooled)
            throw NotFound("run has no pooled groups");
        std::shared_ptr<const EmbeddingLayout> el;
        {
            std::lock_guard lock(embed_mutex_);
            if (auto it = embeddings_.find(method); it != embeddings_.end())
                el = it->second;
        }
        if (!el) {
            if (method != "tsne" && !projection_registry().has(method))
                throw NotFound("unknown projection method '" + method + "'");
            auto fresh = std::make_shared<EmbeddingLayout>();
            fresh->method = method;
            fresh->positions_2d = project_rows(lr.pooled->processed, method, 2, lr.projection_seed, lr.perplexity);
            const Matrix one = project_rows(lr.pooled->processed, method, 1, lr.projection_seed, lr.perplexity);
            fresh->positions_1d.assign(one.data(), one.data() + one.rows());
            std::lock_guard lock(embed_mutex_);
            el = embeddings_.emplace(method, std::move(fresh)).first->second;
        }
        const auto s = state();
        const auto& model = *s->archetypes;
        const auto colors = assign_colors(lr.layout, model, mode);
        EmbeddingLayout view = *el;
        view.colors = colors.rows;
        view.archetype_colors = colors.archetypes;
        view.color_mode = mode;
        return embedding_json(*lr.pooled, view, model, size_attribute(lr.run, *lr.pooled, size_attr, &model));
    }

    Json violins_json(ViolinChannel channel) const
    {
        const auto s = state();
        const auto& lr = *data_;
        std::vector<std::string> keys;
        for (std::size_t i = 0; i < lr.run.iterations.size(); ++i)
            if (s->visible[i])
                keys.push_back(lr.run.iterations[i].key);
        Json arr = Json::array();
        if (keys.empty())
            return arr;
        auto side = [](const ViolinSide& v) {
            return Json{{"density", v.density}, {"median", v.median}, {"q1", v.q1}, {"q3", v.q3}};
        };
        for (const auto& v : compute_violins(lr.run, channel, keys)) {
            Json j{{"iteration", v.iteration_key}, {"group", v.group_id},     {"channel", to_string(v.channel)},
                   {"size", v.size},               {"primary", side(v.primary)}, {"width_scale", v.width_scale},
                   {"bandwidth", v.bandwidth},     {"render_as_bar", v.render_as_bar}};
            if (v.secondary)
                j["secondary"] = side(*v.secondary);
            arr.push_back(std::move(j));
        }
        return arr;
    }

    Json archetypes() const
    {
        const auto s = state();
        if (!s->archetypes || !data_->pooled)
            throw NotFound("run has no archetype model");
        return archetype_response(*data_, *s->archetypes, data_->layout);
    }

    Json sweep_curve() const { return curve_json(data_->curve); }

    Json set_threshold(int value)
    {
        const auto& lr = *data_;
        if (!lr.pooled)
            throw NotFound("run has no pooled groups");
        if (value < 2 || static_cast<std::size_t>(value) >= lr.pooled->size())
            throw InvalidThreshold("threshold must lie in [2, " + std::to_string(lr.pooled->size() - 1) + "]");
        std::vector<std::string> keys;
        for (const auto& it : lr.run.iterations)
            keys.push_back(it.key);
        const bool count_noise = lr.archetypes ? lr.archetypes->count_noise_archetypes : true;
        auto model = detect(*lr.pooled, value, DetectOptions{count_noise}, keys);
        {
            std::lock_guard lock(mutex_);
            auto next = std::make_shared<State>(*state_);
            next->archetypes = model;
            state_ = std::move(next);
        }
        return archetype_response(lr, model, lr.layout);
    }

    Json set_visibility(const std::vector<std::string>& keys)
    {
        const auto& run = data_->run;
        std::vector<bool> visible(run.iterations.size(), false);
        for (const auto& k : keys)
            visible[run.find_iteration(k)] = true;
        const auto pairs = visible_pairs(run, visible);
        {
            std::lock_guard lock(mutex_);
            auto next = std::make_shared<State>(*state_);
            next->visible = visible;
            state_ = std::move(next);
        }
        Json arr = Json::array();
        for (const auto& [a, b] : pairs)
            arr.push_back({{"from", run.iterations[a].key}, {"to", run.iterations[b].key}});
        return {{"visible", keys}, {"pairs", arr}};
    }

    Json visible_pairs_json() const
    {
        const auto s = state();
        Json arr = Json::array();
        for (const auto& [a, b] : visible_pairs(data_->run, s->visible))
            arr.push_back({{"from", data_->run.iterations[a].key}, {"to", data_->run.iterations[b].key}});
        return arr;
    }

    Json create_class(const Json& spec_json)
    {
        const auto spec = parse_class_spec(spec_json);
        auto ca = build_class(*data_, spec);
        select_attributes(*data_, spec.attributes);
        const auto id = class_id(ca.name);
        Json j{{"id", id}, {"name", ca.name}, {"labels", ca.labels}, {"palette", ca.palette}, {"counts", ca.tally()}};
        std::lock_guard lock(mutex_);
        auto next = std::make_shared<State>(*state_);
        next->classes[id] = {std::move(ca), spec.attributes};
        state_ = std::move(next);
        return j;
    }

    std::string class_csv(const std::string& id) const
    {
        const auto s = state();
        auto it = s->classes.find(id);
        if (it == s->classes.end())
            throw NotFound("unknown class '" + id + "'");
        return class_to_csv(it->second.first, data_->item_ids, select_attributes(*data_, it->second.second));
    }

    /// Frequency clouds per label of a class, topic-weight clouds of an iteration, or a
    /// signed difference cloud between two topics.
    Json wordclouds(const std::string& class_id_, const std::string& mode, const std::string& iteration,
                    const std::string& from, const std::string& to, std::size_t top_n) const
    {
        const auto& lr = *data_;
        if (lr.terms.empty())
            throw NotFound("run has no text corpus");
        auto cloud_json = [](const TermCloud& c) {
            Json entries = Json::array();
            for (const auto& e : c.entries)
                entries.push_back({{"term", e.term}, {"weight", e.weight}, {"sign", e.weight < 0 ? -1 : 1}});
            return Json{{"label", c.class_label}, {"mode", to_string(c.mode)}, {"entries", entries}};
        };
        Json arr = Json::array();
        if (mode == "frequency") {
            const auto s = state();
            auto it = s->classes.find(class_id_);
            if (it == s->classes.end())
                throw NotFound("unknown class '" + class_id_ + "'");
            const auto& ca = it->second.first;
            const std::set<std::string> declared(ca.labels.begin(), ca.labels.end());
            for (auto& [label, cloud] : class_term_frequencies(lr.tokens, ca.values, &declared)) {
                if (cloud.entries.size() > top_n)
                    cloud.entries.resize(top_n);
                arr.push_back(cloud_json(cloud));
            }
        } else if (mode == "topic_weight") {
            const auto& it = lr.run.iterations[lr.run.find_iteration(iteration)];
            for (const auto& g : it.groups)
                if (!g.is_noise)
                    arr.push_back(cloud_json(topic_weight_cloud(g.representative, lr.terms, top_n, g.label())));
        } else if (mode == "weight_difference") {
            auto group_of = [&](const std::string& label) -> const GroupRecord& {
                const auto dot = label.rfind('.');
                if (dot == std::string::npos)
                    throw InvalidArgument("group label must look like key.group");
                const auto& it = lr.run.iterations[lr.run.find_iteration(label.substr(0, dot))];
                return it.group(std::stoi(label.substr(dot + 1)));
            };
            const auto& a = group_of(from);
            const auto& b = group_of(to);
            const auto d = transition_term_delta(a.representative, b.representative, lr.terms, top_n, from + kTransitionArrow + to);
            arr.push_back(cloud_json(d.cloud));
        } else {
            throw InvalidArgument("unknown cloud mode '" + mode + "'");
        }
        return arr;
    }

private:
    std::shared_ptr<const LoadedRun> data_;
    mutable std::mutex mutex_;
    std::shared_ptr<const State> state_;
    TransitionCache cache_;
    mutable std::mutex embed_mutex_;
    std::map<std::string, std::shared_ptr<const EmbeddingLayout>> embeddings_;
};

}  // namespace sweepscope
