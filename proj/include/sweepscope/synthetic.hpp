#pragma once

#include "common.hpp"
#include "core_model.hpp"
#include "csv.hpp"

#include <numbers>
#include <random>

namespace sweepscope {

enum class SyntheticKind { blobs, moons_noise, planted_topics };

inline std::string to_string(SyntheticKind k)
{
    switch (k) {
    case SyntheticKind::blobs: return "blobs";
    case SyntheticKind::moons_noise: return "moons_noise";
    case SyntheticKind::planted_topics: return "planted_topics";
    }
    return "blobs";
}

inline SyntheticKind parse_synthetic_kind(std::string_view s)
{
    if (s == "blobs")
        return SyntheticKind::blobs;
    if (s == "moons_noise")
        return SyntheticKind::moons_noise;
    if (s == "planted_topics")
        return SyntheticKind::planted_topics;
    throw InvalidArgument("unknown synthetic kind '" + std::string(s) + "'");
}

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::blobs;
    std::size_t n_items = 300;
    std::uint64_t seed = 0;
    // blobs
    int centers = 3;
    int dims = 2;
    double separation = 20.0;  // distance between neighboring centers, in units of spread
    double spread = 1.0;
    // moons_noise
    double noise_fraction = 0.1;
    double moon_jitter = 0.05;
    // planted_topics
    int topics = 4;
    int vocabulary = 25;  // terms per topic
    int doc_length = 60;
    int fillers = 5;
    double filler_rate = 0.1;
    bool duplicate_topics = false;  // every vocabulary is shared by two topic labels
};

struct SyntheticData {
    ItemTable table;
    Labels truth;
};

namespace detail {

inline void check_spec(const SyntheticSpec& s)
{
    if (s.n_items < 2)
        throw InvalidArgument("n_items must be >= 2");
    if (s.spread <= 0.0 || s.separation <= 0.0 || s.dims < 2 || s.centers < 1)
        throw InvalidArgument("blob parameters must be positive (dims >= 2)");
    if (s.kind == SyntheticKind::blobs && static_cast<std::size_t>(s.centers) > s.n_items)
        throw InvalidArgument("more blobs than items");
    if (s.noise_fraction < 0.0 || s.noise_fraction >= 1.0 || s.moon_jitter < 0.0)
        throw InvalidArgument("noise fraction must lie in [0, 1)");
    if (s.topics < 1 || s.vocabulary < 1 || s.doc_length < 1 || s.fillers < 0 || s.filler_rate < 0.0 ||
        s.filler_rate >= 1.0)
        throw InvalidArgument("topic parameters must be positive");
    if (s.kind == SyntheticKind::planted_topics && static_cast<std::size_t>(s.topics) > s.n_items)
        throw InvalidArgument("more topics than documents");
    if (s.fillers == 0 && s.filler_rate > 0.0)
        throw InvalidArgument("filler_rate needs fillers > 0");
}

inline std::string item_id(std::size_t i)
{
    std::string s = std::to_string(i);
    return "item" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

// Letters-only pseudo word: prefix followed by a base-26 code of `index`.
inline std::string pseudo_word(const std::string& prefix, std::size_t index)
{
    std::string code;
    do {
        code.insert(code.begin(), static_cast<char>('a' + index % 26));
        index /= 26;
    } while (index > 0);
    while (code.size() < 2)
        code.insert(code.begin(), 'a');
    return prefix + code;
}

inline std::size_t share(std::size_t n, std::size_t parts, std::size_t k)
{
    return n / parts + (k < n % parts ? 1 : 0);
}

}  // namespace detail

/// Vocabulary word of a planted topic; topics use disjoint prefixes.
inline std::string topic_word(int topic, int term)
{
    return detail::pseudo_word(std::string("t") + static_cast<char>('a' + topic % 26) + "w", static_cast<std::size_t>(term));
}

inline std::string filler_word(int f) { return detail::pseudo_word("fill", static_cast<std::size_t>(f)); }

inline SyntheticData generate_blobs(const SyntheticSpec& s)
{
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> normal(0.0, s.spread);
    const auto k = static_cast<std::size_t>(s.centers);
    // centers on a regular polygon whose neighboring vertices are `separation * spread` apart
    const double side = s.separation * s.spread;
    const double radius = k > 1 ? side / (2.0 * std::sin(std::numbers::pi / static_cast<double>(k))) : 0.0;
    Matrix centers = Matrix::Zero(static_cast<Eigen::Index>(k), s.dims);
    for (std::size_t c = 0; c < k; ++c) {
        const double angle = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
        centers(static_cast<Eigen::Index>(c), 0) = radius * std::cos(angle);
        centers(static_cast<Eigen::Index>(c), 1) = radius * std::sin(angle);
    }
    SyntheticData out;
    out.table.kind = TableKind::numeric;
    out.table.features.resize(static_cast<Eigen::Index>(s.n_items), s.dims);
    for (int d = 0; d < s.dims; ++d)
        out.table.feature_names.push_back("x" + std::to_string(d));
    std::size_t row = 0;
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < detail::share(s.n_items, k, c); ++i, ++row) {
            for (int d = 0; d < s.dims; ++d)
                out.table.features(static_cast<Eigen::Index>(row), d) = centers(static_cast<Eigen::Index>(c), d) + normal(rng);
            out.truth.push_back(static_cast<int>(c));
        }
    for (std::size_t i = 0; i < s.n_items; ++i)
        out.table.item_ids.push_back(detail::item_id(i));
    return out;
}

/// Two interleaved half circles plus uniformly scattered noise labeled -1.
inline SyntheticData generate_moons_noise(const SyntheticSpec& s)
{
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> jitter(0.0, s.moon_jitter);
    const auto n_noise = static_cast<std::size_t>(std::llround(s.noise_fraction * static_cast<double>(s.n_items)));
    const auto n_moon = s.n_items - n_noise;
    SyntheticData out;
    out.table.kind = TableKind::numeric;
    out.table.features.resize(static_cast<Eigen::Index>(s.n_items), 2);
    out.table.feature_names = {"x0", "x1"};
    std::size_t row = 0;
    for (int moon = 0; moon < 2; ++moon) {
        const auto m = detail::share(n_moon, 2, static_cast<std::size_t>(moon));
        for (std::size_t i = 0; i < m; ++i, ++row) {
            const double t = m > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(m - 1) : 0.0;
            const double x = moon == 0 ? std::cos(t) : 1.0 - std::cos(t);
            const double y = moon == 0 ? std::sin(t) : 0.5 - std::sin(t);
            out.table.features(static_cast<Eigen::Index>(row), 0) = x + jitter(rng);
            out.table.features(static_cast<Eigen::Index>(row), 1) = y + jitter(rng);
            out.truth.push_back(moon);
        }
    }
    std::uniform_real_distribution<double> ux(-1.5, 2.5), uy(-1.0, 1.5);
    for (std::size_t i = 0; i < n_noise; ++i, ++row) {
        out.table.features(static_cast<Eigen::Index>(row), 0) = ux(rng);
        out.table.features(static_cast<Eigen::Index>(row), 1) = uy(rng);
        out.truth.push_back(kNoise);
    }
    for (std::size_t i = 0; i < s.n_items; ++i)
        out.table.item_ids.push_back(detail::item_id(i));
    return out;
}

/// Single-topic documents drawn from disjoint per-topic vocabularies plus shared fillers.
inline SyntheticData generate_planted_topics(const SyntheticSpec& s)
{
    std::mt19937_64 rng(s.seed);
    const auto k = static_cast<std::size_t>(s.topics);
    std::uniform_int_distribution<int> pick_term(0, s.vocabulary - 1);
    std::uniform_int_distribution<int> pick_filler(0, std::max(0, s.fillers - 1));
    std::bernoulli_distribution use_filler(s.filler_rate);
    SyntheticData out;
    out.table.kind = TableKind::text;
    std::size_t row = 0;
    for (std::size_t t = 0; t < k; ++t)
        for (std::size_t i = 0; i < detail::share(s.n_items, k, t); ++i, ++row) {
            const int vocab = s.duplicate_topics ? static_cast<int>(t / 2) : static_cast<int>(t);
            std::string doc;
            for (int w = 0; w < s.doc_length; ++w) {
                if (w)
                    doc += ' ';
                doc += use_filler(rng) ? filler_word(pick_filler(rng)) : topic_word(vocab, pick_term(rng));
            }
            out.table.documents.push_back(std::move(doc));
            out.truth.push_back(static_cast<int>(t));
        }
    for (std::size_t i = 0; i < s.n_items; ++i)
        out.table.item_ids.push_back(detail::item_id(i));
    return out;
}

inline SyntheticData generate(const SyntheticSpec& spec)
{
    detail::check_spec(spec);
    switch (spec.kind) {
    case SyntheticKind::blobs: return generate_blobs(spec);
    case SyntheticKind::moons_noise: return generate_moons_noise(spec);
    case SyntheticKind::planted_topics: return generate_planted_topics(spec);
    }
    throw InvalidArgument("unknown synthetic kind");
}

/// Adjusted Rand index from the pair-counting contingency table.
inline double ari(const Labels& a, const Labels& b)
{
    if (a.size() != b.size())
        throw InvalidArgument("label vectors differ in length");
    const auto n = a.size();
    if (n < 2)
        return 1.0;
    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < n; ++i) {
        cells[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [k, v] : cells)
        index += c2(v);
    for (const auto& [k, v] : rows)
        sa += c2(v);
    for (const auto& [k, v] : cols)
        sb += c2(v);
    const double expected = sa * sb / c2(static_cast<double>(n));
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected)
        return rows.size() == cols.size() && rows.size() == cells.size() ? 1.0 : 0.0;
    return (index - expected) / (max_index - expected);
}

/// CSV with id, feature or text columns and a `truth` column.
inline std::string synthetic_to_csv(const SyntheticData& data)
{
    const auto& t = data.table;
    CsvRow header{"id"};
    if (t.kind == TableKind::text)
        header.push_back("text");
    else
        header.insert(header.end(), t.feature_names.begin(), t.feature_names.end());
    header.push_back("truth");
    std::string out = csv_line(header);
    for (std::size_t i = 0; i < t.item_ids.size(); ++i) {
        CsvRow row{t.item_ids[i]};
        if (t.kind == TableKind::text)
            row.push_back(t.documents[i]);
        else
            for (Eigen::Index c = 0; c < t.features.cols(); ++c)
                row.push_back(format_double(t.features(static_cast<Eigen::Index>(i), c)));
        row.push_back(std::to_string(data.truth[i]));
        out += csv_line(row);
    }
    return out;
}

}  // namespace sweepscope
