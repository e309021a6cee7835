#pragma once

#include "common.hpp"
#include "core_model.hpp"

#include <cctype>
#include <fstream>
#include <optional>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sweepscope {

using TokenizedDocs = std::vector<std::vector<std::string>>;

struct Dictionary {
    std::vector<std::string> terms;
    std::vector<std::size_t> doc_freq;
    std::vector<bool> is_bigram;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t size() const { return terms.size(); }

    std::optional<std::size_t> find(const std::string& term) const
    {
        auto it = index.find(term);
        if (it == index.end())
            return std::nullopt;
        return it->second;
    }
};

struct TfIdfMatrix {
    SparseMatrix values;
    Dictionary dictionary;
};

enum class CloudMode { frequency, topic_weight, weight_difference };

inline std::string to_string(CloudMode m)
{
    switch (m) {
    case CloudMode::frequency: return "frequency";
    case CloudMode::topic_weight: return "topic_weight";
    case CloudMode::weight_difference: return "weight_difference";
    }
    return "frequency";
}

struct TermWeight {
    std::string term;
    double weight = 0.0;
};

struct TermCloud {
    std::string class_label;
    std::vector<TermWeight> entries;
    CloudMode mode = CloudMode::frequency;
};

inline std::unordered_set<std::string> load_stopwords(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw NotFound("cannot open stopword file '" + path + "'");
    std::unordered_set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos)
            continue;
        std::string term = line.substr(start);
        for (auto& ch : term)
            ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        out.insert(std::move(term));
    }
    return out;
}

/// Lowercase alphabetic tokens of length >= 2 (ASCII letters only).
inline std::vector<std::string> split_words(const std::string& text)
{
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (cur.size() >= 2)
            out.push_back(cur);
        cur.clear();
    };
    for (unsigned char ch : text) {
        if (std::isalpha(ch) && ch < 128)
            cur.push_back(static_cast<char>(std::tolower(ch)));
        else
            flush();
    }
    flush();
    return out;
}

struct DictionaryOptions {
    std::size_t min_df = 1;
    std::size_t max_unigrams = 0;  // 0 keeps all
    std::size_t max_bigrams = 0;
};

/// Builds a dictionary from tokenized docs; caps rank by document frequency.
inline Dictionary build_dictionary(const TokenizedDocs& docs, const DictionaryOptions& options = {})
{
    std::map<std::string, std::size_t> df;
    for (const auto& doc : docs) {
        std::set<std::string> uniq(doc.begin(), doc.end());
        for (const auto& t : uniq)
            ++df[t];
    }
    std::vector<std::pair<std::string, std::size_t>> uni, bi;
    for (const auto& [term, count] : df) {
        if (count < options.min_df)
            continue;
        (term.find('_') != std::string::npos ? bi : uni).emplace_back(term, count);
    }
    auto cap = [](std::vector<std::pair<std::string, std::size_t>>& v, std::size_t limit) {
        if (limit == 0 || v.size() <= limit)
            return;
        std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        v.resize(limit);
    };
    cap(uni, options.max_unigrams);
    cap(bi, options.max_bigrams);

    std::vector<std::pair<std::string, std::size_t>> all = uni;
    all.insert(all.end(), bi.begin(), bi.end());
    std::sort(all.begin(), all.end());

    Dictionary dict;
    for (const auto& [term, count] : all) {
        dict.index.emplace(term, dict.terms.size());
        dict.terms.push_back(term);
        dict.doc_freq.push_back(count);
        dict.is_bigram.push_back(term.find('_') != std::string::npos);
    }
    return dict;
}

/// Drops tokens outside the dictionary.
inline TokenizedDocs restrict_to_dictionary(const TokenizedDocs& docs, const Dictionary& dict)
{
    TokenizedDocs out;
    out.reserve(docs.size());
    for (const auto& doc : docs) {
        std::vector<std::string> kept;
        for (const auto& t : doc)
            if (dict.index.count(t))
                kept.push_back(t);
        out.push_back(std::move(kept));
    }
    return out;
}

struct TokenizeResult {
    TokenizedDocs docs;
    Dictionary dictionary;
};

inline TokenizeResult tokenize(const std::vector<std::string>& corpus, const std::unordered_set<std::string>& stopwords,
                               std::size_t min_df, const std::vector<std::string>& strip_patterns = {})
{
    if (corpus.empty())
        throw InvalidArgument("empty corpus");
    TokenizedDocs raw;
    raw.reserve(corpus.size());
    for (std::string doc : corpus) {
        for (const auto& p : strip_patterns)
            strip_all(doc, p);
        std::vector<std::string> tokens;
        for (auto& t : split_words(doc))
            if (!stopwords.count(t))
                tokens.push_back(std::move(t));
        raw.push_back(std::move(tokens));
    }
    TokenizeResult out;
    out.dictionary = build_dictionary(raw, DictionaryOptions{min_df, 0, 0});
    if (out.dictionary.size() == 0)
        throw InvalidArgument("vocabulary is empty after filtering");
    out.docs = restrict_to_dictionary(raw, out.dictionary);
    return out;
}

/// Appends the n most frequent adjacent pairs (count >= 2) as "a_b" tokens.
inline TokenizedDocs inject_bigrams(const TokenizedDocs& docs, std::size_t n_bigrams)
{
    if (n_bigrams == 0)
        return docs;
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    for (const auto& doc : docs)
        for (std::size_t i = 0; i + 1 < doc.size(); ++i)
            ++counts[{doc[i], doc[i + 1]}];
    std::vector<std::pair<std::pair<std::string, std::string>, std::size_t>> ranked;
    for (const auto& kv : counts)
        if (kv.second >= 2)
            ranked.push_back(kv);
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() > n_bigrams)
        ranked.resize(n_bigrams);
    std::set<std::pair<std::string, std::string>> chosen;
    for (const auto& kv : ranked)
        chosen.insert(kv.first);

    TokenizedDocs out = docs;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const auto& doc = docs[d];
        for (std::size_t i = 0; i + 1 < doc.size(); ++i)
            if (chosen.count({doc[i], doc[i + 1]}))
                out[d].push_back(doc[i] + "_" + doc[i + 1]);
    }
    return out;
}

/// Raw counts, smoothed idf ln((1+n)/(1+df)) + 1, rows L2-normalized.
inline TfIdfMatrix build_tfidf(const TokenizedDocs& docs, const Dictionary& dict, Warnings* warnings = nullptr)
{
    const auto n_docs = static_cast<double>(docs.size());
    std::vector<double> idf(dict.size());
    for (std::size_t t = 0; t < dict.size(); ++t)
        idf[t] = std::log((1.0 + n_docs) / (1.0 + static_cast<double>(dict.doc_freq[t]))) + 1.0;

    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        std::map<std::size_t, double> tf;
        for (const auto& tok : docs[d])
            if (auto idx = dict.find(tok))
                tf[*idx] += 1.0;
        double norm2 = 0.0;
        for (auto& [t, v] : tf) {
            v *= idf[t];
            norm2 += v * v;
        }
        if (norm2 == 0.0) {
            warn(warnings, "document " + std::to_string(d) + " has no tokens left");
            continue;
        }
        const double norm = std::sqrt(norm2);
        for (const auto& [t, v] : tf)
            triplets.emplace_back(static_cast<int>(d), static_cast<int>(t), v / norm);
    }
    TfIdfMatrix out;
    out.values.resize(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(dict.size()));
    out.values.setFromTriplets(triplets.begin(), triplets.end());
    out.values.makeCompressed();
    out.dictionary = dict;
    return out;
}

/// Raw term counts per class label, entries sorted by count then term.
inline std::map<std::string, TermCloud> class_term_frequencies(const TokenizedDocs& docs,
                                                              const std::vector<std::string>& labels,
                                                              const std::set<std::string>* declared = nullptr)
{
    if (labels.size() != docs.size())
        throw InvalidArgument("class attribute length does not match corpus");
    std::map<std::string, std::map<std::string, double>> counts;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        if (declared != nullptr && !declared->count(labels[d]))
            throw InvalidArgument("unknown class label '" + labels[d] + "'");
        auto& c = counts[labels[d]];
        for (const auto& t : docs[d])
            c[t] += 1.0;
    }
    std::map<std::string, TermCloud> out;
    for (auto& [label, terms] : counts) {
        TermCloud cloud;
        cloud.class_label = label;
        cloud.mode = CloudMode::frequency;
        for (const auto& [t, c] : terms)
            cloud.entries.push_back({t, c});
        std::stable_sort(cloud.entries.begin(), cloud.entries.end(),
                         [](const TermWeight& a, const TermWeight& b) { return a.weight > b.weight; });
        out.emplace(label, std::move(cloud));
    }
    return out;
}

inline std::vector<TermWeight> top_terms(const Vector& row, const std::vector<std::string>& terms, std::size_t top_n,
                                         bool skip_zero = true)
{
    if (static_cast<std::size_t>(row.size()) != terms.size())
        throw InvalidArgument("row length does not match vocabulary");
    std::vector<double> w(row.data(), row.data() + row.size());
    std::vector<TermWeight> out;
    for (auto idx : top_indices(w, top_n)) {
        if (skip_zero && w[idx] <= 0.0)
            continue;
        out.push_back({terms[idx], w[idx]});
    }
    return out;
}

inline TermCloud topic_weight_cloud(const Vector& h_row, const std::vector<std::string>& terms, std::size_t top_n,
                                    std::string label = {})
{
    for (Eigen::Index i = 0; i < h_row.size(); ++i)
        if (h_row[i] < 0.0)
            throw InvalidArgument("topic row has negative weight");
    TermCloud cloud;
    cloud.class_label = std::move(label);
    cloud.mode = CloudMode::topic_weight;
    cloud.entries = top_terms(h_row, terms, top_n);
    return cloud;
}

/// From / Lost / Gained / To term lists for a connector between two topics.
struct TermDelta {
    TermCloud cloud;  // top_n by |delta|, signed
    std::vector<TermWeight> from;
    std::vector<TermWeight> lost;
    std::vector<TermWeight> gained;
    std::vector<TermWeight> to;
    std::vector<double> deltas;  // per vocabulary term
};

inline TermDelta transition_term_delta(const Vector& from_row, const Vector& to_row,
                                       const std::vector<std::string>& terms, std::size_t top_n,
                                       std::string label = {})
{
    if (from_row.size() != to_row.size())
        throw InvalidArgument("rows span different vocabularies");
    TermDelta out;
    out.cloud.class_label = std::move(label);
    out.cloud.mode = CloudMode::weight_difference;
    out.deltas.resize(static_cast<std::size_t>(from_row.size()));
    std::vector<double> magnitude(out.deltas.size()), gain(out.deltas.size()), loss(out.deltas.size());
    for (std::size_t t = 0; t < out.deltas.size(); ++t) {
        const double d = to_row[static_cast<Eigen::Index>(t)] - from_row[static_cast<Eigen::Index>(t)];
        out.deltas[t] = d;
        magnitude[t] = std::abs(d);
        gain[t] = d > 0 ? d : 0.0;
        loss[t] = d < 0 ? -d : 0.0;
    }
    for (auto idx : top_indices(magnitude, top_n))
        if (magnitude[idx] > 0.0)
            out.cloud.entries.push_back({terms[idx], out.deltas[idx]});
    for (auto idx : top_indices(gain, top_n))
        if (gain[idx] > 0.0)
            out.gained.push_back({terms[idx], out.deltas[idx]});
    for (auto idx : top_indices(loss, top_n))
        if (loss[idx] > 0.0)
            out.lost.push_back({terms[idx], out.deltas[idx]});
    out.from = top_terms(from_row, terms, top_n);
    out.to = top_terms(to_row, terms, top_n);
    return out;
}

/// Corpus preprocessing shared by every NMF task of a sweep.
struct TextPipelineOptions {
    std::unordered_set<std::string> stopwords;
    std::size_t min_df = 1;
    std::size_t n_bigrams = 0;
    std::size_t max_unigrams = 0;
    std::size_t max_bigrams = 0;
    std::vector<std::string> strip_patterns;
};

struct PreparedCorpus {
    TokenizedDocs docs;
    TfIdfMatrix tfidf;
};

inline PreparedCorpus prepare_corpus(const std::vector<std::string>& corpus, const TextPipelineOptions& options,
                                     Warnings* warnings = nullptr)
{
    auto tok = tokenize(corpus, options.stopwords, options.min_df, options.strip_patterns);
    auto docs = inject_bigrams(tok.docs, options.n_bigrams);
    auto dict = build_dictionary(docs, DictionaryOptions{options.min_df, options.max_unigrams, options.max_bigrams});
    if (dict.size() == 0)
        throw InvalidArgument("vocabulary is empty after filtering");
    PreparedCorpus out;
    out.docs = restrict_to_dictionary(docs, dict);
    out.tfidf = build_tfidf(out.docs, dict, warnings);
    return out;
}

}  // namespace sweepscope
