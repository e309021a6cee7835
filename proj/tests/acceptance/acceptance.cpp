#include "oracles.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

using namespace sweepscope;
using testing_support::gaussian;
using testing_support::TempDir;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " [" << what << "]";
        }
    }
};

RunOutput run_json(const Json& j, std::size_t workers = 1)
{
    const auto c = parse_config(j);
    return run_sweep(c, load_input(c.input), SweepOptions{workers});
}

Json moons_config()
{
    return Json::parse(R"({
        "method": "dbscan",
        "sweep": {"param": "eps", "start": 0.05, "stop": 0.24, "step": 0.01},
        "fixed": {"min_samples": 5},
        "input": {"synthetic": {"kind": "moons_noise", "n_items": 500, "noise_fraction": 0.1, "seed": 3}},
        "projection": {"method": "mds", "seed": 0}
    })");
}

Json topics_config(int topics, bool duplicate)
{
    auto j = Json::parse(R"({
        "method": "nmf",
        "sweep": {"param": "k", "start": 2, "stop": 8, "step": 1},
        "fixed": {"seed": 0},
        "projection": {"method": "mds", "seed": 0}
    })");
    j["input"]["synthetic"] = {{"kind", "planted_topics"}, {"n_items", 400}, {"topics", topics},
                               {"duplicate_topics", duplicate}, {"seed", 11}};
    return j;
}

const IterationResult& iteration(const RunOutput& out, const std::string& key)
{
    for (const auto& it : out.run.iterations)
        if (it.key == key)
            return it;
    throw NotFound("iteration " + key);
}

Labels random_labels(std::size_t n, int k, std::uint64_t seed, bool noise)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(noise ? -1 : 0, k - 1);
    Labels l(n);
    for (auto& v : l)
        v = pick(rng);
    for (int g = 0; g < k; ++g) {
        l[static_cast<std::size_t>(2 * g)] = g;
        l[static_cast<std::size_t>(2 * g + 1)] = g;
    }
    return l;
}

Matrix random_nonnegative(std::size_t r, std::size_t c, std::uint64_t seed)
{
    return gaussian(r, c, seed).cwiseAbs();
}

Outcome blobs()
{
    Outcome o;
    const auto out = run_json(testing_support::blobs_config(2, 8));
    std::string best;
    double best_s = -2.0, second = -2.0;
    for (const auto& it : out.run.iterations) {
        const double s = it.metrics.at("silhouette").value;
        o.detail << " sil[" << it.key << "]=" << s;
        if (s > best_s) {
            second = best_s;
            best_s = s;
            best = it.key;
        } else {
            second = std::max(second, s);
        }
    }
    o.require(best == "3" && best_s > second, "silhouette argmax at K=3");

    const auto& am = out.archetypes->model;
    o.detail << " threshold=" << am.threshold << " archetypes=" << am.n_archetypes() << " complete={";
    for (const auto& k : am.complete_iterations)
        o.detail << k << ' ';
    o.detail << '}';
    o.require(am.n_archetypes() == 3, "3 non-noise archetypes at default threshold");
    bool all_complete = true;
    for (int k = 3; k <= 8; ++k)
        all_complete = all_complete && am.complete_iterations.count(std::to_string(k));
    o.require(all_complete, "K>=3 iterations complete");

    const double a = oracle::ari(iteration(out, "3").assignments, generate(out.config.input.synthetic).truth);
    o.detail << " ari(K=3)=" << a;
    o.require(a == 1.0, "ARI(K=3, truth) = 1");
    return o;
}

Outcome density()
{
    Outcome o;
    const auto out = run_json(moons_config());
    const auto truth = generate(out.config.input.synthetic).truth;
    std::vector<double> eps, noise;
    bool found = false;
    for (const auto& it : out.run.iterations) {
        eps.push_back(it.param_value);
        noise.push_back(it.metrics.at("noise_pct").value);
        const int k = static_cast<int>(it.metrics.at("k_discovered").value);
        if (k == 2 && oracle::ari(it.assignments, truth) > 0.9) {
            if (!found)
                o.detail << " eps=" << it.param_value << " K=2 ari=" << oracle::ari(it.assignments, truth);
            found = true;
        }
    }
    o.require(out.run.iterations.size() == 20, "20 eps values");
    o.require(found, "some eps with K=2 and ARI > 0.9");
    int inversions = 0;
    for (std::size_t i = 1; i < noise.size(); ++i)
        inversions += noise[i] > noise[i - 1] ? 1 : 0;
    const double rho = oracle::spearman(eps, noise);
    o.detail << " inversions=" << inversions << " spearman=" << rho;
    o.require(inversions <= 1, "noise % inversions <= 1");
    o.require(rho < -0.9, "spearman < -0.9");
    return o;
}

Outcome topics()
{
    Outcome o;
    const auto out = run_json(topics_config(4, false));
    const auto& it = iteration(out, "4");
    const auto& terms = out.inputs.corpus->tfidf.dictionary.terms;
    std::vector<const Vector*> h;
    for (const auto& g : it.groups)
        if (!g.is_noise)
            h.push_back(&g.representative);
    o.require(h.size() == 4 && static_cast<std::size_t>(h[0]->size()) == terms.size(), "4 topic rows over dictionary");
    std::map<int, std::map<int, int>> votes;
    int planted = 0;
    for (std::size_t t = 0; t < terms.size() && h.size() == 4; ++t)
        for (int v = 0; v < 4; ++v) {
            if (terms[t].rfind(topic_word(v, 0).substr(0, 3), 0) != 0)
                continue;
            int arg = 0;
            for (int k = 1; k < 4; ++k)
                if ((*h[static_cast<std::size_t>(k)])(static_cast<Eigen::Index>(t)) >
                    (*h[static_cast<std::size_t>(arg)])(static_cast<Eigen::Index>(t)))
                    arg = k;
            ++votes[v][arg];
            ++planted;
        }
    int agreeing = 0;
    std::set<int> majority;
    for (const auto& [v, counts] : votes) {
        int best = -1, best_n = 0;
        for (const auto& [k, n] : counts)
            if (n > best_n) {
                best = k;
                best_n = n;
            }
        agreeing += best_n;
        majority.insert(best);
    }
    const double purity = planted ? static_cast<double>(agreeing) / planted : 0.0;
    o.detail << " planted_terms=" << planted << " purity=" << purity;
    o.require(purity == 1.0 && majority.size() == 4 && votes.size() == 4, "purity = 1 with one topic per vocabulary");

    const double div4 = it.metrics.at("diversity").value;
    const auto dup = run_json(topics_config(8, true));
    const double div8 = iteration(dup, "8").metrics.at("diversity").value;
    o.detail << " diversity(K=4)=" << div4 << " diversity(K=8, duplicated)=" << div8;
    o.require(div4 > div8, "diversity K=4 > duplicated K=8");
    return o;
}

Outcome oracle_equivalence()
{
    Outcome o;
    double worst = 0.0;
    auto check = [&](double a, double b, const std::string& what) {
        const double d = std::abs(a - b);
        worst = std::max(worst, d);
        o.require(d < 1e-9, what);
    };
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const auto x = gaussian(60, 1 + seed % 4, seed);
        const auto labels = random_labels(60, 2 + static_cast<int>(seed % 4), seed + 7, seed % 2 == 1);
        const auto rec = clustering_metrics(x, labels, {seed % 2 == 1});
        check(rec.at("silhouette").value, oracle::silhouette(x, labels), "silhouette");
        check(rec.at("davies_bouldin").value, oracle::davies_bouldin(x, labels), "davies_bouldin");
        check(rec.at("calinski_harabasz").value, oracle::calinski_harabasz(x, labels), "calinski_harabasz");
    }
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial) * 3;
        std::uniform_int_distribution<int> pa(-1, 3), pb(0, 1 + trial % 5);
        Labels a(n), b(n);
        std::vector<double> v(n);
        std::normal_distribution<double> nd;
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = pa(rng);
            b[i] = pb(rng);
            v[i] = nd(rng);
        }
        check(sweepscope::ari(a, b), oracle::ari(a, b), "ari");
        for (double p : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0})
            check(quantile(v, p), oracle::quantile(v, p), "quantile");
    }

    const std::vector<std::string> vocab{"aa", "bb", "cc", "dd", "ee", "ff"};
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1), len(0, 7);
    for (int trial = 0; trial < 30; ++trial) {
        TokenizedDocs docs(1 + static_cast<std::size_t>(trial) % 10);
        for (auto& d : docs)
            for (std::size_t i = len(rng); i > 0; --i)
                d.push_back(vocab[pick(rng)]);
        docs[0] = {"aa", "bb", "cc", "dd"};
        const std::size_t window = 1 + static_cast<std::size_t>(trial) % 3;
        const auto wins = oracle::windows(docs, window);
        const auto wc = count_windows({"aa", "bb"}, docs, window);
        const double n = static_cast<double>(wc.windows);
        check(n, static_cast<double>(wins.size()), "window count");
        check(npmi(static_cast<double>(wc.joint(0, 1)) / n, static_cast<double>(wc.single[0]) / n,
                   static_cast<double>(wc.single[1]) / n),
              oracle::npmi(wins, "aa", "bb"), "npmi");
        const std::vector<std::vector<std::string>> topic{{"aa", "bb", "cc"}, {"dd", "aa", "bb"}};
        const auto cv = coherence_cv(topic, docs, window);
        for (std::size_t t = 0; t < topic.size(); ++t)
            check(cv[t], oracle::coherence_cv(topic[t], docs, window), "c_v");
    }

    for (std::size_t n = 3; n <= 12; ++n) {
        const auto x = gaussian(n, 2, 40 + n);
        const auto d = pairwise_distances(x);
        const auto mr = mutual_reachability(d, core_distances(d, 3));
        const auto mst = minimum_spanning_tree(mr);
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        double w = 0.0;
        for (const auto& e : mst) {
            edges.emplace_back(e.a, e.b);
            w += e.weight;
        }
        if (n <= 8)
            check(w, oracle::mst_weight_enumerated(mr), "mst weight (enumerated)");
        o.require(oracle::is_minimum_spanning_tree(mr, edges), "mst cycle property n=" + std::to_string(n));
    }

    const TokenizedDocs docs{{"apple", "banana", "apple"}, {"banana", "cherry"}, {"cherry", "cherry", "date"}};
    const Matrix v(build_tfidf(docs, build_dictionary(docs)).values);
    const double rare = std::log(2.0) + 1.0;
    const double common = std::log(4.0 / 3.0) + 1.0;
    const double n0 = std::sqrt(4 * rare * rare + common * common);
    const double n1 = std::sqrt(2 * common * common);
    const double n2 = std::sqrt(4 * common * common + rare * rare);
    const double expect[3][4] = {{2 * rare / n0, common / n0, 0, 0},
                                 {0, common / n1, common / n1, 0},
                                 {0, 0, 2 * common / n2, rare / n2}};
    for (int d = 0; d < 3; ++d)
        for (int t = 0; t < 4; ++t)
            check(v(d, t), expect[d][t], "tfidf");
    o.detail << " max|delta|=" << worst;
    return o;
}

Outcome monotonicity()
{
    Outcome o;
    std::size_t nmf_steps = 0, lloyd_steps = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto x = random_nonnegative(30, 12, seed + 200);
        NmfOptions no;
        no.k = 4;
        no.seed = seed;
        no.tol = 0.0;
        no.max_iter = 400;
        const auto m = fit_nmf(x.sparseView(), no);
        o.require(m.objective_trace.size() == 401, "400 nmf updates");
        for (std::size_t i = 1; i < m.objective_trace.size(); ++i, ++nmf_steps)
            if (m.objective_trace[i] > m.objective_trace[i - 1] * (1 + 1e-8))
                o.require(false, "nmf trace increased seed " + std::to_string(seed));

        KMeansOptions ko;
        ko.k = 4;
        ko.seed = seed;
        ko.tol = 0.0;
        const auto km = fit_kmeans(x, ko);
        for (std::size_t i = 1; i < km.sse_trace.size(); ++i, ++lloyd_steps)
            if (km.sse_trace[i] > km.sse_trace[i - 1] * (1 + 1e-12))
                o.require(false, "kmeans sse increased seed " + std::to_string(seed));
    }
    o.detail << " nmf_updates=" << nmf_steps << " lloyd_steps=" << lloyd_steps;
    return o;
}

struct Battery {
    std::vector<std::pair<std::string, RunOutput>> runs;
};

const Battery& battery()
{
    static const Battery b = [] {
        Battery out;
        out.runs.emplace_back("blobs/kmeans", run_json(testing_support::blobs_config(2, 8)));
        out.runs.emplace_back("moons/dbscan", run_json(moons_config()));
        out.runs.emplace_back("topics/nmf", run_json(topics_config(4, false)));
        out.runs.emplace_back("moons/hdbscan", run_json(Json::parse(R"({
            "method": "hdbscan",
            "sweep": {"param": "min_cluster_size", "start": 5, "stop": 25, "step": 5},
            "fixed": {"min_samples": 5},
            "input": {"synthetic": {"kind": "moons_noise", "n_items": 500, "noise_fraction": 0.1, "seed": 3}},
            "projection": {"method": "mds", "seed": 0}
        })")));
        return out;
    }();
    return b;
}

Outcome conservation()
{
    Outcome o;
    std::size_t matrices = 0;
    for (const auto& [name, out] : battery().runs) {
        const auto& its = out.run.iterations;
        for (std::size_t a = 0; a < its.size(); ++a)
            for (std::size_t b = 0; b < its.size(); ++b) {
                if (a == b)
                    continue;
                const auto tm = overlap(its[a], its[b]);
                ++matrices;
                bool ok = conserves(tm, its[a], its[b]) && tm.total() == its[a].assignments.size();
                for (std::size_t i = 0; i < tm.rows(); ++i)
                    ok = ok && tm.row_sum(i) == its[a].groups[i].members.size();
                for (std::size_t j = 0; j < tm.cols(); ++j)
                    ok = ok && tm.col_sum(j) == its[b].groups[j].members.size();
                if (!ok)
                    o.require(false, name + " " + its[a].key + "->" + its[b].key);
            }
    }
    o.detail << " matrices=" << matrices;
    return o;
}

Outcome uncertainty_bounds()
{
    Outcome o;
    std::size_t values = 0;
    for (const auto& [name, out] : battery().runs)
        for (const auto& it : out.run.iterations)
            for (std::size_t i = 0; i < it.membership.size(); ++i, values += 2)
                if (!(it.membership[i] >= 0.0 && it.membership[i] <= 1.0 && it.outlier[i] >= 0.0 &&
                      it.outlier[i] <= 1.0)) {
                    o.require(false, name + " " + it.key);
                    break;
                }

    // silhouettes -1, 0, 1, 1 by construction
    Matrix x(4, 1);
    x << 0, 10, 0, 0;
    const Labels l{0, 0, 1, 1};
    const auto s = silhouette_samples(x, l);
    const auto m = membership_silhouette(x, l);
    o.require(s && (*s)[0] == -1.0 && (*s)[1] == 0.0 && (*s)[2] == 1.0, "silhouette construction");
    o.require(m[0] == 0.0 && m[1] == 0.5 && m[2] == 1.0, "(s+1)/2 spot values");

    Vector one_hot = Vector::Zero(5), uniform = Vector::Constant(5, 0.2);
    one_hot(2) = 1.0;
    const double e0 = outlier_entropy(one_hot), e1 = outlier_entropy(uniform);
    o.require(e0 == 0.0 && std::abs(e1 - 1.0) < 1e-12, "entropy one-hot/uniform");
    o.detail << " values_checked=" << values << " membership(-1,0,1)=(" << m[0] << "," << m[1] << "," << m[2]
             << ") entropy=(" << e0 << "," << e1 << ")";
    return o;
}

Outcome color_stability()
{
    Outcome o;
    TempDir dir("acc-colors");
    persist_run(run_json(testing_support::blobs_config(2, 8)), dir.str());
    RunSession s(load_run(dir.str()));
    const int n_iter = static_cast<int>(s.run_json()["iterations"].size());
    std::string reference;
    int views = 0;
    for (int t = 2; t <= n_iter - 1; ++t) {
        s.set_threshold(t);
        for (const char* m : {"mds", "tsne"}) {
            const auto emb = s.embedding(m);
            Json colors = Json::array();
            for (const auto& row : emb["rows"])
                colors.push_back(row["color"]);
            const auto bytes = colors.dump();
            if (reference.empty())
                reference = bytes;
            ++views;
            if (bytes != reference)
                o.require(false, std::string(m) + " threshold " + std::to_string(t));
        }
    }
    o.detail << " thresholds=2.." << n_iter - 1 << " views=" << views << " table_bytes=" << reference.size();
    o.require(!reference.empty(), "non-empty color table");
    return o;
}

Outcome determinism()
{
    Outcome o;
    TempDir d1("acc-w1"), d8("acc-w8");
    const auto cfg = moons_config();
    persist_run(run_json(cfg, 1), d1.str());
    persist_run(run_json(cfg, 8), d8.str());
    const auto m1 = Json::parse(read_file(d1.str("manifest.json"))).at("inventory");
    const auto m8 = Json::parse(read_file(d8.str("manifest.json"))).at("inventory");
    o.detail << " artifacts=" << m1.size();
    o.require(m1 == m8, "manifest hashes equal");
    for (const auto& [k, v] : m1.items())
        if (!m8.contains(k) || m8.at(k) != v)
            o.require(false, k);
    return o;
}

Outcome seed_stability()
{
    auto j = testing_support::blobs_config();
    j["sweep"] = {{"param", "seed"}, {"start", 1}, {"stop", 30}, {"step", 1}};
    j["fixed"] = {{"k", 3}};
    const auto out = run_json(j);
    Outcome o;
    o.require(out.run.iterations.size() == 30, "30 seeds");
    double lo = 2.0, hi = -2.0, min_ari = 1.0;
    for (std::size_t a = 0; a < out.run.iterations.size(); ++a) {
        const double s = out.run.iterations[a].metrics.at("silhouette").value;
        lo = std::min(lo, s);
        hi = std::max(hi, s);
        for (std::size_t b = a + 1; b < out.run.iterations.size(); ++b)
            min_ari = std::min(min_ari, oracle::ari(out.run.iterations[a].assignments, out.run.iterations[b].assignments));
    }
    o.detail << " min_pairwise_ari=" << min_ari << " silhouette_range=" << hi - lo;
    o.require(min_ari == 1.0, "pairwise ARI = 1");
    o.require(hi - lo < 0.01, "silhouette range < 0.01");
    return o;
}

Outcome default_threshold_rule()
{
    auto j = testing_support::blobs_config();
    j["sweep"] = {{"param", "seed"}, {"start", 1}, {"stop", 21}, {"step", 1}};
    j["fixed"] = {{"k", 3}};
    const auto out = run_json(j);
    Outcome o;
    const auto& st = *out.archetypes;
    o.detail << " iterations=" << out.run.iterations.size() << " default=" << st.model.threshold
             << " curve_points=" << st.curve.size();
    o.require(out.run.iterations.size() == 21, "21 iterations");
    o.require(default_threshold(21) == 10 && st.model.threshold == 10, "default threshold 10");
    o.require(st.curve.size() == 19 && st.curve.front().threshold == 2 && st.curve.back().threshold == 20,
              "19-point curve over [2, 20]");
    return o;
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"ground-truth recovery (blobs)", blobs},
        {"ground-truth recovery (density)", density},
        {"ground-truth recovery (topics)", topics},
        {"oracle equivalence", oracle_equivalence},
        {"monotonicity", monotonicity},
        {"conservation", conservation},
        {"uncertainty bounds", uncertainty_bounds},
        {"color stability", color_stability},
        {"determinism", determinism},
        {"seed stability", seed_stability},
        {"default threshold rule", default_threshold_rule},
    };
    int failed = 0;
    const auto start = std::chrono::steady_clock::now();
    for (const auto& [name, fn] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " exception: " << e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += o.pass ? 0 : 1;
        std::printf("%s %s:%s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str(), secs);
        std::fflush(stdout);
    }
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%zu criteria, %d failed, %.1fs\n", criteria.size(), failed, total);
    return failed == 0 ? 0 : 1;
}
