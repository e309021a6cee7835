#include "oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace sweepscope;
using testing_support::gaussian;
using testing_support::make_iteration;

namespace {

// `n_iter` iterations of the same four well-separated groups, lightly jittered.
SweepRun repeated_groups(std::size_t n_iter, std::size_t dims = 2)
{
    SweepRun run;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> jitter(0.0, 0.01);
    const std::size_t per = 10;
    for (std::size_t it = 0; it < n_iter; ++it) {
        Matrix x(static_cast<Eigen::Index>(4 * per), static_cast<Eigen::Index>(dims));
        Labels labels;
        for (int g = 0; g < 4; ++g)
            for (std::size_t i = 0; i < per; ++i) {
                const auto r = static_cast<Eigen::Index>(static_cast<std::size_t>(g) * per + i);
                for (Eigen::Index c = 0; c < x.cols(); ++c)
                    x(r, c) = ((g >> (c % 2)) & 1 ? 10.0 : -10.0) * (c < 2 ? 1.0 : 0.1 * static_cast<double>(c)) +
                              jitter(rng);
                labels.push_back(g);
            }
        run.iterations.push_back(make_iteration(std::to_string(it), labels, x));
    }
    run.visible.assign(n_iter, true);
    return run;
}

}  // namespace

TEST(Pool, StacksEveryGroup)
{
    const auto run = repeated_groups(5);
    const auto pm = pool(run);
    EXPECT_EQ(pm.size(), 20u);
    EXPECT_EQ(pm.n_iterations, 5u);
    EXPECT_EQ(pm.find("3", 2), 14u);
    EXPECT_THROW(pm.find("3", 9), NotFound);
    EXPECT_TRUE(pm.pca_basis.size() == 0);
    for (Eigen::Index r = 0; r < pm.processed.rows(); ++r)
        EXPECT_NEAR(pm.processed.row(r).norm(), 1.0, 1e-12);
}

TEST(Pool, PcaKeepsNinetyFivePercentAboveTenColumns)
{
    SweepRun run;
    const auto x = gaussian(60, 12, 8);
    for (int it = 0; it < 4; ++it) {
        Labels l(60);
        for (std::size_t i = 0; i < 60; ++i)
            l[i] = static_cast<int>((i + static_cast<std::size_t>(it)) % 6);
        run.iterations.push_back(make_iteration(std::to_string(it), l, x));
    }
    const auto pm = pool(run);
    EXPECT_EQ(pm.size(), 24u);
    EXPECT_GE(pm.explained_variance_ratio, 0.95);
    EXPECT_LE(pm.retained_dims, 12u);
    EXPECT_EQ(pm.processed.cols(), static_cast<Eigen::Index>(pm.retained_dims));
    EXPECT_EQ(pm.pca_basis.rows(), 12);
}

TEST(Pool, TooFewRowsRejected)
{
    SweepRun run;
    run.iterations.push_back(make_iteration("a", {0, 0, 0}, gaussian(3, 2, 1)));
    EXPECT_THROW(pool(run), InvalidArgument);
}

TEST(Archetypes, DefaultThreshold)
{
    EXPECT_EQ(default_threshold(21), 10);
    EXPECT_EQ(default_threshold(7), 3);
    EXPECT_EQ(default_threshold(3), 2);
    EXPECT_EQ(default_threshold(1), 2);
}

TEST(Archetypes, IdenticalGroupSetsGiveOneArchetypePerPosition)
{
    const auto run = repeated_groups(6);
    const auto pm = pool(run);
    const auto am = detect(pm, 3);
    EXPECT_EQ(am.n_archetypes(), 4);
    EXPECT_EQ(am.n_cluster_archetypes(), 4);
    EXPECT_EQ(am.noise_pct(), 0.0);
    EXPECT_EQ(am.complete_iterations.size(), 6u);
    for (int g = 0; g < 4; ++g) {
        const int a = am.archetype_labels[pm.find("0", g)];
        for (int it = 1; it < 6; ++it)
            EXPECT_EQ(am.archetype_labels[pm.find(std::to_string(it), g)], a);
    }
    EXPECT_EQ(am.min_samples, 3);
}

TEST(Archetypes, ThresholdBounds)
{
    const auto pm = pool(repeated_groups(3));
    EXPECT_THROW(detect(pm, 1), InvalidArgument);
    EXPECT_THROW(detect(pm, 12), InvalidArgument);
    EXPECT_NO_THROW(detect(pm, 11));
    EXPECT_EQ(detect(pm, 8).min_samples, 5);
}

TEST(Archetypes, CompleteIterationsCoverEveryCountedArchetype)
{
    const auto out = testing_support::run_config(testing_support::blobs_config());
    const auto pm = pool(out.run);
    EXPECT_EQ(pm.size(), 35u);
    for (int t = 2; t <= 6; ++t) {
        for (bool count_noise : {true, false}) {
            const auto am = detect(pm, t, DetectOptions{count_noise});
            for (const auto& it : out.run.iterations) {
                std::set<int> present;
                for (const auto& g : it.groups)
                    present.insert(am.archetype_labels[pm.find(it.key, g.group_id)]);
                bool all = true;
                for (int a = 0; a < am.n_archetypes(); ++a)
                    if (count_noise || !am.noise_archetype[static_cast<std::size_t>(a)])
                        all = all && present.count(a);
                EXPECT_EQ(all, am.complete_iterations.count(it.key) == 1) << it.key << " t=" << t;
            }
        }
    }
}

TEST(Archetypes, SweepCoversTwoToNMinusOne)
{
    const auto run = repeated_groups(21);
    const auto pm = pool(run);
    const auto curve = threshold_sweep(pm);
    ASSERT_EQ(curve.size(), 19u);
    EXPECT_EQ(curve.front().threshold, 2);
    EXPECT_EQ(curve.back().threshold, 20);
    for (const auto& p : curve)
        EXPECT_EQ(p.archetypes, detect(pm, p.threshold).n_archetypes());
    EXPECT_EQ(curve[8].archetypes, 4);
}

TEST(Archetypes, SizeAttributeScaling)
{
    SweepRun run;
    const auto x = gaussian(12, 2, 3);
    run.iterations.push_back(make_iteration("a", {0, 0, 0, 0, 0, 0, 1, 1, 1, 2, 2, 2}, x));
    const auto pm = pool(run);
    const auto s = size_attribute(run, pm, "group_size");
    EXPECT_DOUBLE_EQ(*std::max_element(s.begin(), s.end()), 1.0);
    EXPECT_DOUBLE_EQ(*std::min_element(s.begin(), s.end()), 0.0);

    SweepRun even;
    even.iterations.push_back(make_iteration("a", {0, 0, 1, 1, 2, 2}, gaussian(6, 2, 3)));
    const auto pe = pool(even);
    EXPECT_EQ(size_attribute(even, pe, "group_size"), std::vector<double>(3, 0.5));
    EXPECT_EQ(size_attribute(even, pe, "size"), std::vector<double>(3, 0.5));
    EXPECT_THROW(size_attribute(even, pe, "nope"), NotFound);
    EXPECT_THROW(size_attribute(even, pe, "hdbscan_probability"), InvalidArgument);
}
