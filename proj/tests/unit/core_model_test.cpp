#include "oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace sweepscope;
using testing_support::make_iteration;

TEST(Common, QuantileMatchesTypeSevenOracle)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(1 + trial % 17);
        for (auto& x : v)
            x = u(rng);
        for (double p : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0})
            EXPECT_LT(std::abs(quantile(v, p) - oracle::quantile(v, p)), 1e-9);
    }
    EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
    EXPECT_THROW(quantile({}, 0.5), InvalidArgument);
}

TEST(Common, FormatAndParseNumbers)
{
    EXPECT_EQ(format_param(0.05), "0.05");
    EXPECT_EQ(format_param(20.0), "20");
    EXPECT_EQ(format_param(0.1 + 0.2), "0.3");
    EXPECT_DOUBLE_EQ(parse_double(" +1.5 "), 1.5);
    EXPECT_THROW(parse_double("abc"), InvalidArgument);
    EXPECT_THROW(parse_double("1.5x"), InvalidArgument);
}

TEST(Common, TopIndicesBreaksTiesByIndex)
{
    const auto idx = top_indices({1.0, 3.0, 3.0, 2.0}, 3);
    EXPECT_EQ(idx, (std::vector<std::size_t>{1, 2, 3}));
    EXPECT_EQ(top_indices({1.0}, 5).size(), 1u);
}

TEST(ItemTable, StandardizesAndDropsConstantColumns)
{
    ItemTable t;
    t.features.resize(4, 3);
    t.features << 1, 5, 2, 2, 5, 4, 3, 5, 6, 4, 5, 8;
    Warnings w;
    const auto v = validate_table(t, {}, &w);
    EXPECT_EQ(v.features.cols(), 2);
    EXPECT_EQ(v.dropped_columns, std::vector<std::string>{"f1"});
    EXPECT_EQ(w.size(), 1u);
    for (Eigen::Index c = 0; c < 2; ++c) {
        EXPECT_NEAR(v.features.col(c).mean(), 0.0, 1e-12);
        EXPECT_NEAR(std::sqrt(v.features.col(c).squaredNorm() / 4.0), 1.0, 1e-12);
    }
    EXPECT_EQ(v.item_ids.size(), 4u);
}

TEST(ItemTable, RejectsBadInputs)
{
    ItemTable none;
    EXPECT_THROW(validate_table(none), InvalidArgument);

    ItemTable dup;
    dup.features = Matrix::Identity(2, 2);
    dup.item_ids = {"a", "a"};
    EXPECT_THROW(validate_table(dup), InvalidArgument);

    ItemTable constant;
    constant.features = Matrix::Ones(3, 2);
    EXPECT_THROW(validate_table(constant), InvalidArgument);

    ItemTable nan;
    nan.features = Matrix::Identity(2, 2);
    nan.features(0, 0) = std::nan("");
    EXPECT_THROW(validate_table(nan), InvalidArgument);

    ItemTable empty_docs;
    empty_docs.documents = {"  ", "\n"};
    EXPECT_THROW(validate_table(empty_docs), InvalidArgument);

    ItemTable short_attr;
    short_attr.features = Matrix::Identity(2, 2);
    short_attr.attributes.push_back({"a", {"x"}});
    EXPECT_THROW(validate_table(short_attr), InvalidArgument);
}

TEST(ItemTable, StripsPatternsFromDocuments)
{
    ItemTable t;
    t.documents = {"hello <br> world", "<br>again"};
    const auto v = validate_table(t, ValidationOptions{{"<br>"}});
    EXPECT_EQ(v.documents[0], "hello  world");
    EXPECT_EQ(v.documents[1], "again");
    EXPECT_EQ(v.kind, TableKind::text);
}

TEST(Iteration, AssembleOrdersNoiseLastAndFillsPrevalence)
{
    const Labels labels{kNoise, 0, 0, 1, kNoise};
    Matrix x = Matrix::Zero(5, 1);
    auto groups = groups_from_labels(labels, 2);
    for (auto& g : groups)
        g.representative = Vector::Zero(1);
    std::swap(groups.front(), groups.back());
    auto it = assemble_iteration("k", 1.0, labels, std::vector<double>(5, 0.5), std::vector<double>(5, 0.0), groups, {});
    EXPECT_TRUE(it.groups.back().is_noise);
    EXPECT_DOUBLE_EQ(it.group(0).metrics.at("prevalence"), 0.4);
    EXPECT_EQ(it.group(kNoise).label(), "k.noise");
    EXPECT_EQ(it.group(1).label(), "k.1");
    EXPECT_THROW(it.group(7), NotFound);
}

TEST(Iteration, AssembleRejectsInconsistentPartitions)
{
    const Labels labels{0, 1};
    auto groups = groups_from_labels(labels, 2);
    for (auto& g : groups)
        g.representative = Vector::Zero(1);
    const std::vector<double> ok(2, 0.5);
    EXPECT_THROW(assemble_iteration("k", 0, labels, {0.5, 1.5}, ok, groups, {}), InvalidArgument);
    EXPECT_THROW(assemble_iteration("k", 0, labels, ok, {-0.1, 0.0}, groups, {}), InvalidArgument);

    auto overlap = groups;
    overlap[1].members.push_back(0);
    EXPECT_THROW(assemble_iteration("k", 0, labels, ok, ok, overlap, {}), InvalidArgument);

    auto missing = groups;
    missing[1].members.clear();
    EXPECT_THROW(assemble_iteration("k", 0, labels, ok, ok, missing, {}), InvalidArgument);

    auto wrong = groups;
    std::swap(wrong[0].members, wrong[1].members);
    EXPECT_THROW(assemble_iteration("k", 0, labels, ok, ok, wrong, {}), InvalidArgument);

    auto dims = groups;
    dims[1].representative = Vector::Zero(2);
    EXPECT_THROW(assemble_iteration("k", 0, labels, ok, ok, dims, {}), InvalidArgument);
}

TEST(Iteration, EmptyGroupsAllowedOnlyWhenRequested)
{
    const Labels labels{0, 0};
    auto groups = groups_from_labels(labels, 2);
    for (auto& g : groups)
        g.representative = Vector::Zero(1);
    const std::vector<double> ok(2, 0.5);
    EXPECT_THROW(assemble_iteration("k", 0, labels, ok, ok, groups, {}), InvalidArgument);
    const auto it = assemble_iteration("k", 0, labels, ok, ok, groups, {}, AssembleOptions{true});
    EXPECT_EQ(it.groups.size(), 2u);
}

TEST(Iteration, GroupsPartitionItemsExactlyOnce)
{
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> pick(-1, 4);
    for (int trial = 0; trial < 20; ++trial) {
        Labels labels(40);
        for (auto& l : labels)
            l = pick(rng);
        for (int g = 0; g < 5; ++g)
            labels[static_cast<std::size_t>(g)] = g;
        const auto x = testing_support::gaussian(40, 2, static_cast<std::uint64_t>(trial));
        const auto it = make_iteration("t", labels, x);
        std::vector<int> seen(40, 0);
        for (const auto& g : it.groups)
            for (auto i : g.members) {
                ++seen[i];
                EXPECT_EQ(it.assignments[i], g.group_id);
            }
        for (int s : seen)
            EXPECT_EQ(s, 1);
    }
}

TEST(Method, NamesRoundTrip)
{
    for (auto m : {Method::nmf, Method::kmeans, Method::dbscan, Method::hdbscan})
        EXPECT_EQ(parse_method(to_string(m)), m);
    EXPECT_THROW(parse_method("spectral"), InvalidArgument);
    EXPECT_TRUE(is_density_method(Method::hdbscan));
    EXPECT_FALSE(is_density_method(Method::nmf));
}

TEST(SweepRun, FindIteration)
{
    SweepRun run;
    run.iterations.push_back(make_iteration("2", {0, 1}, Matrix::Identity(2, 2)));
    EXPECT_EQ(run.find_iteration("2"), 0u);
    EXPECT_THROW(run.find_iteration("3"), NotFound);
}
