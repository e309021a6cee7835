#include "oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace sweepscope;
using testing_support::gaussian;

TEST(Membership, SilhouetteMapping)
{
    // two tight pairs: silhouettes near 1
    Matrix x(4, 1);
    x << 0, 0.1, 10, 10.1;
    const auto m = membership_silhouette(x, {0, 0, 1, 1});
    for (double v : m)
        EXPECT_GT(v, 0.99);
    const auto noise = membership_silhouette(x, {0, 0, 1, kNoise});
    EXPECT_EQ(noise[3], 0.0);
    Warnings w;
    const auto single = membership_silhouette(x, {0, 0, 0, 0}, &w);
    EXPECT_EQ(single, std::vector<double>(4, 0.5));
    EXPECT_EQ(w.size(), 1u);
}

TEST(Membership, EndpointsOfMapping)
{
    // item 0 sits exactly between the groups: silhouette 0 -> 0.5
    Matrix x(5, 1);
    x << 0, -1, -1, 1, 1;
    const auto s = silhouette_samples(x, {0, 0, 0, 1, 1});
    ASSERT_TRUE(s.has_value());
    const auto m = membership_silhouette(x, {0, 0, 0, 1, 1});
    for (std::size_t i = 0; i < 5; ++i)
        EXPECT_DOUBLE_EQ(m[i], ((*s)[i] + 1.0) / 2.0);
    EXPECT_GE(m[0], 0.0);
    EXPECT_LE(m[0], 1.0);
}

TEST(Membership, NmfDominantShare)
{
    Vector w(3);
    w << 0.2, 0.6, 0.2;
    EXPECT_DOUBLE_EQ(membership_nmf(w), 0.6);
    w << 1, 0, 0;
    EXPECT_DOUBLE_EQ(membership_nmf(w), 1.0);
    w.setZero();
    Warnings warn;
    EXPECT_DOUBLE_EQ(membership_nmf(w, &warn), 1.0 / 3.0);
    EXPECT_EQ(warn.size(), 1u);
    w << -1, 1, 1;
    EXPECT_THROW(membership_nmf(w), InvalidArgument);
}

TEST(Outlier, EntropyOneHotAndUniform)
{
    Vector w(4);
    w << 0, 3, 0, 0;
    EXPECT_DOUBLE_EQ(outlier_entropy(w), 0.0);
    w.setConstant(0.25);
    EXPECT_NEAR(outlier_entropy(w), 1.0, 1e-15);
    w.setZero();
    EXPECT_DOUBLE_EQ(outlier_entropy(w), 1.0);
    Vector one(1);
    one << 1.0;
    EXPECT_DOUBLE_EQ(outlier_entropy(one), 0.0);
}

TEST(Outlier, DistanceRatio)
{
    const auto r = outlier_distance_ratio({1.0, 2.0, 4.0});
    EXPECT_EQ(r, (std::vector<double>{0.25, 0.5, 1.0}));
    EXPECT_EQ(outlier_distance_ratio({3.0}), std::vector<double>{0.0});
    EXPECT_EQ(outlier_distance_ratio({0.0, 0.0}), (std::vector<double>{0.0, 0.0}));
    const auto g = grouped_outlier_ratio({0, 1, 0, 1}, {1.0, 5.0, 2.0, 10.0});
    EXPECT_EQ(g, (std::vector<double>{0.5, 0.5, 1.0, 1.0}));
}

TEST(Uncertainty, BoundsAcrossMethods)
{
    const auto x = gaussian(80, 3, 12);
    std::vector<FittedModel> models{fit_kmeans(x, {4, 1}), fit_dbscan(x, 0.7, 4), fit_hdbscan(x, 5)};
    NmfOptions o;
    o.k = 3;
    const Matrix v = x.cwiseAbs();
    models.push_back(fit_nmf(v.sparseView(), o));
    for (const auto& m : models) {
        const auto recs = uncertainty_for(m, x);
        ASSERT_EQ(recs.size(), 80u);
        for (const auto& r : recs) {
            EXPECT_GE(r.membership, 0.0);
            EXPECT_LE(r.membership, 1.0);
            EXPECT_GE(r.outlier, 0.0);
            EXPECT_LE(r.outlier, 1.0);
        }
    }
    EXPECT_THROW(uncertainty_for("nmf", models[0], x), InvalidArgument);
    EXPECT_NO_THROW(uncertainty_for("kmeans", models[0], x));
}

TEST(Uncertainty, HdbscanUsesProbabilitiesAndGlosh)
{
    const auto x = gaussian(50, 2, 2);
    const auto h = fit_hdbscan(x, 5);
    const auto recs = uncertainty_for(FittedModel(h), x);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(recs[i].membership, h.probabilities[i]);
        EXPECT_EQ(recs[i].outlier, h.glosh[i]);
    }
}
