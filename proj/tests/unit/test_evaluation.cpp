#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hopac/evaluation.hpp"
#include "hopac/sampling.hpp"
#include "support.hpp"

namespace hopac {
namespace {

TEST(EmpiricalCopula, Corners) {
    const Matrix u = pseudo_observations(sample_opac(Generator(Family::C, 1.0), 3, 100, RngStream(1)));
    const std::vector<double> ones{1.0, 1.0, 1.0}, zeros{0.0, 0.0, 0.0};
    EXPECT_EQ(empirical_copula(u, ones), 1.0);
    EXPECT_EQ(empirical_copula(u, zeros), 0.0);

    Matrix two(2, 2);
    two(0, 0) = 0.25, two(0, 1) = 0.75, two(1, 0) = 0.75, two(1, 1) = 0.25;
    const std::vector<double> mid{0.5, 0.5};
    EXPECT_EQ(empirical_copula(two, mid), 0.0);
}

TEST(EmpiricalCopula, MatchesCountingAndIsMonotone) {
    const Matrix u = sample_opac(Generator(Family::F, 3.0), 2, 50, RngStream(2));
    RngStream rng(3);
    for (int k = 0; k < 100; ++k) {
        std::vector<double> p{rng.uniform(), rng.uniform()};
        int count = 0;
        for (std::size_t i = 0; i < u.rows(); ++i) count += u(i, 0) <= p[0] && u(i, 1) <= p[1];
        EXPECT_DOUBLE_EQ(empirical_copula(u, p), count / 50.0);
        std::vector<double> q{std::min(1.0, p[0] + 0.1), p[1]};
        EXPECT_GE(empirical_copula(u, q), empirical_copula(u, p));
    }
}

TEST(TailDependence, ComonotoneAntitheticIndependent) {
    std::vector<double> u(1000), anti(1000);
    RngStream rng(4);
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = rng.uniform();
        anti[i] = 1.0 - u[i];
    }
    EXPECT_EQ(lambda_u_empirical(u, u), 1.0);
    EXPECT_EQ(lambda_u_empirical(u, anti, 100), 0.0);
    EXPECT_EQ(default_tail_k(1000), 50);
    EXPECT_EQ(default_tail_k(1001), 51);

    std::vector<double> x(10'000), y(10'000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.uniform();
        y[i] = rng.uniform();
    }
    EXPECT_NEAR(lambda_u_empirical(x, y, 500), 0.05, 0.02);
}

TEST(SampleVsEstimate, SelfConsistentAtLargeN) {
    const HacTree model = test::four_leaf_clayton();
    const Matrix u = pseudo_observations(sample_hopac(model, 10'000, RngStream(5)));
    const SampleVsEstimate m = sample_vs_estimate(u, model);
    EXPECT_LT(m.cdf_distance, 0.001);
    EXPECT_LT(m.tau_distance, 0.03);
    EXPECT_LT(m.lambda_u_distance, 0.08);
    EXPECT_GE(m.cdf_distance, 0.0);
}

TEST(SampleVsEstimate, ExchangeableTauDistance) {
    const Matrix u = pseudo_observations(sample_hopac(test::four_leaf_clayton(), 500, RngStream(6)));
    const HacTree fit = HacTree::exchangeable(Generator(Family::C, 1.0), 4);
    const Matrix tau = kendall_matrix(u);
    double mean = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) mean += std::abs(tau(i, j) - 1.0 / 3.0);
    }
    EXPECT_NEAR(sample_vs_estimate(u, fit).tau_distance, mean / 6.0, 1e-12);
}

TEST(SampleVsEstimate, HacLosesToTopDownOnOuterPowerData) {
    const TreeShape shape(4, {{5, {1, 2}}, {6, {3, 4}}, {7, {5, 6}}});
    const HacTree model(shape, {Generator(Family::C, 0.3, 3.0), Generator(Family::C, 0.3, 2.5),
                                Generator(Family::C, 0.3, 1.5)});
    const Matrix u = pseudo_observations(sample_hopac(model, 1000, RngStream(7)));
    const SampleVsEstimate hac = sample_vs_estimate(u, fit_estimator(u, Family::C, EstimatorKind::HAC));
    const SampleVsEstimate td = sample_vs_estimate(u, fit_estimator(u, Family::C, EstimatorKind::TD_ML));
    EXPECT_GT(hac.cdf_distance, td.cdf_distance);
    EXPECT_GT(hac.lambda_u_distance, td.lambda_u_distance);
}

HacTree three_leaf(double inner_tau, double root_tau) {
    const TreeShape shape(3, {{4, {1, 2}}, {5, {3, 4}}});
    return HacTree(shape, {Generator(Family::C, kendall_tau_inverse(Family::C, inner_tau)),
                           Generator(Family::C, kendall_tau_inverse(Family::C, root_tau))});
}

TEST(TrueVsEstimate, IdenticalAndTauExample) {
    const HacTree model = three_leaf(0.7, 0.31);
    const TrueVsEstimate same = true_vs_estimate(model, model);
    EXPECT_EQ(same.param_distance, 0.0);
    EXPECT_EQ(same.tau_distance, 0.0);
    EXPECT_EQ(same.lambda_u_distance, 0.0);

    const TrueVsEstimate d = true_vs_estimate(model, three_leaf(0.72, 0.31));
    EXPECT_NEAR(d.tau_distance, 0.01, 1e-9);
    EXPECT_GT(d.param_distance, 0.0);
}

TEST(TrueVsEstimate, GumbelTailUsesProduct) {
    const TreeShape shape(3, {{4, {1, 2}}, {5, {3, 4}}});
    const HacTree a(shape, {Generator(Family::G, 3.0), Generator(Family::G, 2.0)});
    const HacTree b(shape, {Generator(Family::G, 1.5, 2.0), Generator(Family::G, 2.0)});
    EXPECT_NEAR(true_vs_estimate(a, b).lambda_u_distance, 0.0, 1e-15);
}

TEST(TrueVsEstimate, StructureMismatchThrows) {
    const TreeShape other(3, {{4, {1, 3}}, {5, {2, 4}}});
    const HacTree fit(other, {Generator(Family::C, 2.0), Generator(Family::C, 1.0)});
    EXPECT_THROW((void)true_vs_estimate(three_leaf(0.7, 0.3), fit), StructureMismatch);
}

TEST(StructureMatch, Examples) {
    const TreeShape model(4, {{5, {1, 2}}, {6, {3, 4}}, {7, {5, 6}}});
    const StructureMatch same = structure_match(model, model);
    EXPECT_TRUE(same.exact);
    EXPECT_EQ(same.trivariate_ratio, 1.0);

    const StructureMatch crossed = structure_match(model, TreeShape(4, {{5, {1, 3}}, {6, {2, 4}}, {7, {5, 6}}}));
    EXPECT_FALSE(crossed.exact);
    EXPECT_EQ(crossed.trivariate_ratio, 0.0);

    const StructureMatch caterpillar = structure_match(model, TreeShape(4, {{5, {1, 2}}, {6, {3, 5}}, {7, {4, 6}}}));
    EXPECT_FALSE(caterpillar.exact);
    EXPECT_EQ(caterpillar.trivariate_ratio, 0.5);
}

TEST(StructureMatch, RelabeledForksStillMatch) {
    const TreeShape a(4, {{5, {1, 2}}, {6, {3, 4}}, {7, {5, 6}}});
    const TreeShape b(4, {{5, {3, 4}}, {6, {2, 1}}, {7, {6, 5}}});
    EXPECT_TRUE(structure_match(a, b).exact);
}

TEST(StructureMatch, TiedTausFormTheirOwnClass) {
    // Exchangeable trees merge every triple at once.
    const HacTree flat = HacTree::exchangeable(Generator(Family::C, 1.0), 4);
    const HacTree nested = test::four_leaf_clayton();
    EXPECT_EQ(structure_match(flat, flat).trivariate_ratio, 1.0);
    EXPECT_EQ(structure_match(nested, flat).trivariate_ratio, 0.0);
}

TEST(StructureMatch, TiedModelForksAcceptEitherResolution) {
    // Forks 6 and 7 carry the same generator, so {1, 2}, 3 and 4 join at once.
    const TreeShape shape(4, {{5, {1, 2}}, {6, {3, 5}}, {7, {4, 6}}});
    const HacTree model(shape, {Generator(Family::C, 2.0), Generator(Family::C, 1.0), Generator(Family::C, 1.0)});
    const TreeShape other(4, {{5, {1, 2}}, {6, {4, 5}}, {7, {3, 6}}});
    const TreeShape wrong(4, {{5, {1, 3}}, {6, {2, 5}}, {7, {4, 6}}});
    EXPECT_TRUE(structure_match(model, shape).exact);
    EXPECT_TRUE(structure_match(model, other).exact);
    EXPECT_EQ(structure_match(model, other).trivariate_ratio, 1.0);
    EXPECT_FALSE(structure_match(model, wrong).exact);
    EXPECT_FALSE(structure_match(shape, other).exact);

    const HacTree rewritten = rewrite_on_shape(model, other);
    EXPECT_EQ(rewritten.shape(), other);
    const PairwiseMatrices a = model.pairwise_matrix();
    const PairwiseMatrices b = rewritten.pairwise_matrix();
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(a.tau(i, j), b.tau(i, j));
    }
    EXPECT_THROW((void)rewrite_on_shape(model, wrong), StructureMismatch);
}

}  // namespace
}  // namespace hopac
