#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hopac/generator.hpp"
#include "support.hpp"

using namespace hopac;
using hopac::test::kAllFamilies;

TEST(Generator, ClaytonTableValues) {
    const Generator g(Family::C, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(g.psi(1.0), 0.5);
    EXPECT_DOUBLE_EQ(g.psi_inverse(0.5), 1.0);
    EXPECT_NEAR(g.psi_d1(1.0), -0.25, 1e-15);
    EXPECT_NEAR(g.psi_d2(1.0), 0.25, 1e-15);  // 2 (1 + t)^-3
}

TEST(Generator, BoundaryValues) {
    std::mt19937_64 eng(1);
    for (Family f : kAllFamilies) {
        for (int k = 0; k < 10; ++k) {
            const Generator g = test::random_generator(f, eng);
            EXPECT_EQ(g.psi(0.0), 1.0);
            EXPECT_EQ(g.psi_inverse(1.0), 0.0);
        }
    }
}

TEST(Generator, DomainErrors) {
    const Generator g(Family::C, 1.0, 2.0);
    EXPECT_THROW((void)g.psi(-0.1), std::domain_error);
    EXPECT_THROW((void)g.psi_inverse(1.5), std::domain_error);
    EXPECT_THROW((void)g.psi_inverse(-0.5), std::domain_error);
    EXPECT_THROW((void)g.psi_d1(0.0), std::domain_error);
    EXPECT_THROW((void)Generator(Family::A, 1.0, 1.0), std::invalid_argument);
    EXPECT_THROW((void)Generator(Family::G, 0.5, 1.0), std::invalid_argument);
    EXPECT_THROW((void)Generator(Family::C, 1.0, 0.5), std::invalid_argument);
}

TEST(Generator, RoundTripAndMonotone) {
    std::mt19937_64 eng(2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Family f : kAllFamilies) {
        for (int k = 0; k < 200; ++k) {
            const Generator g = test::random_generator(f, eng);
            const double s = unit(eng);
            EXPECT_NEAR(g.psi(g.psi_inverse(s)), s, 1e-10 * std::max(s, 1e-3)) << family_label(f);
            const double t = 10.0 * unit(eng);
            const double a = g.psi(t);
            const double b = g.psi(t + 0.1);
            EXPECT_GE(a, b);
            EXPECT_GE(a, 0.0);
            EXPECT_LE(a, 1.0);
        }
    }
}

TEST(Generator, DerivativesMatchFiniteDifferences) {
    std::mt19937_64 eng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Family f : kAllFamilies) {
        for (int k = 0; k < 50; ++k) {
            const Generator g = test::random_generator(f, eng);
            const double t = 0.1 + 3.0 * unit(eng);
            const double h = 1e-4 * t;
            // Richardson-extrapolated central differences.
            auto d1 = [&](double step) { return (g.psi(t + step) - g.psi(t - step)) / (2.0 * step); };
            auto d2 = [&](double step) {
                return (g.psi(t + step) - 2.0 * g.psi(t) + g.psi(t - step)) / (step * step);
            };
            const double fd1 = (4.0 * d1(h / 2.0) - d1(h)) / 3.0;
            const double fd2 = (4.0 * d2(h * 5.0) - d2(h * 10.0)) / 3.0;
            EXPECT_LE(g.psi_d1(t), 0.0);
            EXPECT_GE(g.psi_d2(t), 0.0);
            EXPECT_NEAR(g.psi_d1(t), fd1, 1e-6 * std::abs(fd1)) << family_label(f) << " t=" << t;
            EXPECT_NEAR(g.psi_d2(t), fd2, 1e-6 * std::abs(fd2) + 1e-9) << family_label(f) << " t=" << t;
        }
    }
}

TEST(Generator, GumbelOuterPowerIdentity) {
    const Generator a(Family::G, 2.0, 3.0);
    const Generator b(Family::G, 6.0, 1.0);
    EXPECT_EQ(a, b);
    for (double t : {0.01, 0.5, 1.0, 4.0}) {
        EXPECT_DOUBLE_EQ(a.psi(t), b.psi(t));
        EXPECT_DOUBLE_EQ(a.psi_d1(t), b.psi_d1(t));
    }
    EXPECT_DOUBLE_EQ(a.psi_inverse(0.3), b.psi_inverse(0.3));
    EXPECT_DOUBLE_EQ(a.kendall_tau(), b.kendall_tau());
    EXPECT_DOUBLE_EQ(a.tail_coefficients().upper, b.tail_coefficients().upper);
}

TEST(KendallTau, PublishedValues) {
    EXPECT_NEAR(Generator(Family::C, 2.0, 1.0).kendall_tau(), 0.5, 1e-15);
    EXPECT_NEAR(Generator(Family::C, 2.0, 2.0).kendall_tau(), 0.75, 1e-12);
    EXPECT_LT(Generator(Family::A, 0.999, 1.0).kendall_tau(), 1.0 / 3.0);
}

TEST(KendallTau, MatchesDerivativeIntegral) {
    std::mt19937_64 eng(4);
    for (Family f : kAllFamilies) {
        for (int k = 0; k < 6; ++k) {
            const Generator g = test::random_generator(f, eng, 2.5);
            EXPECT_NEAR(g.kendall_tau(), test::tau_by_integral(g), 1e-6)
                << family_label(f) << " theta=" << g.theta() << " beta=" << g.beta();
        }
    }
}

TEST(KendallTau, JoeSeries) {
    // tau = 1 - 4 sum_k 1 / (k (theta k + 2) (theta (k - 1) + 2)).
    for (double theta : {1.5, 2.0, 4.0, 10.0}) {
        double sum = 0.0;
        for (int k = 1; k < 2'000'000; ++k) sum += 1.0 / (k * (theta * k + 2.0) * (theta * (k - 1) + 2.0));
        EXPECT_NEAR(base_kendall_tau(Family::J, theta), 1.0 - 4.0 * sum, 1e-9) << theta;
    }
}

TEST(KendallTau, IncreasingInBeta) {
    std::mt19937_64 eng(5);
    for (Family f : kAllFamilies) {
        if (f == Family::G) continue;
        const Generator g = test::random_generator(f, eng, 1.0);
        double prev = g.kendall_tau();
        for (double beta = 1.2; beta < 4.0; beta += 0.2) {
            const double tau = Generator(f, g.theta(), beta).kendall_tau();
            EXPECT_GT(tau, prev);
            prev = tau;
        }
    }
}

TEST(KendallTauInverse, Examples) {
    EXPECT_NEAR(kendall_tau_inverse(Family::C, 0.5, 1.0), 2.0, 1e-10);
    EXPECT_THROW(kendall_tau_inverse(Family::A, 0.5, 1.0), InfeasibleError);
}

TEST(KendallTauInverse, RoundTrip) {
    std::mt19937_64 eng(6);
    for (Family f : kAllFamilies) {
        for (int k = 0; k < 20; ++k) {
            const Generator g = test::random_generator(f, eng);
            if (f == Family::G) continue;
            const double theta = kendall_tau_inverse(f, g.kendall_tau(), g.beta());
            EXPECT_NEAR(theta, g.theta(), 1e-6 * std::max(1.0, g.theta())) << family_label(f);
            EXPECT_NEAR(Generator(f, theta, g.beta()).kendall_tau(), g.kendall_tau(), 1e-8);
        }
    }
}

TEST(TailCoefficients, TableValues) {
    const auto c = Generator(Family::C, 1.0, 1.0).tail_coefficients();
    EXPECT_NEAR(c.lower, 0.5, 1e-15);
    EXPECT_EQ(c.upper, 0.0);
    EXPECT_NEAR(Generator(Family::J, 2.0, 1.0).tail_coefficients().upper, 2.0 - std::sqrt(2.0), 1e-15);
    const auto a = Generator(Family::A, 0.5, 1.0).tail_coefficients();
    EXPECT_EQ(a.lower, 0.0);
    EXPECT_EQ(a.upper, 0.0);
}

TEST(TailCoefficients, LimitsAtFiniteArguments) {
    std::mt19937_64 eng(7);
    for (Family f : kAllFamilies) {
        for (int k = 0; k < 10; ++k) {
            const Generator g = test::random_generator(f, eng, 2.0);
            auto diag = [&](double t) { return g.psi(2.0 * g.psi_inverse(t)); };
            const double s = 1.0 - 1e-6;
            const double upper = (1.0 - 2.0 * s + diag(s)) / (1.0 - s);
            EXPECT_NEAR(g.tail_coefficients().upper, upper, 2e-3) << family_label(f);
        }
    }
    for (double theta : {0.5, 1.0, 2.0}) {
        for (double beta : {1.0, 1.5}) {
            const Generator g(Family::C, theta, beta);
            const double t = 1e-6;
            EXPECT_NEAR(g.tail_coefficients().lower, g.psi(2.0 * g.psi_inverse(t)) / t, 2e-3);
        }
    }
}

TEST(SolveTauLambda, Examples) {
    const auto c = solve_tau_lambda_u(Family::C, 0.3, 0.3);
    ASSERT_TRUE(c.has_value());
    EXPECT_NEAR(c->beta, std::log(2.0) / std::log(1.7), 1e-9);
    EXPECT_NEAR(c->beta, 1.3063, 1e-4);
    EXPECT_NEAR(c->theta, 0.18723, 1e-4);
    const Generator g(Family::C, c->theta, c->beta);
    EXPECT_NEAR(g.kendall_tau(), 0.3, 1e-6);
    EXPECT_NEAR(g.tail_coefficients().upper, 0.3, 1e-6);

    const auto a = solve_tau_lambda_u(Family::A, 0.0, 0.0);
    ASSERT_TRUE(a.has_value());
    EXPECT_NEAR(a->theta, 0.0, 1e-9);
    EXPECT_EQ(a->beta, 1.0);

    EXPECT_FALSE(solve_tau_lambda_u(Family::J, 0.5, 0.01).has_value());
    EXPECT_THROW(solve_tau_lambda_u(Family::G, 0.3, 0.3), std::invalid_argument);
}

TEST(SolveTauLambda, JoeBruteForceAgreesOnAbsence) {
    // Over a fine grid no Joe (theta, beta) reaches tau = 0.5 with lambda_u near 0.01.
    double best = 1.0;
    for (double theta = 1.0; theta <= 6.0; theta += 0.005) {
        const double base = base_kendall_tau(Family::J, theta);
        const double beta = 0.5 / (1.0 - base);
        if (beta < 1.0) continue;
        best = std::min(best, Generator(Family::J, theta, beta).tail_coefficients().upper);
    }
    EXPECT_GT(best, 0.05);
}

TEST(Family, LabelsAndRanges) {
    EXPECT_EQ(parse_family("c"), Family::C);
    EXPECT_EQ(family_label(Family::J), 'J');
    EXPECT_THROW(parse_family("Q"), std::invalid_argument);
    EXPECT_TRUE(theta_range(Family::A).contains(0.0));
    EXPECT_FALSE(theta_range(Family::A).contains(1.0));
    EXPECT_FALSE(theta_range(Family::C).contains(0.0));
    EXPECT_TRUE(theta_range(Family::G).contains(1.0));
}
