#pragma once

#include <algorithm>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "hopac/generator.hpp"
#include "hopac/hac_tree.hpp"
#include "hopac/rng.hpp"

namespace hopac::test {

/// Monte-Carlo estimate of E[exp(-t V)].
inline double laplace_mc(const std::function<double(RngStream&)>& draw, double t, int n, std::uint64_t seed) {
    RngStream rng(seed);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += std::exp(-t * draw(rng));
    return sum / n;
}

/// Kolmogorov-Smirnov distance of a sample to Uniform(0, 1).
inline double ks_uniform(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        d = std::max({d, (i + 1) / n - x[i], x[i] - i / n});
    }
    return d;
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

/// Richardson-extrapolated central difference of psi; independent of the
/// analytic derivatives.
inline double fd_psi_d1(const Generator& g, double t) {
    auto central = [&](double h) { return (g.psi(t + h) - g.psi(t - h)) / (2.0 * h); };
    const double h = 1e-3 * t;
    return (4.0 * central(h / 2.0) - central(h)) / 3.0;
}

/// Kendall's tau as 1 - 4 int_0^inf s psi'(s)^2 ds, with psi' from finite
/// differences and s = e^y so that both the singularity at 0 and the slow
/// power tails become exponential.
inline double tau_by_integral(const Generator& g) {
    auto integrand = [&](double y) {
        if (std::abs(y) > 300.0) return 0.0;
        const double s = std::exp(y);
        const double d = fd_psi_d1(g, s);
        const double v = s * s * d * d;
        return std::isfinite(v) ? v : 0.0;
    };
    boost::math::quadrature::sinh_sinh<double> quad;
    return 1.0 - 4.0 * quad.integrate(integrand, 1e-12);
}

/// Random admissible (theta, beta) for a family.
inline Generator random_generator(Family family, std::mt19937_64& eng, double max_beta = 3.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double theta = 0.0;
    switch (family) {
        case Family::A: theta = 0.95 * unit(eng); break;
        case Family::C: theta = 0.1 + 4.0 * unit(eng); break;
        case Family::F: theta = 0.2 + 10.0 * unit(eng); break;
        case Family::G: theta = 1.0 + 3.0 * unit(eng); break;
        case Family::J: theta = 1.0 + 4.0 * unit(eng); break;
    }
    const double beta = 1.0 + (max_beta - 1.0) * unit(eng);
    return Generator(family, theta, beta);
}

inline constexpr Family kAllFamilies[] = {Family::A, Family::C, Family::F, Family::G, Family::J};

/// 4-leaf Clayton model ((1,2),(3,4)): root (C, 0.5, 1), forks (C, 0.5, 2)
/// over {1, 2} and (C, 2, 1) over {3, 4}.
inline HacTree four_leaf_clayton() {
    const TreeShape shape(4, {{5, {1, 2}}, {6, {3, 4}}, {7, {5, 6}}});
    return HacTree(shape, {Generator(Family::C, 0.5, 2.0), Generator(Family::C, 2.0, 1.0), Generator(Family::C, 0.5, 1.0)});
}

}  // namespace hopac::test
