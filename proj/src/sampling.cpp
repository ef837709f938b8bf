#include "hopac/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace hopac {

namespace {

constexpr double kParamTol = 1e-12;
// Above this many summands the sum of i.i.d. Sibuya(alpha) draws is taken
// from its stable limit V^(1/alpha) * S(alpha).
constexpr double kSibuyaSumLimit = 1e6;
// Frank inner frailties are summed one by one; refuse absurd counts.
constexpr double kFrankSumLimit = 1e8;

double clamp_open_unit(double u) {
    constexpr double hi = 1.0 - 0x1.0p-53;
    constexpr double lo = std::numeric_limits<double>::min();
    return std::clamp(u, lo, hi);
}

// psi(E / V) with E standard exponential.
double leaf_value(const Generator& g, const Frailty& v, RngStream& rng) {
    return clamp_open_unit(g.psi_at_log(std::log(rng.exponential()) - v.log_value));
}

// Logarithmic distribution with log(1 - p) = h, Kemp's LK generator.
double sample_logarithmic_log1mp(double h, RngStream& rng) {
    const double p = -std::expm1(h);
    const double v = rng.uniform();
    if (v >= p) return 1.0;
    const double q = -std::expm1(rng.uniform() * h);
    if (v <= q * q) {
        const double x = std::floor(1.0 + std::log(v) / std::log(q));
        return std::isfinite(x) ? x : std::numeric_limits<double>::max();
    }
    return v <= q ? 2.0 : 1.0;
}

// Summand of the Frank inner frailty: Sibuya(alpha) accepted with
// probability c1^X, where c1 = 1 - exp(-theta_child).
double sample_frank_inner_summand(double alpha, double log_c1, RngStream& rng, std::uint64_t cap) {
    for (std::uint64_t attempt = 0; attempt < cap; ++attempt) {
        const double x = sample_sibuya(alpha, rng);
        if (std::log(rng.uniform()) <= x * log_c1) return x;
    }
    throw SamplerError("Frank inner frailty: rejection cap exceeded");
}

// log of a standard stable draw, alpha in (0, 1); Kanter's representation
// of the Chambers-Mallows-Stuck construction.
double log_standard_stable(double alpha, RngStream& rng) {
    const double u = std::numbers::pi * rng.uniform();
    const double e = rng.exponential();
    return std::log(std::sin(alpha * u)) - std::log(std::sin(u)) / alpha +
           (1.0 - alpha) / alpha * (std::log(std::sin((1.0 - alpha) * u)) - std::log(e));
}

// S * v^beta with S the Theorem-1 stable scale, formed in logs.
Frailty outer_power(Frailty v, double beta, RngStream& rng) {
    if (beta == 1.0 || std::isinf(v.log_value)) return v;
    return Frailty::from_log(log_standard_stable(1.0 / beta, rng) + beta * v.log_value);
}

// log of a draw with Laplace transform exp(-v((1 + t)^alpha - 1)).
double log_tilted_stable(double alpha, double log_v, RngStream& rng, const SamplerOptions& options) {
    if (alpha == 1.0) return log_v;
    if (log_v <= 0.0) {
        // One piece, kept in logs for tiny v: v^(1/alpha) S accepted with
        // probability exp(-v^(1/alpha) S).
        for (std::uint64_t attempt = 0; attempt < options.max_rejections; ++attempt) {
            const double log_s = log_v / alpha + log_standard_stable(alpha, rng);
            if (rng.uniform() <= std::exp(-std::exp(log_s))) return log_s;
        }
        throw SamplerError("tilted stable rejection cap exceeded (v = " + std::to_string(std::exp(log_v)) + ")");
    }
    // exp(-v((1+t)^alpha - 1)) is the m-th power of the same transform with
    // v/m, so draw m pieces whose rejection rate is at least exp(-1).
    const double v = std::exp(log_v);
    const double pieces = std::ceil(v);
    const double scale = std::pow(v / pieces, 1.0 / alpha);
    double total = 0.0;
    for (double k = 0; k < pieces; k += 1.0) {
        std::uint64_t attempt = 0;
        for (;;) {
            const double s = scale * sample_standard_stable(alpha, rng);
            if (rng.uniform() <= std::exp(-s)) {
                total += s;
                break;
            }
            if (++attempt >= options.max_rejections) {
                throw SamplerError("tilted stable rejection cap exceeded (v = " + std::to_string(v) + ")");
            }
        }
    }
    return std::log(total);
}

}  // namespace

double sample_standard_stable(double alpha, RngStream& rng) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("stable index must lie in (0, 1]");
    if (alpha == 1.0) return 1.0;
    return std::exp(log_standard_stable(alpha, rng));
}

double sample_positive_stable(double alpha, double gamma, RngStream& rng, double delta) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("stable index must lie in (0, 1]");
    if (alpha == 1.0) return delta;
    if (!(gamma > 0.0)) throw std::domain_error("stable scale must be positive");
    const double log_scale = std::log(gamma) - std::log(std::cos(alpha * std::numbers::pi / 2.0)) / alpha;
    return std::exp(log_scale) * sample_standard_stable(alpha, rng);
}

double sample_sibuya(double alpha, RngStream& rng) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("Sibuya parameter must lie in (0, 1]");
    if (alpha == 1.0) return 1.0;
    // Geometric on {1, 2, ...} with success probability W ~ Beta(alpha, 1 - alpha).
    const double g1 = rng.gamma(alpha);
    const double g2 = rng.gamma(1.0 - alpha);
    const double w = g1 / (g1 + g2);
    if (!(w > 0.0)) return std::numeric_limits<double>::max();
    if (w >= 1.0) return 1.0;
    const double x = std::floor(1.0 + std::log(rng.uniform()) / std::log1p(-w));
    return std::min(x, std::numeric_limits<double>::max());
}

double sample_logarithmic(double p, RngStream& rng) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("logarithmic parameter must lie in (0, 1)");
    return sample_logarithmic_log1mp(std::log1p(-p), rng);
}

double sample_tilted_stable(double alpha, double v, RngStream& rng, const SamplerOptions& options) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("tilted stable index must lie in (0, 1]");
    if (alpha == 1.0) return v;
    return std::exp(log_tilted_stable(alpha, std::log(v), rng, options));
}

Frailty sample_frailty(const Generator& g, RngStream& rng) {
    if (g.beta() != 1.0) throw std::invalid_argument("sample_frailty expects a one-parameter generator (beta = 1)");
    const double theta = g.theta();
    switch (g.family()) {
        case Family::A: {
            if (theta == 0.0) return {1.0};
            return {1.0 + std::floor(std::log(rng.uniform()) / std::log(theta))};
        }
        case Family::C: {
            const double shape = 1.0 / theta;
            if (shape >= 1.0) return {rng.gamma(shape)};
            // Gamma(a) = Gamma(a + 1) U^(1/a); the power underflows for small a.
            return Frailty::from_log(std::log(rng.gamma(shape + 1.0)) + std::log(rng.uniform()) / shape);
        }
        case Family::F:
            return {sample_logarithmic_log1mp(-theta, rng)};
        case Family::G:
            if (theta == 1.0) return {1.0};
            return Frailty::from_log(log_standard_stable(1.0 / theta, rng));
        case Family::J:
            return {sample_sibuya(1.0 / theta, rng)};
    }
    return {1.0};
}

Frailty sample_op_frailty(const Generator& g, RngStream& rng) {
    return outer_power(sample_frailty(g.base(), rng), g.beta(), rng);
}

Frailty sample_inner_frailty(const Generator& parent, const Generator& child, Frailty parent_value,
                             RngStream& rng, const SamplerOptions& options) {
    if (parent.family() != child.family()) throw NestingError("nested generators must share one family");
    const double v1 = parent_value.value;
    const double theta_p = parent.theta();
    const double theta_c = child.theta();

    if (std::abs(parent.beta() - 1.0) <= kParamTol && theta_p <= theta_c + kParamTol) {
        // R1: inner frailty of the one-parameter pair, then Theorem-1 scaling.
        Frailty breve = parent_value;
        const double alpha = std::min(1.0, theta_p / theta_c);
        switch (child.family()) {
            case Family::A: {
                const double q = (theta_c - theta_p) / (1.0 - theta_p);
                if (q > 0.0) {
                    // Sum of v1 Geometric(1 - q) variates on {1, 2, ...}.
                    std::negative_binomial_distribution<long long> nb(static_cast<long long>(v1), 1.0 - q);
                    breve = Frailty(v1 + static_cast<double>(nb(rng.engine())));
                }
                break;
            }
            case Family::C:
                breve = Frailty::from_log(log_tilted_stable(alpha, parent_value.log_value, rng, options));
                break;
            case Family::F: {
                if (alpha < 1.0) {
                    if (v1 > kFrankSumLimit) throw SamplerError("Frank inner frailty: parent frailty too large");
                    const double log_c1 = std::log(-std::expm1(-theta_c));
                    double sum = 0.0;
                    for (double k = 0; k < v1; k += 1.0) {
                        sum += sample_frank_inner_summand(alpha, log_c1, rng, options.max_rejections);
                    }
                    breve = Frailty(sum);
                }
                break;
            }
            case Family::G:
                if (alpha < 1.0) {
                    breve = Frailty::from_log(parent_value.log_value / alpha + log_standard_stable(alpha, rng));
                }
                break;
            case Family::J: {
                if (alpha < 1.0) {
                    if (v1 > kSibuyaSumLimit) {
                        breve = Frailty::from_log(parent_value.log_value / alpha + log_standard_stable(alpha, rng));
                    } else {
                        double sum = 0.0;
                        for (double k = 0; k < v1; k += 1.0) sum += sample_sibuya(alpha, rng);
                        breve = Frailty(sum);
                    }
                }
                break;
            }
        }
        return outer_power(breve, child.beta(), rng);
    }

    if (std::abs(theta_p - theta_c) <= kParamTol && parent.beta() <= child.beta() + kParamTol) {
        // R2: Laplace transform exp(-v1 t^(beta_p / beta_c)).
        const double alpha = parent.beta() / child.beta();
        if (alpha >= 1.0) return parent_value;
        if (std::isinf(parent_value.log_value)) return parent_value;
        return Frailty::from_log(parent_value.log_value / alpha + log_standard_stable(alpha, rng));
    }
    throw NestingError("parent/child generators violate both nesting rules");
}

SampleMatrix sample_opac(const Generator& g, int d, int n, const RngStream& rng) {
    if (d < 2) throw std::invalid_argument("sample_opac: d must be at least 2");
    if (n < 1) throw std::invalid_argument("sample_opac: n must be positive");
    SampleMatrix out(n, d);
    for (int r = 0; r < n; ++r) {
        RngStream row_rng = rng.substream(static_cast<std::uint64_t>(r));
        const Frailty v = sample_op_frailty(g, row_rng);
        for (int j = 0; j < d; ++j) out(r, j) = leaf_value(g, v, row_rng);
    }
    return out;
}

namespace {

void fill_fork(const HacTree& tree, int fork, Frailty v, RngStream& rng, const SamplerOptions& options,
               std::span<double> row) {
    const auto& shape = tree.shape();
    const auto& g = tree.generator(fork);
    for (int child : shape.children(fork)) {
        if (shape.is_leaf(child)) {
            row[child - 1] = leaf_value(g, v, rng);
        } else {
            fill_fork(tree, child, sample_inner_frailty(g, tree.generator(child), v, rng, options), rng, options, row);
        }
    }
}

}  // namespace

SampleMatrix sample_hopac(const HacTree& tree, int n, const RngStream& rng, const SamplerOptions& options) {
    if (n < 1) throw std::invalid_argument("sample_hopac: n must be positive");
    const auto report = validate_snc(tree);
    if (!report.valid()) {
        const auto& v = report.violations.front();
        throw NestingError("tree violates the nesting condition at forks " + std::to_string(v.parent) + " -> " +
                           std::to_string(v.child));
    }
    const int d = tree.dimension();
    SampleMatrix out(n, d);
    const int root = tree.shape().root();
    for (int r = 0; r < n; ++r) {
        RngStream row_rng = rng.substream(static_cast<std::uint64_t>(r));
        fill_fork(tree, root, sample_op_frailty(tree.generator(root), row_rng), row_rng, options, out.row(r));
    }
    return out;
}

}  // namespace hopac
