#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "hopac/generator.hpp"
#include "hopac/hac_tree.hpp"
#include "hopac/matrix.hpp"
#include "hopac/rng.hpp"

namespace hopac {

/// A draw from the inverse Laplace-Stieltjes transform of a generator.
/// Discrete frailties (A, F, J) carry integer values stored as doubles.
/// The log is carried alongside since strongly dependent generators produce
/// frailties far outside the double range.
struct Frailty {
    double value;
    double log_value;

    Frailty(double v) : value(v), log_value(std::log(v)) {}
    static Frailty from_log(double log_v) {
        Frailty f(0.0);
        f.value = std::exp(log_v);
        f.log_value = log_v;
        return f;
    }
};

/// Raised when a parent/child generator pair satisfies neither nesting rule.
class NestingError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a rejection sampler exceeds its retry cap.
class SamplerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SamplerOptions {
    /// Retry cap of each exponentially tilted stable rejection loop.
    std::uint64_t max_rejections = 1'000'000;
};

/// One-sided stable S(alpha, 1, gamma, delta * 1{alpha = 1}; 1).
///
/// For alpha < 1 the Laplace transform is exp(-gamma^alpha / cos(alpha*pi/2) * t^alpha);
/// alpha = 1 is the point mass at delta.
double sample_positive_stable(double alpha, double gamma, RngStream& rng, double delta = 1.0);

/// Standard draw with Laplace transform exp(-t^alpha), alpha in (0, 1].
double sample_standard_stable(double alpha, RngStream& rng);

/// V ~ LS^{-1}[psi] for a one-parameter generator (beta must be 1).
Frailty sample_frailty(const Generator& g, RngStream& rng);

/// S * V^beta with V from the base generator; the outer-power frailty.
Frailty sample_op_frailty(const Generator& g, RngStream& rng);

/// Frailty of a child fork given the parent's frailty, for a parent/child
/// pair passing nesting rule R1 (parent beta = 1) or R2 (equal theta).
Frailty sample_inner_frailty(const Generator& parent, const Generator& child, Frailty parent_value,
                             RngStream& rng, const SamplerOptions& options = {});

/// Discrete distributions used by the frailty samplers; exposed for tests.
double sample_sibuya(double alpha, RngStream& rng);
double sample_logarithmic(double p, RngStream& rng);

/// Draw with Laplace transform exp(-v * ((1 + t)^alpha - 1)).
double sample_tilted_stable(double alpha, double v, RngStream& rng, const SamplerOptions& options = {});

/// n i.i.d. rows of the exchangeable d-variate OPAC; row r uses substream r.
SampleMatrix sample_opac(const Generator& g, int d, int n, const RngStream& rng);

/// n i.i.d. rows of a nested OPAC; throws NestingError when the tree fails
/// the nesting rules.
SampleMatrix sample_hopac(const HacTree& tree, int n, const RngStream& rng,
                          const SamplerOptions& options = {});

}  // namespace hopac
