#pragma once

#include <optional>
#include <span>
#include <stdexcept>

#include "hopac/estimation.hpp"
#include "hopac/hac_tree.hpp"
#include "hopac/matrix.hpp"

namespace hopac {

/// Fraction of rows of u that are component-wise <= point.
double empirical_copula(const Matrix& u, std::span<const double> point);

/// Default tail count k = ceil(0.05 n).
int default_tail_k(std::size_t n);

/// (1/k) #{i : rank(u_i) > n - k and rank(v_i) > n - k}.
double lambda_u_empirical(std::span<const double> u, std::span<const double> v, int k);
double lambda_u_empirical(std::span<const double> u, std::span<const double> v);

struct SampleVsEstimate {
    double cdf_distance = 0.0;
    double tau_distance = 0.0;
    double lambda_u_distance = 0.0;
};

struct TrueVsEstimate {
    double param_distance = 0.0;
    double tau_distance = 0.0;
    double lambda_u_distance = 0.0;
};

class StructureMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Mean squared cdf gap at the sample points, and mean absolute gaps between
/// model-implied and empirical pairwise tau and upper tail coefficients.
SampleVsEstimate sample_vs_estimate(const Matrix& u, const HacTree& fit);
SampleVsEstimate sample_vs_estimate(const Matrix& u, const FitReport& fit);

/// Per-fork distances between two trees over the same structure; forks are
/// matched by their leaf sets. Throws StructureMismatch otherwise.
TrueVsEstimate true_vs_estimate(const HacTree& model, const HacTree& fit);
TrueVsEstimate true_vs_estimate(const HacTree& model, const FitReport& fit);

struct StructureMatch {
    bool exact = false;
    /// Share of leaf triples whose grouping agrees.
    double trivariate_ratio = 0.0;
};

/// Trees with taus: a triple whose two forks carry equal tau merges all
/// three at once. Such a model triple agrees with any grouping in the fit,
/// since equal parent and child generators give the same copula whichever
/// way the binary tree resolves them; a tied fit triple only agrees with a
/// tied model triple. `exact` is true when every triple agrees.
StructureMatch structure_match(const HacTree& model, const HacTree& fit);
StructureMatch structure_match(const HacTree& model, const TreeShape& fit);
StructureMatch structure_match(const TreeShape& model, const TreeShape& fit);

/// The copula of `model` written on `shape`, which must agree with it in
/// the sense of structure_match: each fork of `shape` takes the generator
/// of the smallest model fork covering its leaves.
HacTree rewrite_on_shape(const HacTree& model, const TreeShape& shape);

}  // namespace hopac
