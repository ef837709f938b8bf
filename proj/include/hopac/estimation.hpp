#pragma once

#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hopac/generator.hpp"
#include "hopac/hac_tree.hpp"
#include "hopac/matrix.hpp"
#include "hopac/optimizer.hpp"

namespace hopac {

/// Column-wise ranks over n+1; ties get their average rank. Throws
/// std::invalid_argument for n < 2, non-finite entries or a constant column.
Matrix pseudo_observations(const Matrix& x);

/// Sample Kendall's tau-b in O(n log n).
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

/// Symmetric matrix of pairwise tau-b with unit diagonal.
Matrix kendall_matrix(const Matrix& u, int jobs = 1);

struct StructureEstimate {
    TreeShape shape;
    /// Average pairwise tau recorded at each join, indexed by fork id - d - 1.
    std::vector<double> fork_taus;
};

/// Agglomerative average-linkage clustering of a similarity matrix. The
/// k-th join creates fork d+k; ties go to the lexicographically lowest pair.
StructureEstimate estimate_structure(const Matrix& tau);

/// Closed parameter interval; upper may be +infinity.
struct Interval {
    double lower = 1.0;
    double upper = std::numeric_limits<double>::infinity();

    static Interval point(double v) { return {v, v}; }
    [[nodiscard]] bool is_point() const noexcept { return lower == upper; }
    [[nodiscard]] bool contains(double v) const noexcept { return v >= lower && v <= upper; }
    [[nodiscard]] double clamp(double v) const noexcept { return v < lower ? lower : (v > upper ? upper : v); }
};

/// The whole usable theta range of a family, [theta_floor, theta_ceiling].
Interval full_theta_range(Family family);

enum class PairObjective { ML, Sn };

struct PairFitOptions {
    NelderMeadOptions optimizer;
    /// Replaces the two default starting points with a single one.
    std::optional<ThetaBeta> start;
};

struct PairFit {
    double theta = 0.0;
    double beta = 1.0;
    /// Log-likelihood for ML, the S_n distance for Sn.
    double objective = 0.0;
    bool converged = false;
    bool on_boundary = false;
    int iterations = 0;
    std::vector<double> trace;
};

/// log c(u, v) of the bivariate OPAC with generator g.
double opac_log_density(const Generator& g, double u, double v);

/// Bivariate fits over theta_range x beta_range of an n x 2 matrix of
/// pseudo-observations.
PairFit fit_opac_ml(const Matrix& uv, Family family, Interval theta_range, Interval beta_range,
                    const PairFitOptions& options = {});
PairFit fit_opac_sn(const Matrix& uv, Family family, Interval theta_range, Interval beta_range,
                    const PairFitOptions& options = {});
PairFit fit_opac_pair(const Matrix& uv, Family family, PairObjective objective, Interval theta_range,
                      Interval beta_range, const PairFitOptions& options = {});

/// Component-wise mean of pairwise estimates.
ThetaBeta aggregate_estimates(std::span<const ThetaBeta> estimates);

enum class Restriction { None, R1, R2 };
std::string restriction_name(Restriction r);

/// Outcome of the Top-Down branch step for a fork estimate.
struct Branch {
    Restriction restriction;
    /// The fork's beta after branching: 1 under R1.
    double parent_beta;
    Interval child_theta;
    Interval child_beta;
};

/// R1 when beta_hat <= beta_R and beta = 1 is admissible; otherwise R2
/// (theta pinned, beta bounded below by beta_hat).
Branch branch_ranges(ThetaBeta estimate, Interval theta_range, Interval beta_range, double beta_R);

/// 1-based leaf pair (i, j) with i < j.
using PairKey = std::pair<int, int>;
using PairEstimates = std::map<PairKey, ThetaBeta>;

struct AggregatedFit {
    ThetaBeta estimate;
    std::vector<PairKey> keys;
    std::vector<PairFit> pairs;
};

enum class EstimatorKind { OPAC, HAC, TD_ML, TD_Sn, BU_ML };
std::string estimator_tag(EstimatorKind kind);
EstimatorKind parse_estimator(std::string_view tag);

/// Default upper end of the beta range. Pair taus there exceed 0.99 for
/// every family; on (near-)comonotone data the likelihood keeps growing
/// without it.
inline constexpr double kDefaultBetaCeiling = 100.0;

struct EstimatorConfig {
    double beta_R = 1.05;
    Interval beta_range{1.0, kDefaultBetaCeiling};
    /// Defaults to full_theta_range(family).
    std::optional<Interval> theta_range;
    PairObjective objective = PairObjective::ML;
    PairFitOptions pair_options;
    /// Per-pair starting points, e.g. the previous day's estimates.
    const PairEstimates* warm_start = nullptr;
    /// Reuse a structure instead of estimating it from the data.
    std::optional<StructureEstimate> structure;
    int jobs = 1;
};

/// Mean of the pairwise fits over all pairs in `keys`.
AggregatedFit fit_opac_aggregated(const Matrix& u, Family family, std::span<const PairKey> keys,
                                  Interval theta_range, Interval beta_range, const EstimatorConfig& config = {});
/// All C(d, 2) pairs.
AggregatedFit fit_opac_aggregated(const Matrix& u, Family family, const EstimatorConfig& config = {});

struct ForkRecord {
    int fork = 0;
    std::vector<int> leaves;
    double theta = 0.0;
    double beta = 1.0;
    /// Structure-estimation tau of the fork.
    double tau_hat = 0.0;
    Interval theta_range;
    Interval beta_range;
    /// Top-Down: rule handed to the children. Bottom-Up: rule linking the
    /// fork to its children after reconciliation.
    Restriction restriction = Restriction::None;
    bool trimmed = false;
    bool boundary = false;
    bool converged = true;
    std::vector<PairKey> pair_keys;
    std::vector<PairFit> pairs;
};

struct FitReport {
    EstimatorKind estimator = EstimatorKind::TD_ML;
    Family family = Family::C;
    HacTree tree;
    /// One record per fork, ordered by fork id of `tree`.
    std::vector<ForkRecord> forks;
    PairEstimates pair_estimates;
};

FitReport fit_topdown(const Matrix& u, Family family, const EstimatorConfig& config = {});
FitReport fit_bottomup(const Matrix& u, Family family, const EstimatorConfig& config = {});
/// Exchangeable OPAC from all pairs, laid out on the estimated structure.
FitReport fit_opac_estimator(const Matrix& u, Family family, const EstimatorConfig& config = {});
/// Dispatch by estimator; HAC is Top-Down ML with beta fixed at 1.
FitReport fit_estimator(const Matrix& u, Family family, EstimatorKind kind, EstimatorConfig config = {});

}  // namespace hopac
