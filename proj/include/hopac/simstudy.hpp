#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hopac/estimation.hpp"
#include "hopac/evaluation.hpp"
#include "hopac/hac_tree.hpp"
#include "hopac/matrix.hpp"
#include "hopac/rng.hpp"

namespace hopac {

/// Random correlation matrix by the onion method (uniform over the
/// correlation matrices of size d).
Matrix random_correlation(int d, RngStream& rng);

struct RandomHopac {
    HacTree tree;
    /// Target tau per fork of `tree` (index fork id - d - 1) after clamping.
    std::vector<double> fork_taus;
    /// Forks whose structure tau fell outside [0.01, 0.95] and was clamped.
    int clamped = 0;
    /// Forks where beta = 1 was decided by a fair coin, and how many got it.
    int coin_forks = 0;
    int coin_beta_one = 0;
};

/// Random HOPAC whose structure and fork taus come from average-linkage
/// clustering of a random correlation matrix. Forks are parametrized
/// depth-first: under a parent with beta > 1, theta is inherited and beta
/// solved from tau; otherwise a coin picks beta = 1, or theta uniform over
/// the range still admitting tau and beta solved from tau.
RandomHopac random_hopac_draw(Family family, int d, RngStream& rng);
HacTree random_hopac(Family family, int d, RngStream& rng);

struct RecoveryResult {
    int repetitions = 0;
    std::int64_t attempts = 0;
    /// Repetitions that hit the retry cap without a match.
    int capped = 0;
    double exact_ratio = 0.0;        // 100 * matches / attempts
    double trivariate_ratio = 0.0;   // 100 * sum of trivariate ratios / attempts
};

/// Resamples from `model` until estimate_structure returns its structure
/// (tied forks may resolve either way, see structure_match),
/// at most `cap` times. Returns the number of samples drawn (cap if no
/// match) and adds each attempt's trivariate agreement to `trivariate_sum`.
/// The matching sample is written to `matched` when provided.
std::int64_t attempts_until_match(const HacTree& model, int n, const RngStream& rng, std::int64_t cap,
                                  double& trivariate_sum, Matrix* matched = nullptr);

struct StudyConfig {
    std::vector<Family> families{Family::C};
    std::vector<int> dims{5};
    std::vector<int> sample_sizes{200, 400, 600, 800, 1000};
    int repetitions = 10;
    std::uint64_t seed = 1;
    std::vector<EstimatorKind> estimators{EstimatorKind::OPAC, EstimatorKind::HAC, EstimatorKind::TD_Sn,
                                          EstimatorKind::TD_ML};
    bool sample_measures = true;
    bool true_measures = true;
    std::int64_t retry_cap = 10'000;
    int jobs = 1;
};

struct MeasureRow {
    Family family;
    int d;
    int n;
    std::string estimator;
    int repetition;
    std::string measure;
    double value;
};

struct StructureRow {
    Family family;
    int d;
    int n;
    RecoveryResult recovery;
};

struct FailureRow {
    Family family;
    int d;
    int n;
    std::string estimator;
    int repetition;
    std::string message;
};

struct StudyResult {
    std::vector<MeasureRow> measures;
    std::vector<StructureRow> structures;
    std::vector<FailureRow> failures;
};

StudyConfig parse_study_config(const std::string& json_text);
StudyResult run_study(const StudyConfig& config);

/// measures.csv (long format), summary.csv (mean and standard error per
/// cell), structure.csv and failures.csv.
void write_study(const StudyResult& result, const std::filesystem::path& dir);

}  // namespace hopac
