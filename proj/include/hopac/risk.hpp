#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hopac/estimation.hpp"
#include "hopac/hac_tree.hpp"
#include "hopac/matrix.hpp"
#include "hopac/optimizer.hpp"
#include "hopac/rng.hpp"

namespace hopac {

/// GARCH(1,1) with standardized Student-t innovations:
///   R_t = mu + sigma_t Z_t,  sigma_t^2 = omega + alpha eps_{t-1}^2 + beta sigma_{t-1}^2.
/// `alpha` multiplies the squared residual, `beta` the lagged variance.
struct GarchParams {
    double mu = 0.0;
    double omega = 1.0;
    double alpha = 0.0;
    double beta = 0.0;
    double nu = 8.0;
};

struct GarchFitOptions {
    NelderMeadOptions optimizer{2000, 1e-10, 0.5};
    /// Replaces the default starting points, e.g. the previous window's fit.
    std::optional<GarchParams> start;
    bool standard_errors = false;
};

struct GarchFit {
    GarchParams params;
    /// Asymptotic standard errors from the numerical Hessian (NaN when it is
    /// not positive definite); filled only when requested.
    GarchParams se{NAN, NAN, NAN, NAN, NAN};
    double loglik = 0.0;
    bool converged = false;
    /// True when the constant-variance model (alpha = beta = 0) was kept: the
    /// GARCH fit failed or did not improve the log-likelihood significantly.
    bool fallback = false;
    /// Best GARCH optimum found, kept even when `fallback` is set.
    GarchParams unrestricted;
    /// Conditional standard deviations over the sample and the one-step forecast.
    std::vector<double> sigma;
    double sigma_next = 0.0;
    /// (R_t - mu) / sigma_t.
    std::vector<double> residuals;
};

double garch_loglik(std::span<const double> returns, const GarchParams& p);
GarchFit fit_garch(std::span<const double> returns, const GarchFitOptions& options = {});

/// Quantile of the unit-variance Student-t distribution with nu > 2.
double standardized_t_quantile(double p, double nu);

/// standardized_t_quantile for many probabilities at one nu: quintic Hermite
/// interpolation in log p over the lower half (symmetry covers the upper),
/// exact evaluation beyond the table. Absolute error below 1e-9.
class TQuantileTable {
public:
    explicit TQuantileTable(double nu);
    double operator()(double p) const;

private:
    double nu_;
    double scale_;
    double log_p_min_;
    std::shared_ptr<const void> spline_;
};

/// L = sum_j b_j P_j (1 - exp(R_j)).
double portfolio_loss(std::span<const double> prices, std::span<const double> returns_next,
                      std::span<const double> weights);

/// Type-7 (linear interpolation) sample quantile.
double quantile_type7(std::vector<double> values, double p);

enum class CopulaModel { Independence, OPAC, HAC, HOPAC, HOPAC_BU };
std::string copula_model_name(CopulaModel model);
CopulaModel parse_copula_model(std::string_view name);

struct VarSpec {
    CopulaModel model = CopulaModel::HOPAC;
    Family family = Family::C;
    int simulations = 1000;
    int jobs = 1;
};

/// Carried between consecutive days to warm-start the fits.
struct VarState {
    /// Unrestricted GARCH optima of the previous day.
    std::vector<GarchParams> garch;
    PairEstimates pairs;
};

struct VarForecast {
    /// One VaR per requested level.
    std::vector<double> var;
    std::vector<GarchFit> garch;
    std::optional<FitReport> copula;
};

/// VaR of tomorrow's portfolio loss from a window of log-returns (rows are
/// days) and today's prices.
VarForecast var_forecast(const Matrix& window, std::span<const double> prices, std::span<const double> weights,
                         const VarSpec& spec, std::span<const double> alpha_levels, RngStream& rng,
                         VarState* state = nullptr);

/// Share of days t in [t_s, t_e] with losses[t] > var[t].
double violation_ratio(std::span<const double> losses, std::span<const double> var, std::size_t t_s,
                       std::size_t t_e);

/// Binomial 95% interval (normal approximation) for a violation ratio.
std::pair<double, double> binomial_interval(double p, std::size_t days);

struct BacktestConfig {
    std::vector<double> alphas{0.95, 0.99};
    std::vector<int> windows{252};
    std::vector<CopulaModel> models{CopulaModel::HOPAC};
    Family family = Family::C;
    int simulations = 1000;
    std::uint64_t seed = 1;
    /// Start each day's fits from the previous day's estimates.
    bool warm_start = true;
    int jobs = 1;
    /// Restricts the backtest to the last `max_days` forecast days (0 = all).
    std::size_t max_days = 0;
};

struct BacktestSeries {
    CopulaModel model;
    int window;
    double alpha;
    /// Index into the price rows of the forecast origin t; loss is for t+1.
    std::vector<std::size_t> days;
    std::vector<double> losses;
    std::vector<double> var;
    double violation_ratio = 0.0;
    double deviation = 0.0;
    int fallbacks = 0;
};

struct VarBacktestReport {
    std::vector<BacktestSeries> series;
};

/// Rolling backtest over a price matrix (rows are days, columns assets).
VarBacktestReport var_backtest(const Matrix& prices, const BacktestConfig& config);

struct PriceTable {
    std::vector<std::string> dates;
    std::vector<std::string> tickers;
    Matrix prices;
};

/// CSV with header "date,TICKER1,TICKER2,..." and positive prices.
PriceTable read_prices_csv(const std::filesystem::path& path);
Matrix log_returns(const Matrix& prices);

/// Prices driven by per-asset GARCH-t marginals whose innovations are
/// coupled by `copula`. Returns `days` rows after a burn-in.
Matrix simulate_garch_copula_prices(const HacTree& copula, std::span<const GarchParams> marginals, int days,
                                    RngStream& rng, double initial_price = 100.0, int burn_in = 500);

/// One CSV per (model, alpha, window) plus summary.json.
void write_backtest(const VarBacktestReport& report, const std::filesystem::path& dir);

}  // namespace hopac
