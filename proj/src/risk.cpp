#include "hopac/risk.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/interpolators/quintic_hermite.hpp>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hopac/io.hpp"
#include "hopac/parallel.hpp"
#include "hopac/sampling.hpp"

namespace hopac {

namespace {

// nu above ~1000 is numerically Gaussian and lets the optimizer drift.
constexpr double kMaxLogNu = 6.9;
// Half the 95% chi-square(2) quantile: GARCH must beat constant variance by this much.
constexpr double kArchMargin = 2.996;

struct Moments {
    double mean;
    double variance;
};

Moments moments(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return {mean, ss / n};
}

// Unconstrained coordinates: mu, log omega, softmax logits of (alpha, beta)
// against 1 - alpha - beta, log(nu - 2).
std::vector<double> to_free(const GarchParams& p) {
    const double alpha = std::max(p.alpha, 1e-6);
    const double beta = std::max(p.beta, 1e-6);
    const double rest = std::max(1.0 - alpha - beta, 1e-6);
    return {p.mu, std::log(std::max(p.omega, 1e-300)), std::log(alpha / rest), std::log(beta / rest),
            std::log(std::max(p.nu - 2.0, 1e-6))};
}

GarchParams from_free(std::span<const double> z) {
    const double m = std::max({z[2], z[3], 0.0});
    const double ea = std::exp(z[2] - m);
    const double eb = std::exp(z[3] - m);
    const double e0 = std::exp(-m);
    const double total = ea + eb + e0;
    return {z[0], std::exp(z[1]), ea / total, eb / total, 2.0 + std::exp(std::min(z[4], kMaxLogNu))};
}

// Variance recursion; returns sigma_t^2 for t = 0..n (the last is the forecast).
std::vector<double> variance_path(std::span<const double> r, const GarchParams& p, double initial) {
    std::vector<double> s2(r.size() + 1);
    s2[0] = initial;
    for (std::size_t t = 0; t < r.size(); ++t) {
        const double eps = r[t] - p.mu;
        s2[t + 1] = p.omega + p.alpha * eps * eps + p.beta * s2[t];
    }
    return s2;
}

double loglik_with_initial(std::span<const double> r, const GarchParams& p, double initial) {
    if (!(p.nu > 2.0) || !(p.omega > 0.0) || p.alpha < 0.0 || p.beta < 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    const double n = static_cast<double>(r.size());
    const double scale = p.nu - 2.0;
    double ll = n * (std::lgamma((p.nu + 1.0) / 2.0) - std::lgamma(p.nu / 2.0) - 0.5 * std::log(std::numbers::pi * scale));
    double s2 = initial;
    for (double x : r) {
        const double eps = x - p.mu;
        if (!(s2 > 0.0)) return -std::numeric_limits<double>::infinity();
        ll -= 0.5 * std::log(s2) + 0.5 * (p.nu + 1.0) * std::log1p(eps * eps / (scale * s2));
        s2 = p.omega + p.alpha * eps * eps + p.beta * s2;
    }
    return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
}

GarchParams constant_variance_fit(std::span<const double> r, const Moments& m) {
    GarchParams p{m.mean, m.variance, 0.0, 0.0, 8.0};
    const auto result = nelder_mead([&](std::span<const double> z) {
        GarchParams q = p;
        q.nu = 2.0 + std::exp(std::min(z[0], kMaxLogNu));
        return -loglik_with_initial(r, q, m.variance);
    }, {std::log(6.0)});
    p.nu = 2.0 + std::exp(std::min(result.x[0], kMaxLogNu));
    return p;
}

GarchParams standard_errors(std::span<const double> r, const GarchParams& p, double initial) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::array<double, 5> x{p.mu, p.omega, p.alpha, p.beta, p.nu};
    auto f = [&](const std::array<double, 5>& v) {
        return -loglik_with_initial(r, {v[0], v[1], v[2], v[3], v[4]}, initial);
    };
    std::array<double, 5> h{};
    for (int i = 0; i < 5; ++i) h[i] = 1e-4 * std::max(std::abs(x[i]), 1e-3);
    Eigen::Matrix<double, 5, 5> hess;
    const double f0 = f(x);
    for (int i = 0; i < 5; ++i) {
        for (int j = i; j < 5; ++j) {
            double value;
            if (i == j) {
                auto up = x, down = x;
                up[i] += h[i];
                down[i] -= h[i];
                value = (f(up) - 2.0 * f0 + f(down)) / (h[i] * h[i]);
            } else {
                auto pp = x, pm = x, mp = x, mm = x;
                pp[i] += h[i], pp[j] += h[j];
                pm[i] += h[i], pm[j] -= h[j];
                mp[i] -= h[i], mp[j] += h[j];
                mm[i] -= h[i], mm[j] -= h[j];
                value = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h[i] * h[j]);
            }
            hess(i, j) = hess(j, i) = value;
        }
    }
    if (!hess.allFinite()) return {nan, nan, nan, nan, nan};
    const Eigen::LLT<Eigen::Matrix<double, 5, 5>> llt(hess);
    if (llt.info() != Eigen::Success) return {nan, nan, nan, nan, nan};
    const Eigen::Matrix<double, 5, 5> cov = llt.solve(Eigen::Matrix<double, 5, 5>::Identity());
    auto se = [&](int i) { return cov(i, i) > 0.0 ? std::sqrt(cov(i, i)) : nan; };
    return {se(0), se(1), se(2), se(3), se(4)};
}

EstimatorKind estimator_for(CopulaModel model) {
    switch (model) {
        case CopulaModel::OPAC: return EstimatorKind::OPAC;
        case CopulaModel::HAC: return EstimatorKind::HAC;
        case CopulaModel::HOPAC_BU: return EstimatorKind::BU_ML;
        case CopulaModel::HOPAC:
        case CopulaModel::Independence: break;
    }
    return EstimatorKind::TD_ML;
}

std::string format_level(double x) {
    std::ostringstream ss;
    ss << x;
    return ss.str();
}

}  // namespace

double garch_loglik(std::span<const double> returns, const GarchParams& p) {
    return loglik_with_initial(returns, p, moments(returns).variance);
}

GarchFit fit_garch(std::span<const double> returns, const GarchFitOptions& options) {
    if (returns.size() < 100) throw std::invalid_argument("fit_garch needs at least 100 returns");
    for (double x : returns) {
        if (!std::isfinite(x)) throw std::invalid_argument("fit_garch: non-finite return");
    }
    const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
    if (*lo == *hi) throw std::invalid_argument("fit_garch: constant series");
    const Moments m = moments(returns);

    std::vector<GarchParams> starts;
    NelderMeadOptions nm = options.optimizer;
    if (options.start) {
        starts.push_back(*options.start);
        nm.initial_step = std::min(nm.initial_step, 0.1);
    } else {
        starts.push_back({m.mean, m.variance * 0.05, 0.05, 0.90, 8.0});
        starts.push_back({m.mean, m.variance * 0.90, 0.05, 0.05, 8.0});
    }
    auto objective = [&](std::span<const double> z) { return -loglik_with_initial(returns, from_free(z), m.variance); };

    GarchFit fit;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : starts) {
        auto result = nelder_mead(objective, to_free(s), nm);
        if (result.value < best) {
            best = result.value;
            fit.params = from_free(result.x);
            fit.converged = result.converged;
        }
    }
    fit.unrestricted = fit.params;
    const GarchParams flat = constant_variance_fit(returns, m);
    const double flat_ll = loglik_with_initial(returns, flat, m.variance);
    if (!std::isfinite(best) || -best < flat_ll + kArchMargin) {
        fit.params = flat;
        fit.fallback = true;
        best = -flat_ll;
    }
    fit.loglik = -best;
    if (options.standard_errors) fit.se = standard_errors(returns, fit.params, m.variance);

    const auto s2 = variance_path(returns, fit.params, m.variance);
    fit.sigma.resize(returns.size());
    fit.residuals.resize(returns.size());
    for (std::size_t t = 0; t < returns.size(); ++t) {
        fit.sigma[t] = std::sqrt(s2[t]);
        fit.residuals[t] = (returns[t] - fit.params.mu) / fit.sigma[t];
    }
    fit.sigma_next = std::sqrt(s2.back());
    return fit;
}

double standardized_t_quantile(double p, double nu) {
    const boost::math::students_t dist(nu);
    return boost::math::quantile(dist, p) * std::sqrt((nu - 2.0) / nu);
}

namespace {

using QuinticSpline = boost::math::interpolators::quintic_hermite<std::vector<double>>;

}  // namespace

TQuantileTable::TQuantileTable(double nu) : nu_(nu), scale_(std::sqrt((nu - 2.0) / nu)) {
    if (!(nu > 2.0)) throw std::invalid_argument("standardized t needs nu > 2");
    const boost::math::students_t dist(nu);
    // Nodes z_k on [-10, 0] with x = log F(z): dz/dx = F/f and
    // d2z/dx2 = (F/f)(1 - F f'/f^2), where f'/f = -(nu + 1) z / (nu + z^2).
    constexpr int kNodes = 201;
    std::vector<double> x, z, dz, d2z;
    for (int k = 0; k < kNodes; ++k) {
        const double zk = -10.0 + 10.0 * k / (kNodes - 1);
        const double cdf = boost::math::cdf(dist, zk);
        const double pdf = boost::math::pdf(dist, zk);
        const double score = -(nu + 1.0) * zk / (nu + zk * zk);
        x.push_back(std::log(cdf));
        z.push_back(zk);
        dz.push_back(cdf / pdf);
        d2z.push_back(cdf / pdf * (1.0 - cdf * score / pdf));
    }
    log_p_min_ = x.front();
    spline_ = std::make_shared<const QuinticSpline>(std::move(x), std::move(z), std::move(dz), std::move(d2z));
}

double TQuantileTable::operator()(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile level must lie in (0, 1)");
    const bool upper = p > 0.5;
    const double lower_p = upper ? 1.0 - p : p;
    const double log_p = std::log(lower_p);
    double z;
    if (log_p < log_p_min_) {
        z = boost::math::quantile(boost::math::students_t(nu_), lower_p);
    } else {
        z = (*static_cast<const QuinticSpline*>(spline_.get()))(log_p);
    }
    return (upper ? -z : z) * scale_;
}

double portfolio_loss(std::span<const double> prices, std::span<const double> returns_next,
                      std::span<const double> weights) {
    if (prices.size() != returns_next.size() || prices.size() != weights.size()) {
        throw std::invalid_argument("portfolio_loss: length mismatch");
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("portfolio_loss: weights must sum to 1");
    double loss = 0.0;
    for (std::size_t j = 0; j < prices.size(); ++j) loss += weights[j] * prices[j] * -std::expm1(returns_next[j]);
    return loss;
}

double quantile_type7(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::string copula_model_name(CopulaModel model) {
    switch (model) {
        case CopulaModel::Independence: return "independence";
        case CopulaModel::OPAC: return "opac";
        case CopulaModel::HAC: return "hac";
        case CopulaModel::HOPAC: return "hopac";
        case CopulaModel::HOPAC_BU: return "hopac-bu";
    }
    return "?";
}

CopulaModel parse_copula_model(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (auto m : {CopulaModel::Independence, CopulaModel::OPAC, CopulaModel::HAC, CopulaModel::HOPAC,
                   CopulaModel::HOPAC_BU}) {
        if (copula_model_name(m) == lower) return m;
    }
    throw std::invalid_argument("unknown copula model '" + std::string(name) + "'");
}

namespace {

void check_forecast_inputs(const Matrix& window, std::span<const double> prices, std::span<const double> weights,
                           std::span<const double> alpha_levels) {
    const std::size_t w = window.rows();
    if (w != 126 && w != 252 && w != 504) throw std::invalid_argument("window length must be 126, 252 or 504");
    const std::size_t d = window.cols();
    if (prices.size() != d || weights.size() != d) throw std::invalid_argument("var_forecast: dimension mismatch");
    for (double a : alpha_levels) {
        if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("VaR levels must lie in (0, 1)");
    }
}

std::vector<GarchFit> fit_marginals(const Matrix& window, std::vector<GarchParams>* state, int jobs) {
    const std::size_t d = window.cols();
    std::vector<GarchFit> fits(d);
    parallel_for(d, jobs, [&](std::size_t j) {
        GarchFitOptions options;
        if (state != nullptr && state->size() == d) options.start = (*state)[j];
        fits[j] = fit_garch(window.column(j), options);
    });
    if (state != nullptr) {
        state->clear();
        for (const auto& f : fits) state->push_back(f.unrestricted);
    }
    return fits;
}

VarForecast forecast_from_marginals(std::vector<GarchFit> garch, std::span<const double> prices,
                                    std::span<const double> weights, const VarSpec& spec,
                                    std::span<const double> alpha_levels, RngStream& rng, PairEstimates* pairs) {
    VarForecast out;
    out.garch = std::move(garch);
    const std::size_t d = out.garch.size();
    const std::size_t w = out.garch.front().residuals.size();
    const auto sims = static_cast<std::size_t>(spec.simulations);
    Matrix z_sim(sims, d);
    if (spec.model == CopulaModel::Independence) {
        // Independent margins: draw the t innovations directly instead of
        // inverting the t distribution function.
        for (std::size_t s = 0; s < sims; ++s) {
            for (std::size_t j = 0; j < d; ++j) {
                const double nu = out.garch[j].params.nu;
                z_sim(s, j) = rng.normal() * std::sqrt((nu - 2.0) / (2.0 * rng.gamma(nu / 2.0)));
            }
        }
    } else {
        Matrix z(w, d);
        for (std::size_t j = 0; j < d; ++j) z.set_column(j, out.garch[j].residuals);
        EstimatorConfig config;
        config.jobs = spec.jobs;
        config.pair_options.optimizer.ftol = 1e-7;
        if (pairs != nullptr && !pairs->empty()) {
            config.warm_start = pairs;
            config.pair_options.optimizer.initial_step = 0.05;
        }
        out.copula = fit_estimator(pseudo_observations(z), spec.family, estimator_for(spec.model), config);
        if (pairs != nullptr) *pairs = out.copula->pair_estimates;
        const Matrix u = sample_hopac(out.copula->tree, static_cast<int>(sims), rng.substream(0));
        for (std::size_t j = 0; j < d; ++j) {
            const TQuantileTable quantile(out.garch[j].params.nu);
            for (std::size_t s = 0; s < sims; ++s) z_sim(s, j) = quantile(u(s, j));
        }
    }

    std::vector<double> losses(sims);
    std::vector<double> r(d);
    for (std::size_t s = 0; s < sims; ++s) {
        for (std::size_t j = 0; j < d; ++j) {
            const auto& p = out.garch[j].params;
            r[j] = p.mu + out.garch[j].sigma_next * z_sim(s, j);
        }
        losses[s] = portfolio_loss(prices, r, weights);
    }
    for (double a : alpha_levels) out.var.push_back(quantile_type7(losses, a));
    return out;
}

}  // namespace

VarForecast var_forecast(const Matrix& window, std::span<const double> prices, std::span<const double> weights,
                         const VarSpec& spec, std::span<const double> alpha_levels, RngStream& rng,
                         VarState* state) {
    check_forecast_inputs(window, prices, weights, alpha_levels);
    auto garch = fit_marginals(window, state != nullptr ? &state->garch : nullptr, spec.jobs);
    return forecast_from_marginals(std::move(garch), prices, weights, spec, alpha_levels, rng,
                                   state != nullptr ? &state->pairs : nullptr);
}

double violation_ratio(std::span<const double> losses, std::span<const double> var, std::size_t t_s,
                       std::size_t t_e) {
    if (losses.size() != var.size()) throw std::invalid_argument("violation_ratio: misaligned series");
    if (t_s > t_e || t_e >= losses.size()) throw std::invalid_argument("violation_ratio: bad day range");
    std::size_t hits = 0;
    for (std::size_t t = t_s; t <= t_e; ++t) hits += losses[t] > var[t] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(t_e - t_s + 1);
}

std::pair<double, double> binomial_interval(double p, std::size_t days) {
    const double half = 1.959963984540054 * std::sqrt(p * (1.0 - p) / static_cast<double>(days));
    return {p - half, p + half};
}

Matrix log_returns(const Matrix& prices) {
    if (prices.rows() < 2) throw std::invalid_argument("need at least two price rows");
    Matrix r(prices.rows() - 1, prices.cols());
    for (std::size_t t = 0; t + 1 < prices.rows(); ++t) {
        for (std::size_t j = 0; j < prices.cols(); ++j) {
            if (!(prices(t, j) > 0.0) || !(prices(t + 1, j) > 0.0)) {
                throw std::invalid_argument("prices must be positive (row " + std::to_string(t + 1) + ")");
            }
            r(t, j) = std::log(prices(t + 1, j) / prices(t, j));
        }
    }
    return r;
}

VarBacktestReport var_backtest(const Matrix& prices, const BacktestConfig& config) {
    const Matrix returns = log_returns(prices);
    const std::size_t d = prices.cols();
    const std::vector<double> weights(d, 1.0 / static_cast<double>(d));
    VarBacktestReport report;

    for (int w : config.windows) {
        const auto wz = static_cast<std::size_t>(w);
        if (prices.rows() < wz + 2) throw std::invalid_argument("not enough prices for window " + std::to_string(w));
        // Forecast origin t uses returns rows [t - w, t) and is scored on row t.
        std::size_t first = wz;
        const std::size_t last = prices.rows() - 2;
        if (config.max_days > 0 && last + 1 - first > config.max_days) first = last + 1 - config.max_days;
        const std::size_t days = last - first + 1;

        std::vector<double> losses(days);
        for (std::size_t k = 0; k < days; ++k) {
            const std::size_t t = first + k;
            losses[k] = portfolio_loss(prices.row(t), returns.row(t), weights);
        }

        const std::size_t m_count = config.models.size();
        // var[model][alpha][day]
        std::vector<std::vector<std::vector<double>>> var(
            m_count, std::vector<std::vector<double>>(config.alphas.size(), std::vector<double>(days)));
        std::vector<int> fallback(days, 0);
        std::vector<RngStream> streams;
        for (CopulaModel model : config.models) {
            streams.emplace_back(config.seed, static_cast<std::uint64_t>(model) * 10'000 + wz);
        }
        const int inner_jobs = config.warm_start ? config.jobs : 1;
        // The marginal fits are shared by all copula models of a day.
        auto run_day = [&](std::size_t k, std::vector<GarchParams>* garch_state, std::vector<PairEstimates>* pairs) {
            const std::size_t t = first + k;
            const Matrix window = returns.select_rows(t - wz, wz);
            check_forecast_inputs(window, prices.row(t), weights, config.alphas);
            const auto garch = fit_marginals(window, garch_state, inner_jobs);
            for (const auto& g : garch) fallback[k] += g.fallback ? 1 : 0;
            for (std::size_t m = 0; m < m_count; ++m) {
                const VarSpec spec{config.models[m], config.family, config.simulations, inner_jobs};
                RngStream rng = streams[m].substream(t);
                const auto forecast = forecast_from_marginals(garch, prices.row(t), weights, spec, config.alphas, rng,
                                                              pairs != nullptr ? &(*pairs)[m] : nullptr);
                for (std::size_t a = 0; a < config.alphas.size(); ++a) var[m][a][k] = forecast.var[a];
            }
        };
        if (config.warm_start) {
            std::vector<GarchParams> garch_state;
            std::vector<PairEstimates> pairs(m_count);
            for (std::size_t k = 0; k < days; ++k) run_day(k, &garch_state, &pairs);
        } else {
            parallel_for(days, resolve_jobs(config.jobs), [&](std::size_t k) { run_day(k, nullptr, nullptr); });
        }
        const int fallbacks = std::accumulate(fallback.begin(), fallback.end(), 0);
        for (std::size_t m = 0; m < m_count; ++m) {
            for (std::size_t a = 0; a < config.alphas.size(); ++a) {
                BacktestSeries s;
                s.model = config.models[m];
                s.window = w;
                s.alpha = config.alphas[a];
                for (std::size_t k = 0; k < days; ++k) s.days.push_back(first + k);
                s.losses = losses;
                s.var = var[m][a];
                s.violation_ratio = violation_ratio(s.losses, s.var, 0, days - 1);
                s.deviation = std::abs(s.violation_ratio - (1.0 - s.alpha));
                s.fallbacks = fallbacks;
                report.series.push_back(std::move(s));
            }
        }
    }
    return report;
}

PriceTable read_prices_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            cells.push_back(cell);
        }
        return cells;
    };
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
    PriceTable table;
    const auto header = split(line);
    if (header.size() < 2) throw std::runtime_error(path.string() + ": need a date column and at least one ticker");
    table.tickers.assign(header.begin() + 1, header.end());
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": wrong number of columns");
        }
        table.dates.push_back(cells[0]);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cells[c], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cells[c].size() || !(v > 0.0)) {
                throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad price '" + cells[c] + "'");
            }
            values.push_back(v);
        }
    }
    const std::size_t cols = table.tickers.size();
    table.prices = Matrix(table.dates.size(), cols);
    for (std::size_t r = 0; r < table.dates.size(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) table.prices(r, c) = values[r * cols + c];
    }
    return table;
}

Matrix simulate_garch_copula_prices(const HacTree& copula, std::span<const GarchParams> marginals, int days,
                                    RngStream& rng, double initial_price, int burn_in) {
    const auto d = static_cast<std::size_t>(copula.dimension());
    if (marginals.size() != d) throw std::invalid_argument("one GARCH specification per copula margin required");
    if (days < 2) throw std::invalid_argument("need at least two days");
    const int total = burn_in + days - 1;
    const Matrix u = sample_hopac(copula, total, rng.substream(0));
    Matrix prices(static_cast<std::size_t>(days), d);
    for (std::size_t j = 0; j < d; ++j) {
        const auto& p = marginals[j];
        if (!(p.alpha + p.beta < 1.0)) throw std::invalid_argument("GARCH process must be stationary");
        double s2 = p.omega / (1.0 - p.alpha - p.beta);
        double price = initial_price;
        prices(0, j) = price;
        for (int t = 0; t < total; ++t) {
            const double eps = std::sqrt(s2) * standardized_t_quantile(u(t, j), p.nu);
            s2 = p.omega + p.alpha * eps * eps + p.beta * s2;
            if (t >= burn_in) {
                price *= std::exp(p.mu + eps);
                prices(static_cast<std::size_t>(t - burn_in + 1), j) = price;
            }
        }
    }
    return prices;
}

void write_backtest(const VarBacktestReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& s : report.series) {
        const std::string name =
            copula_model_name(s.model) + "_a" + format_level(s.alpha) + "_w" + std::to_string(s.window) + ".csv";
        std::ofstream out(dir / name);
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        out << "day,loss,var,violation\n";
        for (std::size_t k = 0; k < s.days.size(); ++k) {
            out << s.days[k] << ',' << format_double(s.losses[k]) << ',' << format_double(s.var[k]) << ','
                << (s.losses[k] > s.var[k] ? 1 : 0) << '\n';
        }
        const auto ci = binomial_interval(1.0 - s.alpha, s.days.size());
        summary.push_back({{"model", copula_model_name(s.model)},
                           {"alpha", s.alpha},
                           {"window", s.window},
                           {"days", s.days.size()},
                           {"violation_ratio", s.violation_ratio},
                           {"deviation", s.deviation},
                           {"interval", {ci.first, ci.second}},
                           {"garch_fallbacks", s.fallbacks},
                           {"file", name}});
    }
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace hopac
