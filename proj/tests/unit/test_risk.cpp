#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "hopac/io.hpp"
#include "hopac/risk.hpp"
#include "support.hpp"

namespace hopac {
namespace {

std::vector<double> simulate_garch(const GarchParams& p, int n, RngStream& rng, int burn = 500) {
    const boost::math::students_t dist(p.nu);
    const double scale = std::sqrt((p.nu - 2.0) / p.nu);
    std::vector<double> r(n);
    double s2 = p.omega / (1.0 - p.alpha - p.beta);
    for (int t = 0; t < n + burn; ++t) {
        const double eps = std::sqrt(s2) * boost::math::quantile(dist, rng.uniform()) * scale;
        s2 = p.omega + p.alpha * eps * eps + p.beta * s2;
        if (t >= burn) r[t - burn] = p.mu + eps;
    }
    return r;
}

TEST(Garch, RecoversParametersWithinThreeStandardErrors) {
    const GarchParams truth{0.0, 0.05, 0.1, 0.85, 6.0};
    GarchFitOptions options;
    options.standard_errors = true;
    int inside = 0;
    for (int s = 0; s < 100; ++s) {
        RngStream rng(1000 + s);
        const GarchFit f = fit_garch(simulate_garch(truth, 2000, rng), options);
        inside += std::abs(f.params.omega - truth.omega) <= 3 * f.se.omega &&
                  std::abs(f.params.alpha - truth.alpha) <= 3 * f.se.alpha &&
                  std::abs(f.params.beta - truth.beta) <= 3 * f.se.beta &&
                  std::abs(f.params.nu - truth.nu) <= 3 * f.se.nu && std::abs(f.params.mu) <= 3 * f.se.mu;
        EXPECT_GT(f.params.omega, 0.0);
        EXPECT_GE(f.params.alpha, 0.0);
        EXPECT_GE(f.params.beta, 0.0);
        EXPECT_LT(f.params.alpha + f.params.beta, 1.0);
        EXPECT_GT(f.params.nu, 2.0);
    }
    EXPECT_GE(inside, 90);
}

TEST(Garch, GaussianNoiseHasNoPersistence) {
    int small = 0;
    for (int s = 0; s < 100; ++s) {
        RngStream rng(5000 + s);
        std::vector<double> r(2000);
        for (double& x : r) x = rng.normal();
        const GarchFit f = fit_garch(r);
        small += f.params.alpha + f.params.beta < 0.2;
    }
    EXPECT_GE(small, 90);
}

TEST(Garch, SigmaPathAndResiduals) {
    RngStream rng(3);
    const std::vector<double> r = simulate_garch({0.001, 0.02, 0.1, 0.8, 8.0}, 500, rng);
    const GarchFit f = fit_garch(r);
    ASSERT_EQ(f.sigma.size(), r.size());
    ASSERT_EQ(f.residuals.size(), r.size());
    const auto& p = f.params;
    for (std::size_t t = 1; t < r.size(); ++t) {
        const double e = r[t - 1] - p.mu;
        EXPECT_NEAR(f.sigma[t] * f.sigma[t], p.omega + p.alpha * e * e + p.beta * f.sigma[t - 1] * f.sigma[t - 1],
                    1e-12);
        EXPECT_NEAR(f.residuals[t], (r[t] - p.mu) / f.sigma[t], 1e-12);
    }
    const double e = r.back() - p.mu;
    EXPECT_NEAR(f.sigma_next * f.sigma_next, p.omega + p.alpha * e * e + p.beta * f.sigma.back() * f.sigma.back(),
                1e-12);
    EXPECT_NEAR(garch_loglik(r, p), f.loglik, 1e-9 * std::abs(f.loglik));
}

TEST(Garch, InputChecks) {
    EXPECT_THROW((void)fit_garch(std::vector<double>(50, 0.1)), std::invalid_argument);
    EXPECT_THROW((void)fit_garch(std::vector<double>(200, 0.1)), std::invalid_argument);
    std::vector<double> bad(200, 0.1);
    bad[3] = NAN;
    EXPECT_THROW((void)fit_garch(bad), std::invalid_argument);
}

TEST(TQuantile, StandardizedHasUnitVariance) {
    const double nu = 5.0;
    const double q = standardized_t_quantile(0.975, nu);
    EXPECT_NEAR(q, boost::math::quantile(boost::math::students_t(nu), 0.975) * std::sqrt(3.0 / 5.0), 1e-14);
    EXPECT_NEAR(standardized_t_quantile(0.5, nu), 0.0, 1e-15);
}

TEST(TQuantile, TableMatchesExact) {
    for (double nu : {2.1, 3.0, 6.0, 40.0, 900.0}) {
        const TQuantileTable table(nu);
        double worst = 0.0;
        for (int k = 1; k < 20'000; ++k) {
            const double p = k / 20'000.0;
            worst = std::max(worst, std::abs(table(p) - standardized_t_quantile(p, nu)));
        }
        for (double p : {1e-12, 1e-5, 1.0 - 1e-9}) {
            worst = std::max(worst, std::abs(table(p) - standardized_t_quantile(p, nu)));
        }
        EXPECT_LT(worst, 1e-9) << "nu " << nu;
    }
    EXPECT_THROW((void)TQuantileTable(2.0), std::invalid_argument);
}

TEST(PortfolioLoss, Examples) {
    const std::vector<double> p1{100.0}, r1{std::log(0.9)}, w1{1.0};
    EXPECT_NEAR(portfolio_loss(p1, r1, w1), 10.0, 1e-12);
    const std::vector<double> p3{10.0, 20.0, 30.0}, zero{0.0, 0.0, 0.0}, up{0.01, 0.02, 0.0};
    const std::vector<double> w3{1.0 / 3, 1.0 / 3, 1.0 / 3};
    EXPECT_EQ(portfolio_loss(p3, zero, w3), 0.0);
    EXPECT_LT(portfolio_loss(p3, up, w3), 0.0);
    const std::vector<double> w_bad{0.5, 0.5, 0.5};
    EXPECT_THROW((void)portfolio_loss(p3, zero, w_bad), std::invalid_argument);
}

TEST(Quantile, TypeSeven) {
    EXPECT_DOUBLE_EQ(quantile_type7({4, 1, 3, 2}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile_type7({4, 1, 3, 2}, 0.95), 3.85);
    EXPECT_DOUBLE_EQ(quantile_type7({4, 1, 3, 2}, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(quantile_type7({4, 1, 3, 2}, 1.0), 4.0);
    EXPECT_THROW((void)quantile_type7({}, 0.5), std::invalid_argument);
}

TEST(ViolationRatio, Examples) {
    const std::vector<double> loss{1, 2, 3, 4}, high{5, 5, 5, 5}, half{0, 5, 0, 5};
    EXPECT_EQ(violation_ratio(loss, high, 0, 3), 0.0);
    EXPECT_EQ(violation_ratio(loss, half, 0, 3), 0.5);
    EXPECT_EQ(violation_ratio(loss, half, 1, 1), 0.0);
    EXPECT_THROW((void)violation_ratio(loss, std::vector<double>{1, 2}, 0, 1), std::invalid_argument);
    EXPECT_THROW((void)violation_ratio(loss, high, 2, 1), std::invalid_argument);
    const auto [lo, hi] = binomial_interval(0.05, 1000);
    EXPECT_NEAR(hi - 0.05, 1.959963984540054 * std::sqrt(0.05 * 0.95 / 1000), 1e-15);
    EXPECT_NEAR(0.05 - lo, hi - 0.05, 1e-15);
}

Matrix simulated_window(int w, RngStream& rng) {
    const TreeShape shape(3, {{4, {1, 2}}, {5, {3, 4}}});
    const HacTree copula(shape, {Generator(Family::C, 1.0, 1.5), Generator(Family::C, 1.0, 1.0)});
    const std::vector<GarchParams> m(3, GarchParams{0.0005, 2e-6, 0.08, 0.9, 6.0});
    return log_returns(simulate_garch_copula_prices(copula, m, w + 1, rng));
}

TEST(VarForecast, LevelsMonotoneAndDeterministic) {
    RngStream data(8);
    const Matrix window = simulated_window(252, data);
    const std::vector<double> prices{100, 50, 20}, weights{1.0 / 3, 1.0 / 3, 1.0 / 3}, levels{0.95, 0.99};
    for (CopulaModel model : {CopulaModel::Independence, CopulaModel::OPAC, CopulaModel::HAC, CopulaModel::HOPAC,
                              CopulaModel::HOPAC_BU}) {
        const VarSpec spec{model, Family::C, 1000, 1};
        RngStream a(4), b(4);
        const VarForecast fa = var_forecast(window, prices, weights, spec, levels, a);
        const VarForecast fb = var_forecast(window, prices, weights, spec, levels, b);
        EXPECT_GE(fa.var[1], fa.var[0]) << copula_model_name(model);
        EXPECT_GT(fa.var[0], 0.0);
        EXPECT_EQ(fa.var, fb.var);
        EXPECT_EQ(fa.copula.has_value(), model != CopulaModel::Independence);
    }
}

TEST(VarForecast, WindowLengthRestricted) {
    RngStream data(9);
    const Matrix window = simulated_window(200, data);
    const std::vector<double> prices{1, 1, 1}, weights{1.0 / 3, 1.0 / 3, 1.0 / 3}, levels{0.95};
    RngStream rng(1);
    EXPECT_THROW((void)var_forecast(window, prices, weights, VarSpec{}, levels, rng), std::invalid_argument);
    EXPECT_THROW((void)var_forecast(window.select_rows(0, 126), prices, weights, VarSpec{},
                                    std::vector<double>{1.0}, rng),
                 std::invalid_argument);
}

TEST(VarForecast, ComonotoneMarginsMatchSingleAsset) {
    RngStream data(10);
    const Matrix base = simulated_window(252, data);
    Matrix window(252, 3);
    for (std::size_t t = 0; t < 252; ++t) {
        for (std::size_t j = 0; j < 3; ++j) window(t, j) = base(t, 0);
    }
    const std::vector<double> prices{100, 100, 100}, weights{1.0 / 3, 1.0 / 3, 1.0 / 3}, levels{0.95, 0.99};
    RngStream rng(2);
    const VarForecast f = var_forecast(window, prices, weights, VarSpec{CopulaModel::HOPAC, Family::C, 4000, 1},
                                       levels, rng);
    const GarchFit& g = f.garch.front();
    for (std::size_t a = 0; a < levels.size(); ++a) {
        const double r = g.params.mu + g.sigma_next * standardized_t_quantile(1.0 - levels[a], g.params.nu);
        const double single = 100.0 * -std::expm1(r);
        EXPECT_NEAR(f.var[a], single, 0.1 * single) << levels[a];
    }
}

Matrix simulated_prices(int days, std::uint64_t seed) {
    RngStream rng(seed);
    const TreeShape shape(3, {{4, {1, 2}}, {5, {3, 4}}});
    const HacTree copula(shape, {Generator(Family::C, 1.0, 1.5), Generator(Family::C, 1.0, 1.0)});
    const std::vector<GarchParams> m(3, GarchParams{0.0005, 2e-6, 0.08, 0.9, 6.0});
    return simulate_garch_copula_prices(copula, m, days, rng);
}

TEST(Backtest, SeriesLayoutAndParallelDeterminism) {
    const Matrix prices = simulated_prices(200, 5);
    BacktestConfig c;
    c.windows = {126};
    c.alphas = {0.95, 0.99};
    c.models = {CopulaModel::Independence, CopulaModel::HOPAC};
    c.simulations = 300;
    c.warm_start = false;
    c.max_days = 20;
    const VarBacktestReport a = var_backtest(prices, c);
    c.jobs = 2;
    const VarBacktestReport b = var_backtest(prices, c);
    ASSERT_EQ(a.series.size(), 4u);
    for (std::size_t i = 0; i < a.series.size(); ++i) {
        const BacktestSeries& s = a.series[i];
        ASSERT_EQ(s.days.size(), 20u);
        EXPECT_EQ(s.days.back(), prices.rows() - 2);
        EXPECT_EQ(s.var, b.series[i].var);
        EXPECT_DOUBLE_EQ(s.violation_ratio, violation_ratio(s.losses, s.var, 0, 19));
        EXPECT_DOUBLE_EQ(s.deviation, std::abs(s.violation_ratio - (1.0 - s.alpha)));
        const Matrix r = log_returns(prices);
        const std::vector<double> w(3, 1.0 / 3);
        EXPECT_DOUBLE_EQ(s.losses[0], portfolio_loss(prices.row(s.days[0]), r.row(s.days[0]), w));
    }
    // Matching forecast for the first day from var_forecast directly.
    const std::size_t t = a.series[2].days[0];
    const Matrix window = log_returns(prices).select_rows(t - 126, 126);
    RngStream rng = RngStream(c.seed, static_cast<std::uint64_t>(CopulaModel::HOPAC) * 10'000 + 126).substream(t);
    const VarForecast f = var_forecast(window, prices.row(t), std::vector<double>(3, 1.0 / 3),
                                       VarSpec{CopulaModel::HOPAC, Family::C, 300, 1}, c.alphas, rng);
    EXPECT_EQ(f.var[0], a.series[2].var[0]);
}

TEST(Backtest, WarmStartIsSequentialAndDeterministic) {
    const Matrix prices = simulated_prices(160, 6);
    BacktestConfig c;
    c.windows = {126};
    c.alphas = {0.95};
    c.simulations = 200;
    c.max_days = 10;
    const VarBacktestReport a = var_backtest(prices, c);
    const VarBacktestReport b = var_backtest(prices, c);
    EXPECT_EQ(a.series[0].var, b.series[0].var);
}

TEST(Backtest, PricesCsvAndOutputFiles) {
    const auto dir = std::filesystem::temp_directory_path() / "hopac_risk_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "p.csv");
        out << "date,AAA,BBB\n2020-01-01,10,20\n2020-01-02,11,19.5\n2020-01-03,10.5,21\n";
    }
    const PriceTable table = read_prices_csv(dir / "p.csv");
    EXPECT_EQ(table.tickers, (std::vector<std::string>{"AAA", "BBB"}));
    EXPECT_EQ(table.dates.size(), 3u);
    EXPECT_EQ(table.prices(1, 1), 19.5);
    const Matrix r = log_returns(table.prices);
    EXPECT_NEAR(r(0, 0), std::log(1.1), 1e-15);
    {
        std::ofstream out(dir / "bad.csv");
        out << "date,AAA\n2020-01-01,10\n2020-01-02,x\n";
    }
    try {
        (void)read_prices_csv(dir / "bad.csv");
        ADD_FAILURE() << "expected an error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("bad.csv:3"), std::string::npos) << e.what();
    }

    BacktestSeries s{CopulaModel::HOPAC, 252, 0.95, {300, 301}, {1.0, 2.0}, {1.5, 1.5}, 0.5, 0.45, 0};
    write_backtest(VarBacktestReport{{s}}, dir / "out");
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "hopac_a0.95_w252.csv"));
    const auto summary = nlohmann::json::parse(read_text_file(dir / "out" / "summary.json"));
    ASSERT_TRUE(summary.is_array() || summary.is_object());
    std::filesystem::remove_all(dir);
}

TEST(Backtest, ModelNames) {
    for (const char* name : {"independence", "opac", "hac", "hopac", "hopac-bu"}) {
        EXPECT_EQ(copula_model_name(parse_copula_model(name)), name);
    }
    EXPECT_THROW((void)parse_copula_model("vine"), std::invalid_argument);
}

TEST(Simulation, PricesFollowGarchMargins) {
    const Matrix prices = simulated_prices(3000, 7);
    const Matrix r = log_returns(prices);
    ASSERT_EQ(prices.rows(), 3000u);
    EXPECT_EQ(prices(0, 0), 100.0);
    // Unconditional variance omega / (1 - alpha - beta) = 1e-4.
    for (std::size_t j = 0; j < 3; ++j) {
        const auto col = r.column(j);
        double mean = 0.0, var = 0.0;
        for (double x : col) mean += x / col.size();
        for (double x : col) var += (x - mean) * (x - mean) / (col.size() - 1);
        EXPECT_NEAR(var, 1e-4, 3e-5);
    }
    EXPECT_NEAR(kendall_tau_b(r.column(0), r.column(1)), Generator(Family::C, 1.0, 1.5).kendall_tau(), 0.05);
}

}  // namespace
}  // namespace hopac
