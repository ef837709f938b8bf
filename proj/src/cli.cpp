#include "hopac/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <ostream>
#include <sstream>

#include "hopac/estimation.hpp"
#include "hopac/generator.hpp"
#include "hopac/io.hpp"
#include "hopac/parallel.hpp"
#include "hopac/risk.hpp"
#include "hopac/sampling.hpp"
#include "hopac/simstudy.hpp"

namespace hopac::cli {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename F>
auto as_usage(F&& parse) {
    try {
        return parse();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) items.push_back(item);
    }
    if (items.empty()) throw UsageError("empty list '" + text + "'");
    return items;
}

HacTree read_tree(const std::string& path) {
    return tree_from_json(nlohmann::json::parse(read_text_file(path)));
}

struct Options {
    std::uint64_t seed = 1;
    int jobs = 0;

    std::string model_path;
    std::string data_path;
    std::string out_path;
    std::string config_path;
    std::string prices_path;
    int n = 1000;
    std::string family = "C";
    std::string estimator = "td-ml";
    double beta_r = 1.05;
    int grid = 200;
    std::string models = "hopac";
    std::string alphas = "0.95,0.99";
    std::string windows = "252";
    int simulations = 1000;
    std::size_t max_days = 0;
    bool cold = false;
};

int cmd_sample(const Options& o, std::ostream& out) {
    if (o.n < 1) throw UsageError("--n must be positive");
    const HacTree tree = read_tree(o.model_path);
    const Matrix u = sample_hopac(tree, o.n, RngStream(o.seed));
    write_matrix_csv(u, o.out_path);
    out << "wrote " << u.rows() << " x " << u.cols() << " sample to " << o.out_path << "\n";
    return 0;
}

int cmd_fit(const Options& o, std::ostream& out) {
    const Family family = as_usage([&] { return parse_family(o.family); });
    const EstimatorKind kind = as_usage([&] { return parse_estimator(o.estimator); });
    const Matrix data = read_matrix_csv(o.data_path);
    EstimatorConfig config;
    config.beta_R = o.beta_r;
    config.jobs = resolve_jobs(o.jobs);
    const FitReport report = fit_estimator(pseudo_observations(data), family, kind, config);
    write_text_file(o.out_path, to_json(report).dump(2) + "\n");
    out << estimator_tag(kind) << " fit with " << report.forks.size() << " forks written to " << o.out_path << "\n";
    return 0;
}

int cmd_tailgrid(const Options& o, std::ostream& out) {
    const Family family = as_usage([&] { return parse_family(o.family); });
    if (family == Family::G) throw UsageError("tailgrid is not defined for family G");
    if (o.grid < 1) throw UsageError("--grid must be positive");
    const auto n = static_cast<std::size_t>(o.grid);
    std::vector<std::optional<ThetaBeta>> cells(n * n);
    parallel_for(n * n, resolve_jobs(o.jobs), [&](std::size_t k) {
        const double tau = static_cast<double>(k / n) / static_cast<double>(n);
        const double lambda = static_cast<double>(k % n) / static_cast<double>(n);
        cells[k] = solve_tau_lambda_u(family, tau, lambda);
    });
    std::ofstream file(o.out_path);
    if (!file) throw std::runtime_error("cannot write " + o.out_path);
    file << "tau,lambda_u,attainable,theta,beta\n";
    std::size_t attainable = 0;
    for (std::size_t k = 0; k < n * n; ++k) {
        file << format_double(static_cast<double>(k / n) / static_cast<double>(n)) << ','
             << format_double(static_cast<double>(k % n) / static_cast<double>(n)) << ',';
        if (cells[k]) {
            ++attainable;
            file << "1," << format_double(cells[k]->theta) << ',' << format_double(cells[k]->beta) << '\n';
        } else {
            file << "0,,\n";
        }
    }
    out << attainable << " of " << n * n << " grid points attainable for family " << family_label(family) << "\n";
    return 0;
}

int cmd_simstudy(const Options& o, const CLI::App& sub, std::ostream& out) {
    StudyConfig config = as_usage([&] { return parse_study_config(read_text_file(o.config_path)); });
    if (sub.count("--seed") > 0) config.seed = o.seed;
    if (sub.count("--jobs") > 0 || config.jobs <= 0) config.jobs = resolve_jobs(o.jobs);
    const StudyResult result = run_study(config);
    write_study(result, o.out_path);
    out << result.measures.size() << " measure rows, " << result.structures.size() << " structure rows, "
        << result.failures.size() << " failures written to " << o.out_path << "\n";
    return 0;
}

int cmd_backtest(const Options& o, std::ostream& out) {
    BacktestConfig config;
    config.family = as_usage([&] { return parse_family(o.family); });
    config.models.clear();
    for (const auto& m : split_list(o.models)) config.models.push_back(as_usage([&] { return parse_copula_model(m); }));
    config.alphas.clear();
    for (const auto& a : split_list(o.alphas)) {
        const double v = as_usage([&] { return std::stod(a); });
        if (!(v > 0.0 && v < 1.0)) throw UsageError("--alpha values must lie in (0, 1)");
        config.alphas.push_back(v);
    }
    config.windows.clear();
    for (const auto& w : split_list(o.windows)) {
        const int v = as_usage([&] { return std::stoi(w); });
        if (v != 126 && v != 252 && v != 504) throw UsageError("--window must be 126, 252 or 504");
        config.windows.push_back(v);
    }
    if (o.simulations < 1) throw UsageError("--simulations must be positive");
    config.simulations = o.simulations;
    config.seed = o.seed;
    config.warm_start = !o.cold;
    config.jobs = resolve_jobs(o.jobs);
    config.max_days = o.max_days;

    const PriceTable table = read_prices_csv(o.prices_path);
    const VarBacktestReport report = var_backtest(table.prices, config);
    write_backtest(report, o.out_path);
    for (const auto& s : report.series) {
        out << copula_model_name(s.model) << " alpha=" << s.alpha << " w=" << s.window
            << " violation_ratio=" << s.violation_ratio << " deviation=" << s.deviation << "\n";
    }
    return 0;
}

int cmd_validate(const Options& o, std::ostream& out) {
    const HacTree tree = read_tree(o.model_path);
    const SncReport report = validate_snc(tree);
    if (report.valid()) {
        out << "valid\n";
        return 0;
    }
    for (const auto& v : report.violations) {
        out << "violation: fork " << v.parent << " -> " << v.child << " (" << v.rule << ")\n";
    }
    return 1;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hierarchical outer-power Archimedean copulas"};
    app.name("hopac");
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
        sub->add_option("--jobs", o.jobs, "Worker threads (default: HOPAC_JOBS or 1)");
    };

    auto* sample = app.add_subcommand("sample", "Draw a sample from a tree model");
    sample->add_option("--model", o.model_path, "Tree JSON")->required();
    sample->add_option("--n", o.n, "Sample size")->capture_default_str();
    sample->add_option("--out", o.out_path, "Output CSV")->required();
    common(sample);

    auto* fit = app.add_subcommand("fit", "Estimate a model from data");
    fit->add_option("--data", o.data_path, "Input CSV, rows are observations")->required();
    fit->add_option("--family", o.family, "A, C, F, G or J")->capture_default_str();
    fit->add_option("--estimator", o.estimator, "td-ml, td-sn, bu-ml, opac or hac")->capture_default_str();
    fit->add_option("--beta-r", o.beta_r, "Top-Down branching threshold")->capture_default_str();
    fit->add_option("--out", o.out_path, "Output JSON")->required();
    common(fit);

    auto* tailgrid = app.add_subcommand("tailgrid", "Attainable (tau, lambda_u) pairs on a grid");
    tailgrid->add_option("--family", o.family, "A, C, F or J")->capture_default_str();
    tailgrid->add_option("--grid", o.grid, "Points per axis")->capture_default_str();
    tailgrid->add_option("--out", o.out_path, "Output CSV")->required();
    common(tailgrid);

    auto* simstudy = app.add_subcommand("simstudy", "Run a simulation study");
    simstudy->add_option("--config", o.config_path, "Study JSON")->required();
    simstudy->add_option("--out", o.out_path, "Output directory")->required();
    common(simstudy);

    auto* backtest = app.add_subcommand("var-backtest", "Rolling VaR backtest on a price file");
    backtest->add_option("--prices", o.prices_path, "CSV with header date,TICKER,...")->required();
    backtest->add_option("--family", o.family, "Copula family")->capture_default_str();
    backtest->add_option("--model", o.models, "Comma list: independence, opac, hac, hopac, hopac-bu")
        ->capture_default_str();
    backtest->add_option("--alpha", o.alphas, "Comma list of VaR levels")->capture_default_str();
    backtest->add_option("--window", o.windows, "Comma list of window lengths")->capture_default_str();
    backtest->add_option("--simulations", o.simulations, "Simulated scenarios per day")->capture_default_str();
    backtest->add_option("--max-days", o.max_days, "Only the last N forecast days (0 = all)");
    backtest->add_flag("--cold", o.cold, "Refit from default starting points every day");
    backtest->add_option("--out", o.out_path, "Output directory")->required();
    common(backtest);

    auto* validate = app.add_subcommand("validate", "Check the nesting condition of a tree");
    validate->add_option("--model", o.model_path, "Tree JSON")->required();
    common(validate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << "run 'hopac --help' for usage\n";
        return 2;
    }

    try {
        if (*sample) return cmd_sample(o, out);
        if (*fit) return cmd_fit(o, out);
        if (*tailgrid) return cmd_tailgrid(o, out);
        if (*simstudy) return cmd_simstudy(o, *simstudy, out);
        if (*backtest) return cmd_backtest(o, out);
        if (*validate) return cmd_validate(o, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace hopac::cli
