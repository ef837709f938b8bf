#include "hopac/simstudy.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <tuple>

#include <json.hpp>

#include "hopac/io.hpp"
#include "hopac/parallel.hpp"
#include "hopac/sampling.hpp"

namespace hopac {

namespace {

constexpr double kTauFloor = 0.01;
constexpr double kTauCeiling = 0.95;

double sample_beta(double a, double b, RngStream& rng) {
    const double x = rng.gamma(a);
    const double y = rng.gamma(b);
    return x / (x + y);
}

// Largest theta with base tau <= tau, i.e. the theta for beta = 1, or the
// family's ceiling when tau is out of reach at beta = 1.
double theta_at_beta_one(Family family, double tau) {
    try {
        return kendall_tau_inverse(family, tau, 1.0);
    } catch (const InfeasibleError&) {
        return theta_ceiling(family);
    }
}

}  // namespace

Matrix random_correlation(int d, RngStream& rng) {
    if (d < 2) throw std::invalid_argument("random_correlation: d must be at least 2");
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(d, d);
    double b = 1.0 + (d - 2) / 2.0;
    const double r12 = 2.0 * sample_beta(b, b, rng) - 1.0;
    r(0, 1) = r(1, 0) = r12;
    for (int k = 2; k < d; ++k) {
        b -= 0.5;
        const double y = sample_beta(k / 2.0, b, rng);
        Eigen::VectorXd z(k);
        for (int i = 0; i < k; ++i) z(i) = rng.normal();
        const Eigen::VectorXd w = std::sqrt(y) * z / z.norm();
        const Eigen::MatrixXd lower = r.topLeftCorner(k, k).llt().matrixL();
        const Eigen::VectorXd q = lower * w;
        r.block(0, k, k, 1) = q;
        r.block(k, 0, 1, k) = q.transpose();
    }
    Matrix out(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) out(i, j) = r(i, j);
    }
    return out;
}

RandomHopac random_hopac_draw(Family family, int d, RngStream& rng) {
    if (family == Family::G) throw std::invalid_argument("random_hopac: Gumbel is excluded (beta is redundant)");
    if (d < 3) throw std::invalid_argument("random_hopac: d must be at least 3");
    const Matrix corr = random_correlation(d, rng);
    const StructureEstimate structure = estimate_structure(corr);
    const TreeShape& shape = structure.shape;

    RandomHopac out;
    std::vector<double> taus(d - 1);
    for (int k = 0; k < d - 1; ++k) {
        const double t = structure.fork_taus[k];
        taus[k] = std::clamp(t, kTauFloor, kTauCeiling);
        if (taus[k] != t) ++out.clamped;
    }

    std::vector<std::optional<Generator>> gens(d - 1);
    std::function<void(int, const Generator*)> visit = [&](int fork, const Generator* parent) {
        const double tau = taus[fork - d - 1];
        std::optional<Generator> g;
        if (parent != nullptr && parent->beta() > 1.0) {
            // Inherit theta (R2) and let beta carry the extra dependence.
            const double t0 = base_kendall_tau(family, parent->theta());
            g.emplace(family, parent->theta(), std::max(parent->beta(), (1.0 - t0) / (1.0 - tau)));
        } else {
            const double lower = parent != nullptr ? parent->theta() : theta_floor(family);
            const double upper = theta_at_beta_one(family, tau);
            // AMH cannot reach tau >= 1/3 with beta = 1; no coin then.
            const bool beta_one_feasible = base_kendall_tau(family, upper) >= tau - 1e-12;
            bool beta_one = false;
            if (beta_one_feasible) {
                ++out.coin_forks;
                beta_one = rng.uniform() < 0.5;
            }
            if (beta_one) {
                ++out.coin_beta_one;
                g.emplace(family, std::max(upper, lower), 1.0);
            } else {
                const double theta = lower + (std::max(upper, lower) - lower) * rng.uniform();
                const double t0 = base_kendall_tau(family, theta);
                g.emplace(family, theta, std::max(1.0, (1.0 - t0) / (1.0 - tau)));
            }
        }
        gens[fork - d - 1] = g;
        for (int child : shape.children(fork)) {
            if (shape.is_fork(child)) visit(child, &*gens[fork - d - 1]);
        }
    };
    visit(shape.root(), nullptr);

    std::vector<Generator> list;
    for (auto& g : gens) list.push_back(*g);
    out.tree = HacTree(shape, std::move(list));
    out.fork_taus = out.tree.fork_taus();
    return out;
}

HacTree random_hopac(Family family, int d, RngStream& rng) { return random_hopac_draw(family, d, rng).tree; }

std::int64_t attempts_until_match(const HacTree& model, int n, const RngStream& rng, std::int64_t cap,
                                  double& trivariate_sum, Matrix* matched) {
    for (std::int64_t a = 0; a < cap; ++a) {
        Matrix sample = sample_hopac(model, n, rng.substream(static_cast<std::uint64_t>(a)));
        const auto structure = estimate_structure(kendall_matrix(sample));
        const auto match = structure_match(model, structure.shape);
        trivariate_sum += match.trivariate_ratio;
        if (match.exact) {
            if (matched != nullptr) *matched = std::move(sample);
            return a + 1;
        }
    }
    return cap;
}

StudyConfig parse_study_config(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    StudyConfig cfg;
    if (j.contains("families")) {
        cfg.families.clear();
        for (const auto& f : j.at("families")) cfg.families.push_back(parse_family(f.get<std::string>()));
    }
    if (j.contains("dims")) cfg.dims = j.at("dims").get<std::vector<int>>();
    if (j.contains("sample_sizes")) cfg.sample_sizes = j.at("sample_sizes").get<std::vector<int>>();
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("estimators")) {
        cfg.estimators.clear();
        for (const auto& e : j.at("estimators")) cfg.estimators.push_back(parse_estimator(e.get<std::string>()));
    }
    cfg.sample_measures = j.value("sample_measures", cfg.sample_measures);
    cfg.true_measures = j.value("true_measures", cfg.true_measures);
    cfg.retry_cap = j.value("retry_cap", cfg.retry_cap);
    cfg.jobs = j.value("jobs", cfg.jobs);

    if (cfg.repetitions < 1) throw std::invalid_argument("study config: repetitions must be >= 1");
    if (cfg.families.empty() || cfg.dims.empty() || cfg.sample_sizes.empty()) {
        throw std::invalid_argument("study config: families, dims and sample_sizes must be nonempty");
    }
    for (Family f : cfg.families) {
        if (f == Family::G) throw std::invalid_argument("study config: family G is not supported");
    }
    for (int d : cfg.dims) {
        if (d < 3) throw std::invalid_argument("study config: dims must be >= 3");
    }
    for (int n : cfg.sample_sizes) {
        if (n < 10) throw std::invalid_argument("study config: sample sizes must be >= 10");
    }
    if (cfg.retry_cap < 1) throw std::invalid_argument("study config: retry_cap must be >= 1");
    return cfg;
}

StudyResult run_study(const StudyConfig& config) {
    struct Task {
        Family family;
        int d;
        int rep;
    };
    std::vector<Task> tasks;
    for (Family f : config.families) {
        for (int d : config.dims) {
            for (int rep = 0; rep < config.repetitions; ++rep) tasks.push_back({f, d, rep});
        }
    }
    struct Partial {
        std::vector<MeasureRow> measures;
        std::vector<FailureRow> failures;
        // Per sample size: (attempts, matches, trivariate sum, capped).
        std::map<int, std::tuple<std::int64_t, int, double, int>> recovery;
    };
    std::vector<Partial> partials(tasks.size());

    parallel_for(tasks.size(), resolve_jobs(config.jobs), [&](std::size_t t) {
        const Task task = tasks[t];
        Partial& out = partials[t];
        const std::uint64_t stream =
            (static_cast<std::uint64_t>(task.family) * 1000 + static_cast<std::uint64_t>(task.d)) * 1'000'000 +
            static_cast<std::uint64_t>(task.rep);
        const RngStream base(config.seed, stream);
        HacTree model;
        try {
            RngStream model_rng = base.substream(0);
            model = random_hopac(task.family, task.d, model_rng);
        } catch (const std::exception& e) {
            out.failures.push_back({task.family, task.d, 0, "model", task.rep, e.what()});
            return;
        }
        for (int n : config.sample_sizes) {
            const auto n_id = static_cast<std::uint64_t>(n);
            if (config.sample_measures) {
                try {
                    const Matrix u = pseudo_observations(sample_hopac(model, n, base.substream(1'000'000 + n_id)));
                    for (EstimatorKind kind : config.estimators) {
                        try {
                            const FitReport fit = fit_estimator(u, task.family, kind);
                            const auto m = sample_vs_estimate(u, fit);
                            const std::string tag = estimator_tag(kind);
                            out.measures.push_back({task.family, task.d, n, tag, task.rep, "cdf_distance", m.cdf_distance});
                            out.measures.push_back({task.family, task.d, n, tag, task.rep, "tau_distance", m.tau_distance});
                            out.measures.push_back(
                                {task.family, task.d, n, tag, task.rep, "lambda_u_distance", m.lambda_u_distance});
                        } catch (const std::exception& e) {
                            out.failures.push_back({task.family, task.d, n, estimator_tag(kind), task.rep, e.what()});
                        }
                    }
                } catch (const std::exception& e) {
                    out.failures.push_back({task.family, task.d, n, "sample", task.rep, e.what()});
                }
            }
            if (config.true_measures) {
                try {
                    double trivariate = 0.0;
                    Matrix matched;
                    const auto attempts = attempts_until_match(model, n, base.substream(2'000'000 + n_id),
                                                               config.retry_cap, trivariate, &matched);
                    const bool found = !matched.empty();
                    out.recovery[n] = {attempts, found ? 1 : 0, trivariate, found ? 0 : 1};
                    if (found) {
                        const Matrix u = pseudo_observations(matched);
                        for (EstimatorKind kind : config.estimators) {
                            if (kind != EstimatorKind::TD_ML && kind != EstimatorKind::TD_Sn) continue;
                            try {
                                const FitReport fit = fit_estimator(u, task.family, kind);
                                const auto m = true_vs_estimate(rewrite_on_shape(model, fit.tree.shape()), fit);
                                const std::string tag = estimator_tag(kind);
                                out.measures.push_back(
                                    {task.family, task.d, n, tag, task.rep, "param_distance", m.param_distance});
                                out.measures.push_back(
                                    {task.family, task.d, n, tag, task.rep, "true_tau_distance", m.tau_distance});
                                out.measures.push_back({task.family, task.d, n, tag, task.rep,
                                                        "true_lambda_u_distance", m.lambda_u_distance});
                            } catch (const std::exception& e) {
                                out.failures.push_back({task.family, task.d, n, estimator_tag(kind), task.rep, e.what()});
                            }
                        }
                    }
                } catch (const std::exception& e) {
                    out.failures.push_back({task.family, task.d, n, "structure", task.rep, e.what()});
                }
            }
        }
    });

    StudyResult result;
    std::map<std::tuple<int, int, int>, RecoveryResult> recovery;
    std::map<std::tuple<int, int, int>, std::pair<int, double>> sums;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        auto& p = partials[t];
        result.measures.insert(result.measures.end(), p.measures.begin(), p.measures.end());
        result.failures.insert(result.failures.end(), p.failures.begin(), p.failures.end());
        for (const auto& [n, rec] : p.recovery) {
            const auto key = std::make_tuple(static_cast<int>(tasks[t].family), tasks[t].d, n);
            auto& r = recovery[key];
            auto& s = sums[key];
            r.repetitions += 1;
            r.attempts += std::get<0>(rec);
            s.first += std::get<1>(rec);
            s.second += std::get<2>(rec);
            r.capped += std::get<3>(rec);
        }
    }
    for (auto& [key, r] : recovery) {
        const auto& s = sums[key];
        r.exact_ratio = 100.0 * s.first / static_cast<double>(r.attempts);
        r.trivariate_ratio = 100.0 * s.second / static_cast<double>(r.attempts);
        result.structures.push_back({static_cast<Family>(std::get<0>(key)), std::get<1>(key), std::get<2>(key), r});
    }
    return result;
}

void write_study(const StudyResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        return out;
    };
    {
        auto out = open("measures.csv");
        out << "family,d,n,estimator,repetition,measure,value\n";
        for (const auto& r : result.measures) {
            out << family_label(r.family) << ',' << r.d << ',' << r.n << ',' << r.estimator << ',' << r.repetition
                << ',' << r.measure << ',' << format_double(r.value) << '\n';
        }
    }
    {
        using Key = std::tuple<char, int, int, std::string, std::string>;
        std::map<Key, std::vector<double>> cells;
        for (const auto& r : result.measures) {
            cells[{family_label(r.family), r.d, r.n, r.estimator, r.measure}].push_back(r.value);
        }
        auto out = open("summary.csv");
        out << "family,d,n,estimator,measure,count,mean,se\n";
        for (const auto& [key, values] : cells) {
            const double count = static_cast<double>(values.size());
            double mean = 0.0;
            for (double v : values) mean += v / count;
            double var = 0.0;
            for (double v : values) var += (v - mean) * (v - mean);
            const double se = values.size() > 1 ? std::sqrt(var / (count - 1.0) / count) : 0.0;
            out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ',' << std::get<3>(key)
                << ',' << std::get<4>(key) << ',' << values.size() << ',' << format_double(mean) << ','
                << format_double(se) << '\n';
        }
    }
    {
        auto out = open("structure.csv");
        out << "family,d,n,repetitions,attempts,capped,exact_ratio,trivariate_ratio\n";
        for (const auto& s : result.structures) {
            out << family_label(s.family) << ',' << s.d << ',' << s.n << ',' << s.recovery.repetitions << ','
                << s.recovery.attempts << ',' << s.recovery.capped << ',' << format_double(s.recovery.exact_ratio)
                << ',' << format_double(s.recovery.trivariate_ratio) << '\n';
        }
    }
    {
        auto out = open("failures.csv");
        out << "family,d,n,estimator,repetition,message\n";
        for (const auto& f : result.failures) {
            std::string msg = f.message;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            out << family_label(f.family) << ',' << f.d << ',' << f.n << ',' << f.estimator << ',' << f.repetition
                << ',' << msg << '\n';
        }
    }
}

}  // namespace hopac
