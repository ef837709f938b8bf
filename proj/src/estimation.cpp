#include "hopac/estimation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "hopac/parallel.hpp"

namespace hopac {

namespace {

constexpr double kUClamp = 1e-12;

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

// Maps an unconstrained coordinate onto a closed interval.
struct Coordinate {
    Interval range;

    [[nodiscard]] bool free() const { return !range.is_point(); }
    [[nodiscard]] bool half_infinite() const { return std::isinf(range.upper); }

    [[nodiscard]] double to_x(double z) const {
        if (!free()) return range.lower;
        if (half_infinite()) return range.lower + softplus(z);
        return range.lower + (range.upper - range.lower) / (1.0 + std::exp(-z));
    }

    // Starting points are pulled slightly inside so the simplex can move.
    [[nodiscard]] double interior(double x) const {
        if (!free()) return range.lower;
        if (half_infinite()) return std::max(x, range.lower + 1e-3 * std::max(1.0, std::abs(range.lower)));
        const double w = range.upper - range.lower;
        return std::clamp(x, range.lower + 1e-3 * w, range.upper - 1e-3 * w);
    }

    [[nodiscard]] double to_z(double x) const {
        x = interior(x);
        if (half_infinite()) return inverse_softplus(x - range.lower);
        const double p = (x - range.lower) / (range.upper - range.lower);
        return std::log(p / (1.0 - p));
    }
};

double safe_theta(Family family, double tau, double beta, Interval range) {
    double theta;
    try {
        theta = kendall_tau_inverse(family, tau, beta);
    } catch (const InfeasibleError&) {
        theta = tau > 0.0 ? range.upper : range.lower;
    }
    if (!std::isfinite(theta)) theta = std::isfinite(range.upper) ? range.upper : 50.0;
    return range.clamp(theta);
}

std::vector<ThetaBeta> default_starts(Family family, double tau, Interval tr, Interval br) {
    tau = std::clamp(tau, -0.99, 0.99);
    if (tr.is_point()) {
        const double t0 = base_kendall_tau(family, tr.lower);
        const double beta = tau > t0 ? (1.0 - t0) / (1.0 - tau) : 1.0;
        return {{tr.lower, br.clamp(beta)}};
    }
    const double beta_one = br.clamp(1.0);
    std::vector<ThetaBeta> starts{{safe_theta(family, tau, beta_one, tr), beta_one}};
    if (br.is_point()) return starts;
    // Second start: half of the dependence carried by theta, half by beta.
    const double tau_base = std::max(tau, 0.0) / 2.0;
    const double theta = safe_theta(family, tau_base, 1.0, tr);
    const double t0 = base_kendall_tau(family, theta);
    const double beta = tau > t0 ? (1.0 - t0) / (1.0 - tau) : 1.0;
    starts.push_back({theta, br.clamp(beta)});
    return starts;
}

Interval intersect_family(Family family, Interval r) {
    const Interval full = full_theta_range(family);
    Interval out{std::max(r.lower, full.lower), std::min(r.upper, full.upper)};
    if (!(out.lower <= out.upper)) throw std::invalid_argument("empty theta range for family " + family_name(family));
    return out;
}

std::vector<double> empirical_copula_at_points(std::span<const double> u, std::span<const double> v) {
    const std::size_t n = u.size();
    std::vector<double> cn(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t count = 0;
        for (std::size_t k = 0; k < n; ++k) count += (u[k] <= u[i] && v[k] <= v[i]) ? 1 : 0;
        cn[i] = static_cast<double>(count) / static_cast<double>(n);
    }
    return cn;
}

// Merge sort of `v` counting inversions (pairs i < j with v[i] > v[j]).
std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& buffer, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t inv = count_inversions(v, buffer, lo, mid) + count_inversions(v, buffer, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            inv += mid - i;
            buffer[k++] = v[j++];
        } else {
            buffer[k++] = v[i++];
        }
    }
    while (i < mid) buffer[k++] = v[i++];
    while (j < hi) buffer[k++] = v[j++];
    std::copy(buffer.begin() + static_cast<std::ptrdiff_t>(lo), buffer.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

std::uint64_t tied_pairs(std::span<const double> sorted) {
    std::uint64_t ties = 0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= sorted.size(); ++i) {
        if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
            ++run;
        } else {
            ties += run * (run - 1) / 2;
            run = 1;
        }
    }
    return ties;
}

Matrix pair_columns(const Matrix& u, int i, int j) {
    const std::size_t cols[2] = {static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1)};
    return u.select_columns(cols);
}

void check_sample(const Matrix& u) {
    if (u.rows() < 10) throw std::invalid_argument("estimation needs at least 10 observations");
    if (u.cols() < 2) throw std::invalid_argument("estimation needs at least two columns");
}

StructureEstimate structure_for(const Matrix& u, const EstimatorConfig& config) {
    if (config.structure) {
        if (config.structure->shape.leaf_count() != static_cast<int>(u.cols())) {
            throw std::invalid_argument("structure dimension does not match the data");
        }
        return *config.structure;
    }
    return estimate_structure(kendall_matrix(u, config.jobs));
}

std::vector<PairKey> pairs_below(const TreeShape& shape, int fork) {
    const auto& kids = shape.children(fork);
    const auto li = shape.descendant_leaves(kids[0]);
    const auto lj = shape.descendant_leaves(kids[1]);
    std::vector<PairKey> keys;
    for (int a : li) {
        for (int b : lj) keys.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(keys.begin(), keys.end());
    return keys;
}

ForkRecord make_record(const TreeShape& shape, const StructureEstimate& structure, int fork,
                       const AggregatedFit& fit, Interval tr, Interval br) {
    ForkRecord rec;
    rec.fork = fork;
    rec.leaves = shape.descendant_leaves(fork);
    rec.tau_hat = structure.fork_taus[fork - shape.leaf_count() - 1];
    rec.theta = fit.estimate.theta;
    rec.beta = fit.estimate.beta;
    rec.theta_range = tr;
    rec.beta_range = br;
    rec.pair_keys = fit.keys;
    rec.pairs = fit.pairs;
    for (const auto& p : fit.pairs) {
        rec.boundary = rec.boundary || p.on_boundary;
        rec.converged = rec.converged && p.converged;
    }
    return rec;
}

// Builds the tree (which renumbers forks by tau) and relabels the records.
FitReport finalize(EstimatorKind kind, Family family, const TreeShape& shape, std::vector<ForkRecord> records) {
    const int d = shape.leaf_count();
    std::vector<Generator> gens;
    gens.reserve(d - 1);
    for (int fork = d + 1; fork < 2 * d; ++fork) {
        const auto& rec = records[fork - d - 1];
        gens.emplace_back(family, rec.theta, rec.beta);
    }
    FitReport report;
    report.estimator = kind;
    report.family = family;
    report.tree = HacTree(shape, std::move(gens));
    const auto& new_shape = report.tree.shape();
    for (auto& rec : records) {
        for (int fork = d + 1; fork < 2 * d; ++fork) {
            if (new_shape.descendant_leaves(fork) == rec.leaves) {
                rec.fork = fork;
                break;
            }
        }
        const auto& g = report.tree.generator(rec.fork);
        rec.theta = g.theta();
        rec.beta = g.beta();
        for (std::size_t k = 0; k < rec.pairs.size(); ++k) {
            report.pair_estimates[rec.pair_keys[k]] = {rec.pairs[k].theta, rec.pairs[k].beta};
        }
    }
    std::sort(records.begin(), records.end(), [](const ForkRecord& a, const ForkRecord& b) { return a.fork < b.fork; });
    report.forks = std::move(records);
    if (!validate_snc(report.tree).valid()) throw std::logic_error("estimator produced a tree violating the nesting rules");
    return report;
}

}  // namespace

Matrix pseudo_observations(const Matrix& x) {
    const std::size_t n = x.rows();
    if (n < 2) throw std::invalid_argument("pseudo_observations needs at least two rows");
    Matrix u(n, x.cols());
    std::vector<std::size_t> idx(n);
    for (std::size_t c = 0; c < x.cols(); ++c) {
        for (std::size_t r = 0; r < n; ++r) {
            if (!std::isfinite(x(r, c))) throw std::invalid_argument("non-finite value in column " + std::to_string(c + 1));
        }
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x(a, c) < x(b, c); });
        if (x(idx.front(), c) == x(idx.back(), c)) {
            throw std::invalid_argument("constant column " + std::to_string(c + 1));
        }
        std::size_t start = 0;
        while (start < n) {
            std::size_t end = start + 1;
            while (end < n && x(idx[end], c) == x(idx[start], c)) ++end;
            // Ranks start+1 .. end share their average.
            const double rank = 0.5 * static_cast<double>(start + 1 + end);
            for (std::size_t k = start; k < end; ++k) u(idx[k], c) = rank / static_cast<double>(n + 1);
            start = end;
        }
    }
    return u;
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (y.size() != n) throw std::invalid_argument("kendall_tau_b: length mismatch");
    if (n < 2) throw std::invalid_argument("kendall_tau_b needs at least two observations");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });
    std::uint64_t ties_x = 0;
    std::uint64_t ties_xy = 0;
    {
        std::size_t run_x = 1, run_xy = 1;
        for (std::size_t i = 1; i <= n; ++i) {
            const bool same_x = i < n && x[idx[i]] == x[idx[i - 1]];
            const bool same_xy = same_x && y[idx[i]] == y[idx[i - 1]];
            if (same_xy) {
                ++run_xy;
            } else {
                ties_xy += run_xy * (run_xy - 1) / 2;
                run_xy = 1;
            }
            if (same_x) {
                ++run_x;
            } else {
                ties_x += run_x * (run_x - 1) / 2;
                run_x = 1;
            }
        }
    }
    std::vector<double> ys(n), buffer(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
    const std::uint64_t swaps = count_inversions(ys, buffer, 0, n);
    const std::uint64_t ties_y = tied_pairs(ys);
    const double n0 = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    const double numerator = n0 - static_cast<double>(ties_x) - static_cast<double>(ties_y) +
                             static_cast<double>(ties_xy) - 2.0 * static_cast<double>(swaps);
    const double denom = std::sqrt((n0 - static_cast<double>(ties_x)) * (n0 - static_cast<double>(ties_y)));
    return denom > 0.0 ? numerator / denom : 0.0;
}

Matrix kendall_matrix(const Matrix& u, int jobs) {
    const std::size_t d = u.cols();
    Matrix tau(d, d, 1.0);
    std::vector<std::vector<double>> cols(d);
    for (std::size_t j = 0; j < d; ++j) cols[j] = u.column(j);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) pairs.emplace_back(i, j);
    }
    parallel_for(pairs.size(), jobs, [&](std::size_t k) {
        const auto [i, j] = pairs[k];
        tau(i, j) = tau(j, i) = kendall_tau_b(cols[i], cols[j]);
    });
    return tau;
}

StructureEstimate estimate_structure(const Matrix& tau) {
    const int d = static_cast<int>(tau.rows());
    if (d < 2 || tau.cols() != tau.rows()) throw std::invalid_argument("estimate_structure needs a square matrix, d >= 2");
    std::vector<int> active(d);
    std::iota(active.begin(), active.end(), 1);
    std::vector<std::vector<int>> leaves(2 * d);
    for (int j = 1; j <= d; ++j) leaves[j] = {j};
    std::vector<TreeShape::ForkSpec> forks;
    StructureEstimate out;
    for (int k = 1; k < d; ++k) {
        double best = -std::numeric_limits<double>::infinity();
        int best_a = -1, best_b = -1;
        for (std::size_t a = 0; a < active.size(); ++a) {
            for (std::size_t b = a + 1; b < active.size(); ++b) {
                double sum = 0.0;
                for (int i : leaves[active[a]]) {
                    for (int j : leaves[active[b]]) sum += tau(i - 1, j - 1);
                }
                const double avg = sum / static_cast<double>(leaves[active[a]].size() * leaves[active[b]].size());
                if (avg > best) {
                    best = avg;
                    best_a = static_cast<int>(a);
                    best_b = static_cast<int>(b);
                }
            }
        }
        const int node = d + k;
        const int na = active[best_a];
        const int nb = active[best_b];
        forks.push_back({node, {na, nb}});
        out.fork_taus.push_back(best);
        leaves[node] = leaves[na];
        leaves[node].insert(leaves[node].end(), leaves[nb].begin(), leaves[nb].end());
        active.erase(active.begin() + best_b);
        active.erase(active.begin() + best_a);
        active.push_back(node);
    }
    out.shape = TreeShape(d, std::move(forks));
    return out;
}

Interval full_theta_range(Family family) { return {theta_floor(family), theta_ceiling(family)}; }

double opac_log_density(const Generator& g, double u, double v) {
    return g.log_pair_density(u, v);
}

PairFit fit_opac_pair(const Matrix& uv, Family family, PairObjective objective, Interval theta_range,
                      Interval beta_range, const PairFitOptions& options) {
    if (uv.cols() != 2) throw std::invalid_argument("pair fits need an n x 2 matrix");
    if (uv.rows() < 10) throw std::invalid_argument("pair fits need at least 10 observations");
    if (!(beta_range.lower >= 1.0 && beta_range.lower <= beta_range.upper)) {
        throw std::invalid_argument("beta range must be a nonempty subset of [1, inf)");
    }
    const Interval tr = intersect_family(family, theta_range);
    // The outer power of a Gumbel generator is Gumbel again; keep beta at 1.
    const Interval br = family == Family::G ? Interval::point(1.0) : beta_range;

    const std::size_t n = uv.rows();
    std::vector<double> u(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = std::clamp(uv(i, 0), kUClamp, 1.0 - kUClamp);
        v[i] = std::clamp(uv(i, 1), kUClamp, 1.0 - kUClamp);
    }
    std::vector<double> cn;
    if (objective == PairObjective::Sn) cn = empirical_copula_at_points(u, v);

    auto evaluate = [&](double theta, double beta) -> double {
        try {
            const Generator g(family, theta, beta);
            double total = 0.0;
            if (objective == PairObjective::ML) {
                for (std::size_t i = 0; i < n; ++i) total -= opac_log_density(g, u[i], v[i]);
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    const double diff = g.psi(g.psi_inverse(u[i]) + g.psi_inverse(v[i])) - cn[i];
                    total += diff * diff;
                }
            }
            return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    const Coordinate ct{tr};
    const Coordinate cb{br};
    auto unpack = [&](std::span<const double> z) {
        std::size_t k = 0;
        const double theta = ct.free() ? ct.to_x(z[k++]) : tr.lower;
        const double beta = cb.free() ? cb.to_x(z[k]) : br.lower;
        return ThetaBeta{theta, beta};
    };

    std::vector<ThetaBeta> starts;
    if (options.start) {
        starts.push_back({tr.clamp(options.start->theta), br.clamp(options.start->beta)});
    } else {
        starts = default_starts(family, kendall_tau_b(u, v), tr, br);
    }

    PairFit best;
    double best_value = std::numeric_limits<double>::infinity();
    bool have_best = false;
    for (const auto& s : starts) {
        std::vector<double> z0;
        if (ct.free()) z0.push_back(ct.to_z(s.theta));
        if (cb.free()) z0.push_back(cb.to_z(s.beta));
        auto result = nelder_mead([&](std::span<const double> z) {
            const auto p = unpack(z);
            return evaluate(p.theta, p.beta);
        }, z0, options.optimizer);
        if (!have_best || result.value < best_value) {
            have_best = true;
            best_value = result.value;
            const auto p = unpack(result.x);
            best.theta = p.theta;
            best.beta = p.beta;
            best.converged = result.converged;
            best.iterations = result.iterations;
            best.trace = std::move(result.trace);
        }
    }

    // Snap to a bound when the optimizer stalled just inside it.
    auto near = [](double x, double b) { return std::isfinite(b) && std::abs(x - b) <= 1e-3 * std::max(1.0, std::abs(b)); };
    for (int coord = 0; coord < 2; ++coord) {
        const Interval& r = coord == 0 ? tr : br;
        if (r.is_point()) continue;
        for (double b : {r.lower, r.upper}) {
            double& x = coord == 0 ? best.theta : best.beta;
            if (x == b || !near(x, b)) continue;
            const double saved = x;
            x = b;
            const double value = evaluate(best.theta, best.beta);
            if (value <= best_value + 1e-12 * std::max(1.0, std::abs(best_value))) {
                best_value = value;
            } else {
                x = saved;
            }
        }
    }
    best.on_boundary = (!tr.is_point() && (best.theta == tr.lower || best.theta == tr.upper)) ||
                       (!br.is_point() && (best.beta == br.lower || best.beta == br.upper));
    best.objective = objective == PairObjective::ML ? -best_value : best_value;
    return best;
}

PairFit fit_opac_ml(const Matrix& uv, Family family, Interval theta_range, Interval beta_range,
                    const PairFitOptions& options) {
    return fit_opac_pair(uv, family, PairObjective::ML, theta_range, beta_range, options);
}

PairFit fit_opac_sn(const Matrix& uv, Family family, Interval theta_range, Interval beta_range,
                    const PairFitOptions& options) {
    return fit_opac_pair(uv, family, PairObjective::Sn, theta_range, beta_range, options);
}

ThetaBeta aggregate_estimates(std::span<const ThetaBeta> estimates) {
    if (estimates.empty()) throw std::invalid_argument("nothing to aggregate");
    ThetaBeta mean{0.0, 0.0};
    for (const auto& e : estimates) {
        mean.theta += e.theta;
        mean.beta += e.beta;
    }
    mean.theta /= static_cast<double>(estimates.size());
    mean.beta /= static_cast<double>(estimates.size());
    return mean;
}

std::string restriction_name(Restriction r) {
    switch (r) {
        case Restriction::R1: return "R1";
        case Restriction::R2: return "R2";
        case Restriction::None: break;
    }
    return "none";
}

Branch branch_ranges(ThetaBeta estimate, Interval theta_range, Interval beta_range, double beta_R) {
    if (estimate.beta <= beta_R && beta_range.lower <= 1.0) {
        return {Restriction::R1, 1.0, {std::max(theta_range.lower, estimate.theta), theta_range.upper}, beta_range};
    }
    return {Restriction::R2, estimate.beta, Interval::point(estimate.theta),
            {std::max(estimate.beta, beta_range.lower), beta_range.upper}};
}

std::string estimator_tag(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::OPAC: return "OPAC";
        case EstimatorKind::HAC: return "HAC";
        case EstimatorKind::TD_ML: return "TD-ML";
        case EstimatorKind::TD_Sn: return "TD-Sn";
        case EstimatorKind::BU_ML: return "BU-ML";
    }
    return "?";
}

EstimatorKind parse_estimator(std::string_view tag) {
    std::string lower(tag);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "opac") return EstimatorKind::OPAC;
    if (lower == "hac") return EstimatorKind::HAC;
    if (lower == "td-ml") return EstimatorKind::TD_ML;
    if (lower == "td-sn") return EstimatorKind::TD_Sn;
    if (lower == "bu-ml") return EstimatorKind::BU_ML;
    throw std::invalid_argument("unknown estimator '" + std::string(tag) + "'");
}

AggregatedFit fit_opac_aggregated(const Matrix& u, Family family, std::span<const PairKey> keys,
                                  Interval theta_range, Interval beta_range, const EstimatorConfig& config) {
    AggregatedFit out;
    out.keys.assign(keys.begin(), keys.end());
    out.pairs.resize(keys.size());
    parallel_for(keys.size(), config.jobs, [&](std::size_t k) {
        PairFitOptions options = config.pair_options;
        if (config.warm_start != nullptr) {
            if (auto it = config.warm_start->find(keys[k]); it != config.warm_start->end()) {
                options.start = it->second;
                options.optimizer.initial_step = std::min(options.optimizer.initial_step, 0.2);
            }
        }
        out.pairs[k] = fit_opac_pair(pair_columns(u, keys[k].first, keys[k].second), family, config.objective,
                                     theta_range, beta_range, options);
    });
    std::vector<ThetaBeta> estimates;
    for (const auto& p : out.pairs) estimates.push_back({p.theta, p.beta});
    out.estimate = aggregate_estimates(estimates);
    // The mean of in-range values is in range up to rounding; make it exact.
    const Interval tr = intersect_family(family, theta_range);
    out.estimate.theta = tr.clamp(out.estimate.theta);
    out.estimate.beta = family == Family::G ? 1.0 : beta_range.clamp(out.estimate.beta);
    return out;
}

AggregatedFit fit_opac_aggregated(const Matrix& u, Family family, const EstimatorConfig& config) {
    std::vector<PairKey> keys;
    for (int i = 1; i <= static_cast<int>(u.cols()); ++i) {
        for (int j = i + 1; j <= static_cast<int>(u.cols()); ++j) keys.emplace_back(i, j);
    }
    return fit_opac_aggregated(u, family, keys, config.theta_range.value_or(full_theta_range(family)),
                               config.beta_range, config);
}

FitReport fit_topdown(const Matrix& u, Family family, const EstimatorConfig& config) {
    check_sample(u);
    const StructureEstimate structure = structure_for(u, config);
    const TreeShape& shape = structure.shape;
    const int d = shape.leaf_count();
    std::vector<ForkRecord> records(d - 1);

    std::function<void(int, Interval, Interval)> visit = [&](int k, Interval tr, Interval br) {
        if (shape.is_leaf(k)) return;
        const auto keys = pairs_below(shape, k);
        const auto fit = fit_opac_aggregated(u, family, keys, tr, br, config);
        ForkRecord rec = make_record(shape, structure, k, fit, tr, br);
        const Branch branch = branch_ranges(fit.estimate, tr, br, config.beta_R);
        rec.beta = branch.parent_beta;
        rec.restriction = branch.restriction;
        records[k - d - 1] = std::move(rec);
        for (int child : shape.children(k)) visit(child, branch.child_theta, branch.child_beta);
    };
    visit(shape.root(), config.theta_range.value_or(full_theta_range(family)), config.beta_range);

    const EstimatorKind kind = config.objective == PairObjective::Sn ? EstimatorKind::TD_Sn
                               : config.beta_range.upper <= 1.0  ? EstimatorKind::HAC
                                                                 : EstimatorKind::TD_ML;
    return finalize(kind, family, shape, std::move(records));
}

FitReport fit_bottomup(const Matrix& u, Family family, const EstimatorConfig& config) {
    check_sample(u);
    const StructureEstimate structure = structure_for(u, config);
    const TreeShape& shape = structure.shape;
    const int d = shape.leaf_count();
    const Interval tr = config.theta_range.value_or(full_theta_range(family));
    std::vector<ForkRecord> records(d - 1);

    // Fork ids follow the join order, i.e. decreasing structure tau.
    for (int k = d + 1; k < 2 * d; ++k) {
        const auto keys = pairs_below(shape, k);
        const auto fit = fit_opac_aggregated(u, family, keys, tr, config.beta_range, config);
        ForkRecord rec = make_record(shape, structure, k, fit, tr, config.beta_range);

        std::vector<const ForkRecord*> kids;
        for (int child : shape.children(k)) {
            if (shape.is_fork(child)) kids.push_back(&records[child - d - 1]);
        }
        if (!kids.empty()) {
            const Generator fitted(family, rec.theta, rec.beta);
            const bool ok = std::all_of(kids.begin(), kids.end(), [&](const ForkRecord* c) {
                return nesting_ok(fitted, Generator(family, c->theta, c->beta));
            });
            const bool equal_theta = std::all_of(kids.begin(), kids.end(), [&](const ForkRecord* c) {
                return std::abs(c->theta - kids.front()->theta) <= 1e-12;
            });
            if (ok) {
                rec.restriction = std::abs(fitted.beta() - 1.0) <= 1e-12 ? Restriction::R1 : Restriction::R2;
            } else {
                double min_theta = kids.front()->theta;
                double min_beta = kids.front()->beta;
                for (const auto* c : kids) {
                    min_theta = std::min(min_theta, c->theta);
                    min_beta = std::min(min_beta, c->beta);
                }
                const ThetaBeta r1{std::min(rec.theta, min_theta), 1.0};
                bool use_r2 = false;
                ThetaBeta r2{};
                if (equal_theta && family != Family::G) {
                    r2 = {kids.front()->theta, std::clamp(rec.beta, 1.0, min_beta)};
                    const double target = fitted.kendall_tau();
                    const double gap_r1 = std::abs(Generator(family, r1.theta, r1.beta).kendall_tau() - target);
                    const double gap_r2 = std::abs(Generator(family, r2.theta, r2.beta).kendall_tau() - target);
                    use_r2 = gap_r2 <= gap_r1;
                }
                if (use_r2) {
                    rec.theta = r2.theta;
                    rec.beta = r2.beta;
                    rec.restriction = Restriction::R2;
                } else {
                    rec.theta = r1.theta;
                    rec.beta = r1.beta;
                    rec.restriction = Restriction::R1;
                    rec.trimmed = true;
                }
            }
        }
        records[k - d - 1] = std::move(rec);
    }
    return finalize(EstimatorKind::BU_ML, family, shape, std::move(records));
}

FitReport fit_opac_estimator(const Matrix& u, Family family, const EstimatorConfig& config) {
    check_sample(u);
    const StructureEstimate structure = structure_for(u, config);
    const TreeShape& shape = structure.shape;
    const int d = shape.leaf_count();
    const Interval tr = config.theta_range.value_or(full_theta_range(family));
    const auto all = fit_opac_aggregated(u, family, config);

    std::vector<ForkRecord> records(d - 1);
    for (int k = d + 1; k < 2 * d; ++k) {
        AggregatedFit local;
        local.estimate = all.estimate;
        for (const auto& key : pairs_below(shape, k)) {
            const auto it = std::find(all.keys.begin(), all.keys.end(), key);
            local.keys.push_back(key);
            local.pairs.push_back(all.pairs[static_cast<std::size_t>(it - all.keys.begin())]);
        }
        records[k - d - 1] = make_record(shape, structure, k, local, tr, config.beta_range);
    }
    return finalize(EstimatorKind::OPAC, family, shape, std::move(records));
}

FitReport fit_estimator(const Matrix& u, Family family, EstimatorKind kind, EstimatorConfig config) {
    switch (kind) {
        case EstimatorKind::OPAC:
            config.objective = PairObjective::ML;
            return fit_opac_estimator(u, family, config);
        case EstimatorKind::HAC:
            config.objective = PairObjective::ML;
            config.beta_range = Interval::point(1.0);
            return fit_topdown(u, family, config);
        case EstimatorKind::TD_ML:
            config.objective = PairObjective::ML;
            return fit_topdown(u, family, config);
        case EstimatorKind::TD_Sn:
            config.objective = PairObjective::Sn;
            return fit_topdown(u, family, config);
        case EstimatorKind::BU_ML:
            config.objective = PairObjective::ML;
            return fit_bottomup(u, family, config);
    }
    throw std::invalid_argument("unknown estimator");
}

}  // namespace hopac
