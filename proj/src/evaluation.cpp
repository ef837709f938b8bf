#include "hopac/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace hopac {

namespace {

std::vector<std::size_t> ranks(std::span<const double> x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<std::size_t> r(x.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = k + 1;
    return r;
}

// 0: (a,b) merge first, 1: (a,c), 2: (b,c), 3: all three at once.
using TauOf = std::function<double(int)>;

int triple_class(const TreeShape& shape, const TauOf& tau, int a, int b, int c) {
    const int ab = shape.youngest_common_ancestor(a, b);
    const int ac = shape.youngest_common_ancestor(a, c);
    const int bc = shape.youngest_common_ancestor(b, c);
    int inner;
    int outer;
    int cls;
    if (ac == bc) {
        inner = ab, outer = ac, cls = 0;
    } else if (ab == bc) {
        inner = ac, outer = ab, cls = 1;
    } else {
        inner = bc, outer = ab, cls = 2;
    }
    if (tau && std::abs(tau(inner) - tau(outer)) <= 1e-12) return 3;
    return cls;
}

StructureMatch match_impl(const TreeShape& model, const TauOf& model_tau, const TreeShape& fit, const TauOf& fit_tau) {
    const int d = model.leaf_count();
    if (fit.leaf_count() != d) throw std::invalid_argument("structure_match: trees have different leaf counts");
    StructureMatch out;
    out.exact = model.clusters() == fit.clusters();
    if (d < 3) {
        out.trivariate_ratio = out.exact ? 1.0 : 0.0;
        return out;
    }
    std::size_t agree = 0;
    std::size_t total = 0;
    for (int a = 1; a <= d; ++a) {
        for (int b = a + 1; b <= d; ++b) {
            for (int c = b + 1; c <= d; ++c) {
                ++total;
                const int m = triple_class(model, model_tau, a, b, c);
                if (m == 3 || m == triple_class(fit, fit_tau, a, b, c)) ++agree;
            }
        }
    }
    out.trivariate_ratio = static_cast<double>(agree) / static_cast<double>(total);
    if (model_tau) out.exact = agree == total;
    return out;
}

std::vector<int> fork_matching(const HacTree& model, const HacTree& fit) {
    const auto& ms = model.shape();
    const auto& fs = fit.shape();
    if (ms.leaf_count() != fs.leaf_count() || ms.clusters() != fs.clusters()) {
        throw StructureMismatch("model and estimate structures differ");
    }
    const int d = ms.leaf_count();
    std::vector<int> match(2 * d, 0);
    for (int mf = d + 1; mf < 2 * d; ++mf) {
        const auto leaves = ms.descendant_leaves(mf);
        for (int ff = d + 1; ff < 2 * d; ++ff) {
            if (fs.descendant_leaves(ff) == leaves) {
                match[mf] = ff;
                break;
            }
        }
    }
    return match;
}

}  // namespace

double empirical_copula(const Matrix& u, std::span<const double> point) {
    if (point.size() != u.cols()) throw std::invalid_argument("empirical_copula: dimension mismatch");
    if (u.rows() == 0) throw std::invalid_argument("empirical_copula: empty sample");
    std::size_t count = 0;
    for (std::size_t r = 0; r < u.rows(); ++r) {
        const auto row = u.row(r);
        bool below = true;
        for (std::size_t c = 0; c < row.size() && below; ++c) below = row[c] <= point[c];
        count += below ? 1 : 0;
    }
    return static_cast<double>(count) / static_cast<double>(u.rows());
}

int default_tail_k(std::size_t n) { return std::max(1, static_cast<int>(std::ceil(0.05 * static_cast<double>(n)))); }

double lambda_u_empirical(std::span<const double> u, std::span<const double> v, int k) {
    const std::size_t n = u.size();
    if (v.size() != n) throw std::invalid_argument("lambda_u_empirical: length mismatch");
    if (k < 1 || static_cast<std::size_t>(k) > n) throw std::invalid_argument("lambda_u_empirical: k must lie in [1, n]");
    const auto ru = ranks(u);
    const auto rv = ranks(v);
    const std::size_t threshold = n - static_cast<std::size_t>(k);
    std::size_t joint = 0;
    for (std::size_t i = 0; i < n; ++i) joint += (ru[i] > threshold && rv[i] > threshold) ? 1 : 0;
    return static_cast<double>(joint) / static_cast<double>(k);
}

double lambda_u_empirical(std::span<const double> u, std::span<const double> v) {
    return lambda_u_empirical(u, v, default_tail_k(u.size()));
}

SampleVsEstimate sample_vs_estimate(const Matrix& u, const HacTree& fit) {
    const std::size_t d = u.cols();
    const std::size_t n = u.rows();
    if (static_cast<int>(d) != fit.dimension()) throw std::invalid_argument("sample_vs_estimate: dimension mismatch");
    SampleVsEstimate out;
    // Empirical copula at every sample point, via counting.
    for (std::size_t i = 0; i < n; ++i) {
        const double gap = fit.cdf(u.row(i)) - empirical_copula(u, u.row(i));
        out.cdf_distance += gap * gap;
    }
    out.cdf_distance /= static_cast<double>(n);

    const auto model = fit.pairwise_matrix();
    std::vector<std::vector<double>> cols(d);
    for (std::size_t j = 0; j < d; ++j) cols[j] = u.column(j);
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            ++pairs;
            out.tau_distance += std::abs(model.tau(i, j) - kendall_tau_b(cols[i], cols[j]));
            out.lambda_u_distance += std::abs(model.lambda_u(i, j) - lambda_u_empirical(cols[i], cols[j]));
        }
    }
    out.tau_distance /= static_cast<double>(pairs);
    out.lambda_u_distance /= static_cast<double>(pairs);
    return out;
}

SampleVsEstimate sample_vs_estimate(const Matrix& u, const FitReport& fit) { return sample_vs_estimate(u, fit.tree); }

TrueVsEstimate true_vs_estimate(const HacTree& model, const HacTree& fit) {
    const auto match = fork_matching(model, fit);
    const int d = model.dimension();
    TrueVsEstimate out;
    for (int mf = d + 1; mf < 2 * d; ++mf) {
        const auto& g = model.generator(mf);
        const auto& h = fit.generator(match[mf]);
        out.param_distance += std::hypot(g.theta() - h.theta(), g.beta() - h.beta());
        out.tau_distance += std::abs(g.kendall_tau() - h.kendall_tau());
        out.lambda_u_distance += std::abs(g.tail_coefficients().upper - h.tail_coefficients().upper);
    }
    const double forks = d - 1;
    out.param_distance /= forks;
    out.tau_distance /= forks;
    out.lambda_u_distance /= forks;
    return out;
}

TrueVsEstimate true_vs_estimate(const HacTree& model, const FitReport& fit) { return true_vs_estimate(model, fit.tree); }

StructureMatch structure_match(const HacTree& model, const HacTree& fit) {
    const TauOf model_tau = [&](int fork) { return model.generator(fork).kendall_tau(); };
    const TauOf fit_tau = [&](int fork) { return fit.generator(fork).kendall_tau(); };
    return match_impl(model.shape(), model_tau, fit.shape(), fit_tau);
}

StructureMatch structure_match(const HacTree& model, const TreeShape& fit) {
    const TauOf model_tau = [&](int fork) { return model.generator(fork).kendall_tau(); };
    return match_impl(model.shape(), model_tau, fit, {});
}

StructureMatch structure_match(const TreeShape& model, const TreeShape& fit) {
    return match_impl(model, {}, fit, {});
}

HacTree rewrite_on_shape(const HacTree& model, const TreeShape& shape) {
    if (!structure_match(model, shape).exact) throw StructureMismatch("shape does not agree with the model");
    const TreeShape& ms = model.shape();
    const int d = ms.leaf_count();
    std::vector<Generator> gens;
    for (int fork = d + 1; fork < 2 * d; ++fork) {
        const std::vector<int> leaves = shape.descendant_leaves(fork);
        int cover = leaves.front();
        for (int leaf : leaves) {
            if (leaf == leaves.front()) continue;
            const int yca = ms.youngest_common_ancestor(leaves.front(), leaf);
            if (cover <= d || ms.descendant_leaves(yca).size() > ms.descendant_leaves(cover).size()) cover = yca;
        }
        gens.push_back(model.generator(cover));
    }
    return HacTree(shape, std::move(gens));
}

}  // namespace hopac
