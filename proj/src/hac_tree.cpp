#include "hopac/hac_tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hopac {

namespace {

constexpr double kParamTol = 1e-12;

}  // namespace

TreeShape::TreeShape(int d, std::vector<ForkSpec> forks) : d_(d) {
    if (d < 2) throw std::invalid_argument("a tree needs at least two leaves");
    if (static_cast<int>(forks.size()) != d - 1) {
        throw std::invalid_argument("a binary tree over d leaves has exactly d-1 forks");
    }
    const int node_count = 2 * d - 1;
    children_.assign(d - 1, {0, 0});
    parent_.assign(node_count + 1, 0);
    std::vector<bool> seen_fork(d - 1, false);
    for (const auto& fork : forks) {
        if (!is_fork(fork.id)) throw std::invalid_argument("fork id out of range: " + std::to_string(fork.id));
        const int index = fork.id - d - 1;
        if (seen_fork[index]) throw std::invalid_argument("duplicate fork id " + std::to_string(fork.id));
        seen_fork[index] = true;
        auto kids = fork.children;
        std::sort(kids.begin(), kids.end());
        if (kids[0] == kids[1]) throw std::invalid_argument("fork children must be distinct");
        for (int child : kids) {
            if (child < 1 || child > node_count || child == fork.id) {
                throw std::invalid_argument("invalid child " + std::to_string(child));
            }
            if (parent_[child] != 0) throw std::invalid_argument("node " + std::to_string(child) + " has two parents");
            parent_[child] = fork.id;
        }
        children_[index] = kids;
    }
    int roots = 0;
    int root_id = 0;
    for (int node = 1; node <= node_count; ++node) {
        if (parent_[node] == 0) {
            ++roots;
            root_id = node;
        }
    }
    if (roots != 1 || !is_fork(root_id)) throw std::invalid_argument("forks do not form a single rooted tree");
    // Every leaf must reach the root (rules out cycles among forks).
    for (int leaf = 1; leaf <= d; ++leaf) {
        int node = leaf;
        int steps = 0;
        while (parent_[node] != 0) {
            node = parent_[node];
            if (++steps > node_count) throw std::invalid_argument("cycle in tree");
        }
        if (node != root_id) throw std::invalid_argument("leaf not connected to root");
    }
    const std::vector<double> flat(d - 1, 0.0);
    *this = normalized(flat);
}

const std::array<int, 2>& TreeShape::children(int fork) const {
    if (!is_fork(fork)) throw std::out_of_range("not a fork: " + std::to_string(fork));
    return children_[fork - d_ - 1];
}

int TreeShape::parent(int node) const {
    if (node < 1 || node >= 2 * d_) throw std::out_of_range("no such node: " + std::to_string(node));
    return parent_[node];
}

std::vector<int> TreeShape::descendant_leaves(int node) const {
    if (node < 1 || node >= 2 * d_) throw std::out_of_range("no such node: " + std::to_string(node));
    std::vector<int> leaves;
    std::vector<int> stack{node};
    while (!stack.empty()) {
        const int current = stack.back();
        stack.pop_back();
        if (is_leaf(current)) {
            leaves.push_back(current);
        } else {
            const auto& kids = children(current);
            stack.push_back(kids[0]);
            stack.push_back(kids[1]);
        }
    }
    std::sort(leaves.begin(), leaves.end());
    return leaves;
}

std::vector<int> TreeShape::ancestors(int node) const {
    std::vector<int> path;
    for (int p = parent(node); p != 0; p = parent_[p]) path.push_back(p);
    return path;
}

int TreeShape::youngest_common_ancestor(int i, int j) const {
    if (!is_leaf(i) || !is_leaf(j)) throw std::invalid_argument("youngest common ancestor is defined for leaves");
    if (i == j) throw std::invalid_argument("youngest common ancestor needs two distinct leaves");
    const auto path_i = ancestors(i);
    for (int p = parent_[j]; p != 0; p = parent_[p]) {
        if (std::find(path_i.begin(), path_i.end(), p) != path_i.end()) return p;
    }
    return root();
}

std::vector<int> TreeShape::forks_top_down() const {
    std::vector<int> order;
    std::vector<int> stack{root()};
    while (!stack.empty()) {
        const int fork = stack.back();
        stack.pop_back();
        order.push_back(fork);
        const auto& kids = children(fork);
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
            if (is_fork(*it)) stack.push_back(*it);
        }
    }
    return order;
}

std::vector<std::vector<int>> TreeShape::clusters() const {
    std::vector<std::vector<int>> out;
    for (int fork = d_ + 1; fork < 2 * d_; ++fork) out.push_back(descendant_leaves(fork));
    std::sort(out.begin(), out.end());
    return out;
}

TreeShape TreeShape::normalized(std::span<const double> fork_keys, std::vector<int>* mapping) const {
    if (static_cast<int>(fork_keys.size()) != d_ - 1) throw std::invalid_argument("one key per fork required");
    std::vector<int> new_id(2 * d_, 0);
    for (int leaf = 1; leaf <= d_; ++leaf) new_id[leaf] = leaf;
    std::vector<bool> assigned(d_ - 1, false);
    for (int next = d_ + 1; next < 2 * d_; ++next) {
        int best = -1;
        for (int k = 0; k < d_ - 1; ++k) {
            if (assigned[k]) continue;
            const auto& kids = children_[k];
            const bool ready = new_id[kids[0]] != 0 && new_id[kids[1]] != 0;
            if (!ready) continue;
            if (best < 0 || fork_keys[k] > fork_keys[best]) best = k;
        }
        assigned[best] = true;
        new_id[d_ + 1 + best] = next;
    }
    TreeShape out;
    out.d_ = d_;
    out.children_.assign(d_ - 1, {0, 0});
    out.parent_.assign(2 * d_, 0);
    for (int k = 0; k < d_ - 1; ++k) {
        const int id = new_id[d_ + 1 + k];
        std::array<int, 2> kids{new_id[children_[k][0]], new_id[children_[k][1]]};
        std::sort(kids.begin(), kids.end());
        out.children_[id - d_ - 1] = kids;
        out.parent_[kids[0]] = id;
        out.parent_[kids[1]] = id;
    }
    if (mapping != nullptr) *mapping = new_id;
    return out;
}

HacTree::HacTree(TreeShape shape, std::vector<Generator> generators) {
    if (static_cast<int>(generators.size()) != shape.fork_count()) {
        throw std::invalid_argument("one generator per fork required");
    }
    const Family family = generators.front().family();
    for (const auto& g : generators) {
        if (g.family() != family) throw std::invalid_argument("all forks of a tree must share one family");
    }
    std::vector<double> taus;
    taus.reserve(generators.size());
    for (const auto& g : generators) taus.push_back(g.kendall_tau());
    std::vector<int> mapping;
    shape_ = shape.normalized(taus, &mapping);
    const int d = shape.leaf_count();
    generators_ = generators;
    for (int k = 0; k < d - 1; ++k) generators_[mapping[d + 1 + k] - d - 1] = generators[k];
}

HacTree HacTree::exchangeable(const Generator& generator, int d) {
    std::vector<TreeShape::ForkSpec> forks;
    forks.push_back({d + 1, {1, 2}});
    for (int k = 2; k < d; ++k) forks.push_back({d + k, {d + k - 1, k + 1}});
    return HacTree(TreeShape(d, std::move(forks)), std::vector<Generator>(d - 1, generator));
}

const Generator& HacTree::generator(int fork) const {
    if (!shape_.is_fork(fork)) throw std::out_of_range("not a fork: " + std::to_string(fork));
    return generators_[fork - shape_.leaf_count() - 1];
}

std::vector<double> HacTree::fork_taus() const {
    std::vector<double> taus;
    taus.reserve(generators_.size());
    for (const auto& g : generators_) taus.push_back(g.kendall_tau());
    return taus;
}

PairwiseMatrices HacTree::pairwise_matrix() const {
    const int d = dimension();
    PairwiseMatrices m{Matrix(d, d, 1.0), Matrix(d, d, 1.0), Matrix(d, d, 1.0)};
    for (int i = 1; i <= d; ++i) {
        for (int j = i + 1; j <= d; ++j) {
            const auto& g = generator(shape_.youngest_common_ancestor(i, j));
            const double tau = g.kendall_tau();
            const auto tails = g.tail_coefficients();
            m.tau(i - 1, j - 1) = m.tau(j - 1, i - 1) = tau;
            m.lambda_u(i - 1, j - 1) = m.lambda_u(j - 1, i - 1) = tails.upper;
            m.lambda_l(i - 1, j - 1) = m.lambda_l(j - 1, i - 1) = tails.lower;
        }
    }
    return m;
}

double HacTree::node_value(int node, std::span<const double> u) const {
    if (shape_.is_leaf(node)) return u[node - 1];
    const auto& g = generator(node);
    double sum = 0.0;
    for (int child : shape_.children(node)) {
        const double v = node_value(child, u);
        if (v <= 0.0) return 0.0;
        sum += g.psi_inverse(std::min(v, 1.0));
    }
    return g.psi(sum);
}

double HacTree::cdf(std::span<const double> u) const {
    if (static_cast<int>(u.size()) != dimension()) throw std::invalid_argument("cdf: dimension mismatch");
    for (double x : u) {
        if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("cdf: point outside [0,1]^d");
    }
    return node_value(shape_.root(), u);
}

bool nesting_ok(const Generator& parent, const Generator& child) {
    if (parent.family() != child.family()) return false;
    if (std::abs(parent.beta() - 1.0) <= kParamTol) {
        if (parent.theta() <= child.theta() + kParamTol) return true;
    }
    return std::abs(parent.theta() - child.theta()) <= kParamTol && parent.beta() <= child.beta() + kParamTol;
}

SncReport validate_snc(const HacTree& tree) {
    SncReport report;
    const auto& shape = tree.shape();
    for (int fork : shape.forks_top_down()) {
        for (int child : shape.children(fork)) {
            if (!shape.is_fork(child)) continue;
            const auto& p = tree.generator(fork);
            const auto& c = tree.generator(child);
            if (nesting_ok(p, c)) continue;
            const bool r1_applies = std::abs(p.beta() - 1.0) <= kParamTol;
            report.violations.push_back(
                {fork, child, r1_applies ? "R1: theta_parent <= theta_child" : "R2: theta_parent == theta_child and beta_parent <= beta_child"});
        }
    }
    return report;
}

}  // namespace hopac
