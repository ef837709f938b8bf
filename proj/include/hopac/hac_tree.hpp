#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "hopac/generator.hpp"
#include "hopac/matrix.hpp"

namespace hopac {

/// Rooted binary tree over leaves 1..d and forks d+1..2d-1.
///
/// Forks are numbered so that the root is 2d-1 and a fork's id exceeds the
/// ids of all forks below it. Node ids are 1-based throughout.
class TreeShape {
public:
    struct ForkSpec {
        int id;
        std::array<int, 2> children;
    };

    TreeShape() = default;
    /// Validates that the forks form one binary tree over leaves 1..d. Fork
    /// ids must be a permutation of d+1..2d-1; they are renumbered so that
    /// children precede parents (see normalized()).
    TreeShape(int d, std::vector<ForkSpec> forks);

    [[nodiscard]] int leaf_count() const noexcept { return d_; }
    [[nodiscard]] int fork_count() const noexcept { return d_ - 1; }
    [[nodiscard]] int root() const noexcept { return 2 * d_ - 1; }
    [[nodiscard]] bool is_leaf(int node) const noexcept { return node >= 1 && node <= d_; }
    [[nodiscard]] bool is_fork(int node) const noexcept { return node > d_ && node < 2 * d_; }

    [[nodiscard]] const std::array<int, 2>& children(int fork) const;
    /// Parent fork of a node; 0 for the root.
    [[nodiscard]] int parent(int node) const;

    [[nodiscard]] std::vector<int> descendant_leaves(int node) const;
    [[nodiscard]] int youngest_common_ancestor(int i, int j) const;
    /// Forks on the path from node (exclusive) to the root (inclusive).
    [[nodiscard]] std::vector<int> ancestors(int node) const;

    /// Forks in depth-first order starting at the root, lower-id child first.
    [[nodiscard]] std::vector<int> forks_top_down() const;

    /// Leaf sets below every fork, as sorted vectors, sorted; two shapes are
    /// equal as leaf-labeled trees iff their clusters agree.
    [[nodiscard]] std::vector<std::vector<int>> clusters() const;

    /// Renumbers forks by decreasing key (ties by current id) subject to
    /// children getting smaller ids than their parents. Returns the new shape
    /// and writes old id -> new id into `mapping` (indexed by node id).
    [[nodiscard]] TreeShape normalized(std::span<const double> fork_keys, std::vector<int>* mapping = nullptr) const;

    friend bool operator==(const TreeShape&, const TreeShape&) = default;

private:
    int d_ = 0;
    std::vector<std::array<int, 2>> children_;  // index = fork id - d - 1
    std::vector<int> parent_;                    // index = node id
};

struct SncViolation {
    int parent;
    int child;
    std::string rule;
};

struct SncReport {
    std::vector<SncViolation> violations;
    [[nodiscard]] bool valid() const noexcept { return violations.empty(); }
};

struct PairwiseMatrices {
    Matrix tau;
    Matrix lambda_u;
    Matrix lambda_l;
};

/// Hierarchical (outer-power) Archimedean copula: a tree shape with one
/// generator per fork, all from one family.
class HacTree {
public:
    HacTree() = default;
    /// `generators[k]` labels fork shape-id d+1+k. Forks are renumbered by
    /// Kendall's tau on construction: the root has the lowest tau.
    HacTree(TreeShape shape, std::vector<Generator> generators);

    /// Exchangeable d-variate OPAC as a caterpillar tree with equal forks.
    static HacTree exchangeable(const Generator& generator, int d);

    [[nodiscard]] const TreeShape& shape() const noexcept { return shape_; }
    [[nodiscard]] int dimension() const noexcept { return shape_.leaf_count(); }
    [[nodiscard]] Family family() const { return generators_.front().family(); }
    [[nodiscard]] const Generator& generator(int fork) const;
    [[nodiscard]] const std::vector<Generator>& generators() const noexcept { return generators_; }

    /// Kendall's tau per fork, indexed by fork id - d - 1.
    [[nodiscard]] std::vector<double> fork_taus() const;
    [[nodiscard]] PairwiseMatrices pairwise_matrix() const;

    [[nodiscard]] double cdf(std::span<const double> u) const;

    friend bool operator==(const HacTree&, const HacTree&) = default;

private:
    [[nodiscard]] double node_value(int node, std::span<const double> u) const;

    TreeShape shape_;
    std::vector<Generator> generators_;
};

SncReport validate_snc(const HacTree& tree);

/// True when (parent, child) satisfies one of the two nesting rules.
bool nesting_ok(const Generator& parent, const Generator& child);

}  // namespace hopac
