#pragma once

#include "ius/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace ius {

struct ForestParams {
    int n_trees = 200;
    int max_depth = 0;  // 0 = unlimited
    int min_leaf = 2;
    // <= 0: ceil(p/3); in (0,1): fraction of p; >= 1: absolute count.
    double features_per_split = 0.0;
    bool bootstrap = true;
    std::uint64_t seed = 0;

    [[nodiscard]] int split_candidates(Index n_features) const;
    void validate() const;
};

/// Split node when `feature >= 0`, leaf otherwise.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double impurity_decrease = 0.0;  // reduction of the node's sum of squared deviations
    double value = 0.0;              // mean target of the samples reaching the node
    int samples = 0;

    [[nodiscard]] bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
public:
    std::vector<TreeNode> nodes;

    template <typename Derived>
    [[nodiscard]] double predict(const Eigen::MatrixBase<Derived>& x) const {
        int i = 0;
        while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            i = x(n.feature) <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }
};

struct Forest {
    std::vector<RegressionTree> trees;
    Index n_features = 0;
    ForestParams params;
    std::vector<std::string> notes;
};

/// Samples are rows of `X`.
Forest fit_forest(const Matrix& X, const Vector& y, const ForestParams& params);

/// Grows one tree on the given sample multiset.
RegressionTree fit_tree(const Matrix& X, const Vector& y, const std::vector<Index>& samples,
                        const ForestParams& params, std::uint64_t tree_seed);

/// Bootstrap draw of n indices for tree `tree_index`.
std::vector<Index> bootstrap_indices(Index n, std::uint64_t seed, std::uint64_t tree_index);

double predict(const Forest& forest, const Eigen::Ref<const Vector>& x);
Vector predict_rows(const Forest& forest, const Matrix& X);

/// Summed impurity decrease per feature over all split nodes.
Vector raw_importance(const Forest& forest);
/// raw_importance normalized to sum to one (zero vector when there are no splits).
Vector importance(const Forest& forest);

nlohmann::json forest_to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& doc);

}  // namespace ius
