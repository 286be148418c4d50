#include "ius/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

namespace ius {

int ForestParams::split_candidates(Index n_features) const {
    const auto p = static_cast<double>(n_features);
    int m = 0;
    if (features_per_split <= 0.0)
        m = static_cast<int>(std::ceil(p / 3.0));
    else if (features_per_split < 1.0)
        m = static_cast<int>(std::ceil(features_per_split * p));
    else
        m = static_cast<int>(features_per_split);
    return std::clamp(m, 1, static_cast<int>(n_features));
}

void ForestParams::validate() const {
    if (n_trees < 1) throw Error("forest needs n_trees >= 1");
    if (min_leaf < 1) throw Error("forest needs min_leaf >= 1");
    if (max_depth < 0) throw Error("forest max_depth must be >= 0");
}

namespace {

std::mt19937_64 tree_rng(std::uint64_t seed, std::uint64_t tree_index, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tree_index), static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
    std::size_t left_count = 0;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, const Vector& y, const ForestParams& params, std::uint64_t seed)
        : X_(X), y_(y), params_(params), rng_(tree_rng(params.seed, seed, 1)),
          m_(params.split_candidates(X.cols())) {
        features_.resize(static_cast<std::size_t>(X.cols()));
        std::iota(features_.begin(), features_.end(), 0);
    }

    RegressionTree build(std::vector<Index> samples) {
        RegressionTree tree;
        grow(tree, samples, 0);
        return tree;
    }

private:
    int grow(RegressionTree& tree, std::vector<Index>& idx, int depth) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        double sum = 0.0;
        for (auto i : idx) sum += y_(i);
        const double mean = sum / static_cast<double>(idx.size());
        tree.nodes.back().value = mean;
        tree.nodes.back().samples = static_cast<int>(idx.size());

        const bool depth_ok = params_.max_depth == 0 || depth < params_.max_depth;
        if (!depth_ok || idx.size() < 2 * static_cast<std::size_t>(params_.min_leaf)) return id;

        const auto split = best_split(idx);
        if (split.feature < 0) return id;

        std::vector<Index> left, right;
        left.reserve(split.left_count);
        right.reserve(idx.size() - split.left_count);
        for (auto i : idx) (X_(i, split.feature) <= split.threshold ? left : right).push_back(i);
        idx.clear();
        idx.shrink_to_fit();

        const int l = grow(tree, left, depth + 1);
        const int r = grow(tree, right, depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        node.impurity_decrease = split.gain;
        return id;
    }

    SplitChoice best_split(const std::vector<Index>& idx) {
        // Partial Fisher-Yates: the first m_ entries become the candidate set.
        const auto p = features_.size();
        if (static_cast<std::size_t>(m_) < p) {
            for (std::size_t k = 0; k < static_cast<std::size_t>(m_); ++k) {
                std::uniform_int_distribution<std::size_t> pick(k, p - 1);
                std::swap(features_[k], features_[pick(rng_)]);
            }
        }
        std::vector<int> candidates(features_.begin(), features_.begin() + m_);
        std::sort(candidates.begin(), candidates.end());

        SplitChoice best;
        const std::size_t n = idx.size();
        const std::size_t min_leaf = static_cast<std::size_t>(params_.min_leaf);
        std::vector<std::pair<double, double>> column(n);
        double total = 0.0;
        for (auto i : idx) total += y_(i);

        for (int f : candidates) {
            for (std::size_t k = 0; k < n; ++k) column[k] = {X_(idx[k], f), y_(idx[k])};
            std::sort(column.begin(), column.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            double left_sum = 0.0;
            for (std::size_t k = 0; k + 1 < n; ++k) {
                left_sum += column[k].second;
                const std::size_t nl = k + 1;
                const std::size_t nr = n - nl;
                if (column[k].first == column[k + 1].first) continue;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double ml = left_sum / static_cast<double>(nl);
                const double mr = (total - left_sum) / static_cast<double>(nr);
                // SSE(parent) - SSE(left) - SSE(right) = nl*nr/n * (mean_l - mean_r)^2
                const double gain =
                    static_cast<double>(nl) * static_cast<double>(nr) / static_cast<double>(n) * (ml - mr) * (ml - mr);
                // Near-equal gains keep the earlier (feature, threshold) candidate.
                if (gain > best.gain * (1.0 + 1e-12) + 1e-300) {
                    best.gain = gain;
                    best.feature = f;
                    best.threshold = 0.5 * (column[k].first + column[k + 1].first);
                    best.left_count = nl;
                }
            }
        }
        return best;
    }

    const Matrix& X_;
    const Vector& y_;
    const ForestParams& params_;
    std::mt19937_64 rng_;
    int m_;
    std::vector<int> features_;
};

}  // namespace

std::vector<Index> bootstrap_indices(Index n, std::uint64_t seed, std::uint64_t tree_index) {
    auto rng = tree_rng(seed, tree_index, 0);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::vector<Index> out(static_cast<std::size_t>(n));
    for (auto& i : out) i = pick(rng);
    return out;
}

RegressionTree fit_tree(const Matrix& X, const Vector& y, const std::vector<Index>& samples,
                        const ForestParams& params, std::uint64_t tree_seed) {
    TreeBuilder builder(X, y, params, tree_seed);
    return builder.build(samples);
}

Forest fit_forest(const Matrix& X, const Vector& y, const ForestParams& params) {
    params.validate();
    if (X.rows() != y.size()) throw Error(fmt::format("forest: {} rows but {} targets", X.rows(), y.size()));
    if (X.rows() < 2) throw Error("forest needs at least two samples");
    if (!X.allFinite() || !y.allFinite()) throw Error("forest inputs must be finite");

    Forest forest;
    forest.n_features = X.cols();
    forest.params = params;
    const bool constant = (y.array() == y(0)).all();
    if (constant) forest.notes.push_back("zero-variance target: every tree is a single leaf");

    std::vector<Index> all(static_cast<std::size_t>(X.rows()));
    std::iota(all.begin(), all.end(), Index{0});
    forest.trees.reserve(static_cast<std::size_t>(params.n_trees));
    for (int t = 0; t < params.n_trees; ++t) {
        const auto tree_index = static_cast<std::uint64_t>(t);
        auto samples = params.bootstrap ? bootstrap_indices(X.rows(), params.seed, tree_index) : all;
        forest.trees.push_back(fit_tree(X, y, samples, params, tree_index));
    }
    return forest;
}

double predict(const Forest& forest, const Eigen::Ref<const Vector>& x) {
    if (x.size() != forest.n_features)
        throw Error(fmt::format("forest expects {} features, got {}", forest.n_features, x.size()));
    double sum = 0.0;
    for (const auto& t : forest.trees) sum += t.predict(x);
    return sum / static_cast<double>(forest.trees.size());
}

Vector predict_rows(const Forest& forest, const Matrix& X) {
    Vector out(X.rows());
    for (Index i = 0; i < X.rows(); ++i) out(i) = predict(forest, X.row(i).transpose());
    return out;
}

Vector raw_importance(const Forest& forest) {
    Vector imp = Vector::Zero(forest.n_features);
    for (const auto& t : forest.trees)
        for (const auto& n : t.nodes)
            if (!n.is_leaf()) imp(n.feature) += n.impurity_decrease;
    return imp;
}

Vector importance(const Forest& forest) {
    Vector imp = raw_importance(forest);
    const double total = imp.sum();
    if (total > 0.0) imp /= total;
    return imp;
}

nlohmann::json forest_to_json(const Forest& forest) {
    nlohmann::json doc;
    doc["format"] = "ius.forest/1";
    doc["n_features"] = forest.n_features;
    doc["params"] = {{"n_trees", forest.params.n_trees},
                     {"max_depth", forest.params.max_depth},
                     {"min_leaf", forest.params.min_leaf},
                     {"features_per_split", forest.params.features_per_split},
                     {"bootstrap", forest.params.bootstrap},
                     {"seed", forest.params.seed}};
    doc["notes"] = forest.notes;
    auto& trees = doc["trees"] = nlohmann::json::array();
    for (const auto& t : forest.trees) {
        auto nodes = nlohmann::json::array();
        for (const auto& n : t.nodes) {
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.impurity_decrease, n.value, n.samples});
        }
        trees.push_back(std::move(nodes));
    }
    return doc;
}

Forest forest_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "ius.forest/1") throw Error("not a forest document");
    Forest forest;
    forest.n_features = doc.at("n_features").get<Index>();
    const auto& p = doc.at("params");
    forest.params.n_trees = p.at("n_trees");
    forest.params.max_depth = p.at("max_depth");
    forest.params.min_leaf = p.at("min_leaf");
    forest.params.features_per_split = p.at("features_per_split");
    forest.params.bootstrap = p.at("bootstrap");
    forest.params.seed = p.at("seed");
    forest.notes = doc.value("notes", std::vector<std::string>{});
    for (const auto& t : doc.at("trees")) {
        RegressionTree tree;
        for (const auto& n : t) {
            TreeNode node;
            node.feature = n.at(0);
            node.threshold = n.at(1);
            node.left = n.at(2);
            node.right = n.at(3);
            node.impurity_decrease = n.at(4);
            node.value = n.at(5);
            node.samples = n.at(6);
            tree.nodes.push_back(node);
        }
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

}  // namespace ius
