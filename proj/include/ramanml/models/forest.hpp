#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ramanml/errors.hpp"
#include "ramanml/matrix.hpp"
#include "ramanml/parallel.hpp"
#include "ramanml/rng.hpp"

namespace ramanml {

enum class SplitCriterion { Gini, Entropy };

inline std::string to_string(SplitCriterion c) {
    return c == SplitCriterion::Gini ? "gini" : "entropy";
}

struct ForestConfig {
    int n_estimators = 100;
    int max_features = 0;  // 0: use sqrt(n_features)
    SplitCriterion criterion = SplitCriterion::Gini;
    std::uint64_t seed = 0;

    void validate(std::size_t n_features) const {
        if (n_estimators < 1) throw ConfigError("forest: n_estimators must be >= 1");
        if (max_features < 0 || static_cast<std::size_t>(max_features) > n_features)
            throw ConfigError("forest: max_features must be in [1, n_features]");
    }

    std::size_t resolved_max_features(std::size_t n_features) const {
        if (max_features > 0) return static_cast<std::size_t>(max_features);
        const auto s = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features)));
        return std::max<std::size_t>(1, s);
    }
};

struct TreeNode {
    int feature = -1;       // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = -1;         // leaf majority class
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    int predict(std::span<const double> x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].label;
    }
};

struct ForestModel {
    ForestConfig config;
    std::vector<DecisionTree> trees;
    std::vector<double> importances;  // per feature, sums to 1 for non-degenerate fits
    int n_classes = 0;
    bool degenerate = false;  // single-class training data
};

namespace detail {

inline double impurity(std::span<const std::size_t> counts, std::size_t total, SplitCriterion crit) {
    if (total == 0) return 0.0;
    double v = crit == SplitCriterion::Gini ? 1.0 : 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        if (crit == SplitCriterion::Gini)
            v -= p * p;
        else
            v -= p * std::log2(p);
    }
    return v;
}

struct TreeBuilder {
    const Matrix& features;
    const std::vector<int>& labels;
    std::size_t n_classes;
    SplitCriterion criterion;
    std::size_t mtry;
    Rng& rng;
    DecisionTree tree;
    std::vector<double>& importance_acc;  // weighted impurity decreases for this tree
    std::size_t n_root;

    struct Split {
        bool found = false;
        std::size_t feature = 0;
        double threshold = 0.0;
        double decrease = 0.0;
    };

    int majority(std::span<const std::size_t> counts) const {
        std::size_t best = 0;
        for (std::size_t c = 1; c < counts.size(); ++c)
            if (counts[c] > counts[best]) best = c;
        return static_cast<int>(best);
    }

    // best threshold on one feature; returns impurity decrease (not yet
    // weighted by the node fraction)
    bool best_threshold(const std::vector<std::size_t>& rows, std::size_t feat, double node_impurity,
                        double& out_threshold, double& out_decrease) const {
        const std::size_t n = rows.size();
        std::vector<std::pair<double, int>> vals(n);
        for (std::size_t i = 0; i < n; ++i)
            vals[i] = {features(rows[i], feat), labels[rows[i]]};
        std::sort(vals.begin(), vals.end());
        if (vals.front().first == vals.back().first) return false;

        std::vector<std::size_t> left(n_classes, 0), right(n_classes, 0);
        for (const auto& [v, l] : vals) right[static_cast<std::size_t>(l)]++;

        bool found = false;
        double best_gain = 0.0, best_thr = 0.0;
        std::size_t nl = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto cls = static_cast<std::size_t>(vals[i].second);
            left[cls]++;
            right[cls]--;
            ++nl;
            if (vals[i].first == vals[i + 1].first) continue;
            const double il = impurity(left, nl, criterion);
            const double ir = impurity(right, n - nl, criterion);
            const double wl = static_cast<double>(nl) / static_cast<double>(n);
            const double gain = node_impurity - wl * il - (1.0 - wl) * ir;
            if (!found || gain > best_gain) {
                found = true;
                best_gain = gain;
                best_thr = (vals[i].first + vals[i + 1].first) / 2.0;
            }
        }
        out_threshold = best_thr;
        out_decrease = best_gain;
        return found;
    }

    Split find_split(const std::vector<std::size_t>& rows, double node_impurity) {
        std::vector<std::size_t> order(features.cols());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        Split best;
        // scan mtry candidate features; keep scanning past mtry only while
        // nothing splittable has been seen, so impure nodes are not
        // prematurely turned into leaves by an unlucky draw
        std::size_t considered = 0;
        for (std::size_t feat : order) {
            if (considered >= mtry && best.found) break;
            ++considered;
            double thr = 0.0, dec = 0.0;
            if (!best_threshold(rows, feat, node_impurity, thr, dec)) continue;
            if (!best.found || dec > best.decrease) {
                best.found = true;
                best.feature = feat;
                best.threshold = thr;
                best.decrease = dec;
            }
        }
        return best;
    }

    // grows to purity; returns node index
    int build(const std::vector<std::size_t>& rows) {
        std::vector<std::size_t> counts(n_classes, 0);
        for (std::size_t r : rows) counts[static_cast<std::size_t>(labels[r])]++;
        const double node_imp = impurity(counts, rows.size(), criterion);

        const auto make_leaf = [&]() {
            TreeNode leaf;
            leaf.label = majority(counts);
            tree.nodes.push_back(leaf);
            return static_cast<int>(tree.nodes.size() - 1);
        };
        if (node_imp == 0.0 || rows.size() < 2) return make_leaf();

        const Split split = find_split(rows, node_imp);
        if (!split.found) return make_leaf();

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows)
            (features(r, split.feature) <= split.threshold ? left_rows : right_rows).push_back(r);

        importance_acc[split.feature] +=
            (static_cast<double>(rows.size()) / static_cast<double>(n_root)) * split.decrease;

        TreeNode node;
        node.feature = static_cast<int>(split.feature);
        node.threshold = split.threshold;
        tree.nodes.push_back(node);
        const auto idx = static_cast<int>(tree.nodes.size() - 1);
        const int l = build(left_rows);
        const int r = build(right_rows);
        tree.nodes[static_cast<std::size_t>(idx)].left = l;
        tree.nodes[static_cast<std::size_t>(idx)].right = r;
        return idx;
    }
};

}  // namespace detail

// Bagged CART trees grown to purity. Importances are mean decrease in
// impurity, weighted by node sample fraction and normalized to sum 1.
inline ForestModel forest_fit(const Matrix& features, const std::vector<int>& labels,
                              const ForestConfig& config, unsigned threads = 1) {
    config.validate(features.cols());
    if (features.rows() != labels.size()) throw DimensionMismatchError("forest_fit: label count mismatch");
    if (features.rows() == 0) throw EmptyDatasetError("forest_fit: no samples");

    ForestModel model;
    model.config = config;
    model.n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
    model.degenerate =
        std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels.front(); });

    const auto n_trees = static_cast<std::size_t>(config.n_estimators);
    const std::size_t n = features.rows();
    const std::size_t mtry = config.resolved_max_features(features.cols());

    model.trees.resize(n_trees);
    std::vector<std::vector<double>> tree_importance(n_trees);

    parallel_for(n_trees, threads, [&](std::size_t t) {
        Rng rng(config.seed, t);
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = static_cast<std::size_t>(rng.uniform_index(n));
        std::vector<double> acc(features.cols(), 0.0);
        detail::TreeBuilder builder{features, labels, static_cast<std::size_t>(model.n_classes),
                                    config.criterion, mtry, rng,
                                    {},       acc,    n};
        builder.build(sample);
        model.trees[t] = std::move(builder.tree);
        // per-tree normalization, then averaged across trees
        double total = 0.0;
        for (double v : acc) total += v;
        if (total > 0.0)
            for (double& v : acc) v /= total;
        tree_importance[t] = std::move(acc);
    });

    model.importances.assign(features.cols(), 0.0);
    for (const auto& acc : tree_importance)
        for (std::size_t f = 0; f < acc.size(); ++f) model.importances[f] += acc[f];
    double total = 0.0;
    for (double v : model.importances) total += v;
    if (total > 0.0)
        for (double& v : model.importances) v /= total;
    return model;
}

inline int forest_predict_one(const ForestModel& m, std::span<const double> x) {
    std::vector<std::size_t> votes(static_cast<std::size_t>(m.n_classes), 0);
    for (const auto& tree : m.trees) votes[static_cast<std::size_t>(tree.predict(x))]++;
    std::size_t best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c)
        if (votes[c] > votes[best]) best = c;
    return static_cast<int>(best);
}

inline std::vector<int> forest_predict(const ForestModel& m, const Matrix& queries, unsigned threads = 1) {
    std::vector<int> out(queries.rows());
    parallel_for(queries.rows(), threads,
                 [&](std::size_t r) { out[r] = forest_predict_one(m, queries.row(r)); });
    return out;
}

inline const std::vector<double>& forest_importances(const ForestModel& m) { return m.importances; }

}  // namespace ramanml
