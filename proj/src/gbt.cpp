#include "cbx/gbt.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cbx {

namespace {

constexpr double kLambda = 1e-6;     // leaf regularizer, keeps Newton steps finite
constexpr double kMinGain = 1e-12;

struct SplitResult {
    int feature = -1;
    double threshold = 0.0;
    // Zero-gain splits are admissible (depth does the work on parity-style
    // targets, where the root gain is exactly zero); the sentinel lets the
    // first valid candidate win.
    double gain = -1.0;
};

double leaf_value(double g_sum, double h_sum) {
    return -g_sum / (h_sum + kLambda);
}

double node_score(double g_sum, double h_sum) {
    return g_sum * g_sum / (h_sum + kLambda);
}

// Exact greedy split over all features; ties keep the first (lowest feature
// index, lowest threshold) candidate so fits are deterministic.
SplitResult best_split(const Mat& x, const std::vector<double>& grad, const std::vector<double>& hess,
                       const std::vector<int>& idx) {
    SplitResult best;
    const int num_features = int(x.cols());
    double g_total = 0.0, h_total = 0.0;
    for (int i : idx) {
        g_total += grad[std::size_t(i)];
        h_total += hess[std::size_t(i)];
    }
    const double parent = node_score(g_total, h_total);

    std::vector<int> order(idx);
    for (int f = 0; f < num_features; ++f) {
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const double va = x(a, f), vb = x(b, f);
            if (va != vb) return va < vb;
            return a < b;
        });
        double g_left = 0.0, h_left = 0.0;
        for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
            const int i = order[pos];
            g_left += grad[std::size_t(i)];
            h_left += hess[std::size_t(i)];
            const double v = x(i, f);
            const double v_next = x(order[pos + 1], f);
            if (v == v_next) continue;  // cannot split between equal values
            const double gain = node_score(g_left, h_left) +
                                node_score(g_total - g_left, h_total - h_left) - parent;
            if (gain > best.gain + kMinGain) {
                best.feature = f;
                best.threshold = 0.5 * (v + v_next);
                best.gain = gain;
            }
        }
    }
    return best;
}

int build_node(RegressionTree& tree, const Mat& x, const std::vector<double>& grad,
               const std::vector<double>& hess, std::vector<int>& idx, int depth, int max_depth) {
    double g_sum = 0.0, h_sum = 0.0;
    for (int i : idx) {
        g_sum += grad[std::size_t(i)];
        h_sum += hess[std::size_t(i)];
    }
    const int node_id = int(tree.nodes.size());
    tree.nodes.push_back({});

    SplitResult split;
    if (depth < max_depth && idx.size() >= 2) split = best_split(x, grad, hess, idx);

    if (split.feature < 0) {
        tree.nodes[std::size_t(node_id)].value = leaf_value(g_sum, h_sum);
        return node_id;
    }

    std::vector<int> left_idx, right_idx;
    for (int i : idx) {
        (x(i, split.feature) <= split.threshold ? left_idx : right_idx).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();

    const int left = build_node(tree, x, grad, hess, left_idx, depth + 1, max_depth);
    const int right = build_node(tree, x, grad, hess, right_idx, depth + 1, max_depth);
    auto& node = tree.nodes[std::size_t(node_id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return node_id;
}

}  // namespace

double RegressionTree::predict(const double* x) const {
    int node = 0;
    while (!nodes[std::size_t(node)].is_leaf()) {
        const auto& n = nodes[std::size_t(node)];
        node = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[std::size_t(node)].value;
}

Mat TreeEnsemble::predict_scores(const Mat& x) const {
    Mat scores = Mat::Zero(x.rows(), num_classes);
    std::vector<double> rowbuf(std::size_t(x.cols()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) rowbuf[std::size_t(c)] = x(r, c);
        for (const auto& round : rounds) {
            for (int k = 0; k < num_classes; ++k) {
                scores(r, k) += learning_rate * round[std::size_t(k)].predict(rowbuf.data());
            }
        }
    }
    return scores;
}

Mat TreeEnsemble::predict_proba(const Mat& x) const {
    if (num_classes == 1) return Mat::Ones(x.rows(), 1);
    return softmax_rows(predict_scores(x));
}

std::vector<int> TreeEnsemble::predict(const Mat& x) const {
    const Mat p = predict_proba(x);
    std::vector<int> out(std::size_t(x.rows()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        Eigen::Index arg = 0;
        p.row(r).maxCoeff(&arg);
        out[std::size_t(r)] = int(arg);
    }
    return out;
}

TreeEnsemble fit_tree_ensemble(const Mat& features, const std::vector<int>& labels,
                               const GbtOptions& opts) {
    const int n = int(features.rows());
    if (n < 1 || labels.size() != std::size_t(n)) {
        throw std::invalid_argument("fit_tree_ensemble: need one label per row");
    }
    int num_classes = opts.num_classes;
    const int max_label = *std::max_element(labels.begin(), labels.end());
    const int min_label = *std::min_element(labels.begin(), labels.end());
    if (min_label < 0) throw std::invalid_argument("fit_tree_ensemble: negative label");
    if (num_classes == 0) num_classes = max_label + 1;
    if (max_label >= num_classes) throw std::invalid_argument("fit_tree_ensemble: label outside [0, num_classes)");

    TreeEnsemble ens;
    ens.num_classes = num_classes;
    ens.num_features = int(features.cols());
    ens.max_depth = opts.max_depth;
    ens.n_rounds = opts.n_rounds;
    ens.learning_rate = opts.learning_rate;
    if (num_classes == 1) return ens;  // constant predictor: probability 1

    Mat scores = Mat::Zero(n, num_classes);
    std::vector<double> grad(static_cast<std::size_t>(n)), hess(static_cast<std::size_t>(n));

    for (int round = 0; round < opts.n_rounds; ++round) {
        const Mat proba = softmax_rows(scores);
        std::vector<RegressionTree> trees(static_cast<std::size_t>(num_classes));
        for (int k = 0; k < num_classes; ++k) {
            for (int i = 0; i < n; ++i) {
                const double p = proba(i, k);
                grad[std::size_t(i)] = p - (labels[std::size_t(i)] == k ? 1.0 : 0.0);
                hess[std::size_t(i)] = std::max(p * (1.0 - p), 1e-16);
            }
            std::vector<int> idx(static_cast<std::size_t>(n));
            std::iota(idx.begin(), idx.end(), 0);
            build_node(trees[std::size_t(k)], features, grad, hess, idx, 0, opts.max_depth);
        }
        std::vector<double> rowbuf(std::size_t(features.cols()));
        for (int i = 0; i < n; ++i) {
            for (Eigen::Index c = 0; c < features.cols(); ++c) rowbuf[std::size_t(c)] = features(i, c);
            for (int k = 0; k < num_classes; ++k) {
                scores(i, k) += opts.learning_rate * trees[std::size_t(k)].predict(rowbuf.data());
            }
        }
        ens.rounds.push_back(std::move(trees));
    }
    return ens;
}

double ensemble_log_loss(const TreeEnsemble& ens, const Mat& features, const std::vector<int>& labels) {
    const Mat p = ens.predict_proba(features);
    double loss = 0.0;
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        loss -= std::log(std::max(p(r, labels[std::size_t(r)]), 1e-300));
    }
    return loss / double(p.rows());
}

nlohmann::json TreeEnsemble::to_json() const {
    nlohmann::json j;
    j["num_classes"] = num_classes;
    j["num_features"] = num_features;
    j["max_depth"] = max_depth;
    j["n_rounds"] = n_rounds;
    j["learning_rate"] = learning_rate;
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& round : rounds) {
        nlohmann::json jt = nlohmann::json::array();
        for (const auto& tree : round) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : tree.nodes) {
                nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
            }
            jt.push_back(nodes);
        }
        jr.push_back(jt);
    }
    j["rounds"] = jr;
    return j;
}

TreeEnsemble TreeEnsemble::from_json(const nlohmann::json& j) {
    TreeEnsemble ens;
    ens.num_classes = j.at("num_classes").get<int>();
    ens.num_features = j.at("num_features").get<int>();
    ens.max_depth = j.at("max_depth").get<int>();
    ens.n_rounds = j.at("n_rounds").get<int>();
    ens.learning_rate = j.at("learning_rate").get<double>();
    for (const auto& jt : j.at("rounds")) {
        std::vector<RegressionTree> round;
        for (const auto& nodes : jt) {
            RegressionTree tree;
            for (const auto& n : nodes) {
                tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                      n.at(3).get<int>(), n.at(4).get<double>()});
            }
            round.push_back(std::move(tree));
        }
        ens.rounds.push_back(std::move(round));
    }
    return ens;
}

}  // namespace cbx
