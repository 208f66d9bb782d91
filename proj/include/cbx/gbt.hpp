#pragma once

#include <nlohmann/json_fwd.hpp>

#include <vector>

#include "cbx/nn.hpp"

namespace cbx {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;
    double predict(const double* x) const;
};

// Multiclass gradient boosting on the softmax cross-entropy objective:
// one depth-limited regression tree per class per round, Newton leaf values,
// shrinkage by learning_rate. Deterministic given its inputs.
struct TreeEnsemble {
    int num_classes = 0;
    int num_features = 0;
    int max_depth = 4;
    int n_rounds = 100;
    double learning_rate = 0.1;
    std::vector<std::vector<RegressionTree>> rounds;  // rounds[r][class]

    Mat predict_scores(const Mat& x) const;
    Mat predict_proba(const Mat& x) const;  // rows sum to 1
    std::vector<int> predict(const Mat& x) const;

    nlohmann::json to_json() const;
    static TreeEnsemble from_json(const nlohmann::json& j);
};

struct GbtOptions {
    int max_depth = 4;
    int n_rounds = 100;
    double learning_rate = 0.1;
    int num_classes = 0;  // 0 = infer as max(label) + 1
};

// labels must lie in [0, num_classes). A single observed class yields a valid
// constant predictor.
TreeEnsemble fit_tree_ensemble(const Mat& features, const std::vector<int>& labels,
                               const GbtOptions& opts = {});

// Mean softmax cross-entropy of the ensemble on (features, labels).
double ensemble_log_loss(const TreeEnsemble& ens, const Mat& features, const std::vector<int>& labels);

}  // namespace cbx
