#pragma once

#include <optional>

#include "cbx/batch.hpp"
#include "cbx/train.hpp"

namespace cbx {

enum class CbmRegime { independent, sequential, joint };

std::string regime_name(CbmRegime r);
CbmRegime parse_regime(const std::string& s);

// Multi-task concept bottleneck model: a shared trunk with one softmax head
// per concept (head i as wide as concept i's cardinality), and a label
// predictor that consumes the concatenated head outputs.
struct CBModel {
    ConceptSchema schema;
    std::string task_name;
    int num_classes = 0;
    CbmRegime regime = CbmRegime::joint;
    double lambda = 1.0;

    NetworkSpec trunk_spec;
    Sequential trunk;                 // image -> shared feature
    std::vector<Sequential> heads;    // feature -> concept logits, one per concept
    std::vector<int> flp_widths;
    Sequential flp;                   // concatenated head probabilities -> task logits

    int concat_dim() const;

    // Per-concept probability rows for a batch (each row sums to 1).
    std::vector<Mat> predict_concept_probs(const Mat& x);
    std::vector<ConceptVector> predict_concepts(const Mat& x);
    // Label distribution computed from the concatenated head outputs.
    Mat predict_label_probs(const Mat& x);
    std::vector<int> predict_labels(const Mat& x);
    // Label distribution with the bottleneck bypassed: ground-truth concepts
    // fed to the label predictor as one-hots.
    Mat predict_label_probs_from_concepts(const std::vector<ConceptVector>& concepts);
};

struct CbmTrainOptions {
    CbmRegime regime = CbmRegime::joint;
    double lambda = 1.0;   // joint only; weight of the concept loss
    int feature_dim = 128;
    std::vector<int> flp_hidden = {64};
    TrainConfig train;
    // Second-stage budget for independent/sequential label predictors;
    // defaults to the main step budget when 0.
    int flp_steps = 0;
    // When set, the returned series records per-concept/task accuracy on this
    // split at every eval_every checkpoint.
    const Dataset* eval_data = nullptr;
    const std::vector<int>* eval_labels = nullptr;
};

// Training data must carry full concept annotations (procedural datasets
// always do). Labels come from the task spec.
std::pair<CBModel, MetricSeries> train_cbm(const Dataset& data, const TaskSpec& task,
                                           const CbmTrainOptions& opts);

// One optimizer step of the joint objective L_y + lambda * L_c on the given
// batch; exposed so the lambda = 0 behaviour is directly testable.
double cbm_joint_batch_loss(CBModel& m, const Mat& x, const std::vector<ConceptVector>& concepts,
                            const std::vector<int>& labels, double lambda, bool accumulate_grads);

}  // namespace cbx
