#pragma once

#include "cbx/batch.hpp"
#include "cbx/gbt.hpp"
#include "cbx/train.hpp"

namespace cbx {

// Ordinary end-to-end task classifier; the pre-trained model whose hidden
// space post-hoc concept extraction taps.
struct TaskModel {
    ConceptSchema schema;
    std::string task_name;
    int num_classes = 0;
    NetworkSpec encoder_spec;
    Sequential net;        // conv encoder + classifier head in one stack
    int feature_layer = 0; // default tap: the activated penultimate dense layer

    Mat predict_probs(const Mat& x) { return softmax_rows(net.forward(x)); }
    std::vector<int> predict(const Mat& x);
    double accuracy(const Mat& x, const std::vector<int>& labels);
};

struct TaskModelOptions {
    int feature_dim = 128;
    TrainConfig train;
};

TaskModel train_task_model(const Dataset& data, const TaskSpec& task, const TaskModelOptions& opts);

// Activations of the model at the given layer (index into the stack);
// layer_id < 0 selects the default tap.
Mat extract_features(TaskModel& model, int layer_id, const Mat& x);

// Post-hoc extraction: one tree ensemble per concept fit on tapped features
// of a small labelled set, plus a tree-ensemble label predictor over the
// hard predicted concepts.
struct CMEModel {
    ConceptSchema schema;
    std::string task_name;
    int layer_id = 0;
    std::size_t labelled_count = 0;
    std::vector<TreeEnsemble> concept_models;
    std::vector<bool> constant_concept;  // true where the labelled set held one value
    TreeEnsemble label_model;

    std::vector<ConceptVector> predict_concepts(TaskModel& source, const Mat& x);
    std::vector<int> predict_labels(TaskModel& source, const Mat& x);
};

struct CmeTrainOptions {
    int layer_id = -1;  // -1 = model's default tap
    GbtOptions gbt;
};

// labelled provides the concept annotations; labels come from the task spec.
CMEModel train_cme(TaskModel& source, const Dataset& labelled, const TaskSpec& task,
                   const CmeTrainOptions& opts = {});

}  // namespace cbx
