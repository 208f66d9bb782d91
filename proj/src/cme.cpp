#include "cbx/cme.hpp"

#include <iostream>
#include <stdexcept>

namespace cbx {

std::vector<int> TaskModel::predict(const Mat& x) {
    const Mat p = predict_probs(x);
    std::vector<int> out(std::size_t(p.rows()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        Eigen::Index arg = 0;
        p.row(r).maxCoeff(&arg);
        out[std::size_t(r)] = int(arg);
    }
    return out;
}

double TaskModel::accuracy(const Mat& x, const std::vector<int>& labels) {
    const auto pred = predict(x);
    double correct = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == labels[i]) correct += 1.0;
    }
    return pred.empty() ? 0.0 : correct / double(pred.size());
}

TaskModel train_task_model(const Dataset& data, const TaskSpec& task, const TaskModelOptions& opts) {
    TaskModel m;
    m.schema = data.schema;
    m.task_name = task.name;
    m.num_classes = task.num_classes;
    m.encoder_spec = NetworkSpec::conv_encoder_default(data.resolution, data.schema.channels(), opts.feature_dim);
    m.net = build_network(m.encoder_spec, opts.train.seed);
    // The encoder ends with Dense -> activation; that activation is the tap.
    m.feature_layer = m.net.num_layers() - 1;
    {
        Rng rng(opts.train.seed + 7919);
        m.net.add(std::make_unique<Dense>(opts.feature_dim, task.num_classes, rng));
    }

    const Mat x = dataset_to_matrix(data);
    const auto labels = task_labels(data, task);
    train_supervised(m.net, x, labels, LossKind::sparse_categorical_ce, opts.train);
    return m;
}

Mat extract_features(TaskModel& model, int layer_id, const Mat& x) {
    if (layer_id < 0) layer_id = model.feature_layer;
    if (layer_id >= model.net.num_layers()) throw std::invalid_argument("extract_features: invalid layer id");
    std::vector<Mat> outputs;
    model.net.forward_recording(x, outputs);
    return outputs[std::size_t(layer_id)];
}

std::vector<ConceptVector> CMEModel::predict_concepts(TaskModel& source, const Mat& x) {
    const Mat h = extract_features(source, layer_id, x);
    std::vector<ConceptVector> out(std::size_t(x.rows()));
    for (auto& v : out) v.indices.resize(concept_models.size());
    for (std::size_t c = 0; c < concept_models.size(); ++c) {
        const auto pred = concept_models[c].predict(h);
        for (std::size_t r = 0; r < pred.size(); ++r) out[r].indices[c] = pred[r];
    }
    return out;
}

std::vector<int> CMEModel::predict_labels(TaskModel& source, const Mat& x) {
    const auto concepts = predict_concepts(source, x);
    Mat feats(Eigen::Index(concepts.size()), Eigen::Index(schema.num_concepts()));
    for (std::size_t r = 0; r < concepts.size(); ++r) {
        for (int c = 0; c < schema.num_concepts(); ++c) feats(Eigen::Index(r), c) = double(concepts[r].indices[c]);
    }
    return label_model.predict(feats);
}

CMEModel train_cme(TaskModel& source, const Dataset& labelled, const TaskSpec& task,
                   const CmeTrainOptions& opts) {
    if (labelled.samples.empty()) throw std::invalid_argument("train_cme: labelled set is empty");

    CMEModel m;
    m.schema = labelled.schema;
    m.task_name = task.name;
    m.layer_id = opts.layer_id < 0 ? source.feature_layer : opts.layer_id;
    m.labelled_count = labelled.samples.size();

    const Mat x = dataset_to_matrix(labelled);
    const Mat h = extract_features(source, m.layer_id, x);
    const auto concepts = dataset_concepts(labelled);
    const auto labels = task_labels(labelled, task);

    m.constant_concept.assign(std::size_t(m.schema.num_concepts()), false);
    for (int c = 0; c < m.schema.num_concepts(); ++c) {
        std::vector<int> yc(concepts.size());
        for (std::size_t r = 0; r < concepts.size(); ++r) yc[r] = concepts[r].indices[c];
        GbtOptions g = opts.gbt;
        g.num_classes = m.schema.cardinality(c);
        bool constant = true;
        for (int v : yc) {
            if (v != yc[0]) {
                constant = false;
                break;
            }
        }
        if (constant && m.schema.cardinality(c) > 1) {
            m.constant_concept[std::size_t(c)] = true;
            std::cerr << "train_cme: concept '" << m.schema.concepts[std::size_t(c)].name
                      << "' has a single observed value in the labelled set; fitting a constant predictor\n";
        }
        m.concept_models.push_back(fit_tree_ensemble(h, yc, g));
    }

    // Label stage on the hard predicted concepts of the labelled set.
    const auto predicted = m.predict_concepts(source, x);
    Mat feats(Eigen::Index(predicted.size()), Eigen::Index(m.schema.num_concepts()));
    for (std::size_t r = 0; r < predicted.size(); ++r) {
        for (int c = 0; c < m.schema.num_concepts(); ++c) feats(Eigen::Index(r), c) = double(predicted[r].indices[c]);
    }
    GbtOptions g = opts.gbt;
    g.num_classes = task.num_classes;
    m.label_model = fit_tree_ensemble(feats, labels, g);
    return m;
}

}  // namespace cbx
