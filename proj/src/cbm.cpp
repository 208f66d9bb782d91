#include "cbx/cbm.hpp"

#include <cmath>
#include <stdexcept>

namespace cbx {

std::string regime_name(CbmRegime r) {
    switch (r) {
        case CbmRegime::independent: return "independent";
        case CbmRegime::sequential: return "sequential";
        case CbmRegime::joint: return "joint";
    }
    throw std::logic_error("unreachable regime");
}

CbmRegime parse_regime(const std::string& s) {
    if (s == "independent") return CbmRegime::independent;
    if (s == "sequential") return CbmRegime::sequential;
    if (s == "joint") return CbmRegime::joint;
    throw std::invalid_argument("unknown CBM regime '" + s + "'");
}

int CBModel::concat_dim() const {
    int total = 0;
    for (int i = 0; i < schema.num_concepts(); ++i) total += schema.cardinality(i);
    return total;
}

std::vector<Mat> CBModel::predict_concept_probs(const Mat& x) {
    const Mat f = trunk.forward(x);
    std::vector<Mat> probs;
    probs.reserve(heads.size());
    for (auto& head : heads) probs.push_back(softmax_rows(head.forward(f)));
    return probs;
}

std::vector<ConceptVector> CBModel::predict_concepts(const Mat& x) {
    const auto probs = predict_concept_probs(x);
    std::vector<ConceptVector> out(std::size_t(x.rows()));
    for (std::size_t s = 0; s < out.size(); ++s) out[s].indices.resize(probs.size());
    for (std::size_t c = 0; c < probs.size(); ++c) {
        for (Eigen::Index r = 0; r < probs[c].rows(); ++r) {
            Eigen::Index arg = 0;
            probs[c].row(r).maxCoeff(&arg);
            out[std::size_t(r)].indices[c] = int(arg);
        }
    }
    return out;
}

Mat CBModel::predict_label_probs(const Mat& x) {
    const auto probs = predict_concept_probs(x);
    Mat concat(x.rows(), concat_dim());
    int offset = 0;
    for (const auto& p : probs) {
        concat.block(0, offset, x.rows(), p.cols()) = p;
        offset += int(p.cols());
    }
    return softmax_rows(flp.forward(concat));
}

std::vector<int> CBModel::predict_labels(const Mat& x) {
    const Mat p = predict_label_probs(x);
    std::vector<int> out(std::size_t(p.rows()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        Eigen::Index arg = 0;
        p.row(r).maxCoeff(&arg);
        out[std::size_t(r)] = int(arg);
    }
    return out;
}

Mat CBModel::predict_label_probs_from_concepts(const std::vector<ConceptVector>& concepts) {
    const Mat onehot = concepts_to_onehot(concepts, schema);
    return softmax_rows(flp.forward(onehot));
}

double cbm_joint_batch_loss(CBModel& m, const Mat& x, const std::vector<ConceptVector>& concepts,
                            const std::vector<int>& labels, double lambda, bool accumulate_grads) {
    const Eigen::Index n = x.rows();
    const int num_concepts = m.schema.num_concepts();

    const Mat f = m.trunk.forward(x);
    std::vector<Mat> logits(static_cast<std::size_t>(num_concepts));
    std::vector<Mat> probs(static_cast<std::size_t>(num_concepts));
    Mat concat(n, m.concat_dim());
    int offset = 0;
    for (int c = 0; c < num_concepts; ++c) {
        logits[std::size_t(c)] = m.heads[std::size_t(c)].forward(f);
        probs[std::size_t(c)] = softmax_rows(logits[std::size_t(c)]);
        concat.block(0, offset, n, m.schema.cardinality(c)) = probs[std::size_t(c)];
        offset += m.schema.cardinality(c);
    }
    const Mat ylogits = m.flp.forward(concat);

    Mat gy;
    const double task_loss = softmax_cross_entropy(ylogits, labels, accumulate_grads ? &gy : nullptr);

    double concept_loss = 0.0;
    std::vector<int> batch_concept(static_cast<std::size_t>(n));
    std::vector<Mat> head_grads(static_cast<std::size_t>(num_concepts));
    for (int c = 0; c < num_concepts; ++c) {
        for (Eigen::Index r = 0; r < n; ++r) batch_concept[std::size_t(r)] = concepts[std::size_t(r)].indices[c];
        Mat gc;
        concept_loss += softmax_cross_entropy(logits[std::size_t(c)], batch_concept,
                                              accumulate_grads && lambda > 0.0 ? &gc : nullptr);
        if (accumulate_grads && lambda > 0.0) head_grads[std::size_t(c)] = lambda * gc;
    }

    if (accumulate_grads) {
        const Mat gconcat = m.flp.backward(gy);
        Mat gf = Mat::Zero(n, f.cols());
        offset = 0;
        for (int c = 0; c < num_concepts; ++c) {
            const int card = m.schema.cardinality(c);
            Mat gz = softmax_backward(probs[std::size_t(c)], gconcat.block(0, offset, n, card));
            if (lambda > 0.0) gz += head_grads[std::size_t(c)];
            gf += m.heads[std::size_t(c)].backward(gz);
            offset += card;
        }
        m.trunk.backward(gf);
    }
    return task_loss + lambda * concept_loss;
}

namespace {

std::vector<ParamRef> all_params(CBModel& m, bool include_flp) {
    std::vector<ParamRef> ps = m.trunk.params();
    for (auto& h : m.heads) {
        for (auto& p : h.params()) ps.push_back(p);
    }
    if (include_flp) {
        for (auto& p : m.flp.params()) ps.push_back(p);
    }
    return ps;
}

void zero_all(std::vector<ParamRef>& ps) {
    for (auto& p : ps) std::fill(p.grad, p.grad + p.size, 0.0);
}

CBModel make_cbm(const ConceptSchema& schema, const TaskSpec& task, int resolution,
                 const CbmTrainOptions& opts) {
    CBModel m;
    m.schema = schema;
    m.task_name = task.name;
    m.num_classes = task.num_classes;
    m.regime = opts.regime;
    m.lambda = opts.lambda;
    m.trunk_spec = NetworkSpec::conv_encoder_default(resolution, schema.channels(), opts.feature_dim);
    m.trunk = build_network(m.trunk_spec, opts.train.seed);
    for (int c = 0; c < schema.num_concepts(); ++c) {
        NetworkSpec hs;
        hs.kind = NetKind::classifier_head;
        hs.widths = {opts.feature_dim};
        hs.out_dim = schema.cardinality(c);
        m.heads.push_back(build_network(hs, opts.train.seed + 101 * std::uint64_t(c + 1)));
    }
    NetworkSpec fs;
    fs.kind = NetKind::mlp;
    fs.widths.push_back(m.concat_dim());
    for (int w : opts.flp_hidden) fs.widths.push_back(w);
    fs.widths.push_back(task.num_classes);
    m.flp_widths = fs.widths;
    m.flp = build_network(fs, opts.train.seed + 7919);
    return m;
}

struct EvalContext {
    Mat x;
    std::vector<ConceptVector> concepts;
    std::vector<int> labels;
    std::vector<std::string> concept_names;
};

MetricRecord evaluate_cbm(CBModel& m, EvalContext& ctx, bool with_task) {
    MetricRecord rec;
    const auto pred = m.predict_concepts(ctx.x);
    const auto acc = concept_accuracy(pred, ctx.concepts);
    rec.per_concept = acc.per_concept;
    rec.average = acc.average;
    if (with_task) {
        const auto y = m.predict_labels(ctx.x);
        double correct = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] == ctx.labels[i]) correct += 1.0;
        }
        rec.task_accuracy = correct / double(y.size());
    }
    return rec;
}

}  // namespace

std::pair<CBModel, MetricSeries> train_cbm(const Dataset& data, const TaskSpec& task,
                                           const CbmTrainOptions& opts) {
    opts.train.validate();
    if (opts.lambda < 0.0) throw std::invalid_argument("train_cbm: lambda must be >= 0");
    if (data.samples.empty()) throw std::invalid_argument("train_cbm: empty dataset");
    for (const auto& s : data.samples) {
        if (!data.schema.valid_vector(s.concepts)) {
            throw std::invalid_argument("train_cbm: sample missing or invalid concept annotations");
        }
    }

    CBModel m = make_cbm(data.schema, task, data.resolution, opts);
    const Mat x = dataset_to_matrix(data);
    const auto concepts = dataset_concepts(data);
    const auto labels = task_labels(data, task);

    std::optional<EvalContext> eval;
    if (opts.eval_data) {
        EvalContext ctx;
        ctx.x = dataset_to_matrix(*opts.eval_data);
        ctx.concepts = dataset_concepts(*opts.eval_data);
        ctx.labels = task_labels(*opts.eval_data, task);
        eval = std::move(ctx);
    }

    MetricSeries series;
    series.method = "cbm_" + regime_name(opts.regime);
    series.seed = opts.train.seed;
    for (const auto& c : data.schema.concepts) series.concept_names.push_back(c.name);

    const std::size_t n = data.samples.size();
    const int steps_per_epoch = int((n + std::size_t(opts.train.batch_size) - 1) / std::size_t(opts.train.batch_size));
    int total_steps = opts.train.epochs * steps_per_epoch;
    if (opts.train.max_steps > 0 && opts.train.max_steps < total_steps) total_steps = opts.train.max_steps;

    Rng batch_rng(opts.train.seed + 17);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::size_t cursor = n;  // force shuffle at step 1

    const bool joint = opts.regime == CbmRegime::joint;
    auto params = all_params(m, joint);
    Optimizer opt(opts.train.optimizer, opts.train.learning_rate, params);

    std::vector<ConceptVector> batch_concepts(std::size_t(opts.train.batch_size));
    std::vector<int> batch_labels(std::size_t(opts.train.batch_size));

    for (int step = 1; step <= total_steps; ++step) {
        Mat bx(opts.train.batch_size, x.cols());
        for (int r = 0; r < opts.train.batch_size; ++r) {
            if (cursor == n) {
                batch_rng.shuffle(order);
                cursor = 0;
            }
            const std::size_t i = order[cursor++];
            bx.row(r) = x.row(Eigen::Index(i));
            batch_concepts[std::size_t(r)] = concepts[i];
            batch_labels[std::size_t(r)] = labels[i];
        }

        zero_all(params);
        double loss;
        if (joint) {
            loss = cbm_joint_batch_loss(m, bx, batch_concepts, batch_labels, opts.lambda, true);
        } else {
            // Stage 1 of independent/sequential: concept loss only.
            const Mat f = m.trunk.forward(bx);
            Mat gf = Mat::Zero(bx.rows(), f.cols());
            loss = 0.0;
            std::vector<int> ci(std::size_t(opts.train.batch_size));
            for (int c = 0; c < data.schema.num_concepts(); ++c) {
                for (int r = 0; r < opts.train.batch_size; ++r) ci[std::size_t(r)] = batch_concepts[std::size_t(r)].indices[c];
                Mat gc;
                loss += softmax_cross_entropy(m.heads[std::size_t(c)].forward(f), ci, &gc);
                gf += m.heads[std::size_t(c)].backward(gc);
            }
            m.trunk.backward(gf);
        }
        if (!std::isfinite(loss)) throw TrainingError("train_cbm: non-finite loss at step " + std::to_string(step));
        opt.step();

        if (step % opts.train.eval_every == 0 || step == total_steps) {
            MetricRecord rec;
            if (eval) rec = evaluate_cbm(m, *eval, joint);
            rec.index = double(step);
            rec.loss = loss;
            series.add(rec);
        }
    }

    if (!joint) {
        // Stage 2: label predictor. Independent consumes ground-truth one-hot
        // concepts; sequential consumes the trained heads' outputs.
        Mat flp_in;
        if (opts.regime == CbmRegime::independent) {
            flp_in = concepts_to_onehot(concepts, data.schema);
        } else {
            flp_in.resize(Eigen::Index(n), m.concat_dim());
            const std::size_t chunk = 512;
            for (std::size_t start = 0; start < n; start += chunk) {
                const std::size_t len = std::min(chunk, n - start);
                const auto probs = m.predict_concept_probs(x.middleRows(Eigen::Index(start), Eigen::Index(len)));
                int offset = 0;
                for (const auto& p : probs) {
                    flp_in.block(Eigen::Index(start), offset, Eigen::Index(len), p.cols()) = p;
                    offset += int(p.cols());
                }
            }
        }
        TrainConfig flp_cfg = opts.train;
        flp_cfg.seed = opts.train.seed + 29;
        flp_cfg.max_steps = opts.flp_steps > 0 ? opts.flp_steps : total_steps;
        flp_cfg.epochs = std::max(1, flp_cfg.max_steps);
        train_supervised(m.flp, flp_in, labels, LossKind::sparse_categorical_ce, flp_cfg);

        if (eval) {
            MetricRecord rec = evaluate_cbm(m, *eval, true);
            rec.index = double(total_steps + flp_cfg.max_steps);
            series.add(rec);
        }
    }
    return {std::move(m), std::move(series)};
}

}  // namespace cbx
