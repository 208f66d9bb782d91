#include "cbx/train.hpp"

#include <cmath>

namespace cbx {

Optimizer::Optimizer(OptimizerKind kind, double lr, std::vector<ParamRef> params)
    : kind_(kind), lr_(lr), params_(std::move(params)) {
    if (kind_ == OptimizerKind::adaptive_moment) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const auto& p : params_) {
            m_.emplace_back(std::size_t(p.size), 0.0);
            v_.emplace_back(std::size_t(p.size), 0.0);
        }
    }
}

void Optimizer::step() {
    if (kind_ == OptimizerKind::sgd) {
        for (auto& p : params_) {
            for (std::ptrdiff_t i = 0; i < p.size; ++i) p.value[i] -= lr_ * p.grad[i];
        }
        return;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, double(t_));
    const double bc2 = 1.0 - std::pow(beta2, double(t_));
    for (std::size_t j = 0; j < params_.size(); ++j) {
        auto& p = params_[j];
        auto& m = m_[j];
        auto& v = v_[j];
        for (std::ptrdiff_t i = 0; i < p.size; ++i) {
            const double g = p.grad[i];
            m[std::size_t(i)] = beta1 * m[std::size_t(i)] + (1.0 - beta1) * g;
            v[std::size_t(i)] = beta2 * v[std::size_t(i)] + (1.0 - beta2) * g * g;
            const double mhat = m[std::size_t(i)] / bc1;
            const double vhat = v[std::size_t(i)] / bc2;
            p.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

namespace {

struct BatchIter {
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    Rng rng;

    BatchIter(std::size_t n, std::uint64_t seed) : rng(seed) {
        order.resize(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
    }

    // Next batch of up to `size` indices; reshuffles at epoch boundaries.
    std::vector<std::size_t> next(std::size_t size) {
        std::vector<std::size_t> idx;
        idx.reserve(size);
        while (idx.size() < size) {
            if (cursor == order.size()) {
                rng.shuffle(order);
                cursor = 0;
                if (!idx.empty()) break;  // keep batches within an epoch
            }
            idx.push_back(order[cursor++]);
        }
        return idx;
    }
};

template <typename LossFn>
MetricSeries train_loop(Sequential& net, const Mat& inputs,
                        const TrainConfig& cfg, const EvalHook& hook, LossFn&& loss_fn) {
    cfg.validate();
    const std::size_t n = std::size_t(inputs.rows());
    if (n == 0) throw std::invalid_argument("train_supervised: empty dataset");

    Optimizer opt(cfg.optimizer, cfg.learning_rate, net.params());
    BatchIter batches(n, cfg.seed);

    const int steps_per_epoch = int((n + std::size_t(cfg.batch_size) - 1) / std::size_t(cfg.batch_size));
    int total_steps = cfg.epochs * steps_per_epoch;
    if (cfg.max_steps > 0 && cfg.max_steps < total_steps) total_steps = cfg.max_steps;

    MetricSeries series;
    double smoothed = 0.0;
    bool have_smoothed = false;

    for (int step = 1; step <= total_steps; ++step) {
        const auto idx = batches.next(std::size_t(cfg.batch_size));
        Mat x(idx.size(), inputs.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) x.row(Eigen::Index(r)) = inputs.row(Eigen::Index(idx[r]));

        net.zero_grad();
        Mat out = net.forward(x);
        Mat grad;
        const double loss = loss_fn(out, idx, &grad);
        if (!std::isfinite(loss)) {
            throw TrainingError("training aborted: non-finite loss at step " + std::to_string(step));
        }
        net.backward(grad);
        opt.step();

        smoothed = have_smoothed ? 0.98 * smoothed + 0.02 * loss : loss;
        have_smoothed = true;

        if (step % cfg.eval_every == 0 || step == total_steps) {
            MetricRecord rec;
            rec.index = double(step);
            rec.loss = smoothed;
            series.add(rec);
            if (hook) hook(step, smoothed);
        }
    }
    return series;
}

}  // namespace

MetricSeries train_supervised(Sequential& net, const Mat& inputs, const std::vector<int>& labels,
                              LossKind loss, const TrainConfig& cfg, const EvalHook& hook) {
    if (loss != LossKind::sparse_categorical_ce) {
        throw std::invalid_argument("train_supervised: integer labels require sparse_categorical_ce");
    }
    if (labels.size() != std::size_t(inputs.rows())) {
        throw std::invalid_argument("train_supervised: label count mismatch");
    }
    for (int y : labels) {
        if (y < 0 || y >= net.out_dim()) throw std::invalid_argument("train_supervised: label outside head width");
    }
    return train_loop(net, inputs, cfg, hook,
                      [&](const Mat& out, const std::vector<std::size_t>& idx, Mat* grad) {
                          std::vector<int> batch_labels(idx.size());
                          for (std::size_t i = 0; i < idx.size(); ++i) batch_labels[i] = labels[idx[i]];
                          return softmax_cross_entropy(out, batch_labels, grad);
                      });
}

MetricSeries train_supervised(Sequential& net, const Mat& inputs, const Mat& targets,
                              LossKind loss, const TrainConfig& cfg, const EvalHook& hook) {
    if (loss != LossKind::mse) {
        throw std::invalid_argument("train_supervised: dense targets require mse");
    }
    if (targets.rows() != inputs.rows()) throw std::invalid_argument("train_supervised: target count mismatch");
    return train_loop(net, inputs, cfg, hook,
                      [&](const Mat& out, const std::vector<std::size_t>& idx, Mat* grad) {
                          Mat t(idx.size(), targets.cols());
                          for (std::size_t i = 0; i < idx.size(); ++i) t.row(Eigen::Index(i)) = targets.row(Eigen::Index(idx[i]));
                          return mse_loss(out, t, grad);
                      });
}

}  // namespace cbx
