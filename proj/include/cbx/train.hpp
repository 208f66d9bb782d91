#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "cbx/metrics.hpp"
#include "cbx/nn.hpp"

namespace cbx {

enum class OptimizerKind { sgd, adaptive_moment };
enum class LossKind { sparse_categorical_ce, mse };

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 64;
    int epochs = 10;
    OptimizerKind optimizer = OptimizerKind::adaptive_moment;
    std::uint64_t seed = 0;   // fixes initialization (via callers) and batch order
    int eval_every = 100;     // steps between callback invocations
    int max_steps = 0;        // 0 = no cap beyond epochs

    void validate() const {
        if (learning_rate < 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be >= 0");
        if (batch_size <= 0 || epochs <= 0 || eval_every <= 0) {
            throw std::invalid_argument("TrainConfig: batch_size, epochs, eval_every must be positive");
        }
    }
};

// Parameter-wise optimizer over a fixed ParamRef list.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr, std::vector<ParamRef> params);
    void step();
    double learning_rate() const { return lr_; }

private:
    OptimizerKind kind_;
    double lr_;
    std::vector<ParamRef> params_;
    // Adaptive-moment slots.
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Called every eval_every steps and once at the final step.
using EvalHook = std::function<void(int step, double loss)>;

// Minibatch training of `net` on (inputs, integer labels) or (inputs, dense
// targets). Aborts with TrainingError when the loss goes non-finite. The
// returned series records the smoothed training loss at every hook step.
MetricSeries train_supervised(Sequential& net, const Mat& inputs, const std::vector<int>& labels,
                              LossKind loss, const TrainConfig& cfg, const EvalHook& hook = nullptr);
MetricSeries train_supervised(Sequential& net, const Mat& inputs, const Mat& targets,
                              LossKind loss, const TrainConfig& cfg, const EvalHook& hook = nullptr);

}  // namespace cbx
