#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cbx/rng.hpp"

namespace cbx {

// Batches are row-major: one sample per row, features flattened as (c, y, x).
// Row-major storage keeps each sample contiguous for the im2col paths.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct ParamRef {
    std::string name;
    double* value = nullptr;
    double* grad = nullptr;
    std::ptrdiff_t size = 0;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string kind() const = 0;
    virtual int in_dim() const = 0;
    virtual int out_dim() const = 0;
    // forward caches whatever backward needs; backward accumulates parameter
    // gradients and returns the gradient w.r.t. the input.
    virtual Mat forward(const Mat& x) = 0;
    virtual Mat backward(const Mat& grad_out) = 0;
    virtual void collect_params(std::vector<ParamRef>&) {}
    virtual std::unique_ptr<Layer> clone() const = 0;
};

enum class Activation { relu, tanh_act, sigmoid, identity };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& s);

class Dense final : public Layer {
public:
    Dense(int in, int out, Rng& rng);
    std::string kind() const override { return "dense"; }
    int in_dim() const override { return int(weight.cols()); }
    int out_dim() const override { return int(weight.rows()); }
    Mat forward(const Mat& x) override;
    Mat backward(const Mat& grad_out) override;
    void collect_params(std::vector<ParamRef>& out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

    Mat weight;  // out x in
    Vec bias;
    Mat grad_weight;
    Vec grad_bias;

private:
    Mat cached_input_;
};

struct ConvGeom {
    int in_c = 1, in_h = 0, in_w = 0;
    int kernel = 4, stride = 2, pad = 1;
    int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
    int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
};

class Conv2D final : public Layer {
public:
    Conv2D(ConvGeom geom, int out_c, Rng& rng);
    std::string kind() const override { return "conv2d"; }
    int in_dim() const override { return geom_.in_c * geom_.in_h * geom_.in_w; }
    int out_dim() const override { return out_c_ * geom_.out_h() * geom_.out_w(); }
    Mat forward(const Mat& x) override;
    Mat backward(const Mat& grad_out) override;
    void collect_params(std::vector<ParamRef>& out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2D>(*this); }

    Mat weight;  // out_c x (in_c * k * k)
    Vec bias;    // out_c
    Mat grad_weight;
    Vec grad_bias;

private:
    ConvGeom geom_;
    int out_c_;
    Mat cached_input_;
};

// Stride-2 transposed convolution; with kernel 4 / pad 1 it exactly doubles
// even spatial sizes. Implemented as the adjoint of the matching Conv2D.
class ConvTranspose2D final : public Layer {
public:
    // in_c feature maps at in_h x in_w, producing out_c maps at the upsampled size.
    ConvTranspose2D(int in_c, int in_h, int in_w, int out_c, int kernel, int stride, int pad, Rng& rng);
    std::string kind() const override { return "conv_transpose2d"; }
    int in_dim() const override { return in_c_ * in_h_ * in_w_; }
    int out_dim() const override { return adj_.in_c * adj_.in_h * adj_.in_w; }
    int out_h() const { return adj_.in_h; }
    int out_w() const { return adj_.in_w; }
    Mat forward(const Mat& x) override;
    Mat backward(const Mat& grad_out) override;
    void collect_params(std::vector<ParamRef>& out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ConvTranspose2D>(*this); }

    Mat weight;  // in_c x (out_c * k * k)
    Vec bias;    // out_c
    Mat grad_weight;
    Vec grad_bias;

private:
    int in_c_, in_h_, in_w_;
    ConvGeom adj_;  // geometry of the adjoint convolution (output -> input)
    Mat cached_input_;
};

class ActivationLayer final : public Layer {
public:
    ActivationLayer(Activation act, int dim) : act_(act), dim_(dim) {}
    std::string kind() const override { return activation_name(act_); }
    int in_dim() const override { return dim_; }
    int out_dim() const override { return dim_; }
    Mat forward(const Mat& x) override;
    Mat backward(const Mat& grad_out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ActivationLayer>(*this); }

private:
    Activation act_;
    int dim_;
    Mat cached_;  // input for relu, output for tanh/sigmoid
};

class Sequential {
public:
    Sequential() = default;
    Sequential(const Sequential& o);
    Sequential& operator=(const Sequential& o);
    Sequential(Sequential&&) = default;
    Sequential& operator=(Sequential&&) = default;

    void add(std::unique_ptr<Layer> layer);
    Mat forward(const Mat& x);
    Mat backward(const Mat& grad_out);
    // Forward pass that also records per-layer outputs (for feature taps).
    Mat forward_recording(const Mat& x, std::vector<Mat>& outputs);

    std::vector<ParamRef> params();
    void zero_grad();
    std::size_t param_count();
    int num_layers() const { return int(layers_.size()); }
    const Layer& layer(int i) const { return *layers_[i]; }
    int in_dim() const { return layers_.empty() ? 0 : layers_.front()->in_dim(); }
    int out_dim() const { return layers_.empty() ? 0 : layers_.back()->out_dim(); }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

enum class NetKind { conv_encoder, deconv_decoder, mlp, classifier_head };

// Shape description for the standard networks. The paper-side experiments
// never pin architectures, so these defaults are the artifact's own.
struct NetworkSpec {
    NetKind kind = NetKind::mlp;
    std::vector<int> widths;    // mlp: full width chain; encoder/decoder: dense widths
    std::vector<int> channels;  // conv/deconv feature-map progression
    Activation activation = Activation::relu;
    int image_h = 64, image_w = 64, image_c = 1;  // encoder input / decoder output
    int out_dim = 10;                             // encoder feature width / head classes / decoder latent in widths

    static NetworkSpec conv_encoder_default(int resolution, int channels_in, int feature_dim);
    static NetworkSpec deconv_decoder_default(int resolution, int channels_out, int latent_dim);
};

// Deterministic given the seed; weights Glorot-uniform, biases zero.
Sequential build_network(const NetworkSpec& spec, std::uint64_t seed);

// ----- loss primitives -----

// Row-wise softmax.
Mat softmax_rows(const Mat& logits);
// Mean cross-entropy over the batch; writes d(loss)/d(logits) into grad.
double softmax_cross_entropy(const Mat& logits, const std::vector<int>& labels, Mat* grad);
// Mean squared error over the batch (sum over features, mean over rows).
double mse_loss(const Mat& pred, const Mat& target, Mat* grad);
// Backprop through row-wise softmax: given p = softmax(z) and dL/dp, returns dL/dz.
Mat softmax_backward(const Mat& probs, const Mat& grad_probs);

}  // namespace cbx
