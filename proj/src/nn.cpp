#include "cbx/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace cbx {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh_act: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::identity: return "identity";
    }
    throw std::logic_error("unreachable activation");
}

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh_act;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

namespace {

void glorot_init(Mat& w, int fan_in, int fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / double(fan_in + fan_out));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-a, a);
}

// im2col: (C*k*k) x (outH*outW) patch matrix with zero padding.
void im2col(const double* src, const ConvGeom& g, Mat& cols) {
    const int oh = g.out_h(), ow = g.out_w();
    cols.resize(g.in_c * g.kernel * g.kernel, oh * ow);
    for (int c = 0; c < g.in_c; ++c) {
        for (int ky = 0; ky < g.kernel; ++ky) {
            for (int kx = 0; kx < g.kernel; ++kx) {
                const int row = (c * g.kernel + ky) * g.kernel + kx;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * g.stride + ky - g.pad;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * g.stride + kx - g.pad;
                        double v = 0.0;
                        if (iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w) {
                            v = src[(c * g.in_h + iy) * g.in_w + ix];
                        }
                        cols(row, oy * ow + ox) = v;
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add patch columns back into the image.
void col2im(const Mat& cols, const ConvGeom& g, double* dst) {
    const int oh = g.out_h(), ow = g.out_w();
    std::fill(dst, dst + std::size_t(g.in_c) * g.in_h * g.in_w, 0.0);
    for (int c = 0; c < g.in_c; ++c) {
        for (int ky = 0; ky < g.kernel; ++ky) {
            for (int kx = 0; kx < g.kernel; ++kx) {
                const int row = (c * g.kernel + ky) * g.kernel + kx;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * g.stride + ky - g.pad;
                    if (iy < 0 || iy >= g.in_h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * g.stride + kx - g.pad;
                        if (ix < 0 || ix >= g.in_w) continue;
                        dst[(c * g.in_h + iy) * g.in_w + ix] += cols(row, oy * ow + ox);
                    }
                }
            }
        }
    }
}

}  // namespace

// ----- Dense -----

Dense::Dense(int in, int out, Rng& rng) {
    weight.resize(out, in);
    glorot_init(weight, in, out, rng);
    bias = Vec::Zero(out);
    grad_weight = Mat::Zero(out, in);
    grad_bias = Vec::Zero(out);
}

Mat Dense::forward(const Mat& x) {
    cached_input_ = x;
    Mat y = x * weight.transpose();
    y.rowwise() += bias.transpose();
    return y;
}

Mat Dense::backward(const Mat& grad_out) {
    grad_weight.noalias() += grad_out.transpose() * cached_input_;
    grad_bias.noalias() += grad_out.colwise().sum().transpose();
    return grad_out * weight;
}

void Dense::collect_params(std::vector<ParamRef>& out) {
    out.push_back({"dense.weight", weight.data(), grad_weight.data(), weight.size()});
    out.push_back({"dense.bias", bias.data(), grad_bias.data(), bias.size()});
}

// ----- Conv2D -----

Conv2D::Conv2D(ConvGeom geom, int out_c, Rng& rng) : geom_(geom), out_c_(out_c) {
    const int k2 = geom.kernel * geom.kernel;
    weight.resize(out_c, geom.in_c * k2);
    glorot_init(weight, geom.in_c * k2, out_c * k2, rng);
    bias = Vec::Zero(out_c);
    grad_weight = Mat::Zero(weight.rows(), weight.cols());
    grad_bias = Vec::Zero(out_c);
}

Mat Conv2D::forward(const Mat& x) {
    cached_input_ = x;
    const int n = int(x.rows());
    const int p = geom_.out_h() * geom_.out_w();
    Mat y(n, out_c_ * p);
    Mat cols;
    for (int s = 0; s < n; ++s) {
        im2col(x.row(s).data(), geom_, cols);
        Mat out = weight * cols;          // out_c x p
        out.colwise() += bias;
        // Flatten (c, y, x): channel-major rows concatenated.
        for (int c = 0; c < out_c_; ++c) {
            y.block(s, c * p, 1, p) = out.row(c);
        }
    }
    return y;
}

Mat Conv2D::backward(const Mat& grad_out) {
    const int n = int(grad_out.rows());
    const int p = geom_.out_h() * geom_.out_w();
    Mat grad_in(n, in_dim());
    Mat cols, g(out_c_, p);
    for (int s = 0; s < n; ++s) {
        for (int c = 0; c < out_c_; ++c) g.row(c) = grad_out.block(s, c * p, 1, p);
        im2col(cached_input_.row(s).data(), geom_, cols);
        grad_weight.noalias() += g * cols.transpose();
        grad_bias.noalias() += g.rowwise().sum();
        Mat gcols = weight.transpose() * g;  // (in_c*k*k) x p
        col2im(gcols, geom_, grad_in.row(s).data());
    }
    return grad_in;
}

void Conv2D::collect_params(std::vector<ParamRef>& out) {
    out.push_back({"conv.weight", weight.data(), grad_weight.data(), weight.size()});
    out.push_back({"conv.bias", bias.data(), grad_bias.data(), bias.size()});
}

// ----- ConvTranspose2D -----

ConvTranspose2D::ConvTranspose2D(int in_c, int in_h, int in_w, int out_c, int kernel, int stride,
                                 int pad, Rng& rng)
    : in_c_(in_c), in_h_(in_h), in_w_(in_w) {
    adj_.in_c = out_c;
    adj_.in_h = (in_h - 1) * stride - 2 * pad + kernel;
    adj_.in_w = (in_w - 1) * stride - 2 * pad + kernel;
    adj_.kernel = kernel;
    adj_.stride = stride;
    adj_.pad = pad;
    if (adj_.out_h() != in_h || adj_.out_w() != in_w) {
        throw std::invalid_argument("ConvTranspose2D: geometry not invertible for these sizes");
    }
    const int k2 = kernel * kernel;
    weight.resize(in_c, out_c * k2);
    glorot_init(weight, in_c * k2, out_c * k2, rng);
    bias = Vec::Zero(out_c);
    grad_weight = Mat::Zero(weight.rows(), weight.cols());
    grad_bias = Vec::Zero(out_c);
}

Mat ConvTranspose2D::forward(const Mat& x) {
    cached_input_ = x;
    const int n = int(x.rows());
    const int p_in = in_h_ * in_w_;
    const int out_c = adj_.in_c;
    const int p_out = adj_.in_h * adj_.in_w;
    Mat y(n, out_c * p_out);
    Mat x_mat(in_c_, p_in);
    for (int s = 0; s < n; ++s) {
        for (int c = 0; c < in_c_; ++c) x_mat.row(c) = x.block(s, c * p_in, 1, p_in);
        Mat gcols = weight.transpose() * x_mat;  // (out_c*k*k) x p_in
        col2im(gcols, adj_, y.row(s).data());
        for (int c = 0; c < out_c; ++c) {
            y.block(s, c * p_out, 1, p_out).array() += bias(c);
        }
    }
    return y;
}

Mat ConvTranspose2D::backward(const Mat& grad_out) {
    const int n = int(grad_out.rows());
    const int p_in = in_h_ * in_w_;
    const int out_c = adj_.in_c;
    const int p_out = adj_.in_h * adj_.in_w;
    Mat grad_in(n, in_dim());
    Mat cols, x_mat(in_c_, p_in);
    for (int s = 0; s < n; ++s) {
        im2col(grad_out.row(s).data(), adj_, cols);  // (out_c*k*k) x p_in
        for (int c = 0; c < in_c_; ++c) x_mat.row(c) = cached_input_.block(s, c * p_in, 1, p_in);
        grad_weight.noalias() += x_mat * cols.transpose();
        for (int c = 0; c < out_c; ++c) {
            grad_bias(c) += grad_out.block(s, c * p_out, 1, p_out).sum();
        }
        Mat gx = weight * cols;  // in_c x p_in
        for (int c = 0; c < in_c_; ++c) grad_in.block(s, c * p_in, 1, p_in) = gx.row(c);
    }
    return grad_in;
}

void ConvTranspose2D::collect_params(std::vector<ParamRef>& out) {
    out.push_back({"deconv.weight", weight.data(), grad_weight.data(), weight.size()});
    out.push_back({"deconv.bias", bias.data(), grad_bias.data(), bias.size()});
}

// ----- Activations -----

Mat ActivationLayer::forward(const Mat& x) {
    switch (act_) {
        case Activation::relu: {
            cached_ = x;
            return x.cwiseMax(0.0);
        }
        case Activation::tanh_act: {
            cached_ = x.array().tanh();
            return cached_;
        }
        case Activation::sigmoid: {
            cached_ = (1.0 / (1.0 + (-x.array()).exp())).matrix();
            return cached_;
        }
        case Activation::identity:
            return x;
    }
    throw std::logic_error("unreachable activation");
}

Mat ActivationLayer::backward(const Mat& grad_out) {
    switch (act_) {
        case Activation::relu:
            return (cached_.array() > 0.0).cast<double>() * grad_out.array();
        case Activation::tanh_act:
            return ((1.0 - cached_.array().square()) * grad_out.array()).matrix();
        case Activation::sigmoid:
            return (cached_.array() * (1.0 - cached_.array()) * grad_out.array()).matrix();
        case Activation::identity:
            return grad_out;
    }
    throw std::logic_error("unreachable activation");
}

// ----- Sequential -----

Sequential::Sequential(const Sequential& o) {
    layers_.reserve(o.layers_.size());
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& o) {
    if (this == &o) return *this;
    layers_.clear();
    layers_.reserve(o.layers_.size());
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
    return *this;
}

void Sequential::add(std::unique_ptr<Layer> layer) {
    if (!layers_.empty() && layers_.back()->out_dim() != layer->in_dim()) {
        throw std::invalid_argument("Sequential: layer dims do not chain (" +
                                    std::to_string(layers_.back()->out_dim()) + " -> " +
                                    std::to_string(layer->in_dim()) + ")");
    }
    layers_.push_back(std::move(layer));
}

Mat Sequential::forward(const Mat& x) {
    Mat h = x;
    for (auto& l : layers_) h = l->forward(h);
    return h;
}

Mat Sequential::forward_recording(const Mat& x, std::vector<Mat>& outputs) {
    outputs.clear();
    Mat h = x;
    for (auto& l : layers_) {
        h = l->forward(h);
        outputs.push_back(h);
    }
    return h;
}

Mat Sequential::backward(const Mat& grad_out) {
    Mat g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

std::vector<ParamRef> Sequential::params() {
    std::vector<ParamRef> out;
    for (auto& l : layers_) l->collect_params(out);
    return out;
}

void Sequential::zero_grad() {
    for (auto& p : params()) std::fill(p.grad, p.grad + p.size, 0.0);
}

std::size_t Sequential::param_count() {
    std::size_t n = 0;
    for (auto& p : params()) n += std::size_t(p.size);
    return n;
}

// ----- builders -----

NetworkSpec NetworkSpec::conv_encoder_default(int resolution, int channels_in, int feature_dim) {
    NetworkSpec s;
    s.kind = NetKind::conv_encoder;
    s.image_h = resolution;
    s.image_w = resolution;
    s.image_c = channels_in;
    // 64x64 keeps the standard four stride-2 stages; 32x32 drops one.
    s.channels = resolution == 64 ? std::vector<int>{32, 32, 64, 64} : std::vector<int>{16, 16, 32};
    s.widths = {};
    s.out_dim = feature_dim;
    return s;
}

NetworkSpec NetworkSpec::deconv_decoder_default(int resolution, int channels_out, int latent_dim) {
    NetworkSpec s;
    s.kind = NetKind::deconv_decoder;
    s.image_h = resolution;
    s.image_w = resolution;
    s.image_c = channels_out;
    s.channels = resolution == 64 ? std::vector<int>{64, 64, 32, 32} : std::vector<int>{32, 16, 16};
    s.widths = {latent_dim, 128};
    s.out_dim = latent_dim;
    return s;
}

Sequential build_network(const NetworkSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    Sequential net;
    switch (spec.kind) {
        case NetKind::mlp: {
            if (spec.widths.size() < 2) throw std::invalid_argument("build_network: mlp needs >= 2 widths");
            for (std::size_t i = 0; i + 1 < spec.widths.size(); ++i) {
                net.add(std::make_unique<Dense>(spec.widths[i], spec.widths[i + 1], rng));
                if (i + 2 < spec.widths.size()) {
                    net.add(std::make_unique<ActivationLayer>(spec.activation, spec.widths[i + 1]));
                }
            }
            return net;
        }
        case NetKind::classifier_head: {
            if (spec.widths.size() != 1) throw std::invalid_argument("build_network: classifier_head needs one input width");
            net.add(std::make_unique<Dense>(spec.widths[0], spec.out_dim, rng));
            return net;
        }
        case NetKind::conv_encoder: {
            int h = spec.image_h, w = spec.image_w, c = spec.image_c;
            for (int out_c : spec.channels) {
                ConvGeom g{c, h, w, 4, 2, 1};
                if ((h + 2 * g.pad - g.kernel) % g.stride != 0 || (w + 2 * g.pad - g.kernel) % g.stride != 0) {
                    throw std::invalid_argument("build_network: conv geometry does not divide evenly");
                }
                net.add(std::make_unique<Conv2D>(g, out_c, rng));
                h = g.out_h();
                w = g.out_w();
                c = out_c;
                net.add(std::make_unique<ActivationLayer>(spec.activation, c * h * w));
            }
            int dim = c * h * w;
            for (int width : spec.widths) {
                net.add(std::make_unique<Dense>(dim, width, rng));
                net.add(std::make_unique<ActivationLayer>(spec.activation, width));
                dim = width;
            }
            net.add(std::make_unique<Dense>(dim, spec.out_dim, rng));
            net.add(std::make_unique<ActivationLayer>(spec.activation, spec.out_dim));
            return net;
        }
        case NetKind::deconv_decoder: {
            const int stages = int(spec.channels.size());
            int h0 = spec.image_h, w0 = spec.image_w;
            for (int i = 0; i < stages; ++i) {
                h0 /= 2;
                w0 /= 2;
            }
            if (h0 < 1 || w0 < 1) throw std::invalid_argument("build_network: too many deconv stages");
            if (spec.widths.empty()) throw std::invalid_argument("build_network: decoder needs dense widths (latent first)");
            int dim = spec.widths[0];
            for (std::size_t i = 1; i < spec.widths.size(); ++i) {
                net.add(std::make_unique<Dense>(dim, spec.widths[i], rng));
                net.add(std::make_unique<ActivationLayer>(spec.activation, spec.widths[i]));
                dim = spec.widths[i];
            }
            net.add(std::make_unique<Dense>(dim, spec.channels[0] * h0 * w0, rng));
            net.add(std::make_unique<ActivationLayer>(spec.activation, spec.channels[0] * h0 * w0));
            int c = spec.channels[0], h = h0, w = w0;
            for (int i = 1; i <= stages; ++i) {
                const int out_c = i < stages ? spec.channels[i] : spec.image_c;
                auto deconv = std::make_unique<ConvTranspose2D>(c, h, w, out_c, 4, 2, 1, rng);
                h = deconv->out_h();
                w = deconv->out_w();
                c = out_c;
                net.add(std::move(deconv));
                if (i < stages) net.add(std::make_unique<ActivationLayer>(spec.activation, c * h * w));
            }
            // Final layer emits logits; the reconstruction likelihood applies
            // its own squashing.
            return net;
        }
    }
    throw std::logic_error("unreachable net kind");
}

// ----- losses -----

Mat softmax_rows(const Mat& logits) {
    Mat p = logits;
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const double m = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - m).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

double softmax_cross_entropy(const Mat& logits, const std::vector<int>& labels, Mat* grad) {
    if (std::size_t(logits.rows()) != labels.size()) {
        throw std::invalid_argument("softmax_cross_entropy: batch size mismatch");
    }
    const Mat p = softmax_rows(logits);
    const double n = double(logits.rows());
    double loss = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        loss -= std::log(std::max(p(r, labels[std::size_t(r)]), 1e-300));
    }
    loss /= n;
    if (grad) {
        *grad = p / n;
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
            (*grad)(r, labels[std::size_t(r)]) -= 1.0 / n;
        }
    }
    return loss;
}

double mse_loss(const Mat& pred, const Mat& target, Mat* grad) {
    const double n = double(pred.rows());
    const Mat diff = pred - target;
    if (grad) *grad = (2.0 / n) * diff;
    return diff.array().square().sum() / n;
}

Mat softmax_backward(const Mat& probs, const Mat& grad_probs) {
    Mat g(probs.rows(), probs.cols());
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        const double dot = probs.row(r).dot(grad_probs.row(r));
        g.row(r) = probs.row(r).array() * (grad_probs.row(r).array() - dot);
    }
    return g;
}

}  // namespace cbx
