#include "cbx/vae.hpp"

#include <cmath>
#include <stdexcept>

namespace cbx {

namespace {

constexpr double kGaussianVar = 0.1;  // fixed reconstruction variance for RGB data

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// Mean per-row log-likelihood; optionally the gradient of -mean w.r.t. logits.
double recon_loglik_mean(ReconLikelihood kind, const Mat& logits, const Mat& x, Mat* grad) {
    const double n = double(logits.rows());
    double total = 0.0;
    if (grad) grad->resize(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        for (Eigen::Index d = 0; d < logits.cols(); ++d) {
            const double l = logits(r, d);
            const double t = x(r, d);
            if (kind == ReconLikelihood::bernoulli) {
                total += t * l - softplus(l);
                if (grad) {
                    const double sig = 1.0 / (1.0 + std::exp(-l));
                    (*grad)(r, d) = (sig - t) / n;
                }
            } else {
                const double m = 1.0 / (1.0 + std::exp(-l));
                const double diff = t - m;
                total += -diff * diff / (2.0 * kGaussianVar) - 0.5 * std::log(2.0 * M_PI * kGaussianVar);
                if (grad) (*grad)(r, d) = -(diff / kGaussianVar) * m * (1.0 - m) / n;
            }
        }
    }
    return total / n;
}

// Mean per-row KL to the standard normal from (mu, var) matrices.
double kl_mean_from_var(const Mat& mu, const Mat& var) {
    const double n = double(mu.rows());
    double total = 0.0;
    for (Eigen::Index r = 0; r < mu.rows(); ++r) {
        for (Eigen::Index d = 0; d < mu.cols(); ++d) {
            total += 0.5 * (var(r, d) + mu(r, d) * mu(r, d) - 1.0 - std::log(var(r, d)));
        }
    }
    return total / n;
}

}  // namespace

VAEModel make_vae(const VaeOptions& opts, std::uint64_t seed) {
    VAEModel m;
    m.latent_dim = opts.latent_dim;
    m.beta = opts.beta;
    m.recon = opts.recon;
    m.averaging = opts.averaging;
    m.image_h = opts.resolution;
    m.image_w = opts.resolution;
    m.image_c = opts.channels;
    m.encoder_spec = NetworkSpec::conv_encoder_default(opts.resolution, opts.channels, opts.hidden);
    m.encoder = build_network(m.encoder_spec, seed);
    {
        Rng rng_mu(seed + 211);
        Sequential mu;
        mu.add(std::make_unique<Dense>(opts.hidden, opts.latent_dim, rng_mu));
        m.enc_mu = std::move(mu);
        Rng rng_lv(seed + 223);
        Sequential lv;
        lv.add(std::make_unique<Dense>(opts.hidden, opts.latent_dim, rng_lv));
        m.enc_logvar = std::move(lv);
    }
    m.decoder_spec = NetworkSpec::deconv_decoder_default(opts.resolution, opts.channels, opts.latent_dim);
    m.decoder_spec.widths = {opts.latent_dim, opts.hidden};
    m.decoder = build_network(m.decoder_spec, seed + 227);
    return m;
}

void VAEModel::encode_batch(const Mat& x, Mat& mu, Mat& logvar) {
    const Mat h = encoder.forward(x);
    mu = enc_mu.forward(h);
    logvar = enc_logvar.forward(h);
}

Mat VAEModel::encode_means(const Mat& x) {
    Mat mu, lv;
    encode_batch(x, mu, lv);
    return mu;
}

GaussianPosterior VAEModel::encode(const Image& img) {
    Mat x(1, Eigen::Index(img.size()));
    image_to_row(img, x.row(0).data());
    Mat mu, lv;
    encode_batch(x, mu, lv);
    return {mu.row(0).transpose(), lv.row(0).transpose()};
}

Mat VAEModel::decode_means(const Mat& z) {
    Mat logits = decoder.forward(z);
    return (1.0 / (1.0 + (-logits.array()).exp())).matrix();
}

Image VAEModel::decode(const Vec& z) {
    Mat zz(1, z.size());
    zz.row(0) = z.transpose();
    const Mat mean = decode_means(zz);
    return row_to_image(mean.row(0).data(), image_h, image_w, image_c);
}

double vae_batch_loss(VAEModel& m, const Mat& x, const Mat& eps, bool accumulate_grads,
                      ElboTerms* terms) {
    const Eigen::Index n = x.rows();
    if (eps.rows() != n || eps.cols() != m.latent_dim) {
        throw std::invalid_argument("vae_batch_loss: eps shape mismatch");
    }
    const Mat h = m.encoder.forward(x);
    const Mat mu = m.enc_mu.forward(h);
    const Mat lv = m.enc_logvar.forward(h);
    const Mat sigma = (0.5 * lv.array()).exp();
    const Mat z = mu + (sigma.array() * eps.array()).matrix();
    const Mat logits = m.decoder.forward(z);

    Mat grad_logits;
    const double recon = recon_loglik_mean(m.recon, logits, x, accumulate_grads ? &grad_logits : nullptr);
    const Mat var = lv.array().exp();
    const double kl = kl_mean_from_var(mu, var);
    const double loss = -recon + m.beta * kl;

    if (terms) {
        terms->reconstruction = recon;
        terms->kl = kl;
        terms->total = recon - m.beta * kl;
    }
    if (accumulate_grads) {
        const double dn = double(n);
        const Mat gz = m.decoder.backward(grad_logits);
        const Mat gmu = gz + (m.beta / dn) * mu;
        const Mat glv = (gz.array() * eps.array() * 0.5 * sigma.array()).matrix() +
                        (m.beta * 0.5 / dn) * (var.array() - 1.0).matrix();
        Mat gh = m.enc_mu.backward(gmu);
        gh += m.enc_logvar.backward(glv);
        m.encoder.backward(gh);
    }
    return loss;
}

ElboTerms elbo(VAEModel& m, const Mat& x, Rng& rng) {
    Mat eps(x.rows(), m.latent_dim);
    for (Eigen::Index r = 0; r < eps.rows(); ++r) {
        for (int d = 0; d < m.latent_dim; ++d) eps(r, d) = rng.normal();
    }
    ElboTerms terms;
    const double loss = vae_batch_loss(m, x, eps, false, &terms);
    if (!std::isfinite(loss)) throw std::runtime_error("elbo: non-finite objective");
    return terms;
}

double wvae_pair_loss(VAEModel& m, const Mat& x1, const Mat& x2, const Mat& eps,
                      bool accumulate_grads, bool force_empty_shared, ElboTerms* terms) {
    const Eigen::Index b = x1.rows();
    if (x2.rows() != b) throw std::invalid_argument("wvae_pair_loss: pair batch mismatch");
    if (eps.rows() != 2 * b || eps.cols() != m.latent_dim) {
        throw std::invalid_argument("wvae_pair_loss: eps must be (2B x latent_dim)");
    }
    Mat x(2 * b, x1.cols());
    x.topRows(b) = x1;
    x.bottomRows(b) = x2;

    const Mat h = m.encoder.forward(x);
    const Mat mu = m.enc_mu.forward(h);
    const Mat lv = m.enc_logvar.forward(h);
    const Mat var = lv.array().exp();

    // Per-pair shared-set selection on the detached posteriors, then
    // averaging of the shared dimensions for both pair members.
    Mat mu_hat = mu;
    Mat var_hat = var;
    std::vector<std::vector<int>> shared(static_cast<std::size_t>(b));
    if (!force_empty_shared) {
        for (Eigen::Index p = 0; p < b; ++p) {
            GaussianPosterior q1{mu.row(p).transpose(), lv.row(p).transpose()};
            GaussianPosterior q2{mu.row(b + p).transpose(), lv.row(b + p).transpose()};
            const SharedSet s = select_shared_set(q1, q2);
            shared[std::size_t(p)] = s.dims;
            for (int i : s.dims) {
                double mh, vh;
                if (m.averaging == Averaging::product_of_experts) {
                    product_of_experts(mu(p, i), var(p, i), mu(b + p, i), var(b + p, i), &mh, &vh);
                } else {
                    mh = 0.5 * (mu(p, i) + mu(b + p, i));
                    vh = 0.5 * (var(p, i) + var(b + p, i));
                }
                mu_hat(p, i) = mh;
                mu_hat(b + p, i) = mh;
                var_hat(p, i) = vh;
                var_hat(b + p, i) = vh;
            }
        }
    }

    const Mat sig_hat = var_hat.array().sqrt();
    const Mat z = mu_hat + (sig_hat.array() * eps.array()).matrix();
    const Mat logits = m.decoder.forward(z);

    Mat grad_logits;
    const double recon = recon_loglik_mean(m.recon, logits, x, accumulate_grads ? &grad_logits : nullptr);
    const double kl = kl_mean_from_var(mu_hat, var_hat);
    const double loss = -recon + m.beta * kl;

    if (terms) {
        terms->reconstruction = recon;
        terms->kl = kl;
        terms->total = recon - m.beta * kl;
    }
    if (!accumulate_grads) return loss;

    const double dn = double(2 * b);
    const Mat gz = m.decoder.backward(grad_logits);
    // Gradients w.r.t. the averaged parameters.
    const Mat gmu_hat = gz + (m.beta / dn) * mu_hat;
    const Mat gvar_hat = (gz.array() * eps.array() / (2.0 * sig_hat.array())).matrix() +
                         (m.beta * 0.5 / dn) * (1.0 - 1.0 / var_hat.array()).matrix();

    // Route them back through the averaging function.
    Mat gmu = gmu_hat;
    Mat gvar = gvar_hat;
    for (Eigen::Index p = 0; p < b; ++p) {
        for (int i : shared[std::size_t(p)]) {
            const double gmh = gmu_hat(p, i) + gmu_hat(b + p, i);
            const double gvh = gvar_hat(p, i) + gvar_hat(b + p, i);
            const double mu1 = mu(p, i), v1 = var(p, i);
            const double mu2 = mu(b + p, i), v2 = var(b + p, i);
            if (m.averaging == Averaging::product_of_experts) {
                const double vsum = v1 + v2;
                const double mh = mu_hat(p, i);
                const double vh = var_hat(p, i);
                gmu(p, i) = gmh * v2 / vsum;
                gmu(b + p, i) = gmh * v1 / vsum;
                gvar(p, i) = gmh * (mu2 - mh) / vsum + gvh * (vh / v1) * (vh / v1);
                gvar(b + p, i) = gmh * (mu1 - mh) / vsum + gvh * (vh / v2) * (vh / v2);
            } else {
                gmu(p, i) = 0.5 * gmh;
                gmu(b + p, i) = 0.5 * gmh;
                gvar(p, i) = 0.5 * gvh;
                gvar(b + p, i) = 0.5 * gvh;
            }
        }
    }
    const Mat glv = (gvar.array() * var.array()).matrix();  // d var / d logvar = var
    Mat gh = m.enc_mu.backward(gmu);
    gh += m.enc_logvar.backward(glv);
    m.encoder.backward(gh);
    return loss;
}

PairSampler::PairSampler(ConceptSchema schema, int k, int resolution,
                         std::vector<std::uint64_t> anchor_pool)
    : schema_(std::move(schema)), k_(k), resolution_(resolution), anchor_pool_(std::move(anchor_pool)) {
    const int eligible = int(schema_.non_degenerate_concepts().size());
    if (k_ < 1 || k_ > eligible) {
        throw std::invalid_argument("PairSampler: k must be in [1, #concepts with >=2 values]");
    }
}

void PairSampler::fill_batch(Rng& rng, int pairs, Mat& x1, Mat& x2) {
    const Image probe = render(schema_, index_to_concepts(schema_, 0), resolution_);
    const Eigen::Index dim = Eigen::Index(probe.size());
    x1.resize(pairs, dim);
    x2.resize(pairs, dim);
    for (int p = 0; p < pairs; ++p) {
        ConceptVector c1;
        if (anchor_pool_.empty()) {
            c1 = index_to_concepts(schema_, rng.uniform_int(schema_.total_count()));
        } else {
            c1 = index_to_concepts(schema_, anchor_pool_[rng.uniform_int(anchor_pool_.size())]);
        }
        const ConceptVector c2 = resample_concepts(schema_, c1, k_, rng);
        image_to_row(render(schema_, c1, resolution_), x1.row(p).data());
        image_to_row(render(schema_, c2, resolution_), x2.row(p).data());
    }
}

namespace {

std::vector<ParamRef> vae_params(VAEModel& m) {
    std::vector<ParamRef> ps = m.encoder.params();
    for (auto& p : m.enc_mu.params()) ps.push_back(p);
    for (auto& p : m.enc_logvar.params()) ps.push_back(p);
    for (auto& p : m.decoder.params()) ps.push_back(p);
    return ps;
}

void record_checkpoint(MetricSeries& series, const VaeEvalHook& hook, int step, double loss) {
    MetricRecord rec;
    if (hook) rec = hook(step);
    rec.index = double(step);
    rec.loss = loss;
    series.add(rec);
}

}  // namespace

std::pair<VAEModel, MetricSeries> train_vae(const Dataset& data, const VaeTrainOptions& opts,
                                            const VaeEvalHook& hook) {
    opts.train.validate();
    if (opts.model.beta < 0.0) throw std::invalid_argument("train_vae: beta must be >= 0");
    if (data.samples.empty()) throw std::invalid_argument("train_vae: empty dataset");

    VaeOptions vo = opts.model;
    vo.resolution = data.resolution;
    vo.channels = data.schema.channels();
    vo.recon = data.schema.channels() == 1 ? ReconLikelihood::bernoulli : ReconLikelihood::gaussian;
    VAEModel m = make_vae(vo, opts.train.seed);
    m.mode = VaeMode::unsupervised;

    const Mat x = dataset_to_matrix(data);
    const std::size_t n = data.samples.size();
    Rng batch_rng(opts.train.seed + 17);
    Rng noise_rng(opts.train.seed + 31);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::size_t cursor = n;

    const int steps_per_epoch = int((n + std::size_t(opts.train.batch_size) - 1) / std::size_t(opts.train.batch_size));
    int total_steps = opts.train.epochs * steps_per_epoch;
    if (opts.train.max_steps > 0 && opts.train.max_steps < total_steps) total_steps = opts.train.max_steps;

    auto params = vae_params(m);
    Optimizer opt(opts.train.optimizer, opts.train.learning_rate, params);

    MetricSeries series;
    series.method = "vae";
    series.seed = opts.train.seed;
    for (const auto& c : data.schema.concepts) series.concept_names.push_back(c.name);

    Mat bx(opts.train.batch_size, x.cols());
    Mat eps(opts.train.batch_size, m.latent_dim);
    for (int step = 1; step <= total_steps; ++step) {
        for (int r = 0; r < opts.train.batch_size; ++r) {
            if (cursor == n) {
                batch_rng.shuffle(order);
                cursor = 0;
            }
            bx.row(r) = x.row(Eigen::Index(order[cursor++]));
        }
        for (Eigen::Index r = 0; r < eps.rows(); ++r) {
            for (int d = 0; d < m.latent_dim; ++d) eps(r, d) = noise_rng.normal();
        }
        for (auto& p : params) std::fill(p.grad, p.grad + p.size, 0.0);
        const double loss = vae_batch_loss(m, bx, eps, true);
        if (!std::isfinite(loss)) throw TrainingError("train_vae: non-finite loss at step " + std::to_string(step));
        opt.step();
        if (step % opts.train.eval_every == 0 || step == total_steps) {
            record_checkpoint(series, hook, step, loss);
        }
    }
    return {std::move(m), std::move(series)};
}

std::pair<VAEModel, MetricSeries> train_wvae(PairSampler& pairs, const VaeTrainOptions& opts,
                                             int steps, const VaeEvalHook& hook) {
    opts.train.validate();
    if (opts.model.beta < 0.0) throw std::invalid_argument("train_wvae: beta must be >= 0");
    if (steps <= 0) throw std::invalid_argument("train_wvae: steps must be positive");

    VaeOptions vo = opts.model;
    vo.resolution = pairs.resolution();
    vo.channels = pairs.schema().channels();
    vo.recon = pairs.schema().channels() == 1 ? ReconLikelihood::bernoulli : ReconLikelihood::gaussian;
    VAEModel m = make_vae(vo, opts.train.seed);
    m.mode = VaeMode::weak_paired;

    Rng pair_rng(opts.train.seed + 17);
    Rng noise_rng(opts.train.seed + 31);
    auto params = vae_params(m);
    Optimizer opt(opts.train.optimizer, opts.train.learning_rate, params);

    MetricSeries series;
    series.method = "wvae";
    series.seed = opts.train.seed;
    for (const auto& c : pairs.schema().concepts) series.concept_names.push_back(c.name);

    Mat x1, x2;
    Mat eps(2 * opts.train.batch_size, m.latent_dim);
    for (int step = 1; step <= steps; ++step) {
        pairs.fill_batch(pair_rng, opts.train.batch_size, x1, x2);
        for (Eigen::Index r = 0; r < eps.rows(); ++r) {
            for (int d = 0; d < m.latent_dim; ++d) eps(r, d) = noise_rng.normal();
        }
        for (auto& p : params) std::fill(p.grad, p.grad + p.size, 0.0);
        const double loss = wvae_pair_loss(m, x1, x2, eps, true);
        if (!std::isfinite(loss)) throw TrainingError("train_wvae: non-finite loss at step " + std::to_string(step));
        opt.step();
        if (step % opts.train.eval_every == 0 || step == steps) {
            record_checkpoint(series, hook, step, loss);
        }
    }
    return {std::move(m), std::move(series)};
}

std::vector<TreeEnsemble> fit_latent_probe(const Mat& latents,
                                           const std::vector<ConceptVector>& concepts,
                                           const ConceptSchema& schema, const GbtOptions& opts) {
    if (std::size_t(latents.rows()) != concepts.size() || concepts.empty()) {
        throw std::invalid_argument("fit_latent_probe: latent/concept count mismatch");
    }
    std::vector<TreeEnsemble> probes;
    probes.reserve(std::size_t(schema.num_concepts()));
    std::vector<int> yc(concepts.size());
    for (int c = 0; c < schema.num_concepts(); ++c) {
        for (std::size_t r = 0; r < concepts.size(); ++r) yc[r] = concepts[r].indices[c];
        GbtOptions g = opts;
        g.num_classes = schema.cardinality(c);
        probes.push_back(fit_tree_ensemble(latents, yc, g));
    }
    return probes;
}

std::vector<ConceptVector> probe_predict(const std::vector<TreeEnsemble>& probes, const Mat& latents) {
    std::vector<ConceptVector> out(std::size_t(latents.rows()));
    for (auto& v : out) v.indices.resize(probes.size());
    for (std::size_t c = 0; c < probes.size(); ++c) {
        if (probes[c].num_features != int(latents.cols())) {
            throw std::invalid_argument("probe_predict: latent dimension mismatch");
        }
        const auto pred = probes[c].predict(latents);
        for (std::size_t r = 0; r < pred.size(); ++r) out[r].indices[c] = pred[r];
    }
    return out;
}

}  // namespace cbx
