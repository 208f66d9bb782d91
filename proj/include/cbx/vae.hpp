#pragma once

#include <functional>

#include "cbx/batch.hpp"
#include "cbx/gaussian.hpp"
#include "cbx/gbt.hpp"
#include "cbx/train.hpp"

namespace cbx {

enum class ReconLikelihood { bernoulli, gaussian };
enum class VaeMode { unsupervised, weak_paired };

// Encoder/decoder pair with a diagonal Gaussian posterior. The weak_paired
// mode trains on sample pairs with per-pair shared-set selection and
// posterior averaging applied inside the forward pass.
struct VAEModel {
    int latent_dim = 10;
    double beta = 1.0;
    ReconLikelihood recon = ReconLikelihood::bernoulli;
    VaeMode mode = VaeMode::unsupervised;
    Averaging averaging = Averaging::product_of_experts;
    int image_h = 64, image_w = 64, image_c = 1;

    NetworkSpec encoder_spec;
    NetworkSpec decoder_spec;
    Sequential encoder;     // image -> hidden feature
    Sequential enc_mu;      // hidden -> latent mean
    Sequential enc_logvar;  // hidden -> latent log-variance
    Sequential decoder;     // latent -> image logits

    GaussianPosterior encode(const Image& img);
    Image decode(const Vec& z);  // likelihood mean, pixels in [0, 1]

    // Posterior parameters for a batch.
    void encode_batch(const Mat& x, Mat& mu, Mat& logvar);
    Mat encode_means(const Mat& x);
    Mat decode_means(const Mat& z);
};

struct VaeOptions {
    int latent_dim = 10;
    double beta = 1.0;
    ReconLikelihood recon = ReconLikelihood::bernoulli;
    Averaging averaging = Averaging::product_of_experts;
    int resolution = 64;
    int channels = 1;
    int hidden = 128;
};

VAEModel make_vae(const VaeOptions& opts, std::uint64_t seed);

struct ElboTerms {
    double reconstruction = 0.0;  // expected log-likelihood, one reparameterized sample
    double kl = 0.0;
    double total = 0.0;  // reconstruction - beta * kl
};

// Batch-mean ELBO terms under a single reparameterized sample per row.
ElboTerms elbo(VAEModel& m, const Mat& x, Rng& rng);

// -ELBO averaged over the batch, with fixed noise; accumulates parameter
// gradients when requested. Exposed for gradient checks.
double vae_batch_loss(VAEModel& m, const Mat& x, const Mat& eps, bool accumulate_grads,
                      ElboTerms* terms = nullptr);

// Pair objective: -(ELBO(x1) + ELBO(x2)) per pair with the shared latent
// dimensions of each pair replaced by their average before sampling.
// eps stacks the noise for x1 rows then x2 rows (2B x latent). With
// force_empty_shared the averaging step is skipped, which reduces the
// objective to two independent single-sample terms.
double wvae_pair_loss(VAEModel& m, const Mat& x1, const Mat& x2, const Mat& eps,
                      bool accumulate_grads, bool force_empty_shared = false,
                      ElboTerms* terms = nullptr);

// Streams weak-supervision pairs: anchors drawn from a pool of enumeration
// indices (or the whole grid), partners rendered from the anchor's concept
// vector with k concepts resampled.
class PairSampler {
public:
    PairSampler(ConceptSchema schema, int k, int resolution,
                std::vector<std::uint64_t> anchor_pool = {});
    void fill_batch(Rng& rng, int pairs, Mat& x1, Mat& x2);
    const ConceptSchema& schema() const { return schema_; }
    int resolution() const { return resolution_; }

private:
    ConceptSchema schema_;
    int k_;
    int resolution_;
    std::vector<std::uint64_t> anchor_pool_;
};

// Hook invoked at eval checkpoints; the returned record's per-concept /
// task fields are kept, index and loss are filled by the trainer.
using VaeEvalHook = std::function<MetricRecord(int step)>;

struct VaeTrainOptions {
    VaeOptions model;
    TrainConfig train;
};

std::pair<VAEModel, MetricSeries> train_vae(const Dataset& data, const VaeTrainOptions& opts,
                                            const VaeEvalHook& hook = nullptr);

// steps counts optimizer updates; batch_size is in pairs.
std::pair<VAEModel, MetricSeries> train_wvae(PairSampler& pairs, const VaeTrainOptions& opts,
                                             int steps, const VaeEvalHook& hook = nullptr);

// GBT probes from posterior means to concept values, one per concept.
std::vector<TreeEnsemble> fit_latent_probe(const Mat& latents,
                                           const std::vector<ConceptVector>& concepts,
                                           const ConceptSchema& schema, const GbtOptions& opts = {});
std::vector<ConceptVector> probe_predict(const std::vector<TreeEnsemble>& probes, const Mat& latents);

}  // namespace cbx
