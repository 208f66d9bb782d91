#pragma once

#include <vector>

#include "cbx/nn.hpp"

namespace cbx {

// Diagonal Gaussian over latent dimensions, parameterized by mean and
// log-variance.
struct GaussianPosterior {
    Vec mean;
    Vec log_variance;

    int dim() const { return int(mean.size()); }
    Vec variance() const { return log_variance.array().exp(); }

    static GaussianPosterior standard_normal(int dim) {
        return {Vec::Zero(dim), Vec::Zero(dim)};
    }
};

struct KlResult {
    Vec per_dim;
    double total = 0.0;
};

// Closed-form KL(q || p) for diagonal Gaussians, per dimension and summed.
KlResult kl_gaussian(const GaussianPosterior& q, const GaussianPosterior& p);
KlResult kl_gaussian_to_standard(const GaussianPosterior& q);

// Latent dimensions judged shared within a pair, plus the threshold that
// selected them.
struct SharedSet {
    std::vector<int> dims;
    double threshold = 0.0;
};

// Symmetrized per-dimension KL between q1 and q2; tau = (max + min) / 2;
// S = { i : delta_i < tau }. If every delta is (numerically) equal, all
// dimensions are shared.
SharedSet select_shared_set(const GaussianPosterior& q1, const GaussianPosterior& q2);

enum class Averaging { product_of_experts, arithmetic };

// Precision-weighted Gaussian product of two 1-D components.
void product_of_experts(double mu1, double var1, double mu2, double var2, double* mu, double* var);

// Replaces the shared dimensions of both posteriors with their average;
// the remaining dimensions pass through unchanged.
std::pair<GaussianPosterior, GaussianPosterior> adaptive_average(const GaussianPosterior& q1,
                                                                 const GaussianPosterior& q2,
                                                                 const SharedSet& s,
                                                                 Averaging averaging);

}  // namespace cbx
