#include "cbx/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace cbx {

namespace {

void check_finite(const GaussianPosterior& g, const char* who) {
    if (!g.mean.allFinite() || !g.log_variance.allFinite()) {
        throw std::invalid_argument(std::string(who) + ": non-finite Gaussian parameters");
    }
}

}  // namespace

KlResult kl_gaussian(const GaussianPosterior& q, const GaussianPosterior& p) {
    check_finite(q, "kl_gaussian");
    check_finite(p, "kl_gaussian");
    if (q.dim() != p.dim()) throw std::invalid_argument("kl_gaussian: dimension mismatch");
    KlResult r;
    r.per_dim.resize(q.dim());
    for (int i = 0; i < q.dim(); ++i) {
        const double vq = std::exp(q.log_variance(i));
        const double vp = std::exp(p.log_variance(i));
        const double dm = q.mean(i) - p.mean(i);
        r.per_dim(i) = 0.5 * (p.log_variance(i) - q.log_variance(i) + (vq + dm * dm) / vp - 1.0);
    }
    r.total = r.per_dim.sum();
    return r;
}

KlResult kl_gaussian_to_standard(const GaussianPosterior& q) {
    return kl_gaussian(q, GaussianPosterior::standard_normal(q.dim()));
}

SharedSet select_shared_set(const GaussianPosterior& q1, const GaussianPosterior& q2) {
    if (q1.dim() != q2.dim()) throw std::invalid_argument("select_shared_set: dimension mismatch");
    const KlResult a = kl_gaussian(q1, q2);
    const KlResult b = kl_gaussian(q2, q1);
    const Vec delta = 0.5 * (a.per_dim + b.per_dim);

    SharedSet s;
    const double lo = delta.minCoeff();
    const double hi = delta.maxCoeff();
    s.threshold = 0.5 * (hi + lo);
    if (hi - lo < 1e-12) {
        // All deltas equal (e.g. identical posteriors): everything is shared.
        s.dims.resize(std::size_t(q1.dim()));
        for (int i = 0; i < q1.dim(); ++i) s.dims[std::size_t(i)] = i;
        return s;
    }
    for (int i = 0; i < q1.dim(); ++i) {
        if (delta(i) < s.threshold) s.dims.push_back(i);
    }
    return s;
}

void product_of_experts(double mu1, double var1, double mu2, double var2, double* mu, double* var) {
    const double precision = 1.0 / var1 + 1.0 / var2;
    *var = 1.0 / precision;
    *mu = (*var) * (mu1 / var1 + mu2 / var2);
}

std::pair<GaussianPosterior, GaussianPosterior> adaptive_average(const GaussianPosterior& q1,
                                                                 const GaussianPosterior& q2,
                                                                 const SharedSet& s,
                                                                 Averaging averaging) {
    if (q1.dim() != q2.dim()) throw std::invalid_argument("adaptive_average: dimension mismatch");
    GaussianPosterior a = q1;
    GaussianPosterior b = q2;
    for (int i : s.dims) {
        if (i < 0 || i >= q1.dim()) throw std::out_of_range("adaptive_average: shared dim out of range");
        double mu, var;
        if (averaging == Averaging::product_of_experts) {
            product_of_experts(q1.mean(i), std::exp(q1.log_variance(i)), q2.mean(i),
                               std::exp(q2.log_variance(i)), &mu, &var);
        } else {
            mu = 0.5 * (q1.mean(i) + q2.mean(i));
            var = 0.5 * (std::exp(q1.log_variance(i)) + std::exp(q2.log_variance(i)));
        }
        a.mean(i) = mu;
        a.log_variance(i) = std::log(var);
        b.mean(i) = mu;
        b.log_variance(i) = std::log(var);
    }
    return {a, b};
}

}  // namespace cbx
