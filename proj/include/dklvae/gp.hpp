#pragma once

#include <span>
#include <vector>

#include "dklvae/tensor.hpp"

namespace dklvae {

/// Constrained RBF-GP hyperparameters.
///
/// `jitter` is relative: the diagonal receives noise_variance + jitter * a^2.
/// When the Cholesky factorization fails the jitter is escalated by x10 up to
/// kMaxRelativeJitter before giving up.
struct GpHyperparams {
    double lengthscale = 1.0;
    double lengthscale_bound = 10.0;
    double output_scale = 1.0;
    double noise_variance = 0.1;
    double jitter = 1e-6;

    void validate() const;
};

inline constexpr double kMaxRelativeJitter = 1e-2;

/// Unconstrained optimisation variables of the GP.
///   lengthscale = bound * sigmoid(raw_lengthscale)
///   output_scale = softplus(raw_output_scale)
///   noise_variance = softplus(raw_noise)
struct GpRawParams {
    double raw_lengthscale = 0.0;
    double raw_output_scale = 0.0;
    double raw_noise = 0.0;

    bool operator==(const GpRawParams&) const = default;
};

/// Maps the raw length-scale into (0, bound).
double constrain_lengthscale(double raw, double bound);
double unconstrain_lengthscale(double lengthscale, double bound);
/// Inverse of softplus for positive values.
double inverse_softplus(double y);

GpHyperparams constrain(const GpRawParams& raw, double lengthscale_bound, double jitter);
GpRawParams unconstrain(const GpHyperparams& h);

/// K[i, j] = a^2 exp(-|z1_i - z2_j|^2 / (2 l^2)).
Matrix rbf_kernel(const Matrix& z1, const Matrix& z2, const GpHyperparams& h);

/// Cholesky factor of K + (noise + jitter a^2) I with jitter escalation.
struct KernelFactor {
    Matrix kernel;  // K without the diagonal additions
    Matrix chol;
    double relative_jitter = 0.0;  // jitter actually used, relative to a^2
    double diagonal = 0.0;         // noise + relative_jitter * a^2
};

KernelFactor factor_kernel(const Matrix& z, const GpHyperparams& h);

/// Negative log marginal likelihood
///   1/2 y^T K_s^-1 y + 1/2 log|K_s| + n/2 log(2 pi),  K_s = K + (noise + jitter) I.
double gp_nll(const Matrix& z, std::span<const double> y, const GpHyperparams& h);

struct GpNllGradient {
    double nll = 0.0;
    Matrix dz;
    double d_lengthscale = 0.0;
    double d_output_scale = 0.0;
    double d_noise_variance = 0.0;
};

/// gp_nll together with its exact gradient w.r.t. the inputs z and the
/// constrained hyperparameters.
GpNllGradient gp_nll_grad(const Matrix& z, std::span<const double> y, const GpHyperparams& h);

/// Gradient w.r.t. the raw parameters given the constrained-space gradient.
GpRawParams chain_to_raw(const GpRawParams& raw, double lengthscale_bound, const GpNllGradient& g);

struct GpPosterior {
    Vector mean;
    Vector variance;  // pointwise latent variance plus noise, clamped at 0
};

/// Reusable posterior for a fixed training set.
class FittedGp {
public:
    FittedGp(Matrix z_train, std::span<const double> y, const GpHyperparams& h);

    GpPosterior predict(const Matrix& z_test) const;

    /// Posterior mean at a single point and its gradient w.r.t. that point.
    double mean_and_gradient(const Vector& z, Vector& gradient) const;

    const GpHyperparams& hyperparams() const { return h_; }
    const Matrix& inputs() const { return z_; }

private:
    Matrix z_;
    GpHyperparams h_;
    Matrix chol_;
    Vector alpha_;
    double diagonal_ = 0.0;
};

/// mean = K_*^T K_s^-1 y, variance = a^2 + noise - diag(K_*^T K_s^-1 K_*).
GpPosterior gp_predict(const Matrix& z_train, std::span<const double> y, const Matrix& z_test,
                       const GpHyperparams& h);

}  // namespace dklvae
