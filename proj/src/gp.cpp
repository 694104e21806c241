#include "dklvae/gp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "dklvae/mlp.hpp"

namespace dklvae {

namespace {

void check_inputs(const Matrix& z, std::span<const double> y, const char* who) {
    if (z.rows() == 0) {
        throw Error(ErrorKind::shape, std::string(who) + ": no training points");
    }
    if (static_cast<std::size_t>(z.rows()) != y.size()) {
        throw Error(ErrorKind::shape, std::string(who) + ": " + std::to_string(z.rows()) +
                                          " inputs but " + std::to_string(y.size()) + " targets");
    }
    require_finite(z, who);
    require_finite(y, who);
}

Matrix squared_distances(const Matrix& z1, const Matrix& z2) {
    Matrix d(z1.rows(), z2.rows());
    for (Eigen::Index i = 0; i < z1.rows(); ++i) {
        for (Eigen::Index j = 0; j < z2.rows(); ++j) {
            d(i, j) = (z1.row(i) - z2.row(j)).squaredNorm();
        }
    }
    return d;
}

Eigen::Map<const Vector> as_vector(std::span<const double> y) {
    return {y.data(), static_cast<Eigen::Index>(y.size())};
}

}  // namespace

void GpHyperparams::validate() const {
    if (!(lengthscale_bound > 0.0) || !(lengthscale > 0.0) || lengthscale > lengthscale_bound) {
        std::ostringstream os;
        os << "gp: lengthscale " << lengthscale << " outside (0, " << lengthscale_bound << "]";
        throw Error(ErrorKind::config, os.str());
    }
    if (!(output_scale > 0.0)) {
        throw Error(ErrorKind::config, "gp: output scale must be positive");
    }
    if (!(noise_variance >= 0.0)) {
        throw Error(ErrorKind::config, "gp: noise variance must be nonnegative");
    }
    if (!(jitter > 0.0)) {
        throw Error(ErrorKind::config, "gp: jitter must be positive");
    }
}

double constrain_lengthscale(double raw, double bound) {
    if (!(bound > 0.0)) {
        throw Error(ErrorKind::config, "constrain_lengthscale: bound must be positive");
    }
    return bound * sigmoid(raw);
}

double unconstrain_lengthscale(double lengthscale, double bound) {
    const double p = lengthscale / bound;
    return std::log(p / (1.0 - p));
}

double inverse_softplus(double y) {
    // log(e^y - 1), stable for large y.
    return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

GpHyperparams constrain(const GpRawParams& raw, double lengthscale_bound, double jitter) {
    GpHyperparams h;
    h.lengthscale_bound = lengthscale_bound;
    h.lengthscale = constrain_lengthscale(raw.raw_lengthscale, lengthscale_bound);
    h.output_scale = softplus(raw.raw_output_scale);
    h.noise_variance = softplus(raw.raw_noise);
    h.jitter = jitter;
    return h;
}

GpRawParams unconstrain(const GpHyperparams& h) {
    return {unconstrain_lengthscale(h.lengthscale, h.lengthscale_bound), inverse_softplus(h.output_scale),
            inverse_softplus(h.noise_variance)};
}

Matrix rbf_kernel(const Matrix& z1, const Matrix& z2, const GpHyperparams& h) {
    if (z1.cols() != z2.cols()) {
        throw Error(ErrorKind::shape, "rbf_kernel: latent dims differ (" + shape_string(z1) + " vs " +
                                          shape_string(z2) + ")");
    }
    const double a2 = h.output_scale * h.output_scale;
    const double inv_two_l2 = 1.0 / (2.0 * h.lengthscale * h.lengthscale);
    Matrix k = squared_distances(z1, z2);
    k = (k.array() * -inv_two_l2).exp() * a2;
    return k;
}

KernelFactor factor_kernel(const Matrix& z, const GpHyperparams& h) {
    h.validate();
    KernelFactor f;
    f.kernel = rbf_kernel(z, z, h);
    const double a2 = h.output_scale * h.output_scale;
    for (double rel = h.jitter; rel <= kMaxRelativeJitter * (1.0 + 1e-9); rel *= 10.0) {
        Matrix ks = f.kernel;
        const double diag = h.noise_variance + rel * a2;
        ks.diagonal().array() += diag;
        Eigen::LLT<Matrix> llt(ks);
        if (llt.info() == Eigen::Success) {
            Matrix l = llt.matrixL();
            if (l.allFinite() && (l.diagonal().array() > 0.0).all()) {
                f.chol = std::move(l);
                f.relative_jitter = rel;
                f.diagonal = diag;
                return f;
            }
        }
    }
    std::ostringstream os;
    os << "gp: ill-conditioned kernel (Cholesky failed with jitter up to " << kMaxRelativeJitter
       << " * a^2, n = " << z.rows() << ")";
    throw Error(ErrorKind::numeric, os.str());
}

double gp_nll(const Matrix& z, std::span<const double> y, const GpHyperparams& h) {
    check_inputs(z, y, "gp_nll");
    const KernelFactor f = factor_kernel(z, h);
    const Vector alpha = cholesky_solve(f.chol, as_vector(y));
    const double n = static_cast<double>(y.size());
    return 0.5 * as_vector(y).dot(alpha) + f.chol.diagonal().array().log().sum() +
           0.5 * n * std::log(2.0 * std::numbers::pi);
}

GpNllGradient gp_nll_grad(const Matrix& z, std::span<const double> y, const GpHyperparams& h) {
    check_inputs(z, y, "gp_nll_grad");
    const KernelFactor f = factor_kernel(z, h);
    const auto n = z.rows();
    const Vector alpha = cholesky_solve(f.chol, as_vector(y));

    GpNllGradient g;
    g.nll = 0.5 * as_vector(y).dot(alpha) + f.chol.diagonal().array().log().sum() +
            0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

    // W = K_s^-1 - alpha alpha^T, so dNLL/dK_s = W / 2.
    Matrix w = cholesky_solve(f.chol, Matrix::Identity(n, n));
    w.noalias() -= alpha * alpha.transpose();

    const double l = h.lengthscale;
    const double a = h.output_scale;
    const Matrix m = w.cwiseProduct(f.kernel);

    // dK_ij/dz_i = -K_ij (z_i - z_j) / l^2, and W is symmetric.
    const Vector row_sums = m.rowwise().sum();
    g.dz = (m * z - row_sums.asDiagonal() * z) / (l * l);

    const Matrix dist2 = squared_distances(z, z);
    g.d_lengthscale = 0.5 * m.cwiseProduct(dist2).sum() / (l * l * l);
    const double trace_w = w.trace();
    g.d_output_scale = m.sum() / a + trace_w * f.relative_jitter * a;
    g.d_noise_variance = 0.5 * trace_w;
    return g;
}

GpRawParams chain_to_raw(const GpRawParams& raw, double lengthscale_bound, const GpNllGradient& g) {
    const double s = sigmoid(raw.raw_lengthscale);
    return {g.d_lengthscale * lengthscale_bound * s * (1.0 - s),
            g.d_output_scale * sigmoid(raw.raw_output_scale),
            g.d_noise_variance * sigmoid(raw.raw_noise)};
}

FittedGp::FittedGp(Matrix z_train, std::span<const double> y, const GpHyperparams& h)
    : z_(std::move(z_train)), h_(h) {
    check_inputs(z_, y, "gp_predict");
    KernelFactor f = factor_kernel(z_, h_);
    chol_ = std::move(f.chol);
    diagonal_ = f.diagonal;
    alpha_ = cholesky_solve(chol_, as_vector(y));
}

GpPosterior FittedGp::predict(const Matrix& z_test) const {
    if (z_test.cols() != z_.cols()) {
        throw Error(ErrorKind::shape, "gp_predict: test inputs " + shape_string(z_test) +
                                          " vs training inputs " + shape_string(z_));
    }
    require_finite(z_test, "gp_predict");
    const Matrix k_star = rbf_kernel(z_, z_test, h_);  // n x m
    GpPosterior post;
    post.mean = k_star.transpose() * alpha_;
    Matrix v = k_star;
    chol_.triangularView<Eigen::Lower>().solveInPlace(v);
    const double prior = h_.output_scale * h_.output_scale + h_.noise_variance;
    post.variance = (prior - v.colwise().squaredNorm().transpose().array()).max(0.0);
    return post;
}

double FittedGp::mean_and_gradient(const Vector& z, Vector& gradient) const {
    if (z.size() != z_.cols()) {
        throw Error(ErrorKind::shape, "gp mean gradient: point dimension mismatch");
    }
    const double a2 = h_.output_scale * h_.output_scale;
    const double inv_l2 = 1.0 / (h_.lengthscale * h_.lengthscale);
    gradient = Vector::Zero(z.size());
    double mean = 0.0;
    for (Eigen::Index j = 0; j < z_.rows(); ++j) {
        const Vector diff = z - z_.row(j).transpose();
        const double k = a2 * std::exp(-0.5 * diff.squaredNorm() * inv_l2);
        mean += k * alpha_[j];
        gradient -= (k * alpha_[j] * inv_l2) * diff;
    }
    return mean;
}

GpPosterior gp_predict(const Matrix& z_train, std::span<const double> y, const Matrix& z_test,
                       const GpHyperparams& h) {
    return FittedGp(z_train, y, h).predict(z_test);
}

}  // namespace dklvae
