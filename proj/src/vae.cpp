#include "dklvae/vae.hpp"

#include <cmath>

namespace dklvae {

void VaeArchitecture::validate() const {
    if (data_dim == 0 || latent_dim == 0) {
        throw Error(ErrorKind::config, "vae: data_dim and latent_dim must be positive");
    }
    if (encoder_hidden.empty() || decoder_hidden.empty()) {
        throw Error(ErrorKind::config, "vae: encoder and decoder need at least one hidden layer");
    }
    for (auto h : encoder_hidden) {
        if (h == 0) throw Error(ErrorKind::config, "vae: zero-width encoder layer");
    }
    for (auto h : decoder_hidden) {
        if (h == 0) throw Error(ErrorKind::config, "vae: zero-width decoder layer");
    }
}

std::vector<LayerSpec> VaeArchitecture::trunk_layers() const {
    std::vector<LayerSpec> layers;
    std::size_t in = data_dim;
    for (auto h : encoder_hidden) {
        layers.push_back({in, h, Activation::tanh});
        in = h;
    }
    return layers;
}

std::vector<LayerSpec> VaeArchitecture::mean_head_layers() const {
    return {{encoder_hidden.back(), latent_dim, Activation::identity}};
}

std::vector<LayerSpec> VaeArchitecture::scale_head_layers() const {
    return {{encoder_hidden.back(), latent_dim, Activation::softplus}};
}

std::vector<LayerSpec> VaeArchitecture::decoder_layers() const {
    std::vector<LayerSpec> layers;
    std::size_t in = latent_dim;
    for (auto h : decoder_hidden) {
        layers.push_back({in, h, Activation::tanh});
        in = h;
    }
    layers.push_back({in, data_dim, Activation::identity});
    return layers;
}

VaeModel init_vae(const VaeArchitecture& arch, Rng& rng) {
    arch.validate();
    VaeModel model;
    model.arch = arch;
    model.trunk = init_mlp(arch.trunk_layers(), rng);
    model.mean_head = init_mlp(arch.mean_head_layers(), rng);
    model.scale_head = init_mlp(arch.scale_head_layers(), rng);
    model.decoder = init_mlp(arch.decoder_layers(), rng);
    return model;
}

LatentGaussian LatentBatch::row(std::size_t i) const {
    const auto r = static_cast<Eigen::Index>(i);
    return {mu.row(r).transpose(), sigma.row(r).transpose()};
}

LatentBatch encode(const VaeModel& model, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != model.data_dim()) {
        throw Error(ErrorKind::shape, "encode: input " + shape_string(x) + " but data dim is " +
                                          std::to_string(model.data_dim()));
    }
    const Matrix h = predict(model.trunk, x);
    return {predict(model.mean_head, h), predict(model.scale_head, h)};
}

Matrix embed(const VaeModel& model, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != model.data_dim()) {
        throw Error(ErrorKind::shape, "embed: input " + shape_string(x) + " but data dim is " +
                                          std::to_string(model.data_dim()));
    }
    return predict(model.mean_head, predict(model.trunk, x));
}

Vector reparameterize(const LatentGaussian& g, const Vector& eps) {
    if (eps.size() != g.mu.size() || g.sigma.size() != g.mu.size()) {
        throw Error(ErrorKind::shape, "reparameterize: eps length " + std::to_string(eps.size()) +
                                          " vs latent dim " + std::to_string(g.mu.size()));
    }
    return g.mu + g.sigma.cwiseProduct(eps);
}

Decoded decode(const VaeModel& model, const Matrix& z) {
    if (static_cast<std::size_t>(z.cols()) != model.latent_dim()) {
        throw Error(ErrorKind::shape, "decode: latent batch " + shape_string(z) + " but latent dim is " +
                                          std::to_string(model.latent_dim()));
    }
    Decoded out;
    out.logits = predict(model.decoder, z);
    out.probabilities = out.logits.unaryExpr([](double v) { return sigmoid(v); });
    return out;
}

double kl_diag_gaussian(const LatentGaussian& g) {
    double kl = 0.0;
    for (Eigen::Index j = 0; j < g.mu.size(); ++j) {
        const double s = g.sigma[j];
        kl += g.mu[j] * g.mu[j] + s * s - 1.0 - 2.0 * std::log(s);
    }
    return 0.5 * kl;
}

double bce_with_logits(std::span<const double> logits, std::span<const double> targets) {
    if (logits.size() != targets.size()) {
        throw Error(ErrorKind::shape, "bce_with_logits: length mismatch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double l = logits[i];
        total += std::max(l, 0.0) - l * targets[i] + std::log1p(std::exp(-std::abs(l)));
    }
    return total;
}

ElboResult elbo_loss(const VaeModel& model, const Matrix& x, Rng& rng) {
    const Matrix eps = sample_standard_normal(rng, static_cast<std::size_t>(x.rows()), model.latent_dim());
    return elbo_loss_with_noise(model, x, eps);
}

ElboResult elbo_loss_with_noise(const VaeModel& model, const Matrix& x, const Matrix& eps) {
    if (static_cast<std::size_t>(x.cols()) != model.data_dim()) {
        throw Error(ErrorKind::shape, "elbo_loss: input " + shape_string(x) + " but data dim is " +
                                          std::to_string(model.data_dim()));
    }
    if (eps.rows() != x.rows() || static_cast<std::size_t>(eps.cols()) != model.latent_dim()) {
        throw Error(ErrorKind::shape, "elbo_loss: noise " + shape_string(eps) + " for batch " +
                                          shape_string(x));
    }
    if (x.rows() == 0) {
        throw Error(ErrorKind::shape, "elbo_loss: empty batch");
    }
    if ((x.array() < 0.0).any() || (x.array() > 1.0).any()) {
        throw Error(ErrorKind::data, "elbo_loss: Bernoulli likelihood needs inputs in [0, 1]");
    }

    const double inv_batch = 1.0 / static_cast<double>(x.rows());

    auto trunk = forward(model.trunk, x);
    auto mean = forward(model.mean_head, trunk.y);
    auto scale = forward(model.scale_head, trunk.y);
    const Matrix& mu = mean.y;
    const Matrix& sigma = scale.y;
    const Matrix z = mu.array() + sigma.array() * eps.array();
    auto dec = forward(model.decoder, z);
    const Matrix& logits = dec.y;

    ElboResult result;
    double recon = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        recon += bce_with_logits({logits.row(i).data(), static_cast<std::size_t>(logits.cols())},
                                 {x.row(i).data(), static_cast<std::size_t>(x.cols())});
    }
    double kl = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        kl += kl_diag_gaussian({mu.row(i).transpose(), sigma.row(i).transpose()});
    }
    result.reconstruction = recon * inv_batch;
    result.kl = kl * inv_batch;
    result.loss = result.reconstruction + result.kl;

    // d(BCE)/d(logit) = sigmoid(logit) - x
    const Matrix dlogits =
        (logits.unaryExpr([](double v) { return sigmoid(v); }) - x) * inv_batch;
    auto dec_back = backward(model.decoder, dec.trace, dlogits);
    const Matrix& dz = dec_back.dx;

    const Matrix dmu = dz + mu * inv_batch;
    const Matrix dsigma = (dz.array() * eps.array() +
                           (sigma.array() - sigma.array().inverse()) * inv_batch)
                              .matrix();
    auto mean_back = backward(model.mean_head, mean.trace, dmu);
    auto scale_back = backward(model.scale_head, scale.trace, dsigma);
    const Matrix dh = mean_back.dx + scale_back.dx;
    auto trunk_back = backward(model.trunk, trunk.trace, dh);

    result.grads.trunk = std::move(trunk_back.dparams);
    result.grads.mean_head = std::move(mean_back.dparams);
    result.grads.scale_head = std::move(scale_back.dparams);
    result.grads.decoder = std::move(dec_back.dparams);
    return result;
}

}  // namespace dklvae
