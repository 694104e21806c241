#pragma once

#include <vector>

#include "dklvae/mlp.hpp"

namespace dklvae {

/// Layer sizes of a VAE. The encoder trunk is data_dim -> encoder_hidden...
/// (Tanh), followed by two single-layer heads producing the latent mean
/// (identity) and the latent standard deviation (Softplus). The decoder is
/// latent_dim -> decoder_hidden... (Tanh) -> data_dim, emitting Bernoulli
/// logits.
struct VaeArchitecture {
    std::size_t data_dim = 0;
    std::vector<std::size_t> encoder_hidden;
    std::vector<std::size_t> decoder_hidden;
    std::size_t latent_dim = 0;

    bool operator==(const VaeArchitecture&) const = default;

    void validate() const;
    std::vector<LayerSpec> trunk_layers() const;
    std::vector<LayerSpec> mean_head_layers() const;
    std::vector<LayerSpec> scale_head_layers() const;
    std::vector<LayerSpec> decoder_layers() const;
};

struct VaeModel {
    VaeArchitecture arch;
    MlpModel trunk;
    MlpModel mean_head;
    MlpModel scale_head;
    MlpModel decoder;

    std::size_t latent_dim() const { return arch.latent_dim; }
    std::size_t data_dim() const { return arch.data_dim; }
};

/// Initializes trunk, mean head, scale head and decoder in that order from rng.
VaeModel init_vae(const VaeArchitecture& arch, Rng& rng);

/// Diagonal Gaussian posterior of one datum.
struct LatentGaussian {
    Vector mu;
    Vector sigma;
};

/// Posteriors of a batch, one row per datum.
struct LatentBatch {
    Matrix mu;
    Matrix sigma;

    std::size_t size() const { return static_cast<std::size_t>(mu.rows()); }
    LatentGaussian row(std::size_t i) const;
};

LatentBatch encode(const VaeModel& model, const Matrix& x);

/// Posterior means only (the deterministic embedding used by the GP).
Matrix embed(const VaeModel& model, const Matrix& x);

/// z = mu + sigma * eps.
Vector reparameterize(const LatentGaussian& g, const Vector& eps);

struct Decoded {
    Matrix logits;
    Matrix probabilities;
};

Decoded decode(const VaeModel& model, const Matrix& z);

/// KL(N(mu, diag sigma^2) || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 1 - 2 ln sigma).
double kl_diag_gaussian(const LatentGaussian& g);

/// Binary cross-entropy summed over one row, computed from logits as
/// max(l, 0) - l * x + log(1 + exp(-|l|)).
double bce_with_logits(std::span<const double> logits, std::span<const double> targets);

struct VaeGradients {
    std::vector<double> trunk;
    std::vector<double> mean_head;
    std::vector<double> scale_head;
    std::vector<double> decoder;
};

/// Batch-mean negative ELBO: reconstruction (Bernoulli BCE) + KL, both
/// averaged over the rows of x, with gradients for every VAE parameter.
struct ElboResult {
    double loss = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
    VaeGradients grads;
};

/// One reparameterized sample per datum, eps drawn row by row from rng.
ElboResult elbo_loss(const VaeModel& model, const Matrix& x, Rng& rng);

/// Same objective with caller-supplied noise (batch x latent_dim).
ElboResult elbo_loss_with_noise(const VaeModel& model, const Matrix& x, const Matrix& eps);

}  // namespace dklvae
