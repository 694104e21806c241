#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dklvae/gp.hpp"
#include "dklvae/vae.hpp"

namespace dklvae {

struct TrainConfig {
    std::size_t epochs = 1;
    std::size_t vae_batch_size = 100;
    double vae_lr = 1e-3;
    double dkl_lr = 1e-3;
    /// Multiplier on the GP negative log marginal likelihood in phase 2.
    double dkl_scale = 1.0;
    /// Upper bound X of the kernel length-scale, l = X * sigmoid(raw).
    double lengthscale_bound = 10.0;
    /// Phase 2 runs on this many uniformly drawn training points per epoch
    /// when set; otherwise on the whole training set.
    std::optional<std::size_t> dkl_subset_size;
    std::size_t eval_every = 50;
    std::uint64_t seed = 0;
    /// Fit the GP to z-scored targets (statistics of the training set).
    bool normalize_targets = false;
    /// Initial noise variance as a fraction of the initial signal variance.
    double init_noise_fraction = 0.01;
    /// Initial length-scale; unset means X / 2.
    std::optional<double> init_lengthscale;
    /// Relative diagonal jitter, see GpHyperparams::jitter.
    double jitter = 1e-6;

    bool operator==(const TrainConfig&) const = default;
    void validate() const;
};

/// What the reconstruction metric looks like for a dataset.
enum class DataKind {
    images,     // rows x cols grey image, scored by mean SSIM
    sequences,  // rows x cols one-hot matrix, scored by exact-match rate
};

/// Flattened training data: one datum per row of x, values in [0, 1].
struct Dataset {
    DataKind kind = DataKind::images;
    std::size_t rows = 0;  // image height or sequence length
    std::size_t cols = 0;  // image width or alphabet size
    Matrix x;
    std::vector<double> y;
    std::vector<std::string> groups;  // optional per-datum label (suit)
    std::vector<std::size_t> ids;     // index of each datum in the source dataset

    std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
    bool empty() const { return x.rows() == 0; }
    /// Rows selected by `index`, in that order.
    Dataset subset(std::span<const std::size_t> index) const;
};

/// The VAE, the unconstrained GP hyperparameters, and the state of the two
/// Adam optimizers. The VAE-phase optimizer owns trunk, mean head, scale head
/// and decoder; the DKL-phase optimizer owns trunk, mean head and the GP
/// hyperparameters (the scale head does not influence the GP loss).
struct DklVaeModel {
    VaeModel vae;
    GpRawParams gp_raw;
    double lengthscale_bound = 10.0;
    double jitter = 1e-6;
    double target_offset = 0.0;
    double target_scale = 1.0;
    std::size_t epoch = 0;  // completed epochs

    std::array<AdamState, 4> vae_opt;  // trunk, mean head, scale head, decoder
    std::array<AdamState, 3> dkl_opt;  // trunk, mean head, gp (3 entries)

    GpHyperparams gp() const;
    std::vector<double> normalize(std::span<const double> y) const;
};

/// Fresh model: VAE from Rng(seed).split(0), GP hyperparameters set from the
/// training targets, zeroed optimizer states.
DklVaeModel init_model(const VaeArchitecture& arch, const TrainConfig& cfg, std::span<const double> train_targets);

struct EpochLosses {
    double vae_loss = 0.0;  // size-weighted mean of batch ELBO losses
    double dkl_loss = 0.0;  // unscaled GP NLL divided by the number of points
};

struct TrainEpochOptions {
    bool run_vae_phase = true;
    bool run_dkl_phase = true;
};

/// One epoch: shuffled mini-batch ELBO updates, then a full-batch (or
/// subset) GP marginal-likelihood update of encoder and GP hyperparameters.
/// Increments model.epoch.
EpochLosses train_epoch(DklVaeModel& model, const Matrix& x, std::span<const double> y, const TrainConfig& cfg,
                        Rng& rng, const TrainEpochOptions& options = {});

/// Rng used for epoch e (1-based).
Rng epoch_rng(std::uint64_t seed, std::size_t epoch);

/// GP posterior over targets given a model and its labelled training data.
class LatentRegressor {
public:
    LatentRegressor(const DklVaeModel& model, const Matrix& x_train, std::span<const double> y_train);

    /// Posterior in target units at latent points.
    GpPosterior predict_latent(const Matrix& z) const;
    /// Encode to posterior means, then predict.
    GpPosterior predict(const DklVaeModel& model, const Matrix& x) const;
    /// Posterior mean (target units) at one latent point and its gradient.
    double mean_and_gradient(const Vector& z, Vector& gradient) const;

    const Matrix& train_embeddings() const { return gp_.inputs(); }
    double target_std() const { return target_std_; }

private:
    FittedGp gp_;
    double offset_;
    double scale_;
    double target_std_;
};

GpPosterior predict_target(const DklVaeModel& model, const Matrix& x, const LatentRegressor& regressor);

struct GenerateOptions {
    std::size_t restarts = 256;
    std::size_t steps = 100;
    double step_size = 0.05;
};

struct Candidate {
    Vector z;
    Matrix decoded;  // 1 x data_dim probabilities
    double prediction = 0.0;
    double variance = 0.0;
};

/// Gradient descent on ((mean(z) - t) / target_std)^2 from `restarts` latent
/// starts drawn from N(0, I); returns the best n by |mean - t|, ties by
/// variance.
std::vector<Candidate> generate_for_target(const DklVaeModel& model, const LatentRegressor& regressor,
                                           double target, std::size_t n, Rng& rng,
                                           const GenerateOptions& options = {});

/// Per-datum SSIM between each image and the decoded mean embedding.
std::vector<double> reconstruction_ssim(const DklVaeModel& model, const Dataset& data);

/// Decoded one-hot matrix (argmax per row) for each datum.
std::vector<Matrix> reconstruct_onehot(const DklVaeModel& model, const Dataset& data);

/// Reshape datum i of a sequence dataset into its rows x cols matrix.
Matrix datum_matrix(const Dataset& data, std::size_t i);

struct Evaluation {
    double rmse = 0.0;
    std::optional<double> r2;
    double reconstruction = 0.0;  // mean SSIM or exact-match rate
    std::vector<double> predictions;
    std::vector<double> variances;
};

/// GP fitted on all of `train`, scored on `test`.
Evaluation evaluate(const DklVaeModel& model, const Dataset& train, const Dataset& test);

struct HistoryRow {
    std::size_t epoch = 0;
    double vae_loss = 0.0;
    double dkl_loss = 0.0;
    std::optional<double> test_rmse;
    std::optional<double> test_r2;
    std::optional<double> test_reconstruction;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<HistoryRow> rows;

    /// Columns epoch,vae_loss,dkl_loss,test_rmse,test_r2,test_match_or_ssim;
    /// evaluation columns are empty on epochs without evaluation. Wall time
    /// is kept out of this file so that it is reproducible byte for byte.
    void write_csv(const std::filesystem::path& path) const;
    /// Columns epoch,seconds.
    void write_timing_csv(const std::filesystem::path& path) const;
    static TrainHistory read_csv(const std::filesystem::path& path);
};

struct FitOptions {
    /// Continue this model instead of initializing a new one.
    std::optional<DklVaeModel> resume;
    /// Called after every epoch with the model and its history row.
    std::function<void(const DklVaeModel&, const HistoryRow&)> on_epoch;
};

struct FitResult {
    DklVaeModel model;
    TrainHistory history;
};

/// Runs epochs model.epoch+1 .. cfg.epochs. Evaluation happens on epochs
/// divisible by cfg.eval_every when the test set is non-empty.
FitResult fit(const TrainConfig& cfg, const VaeArchitecture& arch, const Dataset& train, const Dataset& test,
              FitOptions options = {});

}  // namespace dklvae
