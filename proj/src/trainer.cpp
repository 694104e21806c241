#include "dklvae/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dklvae/metrics.hpp"
#include "dklvae/sequences.hpp"
#include "dklvae/textio.hpp"

namespace dklvae {

namespace {

constexpr const char* kHistoryFormat = "# dklvae-history v1";

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> index) {
    Matrix out(static_cast<Eigen::Index>(index.size()), x.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(index[i]));
    }
    return out;
}

double population_std(std::span<const double> y) {
    if (y.empty()) return 0.0;
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(y.size()));
}

std::string optional_field(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

std::optional<double> parse_optional(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_double(s);
}

void step_block(AdamState& state, std::vector<double>& params, const std::vector<double>& grads, double lr) {
    adam_step(state, params, grads, lr);
}

}  // namespace

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, "train config: " + msg); };
    if (epochs < 1) fail("epochs must be at least 1");
    if (vae_batch_size < 1) fail("vae_batch_size must be at least 1");
    if (!(vae_lr > 0.0) || !std::isfinite(vae_lr)) fail("vae_lr must be positive");
    if (!(dkl_lr > 0.0) || !std::isfinite(dkl_lr)) fail("dkl_lr must be positive");
    if (!(dkl_scale >= 0.0) || !std::isfinite(dkl_scale)) fail("dkl_scale must be nonnegative");
    if (!(lengthscale_bound > 0.0) || !std::isfinite(lengthscale_bound)) fail("lengthscale_bound must be positive");
    if (dkl_subset_size && *dkl_subset_size < 2) fail("dkl_subset_size must be at least 2");
    if (eval_every < 1) fail("eval_every must be at least 1");
    if (!(init_noise_fraction > 0.0)) fail("init_noise_fraction must be positive");
    if (init_lengthscale && !(*init_lengthscale > 0.0 && *init_lengthscale < lengthscale_bound)) {
        fail("init_lengthscale must lie strictly between 0 and lengthscale_bound");
    }
    if (!(jitter > 0.0)) fail("jitter must be positive");
}

Dataset Dataset::subset(std::span<const std::size_t> index) const {
    Dataset out;
    out.kind = kind;
    out.rows = rows;
    out.cols = cols;
    out.x = gather_rows(x, index);
    for (auto i : index) {
        out.y.push_back(y.at(i));
        if (!groups.empty()) out.groups.push_back(groups.at(i));
        out.ids.push_back(ids.empty() ? i : ids.at(i));
    }
    return out;
}

GpHyperparams DklVaeModel::gp() const {
    return constrain(gp_raw, lengthscale_bound, jitter);
}

std::vector<double> DklVaeModel::normalize(std::span<const double> y) const {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        out[i] = (y[i] - target_offset) / target_scale;
    }
    return out;
}

DklVaeModel init_model(const VaeArchitecture& arch, const TrainConfig& cfg, std::span<const double> train_targets) {
    cfg.validate();
    if (train_targets.empty()) {
        throw Error(ErrorKind::data, "init_model: no training targets");
    }
    require_finite(train_targets, "training targets");
    DklVaeModel m;
    Rng init_rng = Rng(cfg.seed).split(0);
    m.vae = init_vae(arch, init_rng);
    m.lengthscale_bound = cfg.lengthscale_bound;
    m.jitter = cfg.jitter;
    if (cfg.normalize_targets) {
        m.target_offset = std::accumulate(train_targets.begin(), train_targets.end(), 0.0) /
                          static_cast<double>(train_targets.size());
        const double s = population_std(train_targets);
        m.target_scale = s > 0.0 ? s : 1.0;
    }
    const auto yn = m.normalize(train_targets);
    double ms = 0.0;
    for (double v : yn) ms += v * v;
    const double amplitude = std::max(std::sqrt(ms / static_cast<double>(yn.size())), 1e-3);

    GpHyperparams h;
    h.lengthscale_bound = cfg.lengthscale_bound;
    h.lengthscale = cfg.init_lengthscale.value_or(cfg.lengthscale_bound / 2.0);
    h.output_scale = amplitude;
    h.noise_variance = cfg.init_noise_fraction * amplitude * amplitude;
    h.jitter = cfg.jitter;
    m.gp_raw = unconstrain(h);

    m.vae_opt = {AdamState(m.vae.trunk.params.size()), AdamState(m.vae.mean_head.params.size()),
                 AdamState(m.vae.scale_head.params.size()), AdamState(m.vae.decoder.params.size())};
    m.dkl_opt = {AdamState(m.vae.trunk.params.size()), AdamState(m.vae.mean_head.params.size()), AdamState(3)};
    return m;
}

Rng epoch_rng(std::uint64_t seed, std::size_t epoch) {
    return Rng(seed).split(epoch);
}

EpochLosses train_epoch(DklVaeModel& model, const Matrix& x, std::span<const double> y, const TrainConfig& cfg,
                        Rng& rng, const TrainEpochOptions& options) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n == 0) {
        throw Error(ErrorKind::data, "train_epoch: empty training set");
    }
    if (y.size() != n) {
        throw Error(ErrorKind::shape, "train_epoch: " + std::to_string(n) + " data but " +
                                          std::to_string(y.size()) + " targets");
    }
    const std::size_t epoch = model.epoch + 1;
    EpochLosses losses;
    auto& vae = model.vae;

    if (options.run_vae_phase) {
        const auto order = random_permutation(rng, n);
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.vae_batch_size) {
            const std::size_t end = std::min(n, start + cfg.vae_batch_size);
            const std::span<const std::size_t> batch(order.data() + start, end - start);
            const Matrix xb = gather_rows(x, batch);
            const Matrix eps = sample_standard_normal(rng, batch.size(), vae.latent_dim());
            ElboResult r = elbo_loss_with_noise(vae, xb, eps);
            if (!std::isfinite(r.loss)) {
                throw Error(ErrorKind::numeric, "epoch " + std::to_string(epoch) + ": non-finite ELBO loss");
            }
            total += r.loss * static_cast<double>(batch.size());
            step_block(model.vae_opt[0], vae.trunk.params, r.grads.trunk, cfg.vae_lr);
            step_block(model.vae_opt[1], vae.mean_head.params, r.grads.mean_head, cfg.vae_lr);
            step_block(model.vae_opt[2], vae.scale_head.params, r.grads.scale_head, cfg.vae_lr);
            step_block(model.vae_opt[3], vae.decoder.params, r.grads.decoder, cfg.vae_lr);
        }
        losses.vae_loss = total / static_cast<double>(n);
    }

    if (options.run_dkl_phase) {
        Matrix xs;
        std::vector<double> ys;
        if (cfg.dkl_subset_size && *cfg.dkl_subset_size < n) {
            auto perm = random_permutation(rng, n);
            perm.resize(*cfg.dkl_subset_size);
            xs = gather_rows(x, perm);
            for (auto i : perm) ys.push_back(y[i]);
        } else {
            xs = x;
            ys.assign(y.begin(), y.end());
        }
        const auto yn = model.normalize(ys);

        auto trunk = forward(vae.trunk, xs);
        auto mean = forward(vae.mean_head, trunk.y);
        GpNllGradient g;
        try {
            g = gp_nll_grad(mean.y, yn, model.gp());
        } catch (const Error& e) {
            throw Error(e.kind(), "epoch " + std::to_string(epoch) + ": " + e.what());
        }
        losses.dkl_loss = g.nll / static_cast<double>(yn.size());

        const Matrix dz = g.dz * cfg.dkl_scale;
        auto mean_back = backward(vae.mean_head, mean.trace, dz);
        auto trunk_back = backward(vae.trunk, trunk.trace, mean_back.dx);
        const GpRawParams raw_grad = chain_to_raw(model.gp_raw, model.lengthscale_bound, g);
        const std::vector<double> gp_grad{raw_grad.raw_lengthscale * cfg.dkl_scale,
                                          raw_grad.raw_output_scale * cfg.dkl_scale,
                                          raw_grad.raw_noise * cfg.dkl_scale};
        std::vector<double> gp_params{model.gp_raw.raw_lengthscale, model.gp_raw.raw_output_scale,
                                      model.gp_raw.raw_noise};

        step_block(model.dkl_opt[0], vae.trunk.params, trunk_back.dparams, cfg.dkl_lr);
        step_block(model.dkl_opt[1], vae.mean_head.params, mean_back.dparams, cfg.dkl_lr);
        step_block(model.dkl_opt[2], gp_params, gp_grad, cfg.dkl_lr);
        model.gp_raw = {gp_params[0], gp_params[1], gp_params[2]};
    }

    model.epoch = epoch;
    return losses;
}

namespace {

FittedGp fit_latent_gp(const DklVaeModel& model, const Matrix& x_train, std::span<const double> y_train) {
    const auto yn = model.normalize(y_train);
    return FittedGp(embed(model.vae, x_train), yn, model.gp());
}

}  // namespace

LatentRegressor::LatentRegressor(const DklVaeModel& model, const Matrix& x_train, std::span<const double> y_train)
    : gp_(fit_latent_gp(model, x_train, y_train)),
      offset_(model.target_offset),
      scale_(model.target_scale),
      target_std_(population_std(y_train)) {
    if (!(target_std_ > 0.0)) target_std_ = 1.0;
}

GpPosterior LatentRegressor::predict_latent(const Matrix& z) const {
    GpPosterior post = gp_.predict(z);
    post.mean = (post.mean.array() * scale_ + offset_).matrix();
    post.variance *= scale_ * scale_;
    return post;
}

GpPosterior LatentRegressor::predict(const DklVaeModel& model, const Matrix& x) const {
    return predict_latent(embed(model.vae, x));
}

double LatentRegressor::mean_and_gradient(const Vector& z, Vector& gradient) const {
    const double m = gp_.mean_and_gradient(z, gradient);
    gradient *= scale_;
    return m * scale_ + offset_;
}

GpPosterior predict_target(const DklVaeModel& model, const Matrix& x, const LatentRegressor& regressor) {
    return regressor.predict(model, x);
}

std::vector<Candidate> generate_for_target(const DklVaeModel& model, const LatentRegressor& regressor,
                                           double target, std::size_t n, Rng& rng,
                                           const GenerateOptions& options) {
    if (n == 0 || options.restarts == 0) {
        return {};
    }
    const auto d = model.vae.latent_dim();
    const double inv_var = 1.0 / (regressor.target_std() * regressor.target_std());
    Matrix starts = sample_standard_normal(rng, options.restarts, d);
    Matrix finals(starts.rows(), starts.cols());
    Vector grad;
    for (Eigen::Index r = 0; r < starts.rows(); ++r) {
        Vector z = starts.row(r).transpose();
        for (std::size_t s = 0; s < options.steps; ++s) {
            const double m = regressor.mean_and_gradient(z, grad);
            z -= options.step_size * (2.0 * (m - target) * inv_var) * grad;
        }
        finals.row(r) = z.transpose();
    }
    const GpPosterior post = regressor.predict_latent(finals);
    std::vector<std::size_t> order(static_cast<std::size_t>(finals.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ea = std::abs(post.mean[static_cast<Eigen::Index>(a)] - target);
        const double eb = std::abs(post.mean[static_cast<Eigen::Index>(b)] - target);
        if (ea != eb) return ea < eb;
        return post.variance[static_cast<Eigen::Index>(a)] < post.variance[static_cast<Eigen::Index>(b)];
    });
    order.resize(std::min(n, order.size()));

    std::vector<Candidate> out;
    for (auto i : order) {
        const auto r = static_cast<Eigen::Index>(i);
        Candidate c;
        c.z = finals.row(r).transpose();
        c.decoded = decode(model.vae, finals.row(r)).probabilities;
        c.prediction = post.mean[r];
        c.variance = post.variance[r];
        out.push_back(std::move(c));
    }
    return out;
}

Matrix datum_matrix(const Dataset& data, std::size_t i) {
    const auto r = static_cast<Eigen::Index>(data.rows);
    const auto c = static_cast<Eigen::Index>(data.cols);
    return Eigen::Map<const Matrix>(data.x.row(static_cast<Eigen::Index>(i)).data(), r, c);
}

std::vector<double> reconstruction_ssim(const DklVaeModel& model, const Dataset& data) {
    std::vector<double> scores;
    if (data.empty()) return scores;
    const Matrix probs = decode(model.vae, embed(model.vae, data.x)).probabilities;
    std::vector<float> a(static_cast<std::size_t>(data.x.cols()));
    std::vector<float> b(a.size());
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
            a[static_cast<std::size_t>(j)] = static_cast<float>(data.x(i, j));
            b[static_cast<std::size_t>(j)] = static_cast<float>(probs(i, j));
        }
        scores.push_back(ssim(a, b, data.cols, data.rows));
    }
    return scores;
}

std::vector<Matrix> reconstruct_onehot(const DklVaeModel& model, const Dataset& data) {
    std::vector<Matrix> out;
    if (data.empty()) return out;
    const Matrix logits = decode(model.vae, embed(model.vae, data.x)).logits;
    const auto r = static_cast<Eigen::Index>(data.rows);
    const auto c = static_cast<Eigen::Index>(data.cols);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const Matrix l = Eigen::Map<const Matrix>(logits.row(i).data(), r, c);
        const auto best = sequences::row_argmax(sequences::row_softmax(l));
        Matrix onehot = Matrix::Zero(r, c);
        for (std::size_t k = 0; k < best.size(); ++k) {
            onehot(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(best[k])) = 1.0;
        }
        out.push_back(std::move(onehot));
    }
    return out;
}

Evaluation evaluate(const DklVaeModel& model, const Dataset& train, const Dataset& test) {
    if (test.empty()) {
        throw Error(ErrorKind::data, "evaluate: empty test set");
    }
    const LatentRegressor regressor(model, train.x, train.y);
    const GpPosterior post = regressor.predict(model, test.x);
    Evaluation ev;
    ev.predictions.assign(post.mean.data(), post.mean.data() + post.mean.size());
    ev.variances.assign(post.variance.data(), post.variance.data() + post.variance.size());
    ev.rmse = rmse(test.y, ev.predictions);
    const bool constant =
        std::all_of(test.y.begin(), test.y.end(), [&](double v) { return v == test.y.front(); });
    if (test.size() >= 2 && !constant) {
        ev.r2 = r2(test.y, ev.predictions);
    }
    if (test.kind == DataKind::images) {
        const auto s = reconstruction_ssim(model, test);
        ev.reconstruction = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    } else {
        const auto rec = reconstruct_onehot(model, test);
        std::vector<OneHotPair> pairs;
        for (std::size_t i = 0; i < rec.size(); ++i) {
            pairs.emplace_back(datum_matrix(test, i), rec[i]);
        }
        ev.reconstruction = exact_match_rate(pairs);
    }
    return ev;
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out << kHistoryFormat << "\nepoch,vae_loss,dkl_loss,test_rmse,test_r2,test_match_or_ssim\n";
    for (const auto& r : rows) {
        out << r.epoch << ',' << format_double(r.vae_loss) << ',' << format_double(r.dkl_loss) << ','
            << optional_field(r.test_rmse) << ',' << optional_field(r.test_r2) << ','
            << optional_field(r.test_reconstruction) << '\n';
    }
    if (!out) {
        throw Error(ErrorKind::io, "write failed for " + path.string());
    }
}

void TrainHistory::write_timing_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out << "epoch,seconds\n";
    for (const auto& r : rows) {
        out << r.epoch << ',' << format_double(r.seconds) << '\n';
    }
}

TrainHistory TrainHistory::read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != kHistoryFormat) {
        throw Error(ErrorKind::format, path.string() + ": not a history file (bad version line)");
    }
    std::getline(in, line);
    TrainHistory h;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 6) {
            throw Error(ErrorKind::format, path.string() + ": expected 6 fields in '" + line + "'");
        }
        HistoryRow r;
        r.epoch = parse_u64(f[0]);
        r.vae_loss = parse_double(f[1]);
        r.dkl_loss = parse_double(f[2]);
        r.test_rmse = parse_optional(f[3]);
        r.test_r2 = parse_optional(f[4]);
        r.test_reconstruction = parse_optional(f[5]);
        h.rows.push_back(r);
    }
    return h;
}

FitResult fit(const TrainConfig& cfg, const VaeArchitecture& arch, const Dataset& train, const Dataset& test,
              FitOptions options) {
    cfg.validate();
    arch.validate();
    if (train.empty()) {
        throw Error(ErrorKind::data, "fit: empty training set");
    }
    if (static_cast<std::size_t>(train.x.cols()) != arch.data_dim) {
        throw Error(ErrorKind::shape, "fit: data has " + std::to_string(train.x.cols()) +
                                          " features but the architecture expects " +
                                          std::to_string(arch.data_dim));
    }
    FitResult result;
    if (options.resume) {
        result.model = std::move(*options.resume);
        if (!(result.model.vae.arch == arch)) {
            throw Error(ErrorKind::config, "fit: resumed model has a different architecture");
        }
    } else {
        result.model = init_model(arch, cfg, train.y);
    }
    auto& model = result.model;
    using clock = std::chrono::steady_clock;
    for (std::size_t e = model.epoch + 1; e <= cfg.epochs; ++e) {
        const auto t0 = clock::now();
        Rng rng = epoch_rng(cfg.seed, e);
        const EpochLosses losses = train_epoch(model, train.x, train.y, cfg, rng);
        HistoryRow row;
        row.epoch = e;
        row.vae_loss = losses.vae_loss;
        row.dkl_loss = losses.dkl_loss;
        if (e % cfg.eval_every == 0 && !test.empty()) {
            const Evaluation ev = evaluate(model, train, test);
            row.test_rmse = ev.rmse;
            row.test_r2 = ev.r2;
            row.test_reconstruction = ev.reconstruction;
        }
        row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        result.history.rows.push_back(row);
        if (options.on_epoch) options.on_epoch(model, row);
    }
    return result;
}

}  // namespace dklvae
