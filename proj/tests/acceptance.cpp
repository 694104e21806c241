// Acceptance runner: one PASS/FAIL line per criterion and scope.
//
// Groups:
//   core        numerical oracles, trainer invariants, format invariants
//   cards-desk  card split experiment from recipes/cards-split-small.json
//   cards-full  card split experiment from recipes/cards-split.json
//   sequences   synthetic sequence experiment from recipes/sequences-synthetic.json
//
// Exit status is nonzero when any evaluated criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dklvae/harness.hpp"
#include "oracle.hpp"

using namespace dklvae;
namespace fs = std::filesystem;

namespace {

// ---- pinned thresholds ----------------------------------------------------

constexpr double kOracleRelTol = 1e-8;
constexpr double kGradRelTol = 1e-4;
// Components smaller than this are compared on an absolute scale of
// kGradRelTol * kGradFloor, where central differences lose relative accuracy.
constexpr double kGradFloor = 1e-3;
constexpr double kFdStep = 1e-5;
constexpr double kKlMcTol = 1e-2;
constexpr int kKlSamples = 1'000'000;
constexpr double kCoreBudgetSeconds = 60.0;

constexpr double kFullRmse = 1.5;
constexpr double kFullR2 = 0.90;
constexpr double kDeskRmse = 2.5;
constexpr double kDeskR2 = 0.85;
constexpr double kDeskBudgetSeconds = 15.0 * 60.0;

constexpr double kSsimMean = 0.65;
constexpr double kSsimP10 = 0.5;

constexpr double kHullMargin = 2.0;
constexpr double kHullFraction = 0.90;

constexpr double kSeqExactMatch = 0.5;
constexpr double kSeqRmseFraction = 0.10;
constexpr double kSeqFewErrors = 0.85;
constexpr std::size_t kSeqErrorLimit = 3;  // strictly fewer row errors than this
constexpr double kSeqBudgetSeconds = 60.0 * 60.0;

// ---- reporting ------------------------------------------------------------

int g_failures = 0;

void line(int criterion, const std::string& scope, bool pass, const std::string& detail) {
    if (!pass) ++g_failures;
    std::cout << "criterion " << criterion << " [" << scope << "]: " << (pass ? "PASS" : "FAIL") << "  " << detail
              << std::endl;
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<double>> rows_of(const Matrix& z) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index i = 0; i < z.rows(); ++i) out.emplace_back(z.row(i).data(), z.row(i).data() + z.cols());
    return out;
}

GpHyperparams hyper(double l, double a, double noise) {
    GpHyperparams h;
    h.lengthscale = l;
    h.output_scale = a;
    h.noise_variance = noise;
    return h;
}

// Tracks the worst relative mismatch of a family of comparisons.
struct Worst {
    double rel = 0.0;
    std::size_t count = 0;
    bool ok = true;

    void add(double got, double want, double tol, double floor) {
        const double scale = std::max({std::abs(got), std::abs(want), floor});
        rel = std::max(rel, std::abs(got - want) / scale);
        ok = ok && oracle::close_rel(got, want, tol, floor);
        ++count;
    }
};

// ---- criterion 1 ----------------------------------------------------------

void check_gp_oracles() {
    Rng rng(8101);
    Worst nll;
    Worst post;
    for (int t = 0; t < 200; ++t) {
        const auto n = 1 + rng.uniform_index(5);
        const auto d = 1 + rng.uniform_index(3);
        const Matrix z = sample_standard_normal(rng, n, d);
        const Matrix zs = sample_standard_normal(rng, 3, d);
        const auto y = sample_standard_normal(rng, n);
        const GpHyperparams h = hyper(rng.uniform(0.3, 3.0), rng.uniform(0.5, 2.0), rng.uniform(0.05, 1.0));
        const double diag = factor_kernel(z, h).diagonal;
        nll.add(gp_nll(z, y, h), oracle::gp_nll(rows_of(z), y, h.lengthscale, h.output_scale, diag), kOracleRelTol,
                1e-12);
        const auto want =
            oracle::gp_posterior(rows_of(z), y, rows_of(zs), h.lengthscale, h.output_scale, h.noise_variance, diag);
        const GpPosterior got = gp_predict(z, y, zs, h);
        for (Eigen::Index i = 0; i < 3; ++i) {
            const auto k = static_cast<std::size_t>(i);
            post.add(got.mean[i], want.mean[k], kOracleRelTol, 1e-12);
            post.add(got.variance[i], want.variance[k], kOracleRelTol, 1e-12);
        }
    }
    line(1, "gp nll vs dense oracle", nll.ok,
         "200 instances n<=5, max rel err " + fmt(nll.rel, 3) + " (tol " + fmt(kOracleRelTol) + ")");
    line(1, "gp posterior vs dense oracle", post.ok,
         std::to_string(post.count) + " values, max rel err " + fmt(post.rel, 3) + " (tol " + fmt(kOracleRelTol) +
             ")");
}

double weighted_sum(const Matrix& y, const Matrix& w) {
    return (y.array() * w.array()).sum();
}

void check_mlp_gradients() {
    Worst worst;
    Rng rng(8102);
    for (Activation out : {Activation::identity, Activation::tanh, Activation::softplus, Activation::sigmoid}) {
        const std::vector<LayerSpec> spec{{4, 6, Activation::tanh}, {6, 5, Activation::tanh}, {5, 3, out}};
        MlpModel m = init_mlp(spec, rng);
        for (auto& p : m.params) p += 0.1 * rng.normal();
        const Matrix x = sample_standard_normal(rng, 5, 4);
        const Matrix w = sample_standard_normal(rng, 5, 3);
        const auto g = backward(m, forward(m, x).trace, w);
        auto by_params = [&](std::vector<double> p) {
            MlpModel c = m;
            c.params = std::move(p);
            return weighted_sum(forward(c, x).y, w);
        };
        for (std::size_t i = 0; i < m.params.size(); ++i) {
            worst.add(g.dparams[i], oracle::central_difference(by_params, m.params, i, kFdStep), kGradRelTol,
                      kGradFloor);
        }
        std::vector<double> xv(x.data(), x.data() + x.size());
        auto by_x = [&](std::vector<double> v) {
            return weighted_sum(forward(m, Eigen::Map<Matrix>(v.data(), 5, 4)).y, w);
        };
        for (std::size_t i = 0; i < xv.size(); ++i) {
            worst.add(g.dx.data()[i], oracle::central_difference(by_x, xv, i, kFdStep), kGradRelTol, kGradFloor);
        }
    }
    line(1, "mlp backward vs finite differences", worst.ok,
         std::to_string(worst.count) + " components, max rel err " + fmt(worst.rel, 3));
}

void check_elbo_gradients() {
    Worst worst;
    Rng rng(8103);
    const VaeArchitecture arch{6, {5}, {5}, 2};
    const VaeModel m = init_vae(arch, rng);
    Matrix x(4, 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
    const Matrix eps = sample_standard_normal(rng, 4, 2);
    const ElboResult r = elbo_loss_with_noise(m, x, eps);

    std::vector<double> p0;
    std::vector<double> analytic;
    for (const MlpModel* b : {&m.trunk, &m.mean_head, &m.scale_head, &m.decoder}) {
        p0.insert(p0.end(), b->params.begin(), b->params.end());
    }
    for (const auto* g : {&r.grads.trunk, &r.grads.mean_head, &r.grads.scale_head, &r.grads.decoder}) {
        analytic.insert(analytic.end(), g->begin(), g->end());
    }
    auto loss = [&](std::vector<double> p) {
        VaeModel c = m;
        std::size_t off = 0;
        for (MlpModel* b : {&c.trunk, &c.mean_head, &c.scale_head, &c.decoder}) {
            std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(off), b->params.size(), b->params.begin());
            off += b->params.size();
        }
        return elbo_loss_with_noise(c, x, eps).loss;
    };
    for (std::size_t i = 0; i < p0.size(); ++i) {
        worst.add(analytic[i], oracle::central_difference(loss, p0, i, kFdStep), kGradRelTol, kGradFloor);
    }
    line(1, "elbo gradients vs finite differences", worst.ok && analytic.size() == p0.size(),
         std::to_string(worst.count) + " components, max rel err " + fmt(worst.rel, 3));
}

void check_gp_gradients() {
    Worst worst;
    for (int t = 0; t < 6; ++t) {
        Rng rng(8200 + static_cast<std::uint64_t>(t));
        const std::size_t n = 3 + rng.uniform_index(6);
        const Matrix z = sample_standard_normal(rng, n, 2);
        const auto y = sample_standard_normal(rng, n);
        const GpHyperparams h = hyper(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.05, 0.5));
        const GpNllGradient g = gp_nll_grad(z, y, h);
        std::vector<double> zv(z.data(), z.data() + z.size());
        auto by_z = [&](std::vector<double> v) {
            return gp_nll(Eigen::Map<Matrix>(v.data(), static_cast<Eigen::Index>(n), 2), y, h);
        };
        for (std::size_t i = 0; i < zv.size(); ++i) {
            worst.add(g.dz.data()[i], oracle::central_difference(by_z, zv, i, kFdStep), kGradRelTol, kGradFloor);
        }
        auto by_h = [&](std::vector<double> v) { return gp_nll(z, y, hyper(v[0], v[1], v[2])); };
        const std::vector<double> hv{h.lengthscale, h.output_scale, h.noise_variance};
        const double analytic[] = {g.d_lengthscale, g.d_output_scale, g.d_noise_variance};
        for (std::size_t i = 0; i < 3; ++i) {
            worst.add(analytic[i], oracle::central_difference(by_h, hv, i, kFdStep), kGradRelTol, kGradFloor);
        }
        const GpRawParams raw = unconstrain(h);
        const GpRawParams gr = chain_to_raw(raw, h.lengthscale_bound, g);
        auto by_raw = [&](std::vector<double> v) {
            return gp_nll(z, y, constrain({v[0], v[1], v[2]}, h.lengthscale_bound, h.jitter));
        };
        const std::vector<double> rv{raw.raw_lengthscale, raw.raw_output_scale, raw.raw_noise};
        const double raw_analytic[] = {gr.raw_lengthscale, gr.raw_output_scale, gr.raw_noise};
        for (std::size_t i = 0; i < 3; ++i) {
            worst.add(raw_analytic[i], oracle::central_difference(by_raw, rv, i, kFdStep), kGradRelTol, kGradFloor);
        }
    }
    line(1, "gp_nll_grad vs finite differences", worst.ok,
         std::to_string(worst.count) + " components, max rel err " + fmt(worst.rel, 3));
}

void check_kl_monte_carlo() {
    Rng rng(8104);
    LatentGaussian g{Vector(3), Vector(3)};
    g.mu << 0.4, -1.1, 0.2;
    g.sigma << 0.6, 1.3, 0.9;
    double acc = 0.0;
    for (int s = 0; s < kKlSamples; ++s) {
        double log_ratio = 0.0;
        for (Eigen::Index k = 0; k < 3; ++k) {
            const double e = rng.normal();
            const double z = g.mu[k] + g.sigma[k] * e;
            log_ratio += -0.5 * e * e - std::log(g.sigma[k]) + 0.5 * z * z;
        }
        acc += log_ratio;
    }
    const double mc = acc / kKlSamples;
    const double closed = kl_diag_gaussian(g);
    line(1, "kl vs monte carlo", std::abs(mc - closed) <= kKlMcTol,
         "closed form " + fmt(closed, 6) + ", 1e6-sample estimate " + fmt(mc, 6));
}

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    check_gp_oracles();
    check_mlp_gradients();
    check_elbo_gradients();
    check_gp_gradients();
    check_kl_monte_carlo();
    const double s = seconds_since(t0);
    line(1, "oracle runtime", s < kCoreBudgetSeconds, fmt(s, 3) + " s (budget " + fmt(kCoreBudgetSeconds) + " s)");
}

// ---- criterion 6 ----------------------------------------------------------

ExperimentConfig small_card_config(std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.dataset.n = 120;
    cfg.split = RangeSplit{{{-30, 0}, {15, 30.0001}}, Interval{0, 15}};
    cfg.model.encoder_hidden = {32};
    cfg.model.decoder_hidden = {32};
    cfg.train.epochs = 6;
    cfg.train.vae_batch_size = 20;
    cfg.train.eval_every = 3;
    cfg.train.seed = seed;
    return cfg;
}

void criterion_6(const fs::path& work) {
    const ExperimentConfig cfg = small_card_config(606);
    const fs::path data = work / "c6-data";
    cmd_gen_cards(cfg, data);
    const Dataset all = load_training_data(data);
    const SplitData split = split_dataset(all, cfg.split);
    const VaeArchitecture arch = cfg.architecture(all.x.cols());

    {
        TrainConfig tc = cfg.train;
        tc.dkl_scale = 0.0;
        DklVaeModel m = init_model(arch, tc, split.train.y);
        for (std::size_t e = 1; e <= 2; ++e) {
            Rng r = epoch_rng(tc.seed, e);
            train_epoch(m, split.train.x, split.train.y, tc, r, {true, false});
        }
        m.dkl_opt = {AdamState(m.vae.trunk.params.size()), AdamState(m.vae.mean_head.params.size()), AdamState(3)};
        const DklVaeModel before = m;
        for (std::size_t e = 3; e <= 5; ++e) {
            Rng r = epoch_rng(tc.seed, e);
            train_epoch(m, split.train.x, split.train.y, tc, r, {false, true});
        }
        const bool same = m.vae.trunk.params == before.vae.trunk.params &&
                          m.vae.mean_head.params == before.vae.mean_head.params &&
                          m.vae.scale_head.params == before.vae.scale_head.params;
        line(6, "dkl_scale 0 leaves encoder bit-identical", same, "3 phase-2 steps after 2 VAE epochs");
    }
    {
        DklVaeModel m = init_model(arch, cfg.train, split.train.y);
        bool untouched = true;
        for (std::size_t e = 1; e <= 4; ++e) {
            Rng r1 = epoch_rng(cfg.train.seed, e);
            train_epoch(m, split.train.x, split.train.y, cfg.train, r1, {true, false});
            const DklVaeModel before = m;
            Rng r2 = epoch_rng(cfg.train.seed, 100 + e);
            train_epoch(m, split.train.x, split.train.y, cfg.train, r2, {false, true});
            untouched = untouched && m.vae.decoder.params == before.vae.decoder.params &&
                        m.vae.trunk.params != before.vae.trunk.params;
        }
        line(6, "phase 2 never touches the decoder", untouched, "4 interleaved epochs, encoder moved each time");
    }
    {
        const fs::path a = work / "c6-run-a";
        const fs::path b = work / "c6-run-b";
        fs::remove_all(a);
        fs::remove_all(b);
        cmd_train(cfg, data, a);
        cmd_train(cfg, data, b);
        bool same = true;
        std::string which;
        for (const char* f : {"history.csv", "checkpoint/manifest.txt", "checkpoint/params.bin",
                              "checkpoint/optimizer.bin"}) {
            if (slurp(a / f) != slurp(b / f) || slurp(a / f).empty()) {
                same = false;
                which += std::string(" ") + f;
            }
        }
        line(6, "same-seed runs byte-identical", same,
             same ? "history.csv and checkpoint files match" : "differ:" + which);
    }
}

// ---- criterion 7 ----------------------------------------------------------

void criterion_7(const fs::path& work) {
    {
        bool exact = true;
        for (cards::Suit s : cards::kAllSuits) {
            const auto g = cards::render_suit_glyph(s);
            exact = exact && cards::affine_transform(g, 0.0, 0.0, 0.0, 0.0) == g;
        }
        Rng rng(707);
        cards::Image noise(cards::kPixels);
        for (auto& v : noise) v = rng.uniform() < 0.5 ? 0.0f : 1.0f;
        exact = exact && cards::affine_transform(noise, 0.0, 0.0, 0.0, 0.0) == noise;
        line(7, "card identity transform bit-exact", exact, "4 glyphs and a random binary image");
    }
    {
        const auto alphabet = sequences::synthetic_alphabet(27);
        Rng rng(708);
        int ok = 0;
        for (int t = 0; t < 10000; ++t) {
            const std::size_t len = rng.uniform_index(22);
            std::vector<std::string> tokens;
            for (std::size_t i = 0; i < len; ++i) tokens.push_back(alphabet.token(rng.uniform_index(26)));
            const Matrix enc = sequences::one_hot_encode(tokens, alphabet, 21);
            const auto dec = sequences::one_hot_decode(enc, alphabet);
            ok += dec.tokens == tokens && dec.onehot == enc;
        }
        line(7, "one-hot round trip", ok == 10000, std::to_string(ok) + "/10000 random valid sequences");
    }
    {
        const ExperimentConfig cfg = small_card_config(707);
        const fs::path run = work / "c7-run";
        fs::remove_all(run);
        cmd_gen_cards(cfg, work / "c7-cards");
        cmd_train(cfg, work / "c7-cards", run);
        CheckpointInfo info;
        const DklVaeModel m = load_checkpoint(run / "checkpoint", &info);
        save_checkpoint(work / "c7-ckpt", m, info);
        bool same = true;
        for (const char* f : {"manifest.txt", "params.bin", "optimizer.bin"}) {
            same = same && slurp(run / "checkpoint" / f) == slurp(work / "c7-ckpt" / f);
        }
        const DklVaeModel n = load_checkpoint(work / "c7-ckpt");
        same = same && n.vae.trunk.params == m.vae.trunk.params && n.vae.decoder.params == m.vae.decoder.params &&
               n.gp_raw == m.gp_raw && n.epoch == m.epoch && n.dkl_opt[2].v == m.dkl_opt[2].v;
        line(7, "checkpoint round trip bit-exact", same, "save, load, save again");

        const CardDatasetFile cards_in = load_card_dataset(work / "c7-cards");
        save_card_dataset(work / "c7-cards-copy", cards_in);
        const CardDatasetFile cards_back = load_card_dataset(work / "c7-cards-copy");
        bool cards_same = cards_back.samples == cards_in.samples && cards_back.seed == cards_in.seed;
        for (const char* f : {"manifest.txt", "images.f32", "labels.csv"}) {
            cards_same = cards_same && slurp(work / "c7-cards" / f) == slurp(work / "c7-cards-copy" / f);
        }

        ExperimentConfig seq = cfg;
        seq.dataset.kind = DatasetKind::sequences_synthetic;
        seq.dataset.n = 300;
        cmd_gen_sequences(seq, work / "c7-seq");
        const SequenceDatasetFile seq_in = load_sequence_dataset(work / "c7-seq");
        save_sequence_dataset(work / "c7-seq-copy", seq_in);
        const SequenceDatasetFile seq_back = load_sequence_dataset(work / "c7-seq-copy");
        const bool seq_same = seq_back.samples == seq_in.samples && seq_back.alphabet == seq_in.alphabet &&
                              seq_back.raw_min == seq_in.raw_min && seq_back.raw_max == seq_in.raw_max &&
                              slurp(work / "c7-seq" / "sequences.csv") == slurp(work / "c7-seq-copy" / "sequences.csv");
        line(7, "dataset round trips bit-exact", cards_same && seq_same,
             std::string("cards ") + (cards_same ? "ok" : "mismatch") + ", sequences " +
                 (seq_same ? "ok" : "mismatch"));

        std::size_t exact = 0;
        const auto& sc = *seq_in.synthetic;
        for (const auto& s : seq_in.samples) {
            std::vector<std::size_t> idx;
            for (const auto& t : s.tokens) idx.push_back(*seq_in.alphabet.index_of(t));
            double raw = oracle::synthetic_weight(idx[0]);
            for (std::size_t i = 1; i < idx.size(); ++i) {
                raw += oracle::synthetic_bonus(idx[i - 1], idx[i]) + oracle::synthetic_weight(idx[i]);
            }
            const double want = sc.target_lo + (raw - seq_in.raw_min) * (sc.target_hi - sc.target_lo) /
                                                   (seq_in.raw_max - seq_in.raw_min);
            exact += s.target == want;
        }
        line(7, "synthetic targets recompute exactly", exact == seq_in.samples.size(),
             std::to_string(exact) + "/" + std::to_string(seq_in.samples.size()) + " after a save/load cycle");
    }
}

// ---- experiments ----------------------------------------------------------

struct TrainedRun {
    ExperimentConfig cfg;
    fs::path data;
    fs::path run;
    double train_seconds = 0.0;
    DklVaeModel model;
    SplitData split;
};

TrainedRun train_recipe(const fs::path& recipe, const fs::path& work, const std::string& name, bool reuse) {
    TrainedRun r;
    r.cfg = load_config(recipe);
    r.data = work / (name + "-data");
    r.run = work / (name + "-run");
    if (!fs::exists(r.data / "manifest.txt")) {
        if (r.cfg.dataset.kind == DatasetKind::cards) {
            cmd_gen_cards(r.cfg, r.data);
        } else {
            cmd_gen_sequences(r.cfg, r.data);
        }
    }
    bool trained = false;
    if (reuse && fs::exists(r.run / "checkpoint" / "manifest.txt")) {
        CheckpointInfo info;
        const DklVaeModel m = load_checkpoint(r.run / "checkpoint", &info);
        if (info.config_hash == config_hash(r.cfg) && m.epoch == r.cfg.train.epochs) {
            r.model = m;
            const auto timing = slurp(r.run / "timing.csv");
            std::istringstream in(timing);
            std::string row;
            while (std::getline(in, row)) {
                const auto comma = row.find(',');
                if (row.empty() || row[0] == '#' || comma == std::string::npos) continue;
                try {
                    r.train_seconds += std::stod(row.substr(comma + 1));
                } catch (const std::exception&) {
                }
            }
            trained = true;
            std::cout << "reusing " << r.run << " (" << fmt(r.train_seconds, 4) << " s recorded)" << std::endl;
        }
    }
    if (!trained) {
        fs::remove_all(r.run);
        const auto t0 = std::chrono::steady_clock::now();
        cmd_train(r.cfg, r.data, r.run);
        r.train_seconds = seconds_since(t0);
        r.model = load_checkpoint(r.run / "checkpoint");
    }
    r.split = split_dataset(load_training_data(r.data), r.cfg.split);
    return r;
}

void card_experiment(const fs::path& recipe, const fs::path& work, const std::string& scope, bool desk,
                     bool reuse) {
    const TrainedRun r = train_recipe(recipe, work, "cards-" + scope, reuse);
    const MetricReport report = cmd_eval(r.cfg, r.run / "checkpoint", r.data, EvalSubset::test, r.run / "eval-test");
    const Evaluation ev = evaluate(r.model, r.split.train, r.split.test);
    const double rmse_v = report.find("rmse", "all").value;
    const double r2_v = report.find("r2", "all").value;

    std::string suits;
    for (cards::Suit s : cards::kAllSuits) {
        const std::string name = cards::to_string(s);
        suits += " " + name + " " + fmt(report.find("rmse", name).value, 3);
    }
    const double max_rmse = desk ? kDeskRmse : kFullRmse;
    const double min_r2 = desk ? kDeskR2 : kFullR2;
    line(2, scope + " angle regression", rmse_v <= max_rmse && r2_v >= min_r2,
         "test rmse " + fmt(rmse_v) + " (<= " + fmt(max_rmse) + "), r2 " + fmt(r2_v) + " (>= " + fmt(min_r2) +
             "), n " + std::to_string(r.split.test.size()) + ", per-suit rmse" + suits);
    if (desk) {
        line(2, scope + " runtime", r.train_seconds <= kDeskBudgetSeconds,
             fmt(r.train_seconds, 4) + " s training (budget " + fmt(kDeskBudgetSeconds) + " s)");
    } else {
        std::cout << "note: " << scope << " training took " << fmt(r.train_seconds, 5) << " s" << std::endl;
    }

    const std::vector<double> ssim = reconstruction_ssim(r.model, r.split.test);
    double mean = 0.0;
    std::map<std::string, std::pair<double, int>> per;
    for (std::size_t i = 0; i < ssim.size(); ++i) {
        mean += ssim[i];
        auto& acc = per[r.split.test.groups[i]];
        acc.first += ssim[i];
        ++acc.second;
    }
    mean /= static_cast<double>(ssim.size());
    const double p10 = quantile(ssim, 0.1);
    std::vector<std::pair<double, std::string>> order;
    for (const auto& [g, acc] : per) order.emplace_back(acc.first / acc.second, g);
    std::sort(order.begin(), order.end());
    std::string ordering;
    for (const auto& [v, g] : order) ordering += " " + g + " " + fmt(v, 3);
    line(3, scope + " reconstruction ssim", mean >= kSsimMean && p10 >= kSsimP10,
         "test mean " + fmt(mean) + " (>= " + fmt(kSsimMean) + "), p10 " + fmt(p10) + " (>= " + fmt(kSsimP10) +
             "), per suit worst first:" + ordering);

    const auto [lo_it, hi_it] = std::minmax_element(r.split.test.y.begin(), r.split.test.y.end());
    const double lo = *lo_it - kHullMargin;
    const double hi = *hi_it + kHullMargin;
    std::size_t inside = 0;
    for (double p : ev.predictions) inside += p >= lo && p <= hi;
    const double frac = static_cast<double>(inside) / static_cast<double>(ev.predictions.size());
    line(4, scope + " predictions stay in the band", frac >= kHullFraction,
         fmt(100.0 * frac, 4) + "% of test predictions in [" + fmt(lo) + ", " + fmt(hi) + "] (>= " +
             fmt(100.0 * kHullFraction) + "%)");
}

void sequence_experiment(const fs::path& recipe, const fs::path& work, bool reuse) {
    const TrainedRun r = train_recipe(recipe, work, "sequences", reuse);
    const MetricReport report = cmd_eval(r.cfg, r.run / "checkpoint", r.data, EvalSubset::test, r.run / "eval-test");
    const double match = report.find("exact_match", "all").value;
    const double rmse_v = report.find("rmse", "all").value;
    const auto& sc = r.cfg.dataset.synthetic;
    const double rmse_cap = kSeqRmseFraction * (sc.target_hi - sc.target_lo);

    const std::vector<Matrix> recon = reconstruct_onehot(r.model, r.split.test);
    std::size_t few = 0;
    for (std::size_t i = 0; i < recon.size(); ++i) {
        few += row_errors(recon[i], datum_matrix(r.split.test, i)) < kSeqErrorLimit;
    }
    const double few_frac = static_cast<double>(few) / static_cast<double>(recon.size());

    line(5, "sequences exact match", match >= kSeqExactMatch,
         "test exact-match " + fmt(match) + " (>= " + fmt(kSeqExactMatch) + "), n " +
             std::to_string(r.split.test.size()));
    line(5, "sequences target rmse", rmse_v <= rmse_cap,
         "test rmse " + fmt(rmse_v) + " (<= " + fmt(rmse_cap) + ", 10% of the target range), r2 " +
             fmt(report.find("r2", "all").value));
    line(5, "sequences near-misses", few_frac >= kSeqFewErrors,
         fmt(100.0 * few_frac, 4) + "% of test reconstructions with < " + std::to_string(kSeqErrorLimit) +
             " row errors (>= " + fmt(100.0 * kSeqFewErrors) + "%)");
    line(5, "sequences runtime", r.train_seconds <= kSeqBudgetSeconds,
         fmt(r.train_seconds, 4) + " s training with dkl_subset_size " +
             (r.cfg.train.dkl_subset_size ? std::to_string(*r.cfg.train.dkl_subset_size) : "unset") + " (budget " +
             fmt(kSeqBudgetSeconds) + " s)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DKL-VAE acceptance runner"};
    std::vector<std::string> groups{"core"};
    fs::path recipes = DKLVAE_RECIPE_DIR;
    fs::path work = fs::temp_directory_path() / "dklvae-acceptance";
    bool reuse = false;
    app.add_option("--group", groups, "core, cards-desk, cards-full, sequences or all")->delimiter(',');
    app.add_option("--recipes", recipes, "directory holding the recipe files");
    app.add_option("--work", work, "scratch directory for datasets and runs");
    app.add_flag("--reuse", reuse, "reuse a finished run in the work directory if its config hash matches");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::string> known{"core", "cards-desk", "cards-full", "sequences"};
    if (std::find(groups.begin(), groups.end(), "all") != groups.end()) groups = known;
    for (const auto& g : groups) {
        if (std::find(known.begin(), known.end(), g) == known.end()) {
            std::cerr << "unknown group '" << g << "'\n";
            return 2;
        }
    }
    try {
        fs::create_directories(work);
        for (const auto& g : groups) {
            if (g == "core") {
                criterion_1();
                criterion_6(work);
                criterion_7(work);
            } else if (g == "cards-desk") {
                card_experiment(recipes / "cards-split-small.json", work, "desk", true, reuse);
            } else if (g == "cards-full") {
                card_experiment(recipes / "cards-split.json", work, "full", false, reuse);
            } else {
                sequence_experiment(recipes / "sequences-synthetic.json", work, reuse);
            }
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return 2;
    }
    std::cout << (g_failures == 0 ? "all evaluated criteria passed" : std::to_string(g_failures) + " check(s) failed")
              << std::endl;
    return g_failures == 0 ? 0 : 1;
}
