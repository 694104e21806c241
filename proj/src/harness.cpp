#include "dklvae/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "dklvae/textio.hpp"

namespace dklvae {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kGenerateStream = (std::uint64_t{1} << 40) + 1;

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) {
        throw Error(ErrorKind::io, "write failed for " + path.string());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_output(path);
    out << text;
    finish_output(out, path);
}

std::vector<std::pair<std::size_t, std::string>> read_timing(const fs::path& path) {
    std::vector<std::pair<std::size_t, std::string>> rows;
    std::ifstream in(path, std::ios::binary);
    std::string line;
    if (!in || !std::getline(in, line)) return rows;
    while (std::getline(in, line)) {
        const auto f = split_csv_line(line);
        if (f.size() == 2) rows.emplace_back(parse_u64(f[0]), f[1]);
    }
    return rows;
}

void check_compatible(const DklVaeModel& model, const Dataset& data, const fs::path& checkpoint) {
    if (static_cast<std::size_t>(data.x.cols()) != model.vae.data_dim()) {
        throw Error(ErrorKind::format, checkpoint.string() + ": model expects " +
                                           std::to_string(model.vae.data_dim()) + " features, dataset has " +
                                           std::to_string(data.x.cols()));
    }
}

std::string latent_header(std::size_t d) {
    std::string h;
    for (std::size_t k = 1; k <= d; ++k) h += ",z_" + std::to_string(k);
    return h;
}

}  // namespace

void cmd_gen_cards(const ExperimentConfig& cfg, const fs::path& out) {
    if (cfg.dataset.kind != DatasetKind::cards) {
        throw Error(ErrorKind::config, "gen-cards needs dataset.kind = cards");
    }
    cfg.dataset.card_ranges.validate();
    CardDatasetFile file;
    file.seed = cfg.seed;
    file.ranges = cfg.dataset.card_ranges;
    file.samples = cards::generate_card_dataset(cfg.dataset.n, dataset_rng(cfg.seed), cfg.dataset.card_ranges);
    save_card_dataset(out, file);
}

void cmd_gen_sequences(const ExperimentConfig& cfg, const fs::path& out) {
    SequenceDatasetFile file;
    file.seed = cfg.seed;
    if (cfg.dataset.kind == DatasetKind::sequences_synthetic) {
        auto corpus = sequences::generate_synthetic_sequences(cfg.dataset.n, cfg.dataset.synthetic,
                                                              dataset_rng(cfg.seed));
        file.alphabet = std::move(corpus.alphabet);
        file.length = cfg.dataset.synthetic.length;
        file.samples = std::move(corpus.samples);
        file.source = "synthetic";
        file.synthetic = cfg.dataset.synthetic;
        file.raw_min = corpus.raw_min;
        file.raw_max = corpus.raw_max;
    } else if (cfg.dataset.kind == DatasetKind::sequences_csv) {
        const auto lists = sequences::read_csv_token_lists(cfg.dataset.csv_path);
        file.alphabet = sequences::build_alphabet(lists, cfg.dataset.alphabet_size);
        file.length = cfg.dataset.length;
        auto loaded = sequences::load_sequence_csv(cfg.dataset.csv_path, file.alphabet, file.length,
                                                   cfg.dataset.strict);
        file.samples = std::move(loaded.samples);
        file.source = "csv";
        if (!loaded.malformed.empty()) {
            ensure_directory(out);
            auto report = open_output(out / "skipped_rows.csv");
            report << "line,reason\n";
            for (const auto& issue : loaded.malformed) {
                std::string reason = issue.reason;
                std::replace(reason.begin(), reason.end(), ',', ';');
                report << issue.line << ',' << reason << '\n';
            }
            finish_output(report, out / "skipped_rows.csv");
        }
    } else {
        throw Error(ErrorKind::config, "gen-sequences needs a sequences-synthetic or sequences-csv dataset");
    }
    save_sequence_dataset(out, file);
}

TrainOutcome cmd_train(const ExperimentConfig& cfg, const fs::path& dataset, const fs::path& out, bool resume) {
    cfg.validate();
    const Dataset data = load_training_data(dataset, cfg.dataset.strict);
    SplitData split = split_dataset(data, cfg.split);
    if (split.train.empty()) {
        throw Error(ErrorKind::data, "train: the split leaves no training data");
    }
    const VaeArchitecture arch = cfg.architecture(static_cast<std::size_t>(data.x.cols()));
    const std::uint64_t hash = config_hash(cfg);
    const CheckpointInfo info{cfg.seed, hash};
    ensure_directory(out);

    FitOptions options;
    TrainHistory previous;
    std::vector<std::pair<std::size_t, std::string>> previous_timing;
    if (resume) {
        CheckpointInfo stored;
        DklVaeModel model = load_checkpoint(out / "checkpoint", &stored);
        if (stored.config_hash != hash) {
            throw Error(ErrorKind::config, "resume: config hash mismatch (checkpoint " +
                                               std::to_string(stored.config_hash) + ", config " +
                                               std::to_string(hash) + ")");
        }
        if (fs::exists(out / "history.csv")) {
            previous = TrainHistory::read_csv(out / "history.csv");
            std::erase_if(previous.rows, [&](const HistoryRow& r) { return r.epoch > model.epoch; });
        }
        previous_timing = read_timing(out / "timing.csv");
        std::erase_if(previous_timing, [&](const auto& r) { return r.first > model.epoch; });
        options.resume = std::move(model);
    }
    TrainHistory live = previous;
    options.on_epoch = [&](const DklVaeModel& m, const HistoryRow& row) {
        live.rows.push_back(row);
        if (row.test_rmse || row.test_reconstruction) {
            std::clog << "epoch " << row.epoch << ": vae " << format_double(row.vae_loss) << ", dkl "
                      << format_double(row.dkl_loss);
            if (row.test_rmse) std::clog << ", test rmse " << format_double(*row.test_rmse);
            if (row.test_r2) std::clog << ", test r2 " << format_double(*row.test_r2);
            if (row.test_reconstruction) std::clog << ", test reconstruction " << format_double(*row.test_reconstruction);
            std::clog << std::endl;
        }
        if (cfg.checkpoint_every > 0 && row.epoch % cfg.checkpoint_every == 0) {
            save_checkpoint(out / "checkpoint", m, info);
            live.write_csv(out / "history.csv");
        }
    };

    write_text(out / "config.json", config_to_json(cfg));
    {
        KeyValueFile run;
        run.set("format_version", std::uint64_t{1});
        run.set("dataset", fs::absolute(dataset).lexically_normal().string());
        run.set("train_count", std::uint64_t{split.train.size()});
        run.set("test_count", std::uint64_t{split.test.size()});
        run.set("dropped_count", std::uint64_t{split.dropped});
        run.set("config_hash", hash);
        run.set("dkl_phase", cfg.train.dkl_subset_size && *cfg.train.dkl_subset_size < split.train.size()
                                 ? "subset of " + std::to_string(*cfg.train.dkl_subset_size) +
                                       " points redrawn every epoch (deviation from full batch)"
                                 : std::string("full batch"));
        run.write(out / "run.txt");
    }

    TrainOutcome outcome;
    outcome.train_count = split.train.size();
    outcome.test_count = split.test.size();
    outcome.dropped = split.dropped;
    outcome.fit = fit(cfg.train, arch, split.train, split.test, std::move(options));

    save_checkpoint(out / "checkpoint", outcome.fit.model, info);
    TrainHistory full = previous;
    full.rows.insert(full.rows.end(), outcome.fit.history.rows.begin(), outcome.fit.history.rows.end());
    full.write_csv(out / "history.csv");

    auto timing = open_output(out / "timing.csv");
    timing << "epoch,seconds\n";
    for (const auto& [e, s] : previous_timing) timing << e << ',' << s << '\n';
    for (const auto& r : outcome.fit.history.rows) timing << r.epoch << ',' << format_double(r.seconds) << '\n';
    finish_output(timing, out / "timing.csv");
    return outcome;
}

MetricReport cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& dataset,
                      EvalSubset subset, const fs::path& out) {
    const DklVaeModel model = load_checkpoint(checkpoint);
    const Dataset data = load_training_data(dataset, cfg.dataset.strict);
    check_compatible(model, data, checkpoint);
    const SplitData split = split_dataset(data, cfg.split);
    if (split.train.empty()) {
        throw Error(ErrorKind::data, "eval: the split leaves no training data for the GP");
    }
    const Dataset& target = subset == EvalSubset::test ? split.test : split.train;
    if (target.empty()) {
        throw Error(ErrorKind::data, "eval: the selected subset is empty");
    }

    const LatentRegressor regressor(model, split.train.x, split.train.y);
    const GpPosterior post = regressor.predict(model, target.x);
    const std::vector<double> pred(post.mean.data(), post.mean.data() + post.mean.size());
    MetricReport report = regression_report(target.y, pred, target.groups);

    if (target.kind == DataKind::images) {
        const auto scores = reconstruction_ssim(model, target);
        std::map<std::string, std::vector<double>> by_group;
        for (std::size_t i = 0; i < scores.size(); ++i) by_group[target.groups[i]].push_back(scores[i]);
        for (const auto& [g, s] : by_group) {
            report.add("ssim", g, std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size()),
                       s.size());
        }
        report.add("ssim", "all",
                   std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size()),
                   scores.size());
        report.add("ssim_p10", "all", quantile(scores, 0.1), scores.size());
    } else {
        const auto rec = reconstruct_onehot(model, target);
        std::vector<OneHotPair> pairs;
        for (std::size_t i = 0; i < rec.size(); ++i) pairs.emplace_back(datum_matrix(target, i), rec[i]);
        const ErrorHistogram h = reconstruction_error_histogram(pairs);
        report.add("exact_match", "all", exact_match_rate(pairs), pairs.size());
        report.add("fewer_than_3_errors", "all", h.cumulative.size() > 2 ? h.cumulative[2] : 1.0, pairs.size());
        for (std::size_t k = 0; k < h.counts.size(); ++k) {
            report.add("row_errors", std::to_string(k), static_cast<double>(h.counts[k]), h.total);
        }
    }

    ensure_directory(out);
    report.write_csv(out / "metrics.csv");
    auto pcsv = open_output(out / "predictions.csv");
    pcsv << "# dklvae-predictions v1\nid,group,truth,prediction,variance\n";
    for (std::size_t i = 0; i < target.size(); ++i) {
        pcsv << target.ids[i] << ',' << target.groups[i] << ',' << format_double(target.y[i]) << ','
             << format_double(pred[i]) << ',' << format_double(post.variance[static_cast<Eigen::Index>(i)]) << '\n';
    }
    finish_output(pcsv, out / "predictions.csv");
    return report;
}

void cmd_embed(const fs::path& checkpoint, const fs::path& dataset, const fs::path& out_csv) {
    const DklVaeModel model = load_checkpoint(checkpoint);
    const Dataset data = load_training_data(dataset);
    check_compatible(model, data, checkpoint);
    const Matrix z = embed(model.vae, data.x);
    if (out_csv.has_parent_path()) ensure_directory(out_csv.parent_path());
    auto out = open_output(out_csv);
    out << "# dklvae-embeddings v1\nid,group,target" << latent_header(model.vae.latent_dim()) << '\n';
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        out << data.ids[u] << ',' << data.groups[u] << ',' << format_double(data.y[u]);
        for (Eigen::Index k = 0; k < z.cols(); ++k) out << ',' << format_double(z(i, k));
        out << '\n';
    }
    finish_output(out, out_csv);
}

std::vector<Candidate> cmd_generate(const ExperimentConfig& cfg, const fs::path& checkpoint,
                                    const fs::path& dataset, double target, std::size_t n, const fs::path& out) {
    const DklVaeModel model = load_checkpoint(checkpoint);
    const Dataset data = load_training_data(dataset, cfg.dataset.strict);
    check_compatible(model, data, checkpoint);
    const SplitData split = split_dataset(data, cfg.split);
    if (split.train.empty()) {
        throw Error(ErrorKind::data, "generate: the split leaves no training data for the GP");
    }
    std::optional<sequences::Alphabet> alphabet;
    if (data.kind == DataKind::sequences) alphabet = load_sequence_dataset(dataset, cfg.dataset.strict).alphabet;

    const LatentRegressor regressor(model, split.train.x, split.train.y);
    Rng rng = Rng(cfg.seed).split(kGenerateStream);
    auto candidates = generate_for_target(model, regressor, target, n, rng, cfg.generate.search);

    ensure_directory(out);
    auto csv = open_output(out / "candidates.csv");
    csv << "# dklvae-candidates v1\nrank,target,prediction,variance" << latent_header(model.vae.latent_dim())
        << ",object\n";
    for (std::size_t r = 0; r < candidates.size(); ++r) {
        const auto& c = candidates[r];
        csv << r << ',' << format_double(target) << ',' << format_double(c.prediction) << ','
            << format_double(c.variance);
        for (Eigen::Index k = 0; k < c.z.size(); ++k) csv << ',' << format_double(c.z[k]);
        if (data.kind == DataKind::images) {
            const std::string name = "candidate_" + std::to_string(r) + ".pgm";
            std::vector<float> img(c.decoded.data(), c.decoded.data() + c.decoded.size());
            write_pgm(out / name, img, data.cols, data.rows);
            csv << ',' << name << '\n';
        } else {
            const Matrix probs = Eigen::Map<const Matrix>(c.decoded.data(), static_cast<Eigen::Index>(data.rows),
                                                          static_cast<Eigen::Index>(data.cols));
            csv << ',' << sequences::join_tokens(sequences::one_hot_decode(probs, *alphabet).tokens) << '\n';
        }
    }
    finish_output(csv, out / "candidates.csv");
    return candidates;
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& cfg, SweepParameter p, double value) {
    ExperimentConfig c = cfg;
    c.sweep.reset();
    const auto as_count = [&](double v) {
        if (!(v >= 1.0) || v != std::floor(v)) {
            throw Error(ErrorKind::config, "sweep: " + to_string(p) + " values must be positive integers");
        }
        return static_cast<std::size_t>(v);
    };
    switch (p) {
        case SweepParameter::dkl_scale: c.train.dkl_scale = value; break;
        case SweepParameter::lengthscale_bound:
            c.train.lengthscale_bound = value;
            if (c.train.init_lengthscale && *c.train.init_lengthscale >= value) c.train.init_lengthscale.reset();
            break;
        case SweepParameter::latent_dim: c.model.latent_dim = as_count(value); break;
        case SweepParameter::hidden_size:
            for (auto& h : c.model.encoder_hidden) h = as_count(value);
            for (auto& h : c.model.decoder_hidden) h = as_count(value);
            break;
    }
    c.validate();
    return c;
}

void cmd_sweep(const ExperimentConfig& cfg, const fs::path& dataset, const fs::path& out) {
    if (!cfg.sweep) {
        throw Error(ErrorKind::config, "sweep: the config has no sweep section");
    }
    ensure_directory(out);
    const auto& sw = *cfg.sweep;
    std::ostringstream summary;
    summary << "# dklvae-sweep v1\nparameter,value,test_rmse,test_r2,test_match_or_ssim,vae_loss,dkl_loss\n";
    for (double v : sw.values) {
        const ExperimentConfig run = apply_sweep_value(cfg, sw.parameter, v);
        const fs::path dir = out / (to_string(sw.parameter) + "=" + format_double(v));
        const TrainOutcome o = cmd_train(run, dataset, dir, false);
        const HistoryRow& last = o.fit.history.rows.back();
        std::optional<double> rmse_v = last.test_rmse, r2_v = last.test_r2, rec_v = last.test_reconstruction;
        if (!rmse_v && o.test_count > 0) {
            const Dataset data = load_training_data(dataset, run.dataset.strict);
            const SplitData split = split_dataset(data, run.split);
            const Evaluation ev = evaluate(o.fit.model, split.train, split.test);
            rmse_v = ev.rmse;
            r2_v = ev.r2;
            rec_v = ev.reconstruction;
        }
        auto field = [](const std::optional<double>& x) { return x ? format_double(*x) : std::string(); };
        summary << to_string(sw.parameter) << ',' << format_double(v) << ',' << field(rmse_v) << ','
                << field(r2_v) << ',' << field(rec_v) << ',' << format_double(last.vae_loss) << ','
                << format_double(last.dkl_loss) << '\n';
    }
    write_text(out / "sweep.csv", summary.str());
}

}  // namespace dklvae
