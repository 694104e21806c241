// Command-line front end: dataset generation, training, evaluation,
// embedding export, target-conditioned generation and sweeps.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dklvae/harness.hpp"

namespace fs = std::filesystem;
using namespace dklvae;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string dataset;
    std::string checkpoint;
    std::string split = "test";
    double target = 0.0;
    std::size_t n = 0;
    bool n_given = false;
    bool strict = false;
    bool resume = false;
};

ExperimentConfig load(const Options& o) {
    if (o.config.empty()) {
        throw Error(ErrorKind::config, "--config is required");
    }
    ExperimentConfig cfg = load_config(o.config);
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.train.seed = *o.seed;
    }
    if (o.strict) cfg.dataset.strict = true;
    if (const char* env = std::getenv("DKLVAE_OUT"); env && *env) {
        cfg.out_dir = env;
    }
    return cfg;
}

fs::path run_dir(const Options& o, const ExperimentConfig& cfg) {
    return o.out.empty() ? cfg.out_dir : fs::path(o.out);
}

fs::path dataset_dir(const Options& o, const ExperimentConfig& cfg) {
    return o.dataset.empty() ? cfg.out_dir / "data" : fs::path(o.dataset);
}

fs::path checkpoint_dir(const Options& o, const ExperimentConfig& cfg) {
    return o.checkpoint.empty() ? cfg.out_dir / "checkpoint" : fs::path(o.checkpoint);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DKL-VAE laboratory: VAE with Gaussian-process refined encoder"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* c = cmd->add_option("--config", o.config, "experiment config (JSON)");
        if (needs_config) c->required();
        cmd->add_option("--seed", o.seed, "override the config seed");
        cmd->add_option("--out", o.out, "output directory");
        cmd->add_flag("--strict", o.strict, "reject datasets with malformed rows");
    };

    auto* gen_cards = app.add_subcommand("gen-cards", "generate the card-suit dataset");
    add_common(gen_cards, true);
    auto* gen_seq = app.add_subcommand("gen-sequences", "generate or import a sequence dataset");
    add_common(gen_seq, true);

    auto* train = app.add_subcommand("train", "train a model");
    add_common(train, true);
    train->add_option("--dataset", o.dataset, "dataset directory (default <out_dir>/data)");
    train->add_flag("--resume", o.resume, "continue from <out>/checkpoint");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval, true);
    eval->add_option("--checkpoint", o.checkpoint, "checkpoint directory (default <out_dir>/checkpoint)");
    eval->add_option("--dataset", o.dataset, "dataset directory (default <out_dir>/data)");
    eval->add_option("--split", o.split, "subset to score")->check(CLI::IsMember({"test", "train"}));

    auto* embed_cmd = app.add_subcommand("embed", "export posterior-mean embeddings");
    add_common(embed_cmd, false);
    embed_cmd->add_option("--checkpoint", o.checkpoint, "checkpoint directory");
    embed_cmd->add_option("--dataset", o.dataset, "dataset directory");

    auto* gen = app.add_subcommand("generate", "search the latent space for a target value");
    add_common(gen, true);
    gen->add_option("--checkpoint", o.checkpoint, "checkpoint directory (default <out_dir>/checkpoint)");
    gen->add_option("--dataset", o.dataset, "dataset directory (default <out_dir>/data)");
    gen->add_option("--target", o.target, "desired target value")->required();
    gen->add_option("-n", o.n, "number of candidates (default from config)")->each([&](const std::string&) {
        o.n_given = true;
    });

    auto* sweep = app.add_subcommand("sweep", "train one run per sweep value");
    add_common(sweep, true);
    sweep->add_option("--dataset", o.dataset, "dataset directory (default <out_dir>/data)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error[usage]: " << e.what() << "\n";
        return 64;
    }

    try {
        if (*gen_cards) {
            const auto cfg = load(o);
            const fs::path out = o.out.empty() ? cfg.out_dir / "data" : fs::path(o.out);
            cmd_gen_cards(cfg, out);
            std::cout << "wrote " << cfg.dataset.n << " cards to " << out.string() << "\n";
        } else if (*gen_seq) {
            const auto cfg = load(o);
            const fs::path out = o.out.empty() ? cfg.out_dir / "data" : fs::path(o.out);
            cmd_gen_sequences(cfg, out);
            std::cout << "wrote sequence dataset to " << out.string() << "\n";
        } else if (*train) {
            const auto cfg = load(o);
            const fs::path out = run_dir(o, cfg);
            const auto r = cmd_train(cfg, dataset_dir(o, cfg), out, o.resume);
            std::cout << "trained " << r.fit.model.epoch << " epochs on " << r.train_count << " samples ("
                      << r.test_count << " test, " << r.dropped << " dropped); outputs in " << out.string() << "\n";
        } else if (*eval) {
            const auto cfg = load(o);
            const fs::path out = o.out.empty() ? cfg.out_dir / ("eval-" + o.split) : fs::path(o.out);
            const auto report = cmd_eval(cfg, checkpoint_dir(o, cfg), dataset_dir(o, cfg),
                                         o.split == "train" ? EvalSubset::train : EvalSubset::test, out);
            for (const auto& row : report.rows) {
                std::cout << row.metric << ',' << row.group << ',' << row.value << ',' << row.n << "\n";
            }
        } else if (*embed_cmd) {
            fs::path ckpt = o.checkpoint;
            fs::path data = o.dataset;
            fs::path out = o.out;
            if (!o.config.empty()) {
                const auto cfg = load(o);
                if (ckpt.empty()) ckpt = checkpoint_dir(o, cfg);
                if (data.empty()) data = dataset_dir(o, cfg);
                if (out.empty()) out = cfg.out_dir;
            }
            if (ckpt.empty() || data.empty()) {
                throw Error(ErrorKind::config, "embed needs --checkpoint and --dataset (or --config)");
            }
            if (out.empty()) out = ".";
            cmd_embed(ckpt, data, out / "embeddings.csv");
            std::cout << "wrote " << (out / "embeddings.csv").string() << "\n";
        } else if (*gen) {
            const auto cfg = load(o);
            const fs::path out = o.out.empty() ? cfg.out_dir / "generate" : fs::path(o.out);
            const auto c = cmd_generate(cfg, checkpoint_dir(o, cfg), dataset_dir(o, cfg), o.target,
                                        o.n_given ? o.n : cfg.generate.n, out);
            for (std::size_t r = 0; r < c.size(); ++r) {
                std::cout << r << ": prediction " << c[r].prediction << " variance " << c[r].variance << "\n";
            }
        } else if (*sweep) {
            const auto cfg = load(o);
            const fs::path out = run_dir(o, cfg);
            cmd_sweep(cfg, dataset_dir(o, cfg), out);
            std::cout << "wrote " << (out / "sweep.csv").string() << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
