#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dklvae/config.hpp"
#include "dklvae/metrics.hpp"
#include "dklvae/store.hpp"
#include "dklvae/trainer.hpp"

namespace dklvae {

/// Generates a card dataset from the config into `out`.
void cmd_gen_cards(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// Generates a synthetic sequence corpus, or converts the configured CSV,
/// into a sequence dataset directory.
void cmd_gen_sequences(const ExperimentConfig& cfg, const std::filesystem::path& out);

struct TrainOutcome {
    FitResult fit;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    std::size_t dropped = 0;
};

/// Trains on `dataset` and writes into `out`: config.json, run.txt,
/// history.csv, timing.csv and checkpoint/. With `resume`, continues from
/// out/checkpoint (whose config hash must match) and appends to the history.
TrainOutcome cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& dataset,
                       const std::filesystem::path& out, bool resume = false);

enum class EvalSubset { test, train };

/// Metrics of the checkpoint on one split subset, GP conditioned on the
/// train subset. Writes out/metrics.csv and out/predictions.csv.
MetricReport cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                      const std::filesystem::path& dataset, EvalSubset subset, const std::filesystem::path& out);

/// Posterior-mean embeddings of every datum: out_csv with columns
/// id,group,target,z_1..z_d.
void cmd_embed(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
               const std::filesystem::path& out_csv);

/// Target-conditioned generation. Writes out/candidates.csv and, for card
/// models, out/candidate_<rank>.pgm.
std::vector<Candidate> cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                                    const std::filesystem::path& dataset, double target, std::size_t n,
                                    const std::filesystem::path& out);

/// Trains one run per configured sweep value under out/<parameter>=<value>/
/// and writes out/sweep.csv.
void cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& dataset, const std::filesystem::path& out);

/// Applies one sweep value to a copy of the config.
ExperimentConfig apply_sweep_value(const ExperimentConfig& cfg, SweepParameter p, double value);

}  // namespace dklvae
