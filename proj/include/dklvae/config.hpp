#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dklvae/cards.hpp"
#include "dklvae/sequences.hpp"
#include "dklvae/split.hpp"
#include "dklvae/trainer.hpp"

namespace dklvae {

inline constexpr int kConfigFormatVersion = 1;

enum class DatasetKind { cards, sequences_csv, sequences_synthetic };

std::string to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& name);

struct DatasetConfig {
    DatasetKind kind = DatasetKind::cards;
    std::size_t n = 3000;
    cards::CardRanges card_ranges;
    sequences::SyntheticConfig synthetic;
    /// sequences-csv: source file (relative paths resolve against the
    /// config file's directory) and the encoding shape.
    std::filesystem::path csv_path;
    std::size_t length = 21;
    std::size_t alphabet_size = 27;
    bool strict = true;

    bool operator==(const DatasetConfig&) const = default;
};

struct ModelConfig {
    std::vector<std::size_t> encoder_hidden{128, 128};
    std::vector<std::size_t> decoder_hidden{128, 128};
    std::size_t latent_dim = 2;

    bool operator==(const ModelConfig&) const = default;
};

struct GenerateConfig {
    GenerateOptions search;
    std::size_t n = 8;
};

enum class SweepParameter { dkl_scale, lengthscale_bound, latent_dim, hidden_size };

std::string to_string(SweepParameter p);

struct SweepConfig {
    SweepParameter parameter = SweepParameter::dkl_scale;
    std::vector<double> values;
};

struct ExperimentConfig {
    int format_version = kConfigFormatVersion;
    std::uint64_t seed = 0;
    DatasetConfig dataset;
    RangeSplit split;
    ModelConfig model;
    TrainConfig train;
    /// Also write a checkpoint every this many epochs (0 = only at the end).
    std::size_t checkpoint_every = 0;
    GenerateConfig generate;
    std::optional<SweepConfig> sweep;
    std::filesystem::path out_dir = "runs/default";

    /// Cross-field checks; every section is also checked while parsing.
    void validate() const;
    /// VAE layer sizes for a dataset of the given flattened size.
    VaeArchitecture architecture(std::size_t data_dim) const;
};

/// Parses and validates a JSON config. Unknown keys, wrong types and a
/// mismatched format_version raise ErrorKind::config naming the JSON path.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON rendering (sorted keys, every field explicit).
std::string config_to_json(const ExperimentConfig& cfg);

/// FNV-1a of the canonical rendering of everything that determines the
/// training trajectory: out_dir, epochs, checkpointing, generation and sweep
/// settings are excluded so that a run can be extended or relocated.
std::uint64_t config_hash(const ExperimentConfig& cfg);

/// Seed stream used for dataset generation (kept apart from training streams).
Rng dataset_rng(std::uint64_t seed);

}  // namespace dklvae
