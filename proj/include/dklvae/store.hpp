#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dklvae/cards.hpp"
#include "dklvae/sequences.hpp"
#include "dklvae/trainer.hpp"

namespace dklvae {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;

// ---- card datasets ------------------------------------------------------
//
// <dir>/manifest.txt  key=value: format_version, kind=cards, count, seed,
//                     image_size, angle/shear/translation ranges
// <dir>/images.f32    count * 48 * 48 little-endian float32, row-major
// <dir>/labels.csv    index,suit,angle,shear,tx,ty

struct CardDatasetFile {
    std::vector<cards::CardSample> samples;
    std::uint64_t seed = 0;
    cards::CardRanges ranges;
};

void save_card_dataset(const std::filesystem::path& dir, const CardDatasetFile& data);
CardDatasetFile load_card_dataset(const std::filesystem::path& dir);

// ---- sequence datasets --------------------------------------------------
//
// <dir>/manifest.txt   key=value: format_version, kind=sequences, count,
//                      length, alphabet (tokens concatenated in order),
//                      padding, source, plus generator settings for
//                      synthetic corpora (seed, raw_min, raw_max, ...)
// <dir>/sequences.csv  header sequence,target

struct SequenceDatasetFile {
    sequences::Alphabet alphabet;
    std::size_t length = 21;
    std::vector<sequences::SequenceSample> samples;
    std::string source = "synthetic";  // or "csv"
    std::uint64_t seed = 0;
    /// Present for synthetic corpora.
    std::optional<sequences::SyntheticConfig> synthetic;
    double raw_min = 0.0;
    double raw_max = 0.0;
};

void save_sequence_dataset(const std::filesystem::path& dir, const SequenceDatasetFile& data);
SequenceDatasetFile load_sequence_dataset(const std::filesystem::path& dir, bool strict = true);

/// Reads the `kind` key of a dataset manifest ("cards" or "sequences").
std::string dataset_kind(const std::filesystem::path& dir);

/// Any dataset directory as flattened training data (ids are sample indices,
/// groups are suit names for cards and "all" for sequences).
Dataset load_training_data(const std::filesystem::path& dir, bool strict = true);

Dataset to_dataset(const std::vector<cards::CardSample>& samples);
Dataset to_dataset(const std::vector<sequences::SequenceSample>& samples, std::size_t length,
                   std::size_t alphabet_size);

struct SplitData {
    Dataset train;
    Dataset test;
    std::size_t dropped = 0;
};

SplitData split_dataset(const Dataset& data, const RangeSplit& split);

// ---- checkpoints --------------------------------------------------------
//
// <dir>/manifest.txt   format_version, architecture, GP raw hyperparameters,
//                      target normalization, epoch, seed, config_hash,
//                      optimizer step counters, blob lengths
// <dir>/params.bin     little-endian float64: trunk, mean head, scale head,
//                      decoder parameters (each in MlpModel layout)
// <dir>/optimizer.bin  little-endian float64: for the VAE-phase states
//                      (trunk, mean, scale, decoder) then the DKL-phase
//                      states (trunk, mean, gp), first moments then second
//                      moments of each

struct CheckpointInfo {
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

void save_checkpoint(const std::filesystem::path& dir, const DklVaeModel& model, const CheckpointInfo& info);

/// Validates everything before returning; a corrupt or incompatible
/// checkpoint raises ErrorKind::format and nothing is partially loaded.
DklVaeModel load_checkpoint(const std::filesystem::path& dir, CheckpointInfo* info = nullptr);

// ---- images -------------------------------------------------------------

/// Binary portable graymap (P5, maxval 255); values in [0, 1] are scaled and
/// rounded.
void write_pgm(const std::filesystem::path& path, const std::vector<float>& image, std::size_t width,
               std::size_t height);
/// Pixel values divided by maxval.
std::vector<float> read_pgm(const std::filesystem::path& path, std::size_t& width, std::size_t& height);

}  // namespace dklvae
