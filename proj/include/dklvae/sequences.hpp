#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dklvae/split.hpp"
#include "dklvae/tensor.hpp"

namespace dklvae::sequences {

inline constexpr const char* kPaddingToken = "[nop]";

/// Ordered token set. The padding token marks "no element" and fills the
/// rows after the end of a sequence.
class Alphabet {
public:
    Alphabet() = default;
    /// Tokens must be distinct and contain `padding`.
    Alphabet(std::vector<std::string> tokens, const std::string& padding = kPaddingToken);

    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(std::size_t i) const { return tokens_.at(i); }
    std::size_t padding_index() const { return padding_index_; }
    const std::string& padding() const { return tokens_[padding_index_]; }
    std::optional<std::size_t> index_of(const std::string& token) const;

    bool operator==(const Alphabet&) const = default;

private:
    std::vector<std::string> tokens_;
    std::size_t padding_index_ = 0;
};

/// Distinct corpus tokens in lexicographic order, then "[unused<k>]" fillers,
/// then the padding token last, for `size` tokens in total.
Alphabet build_alphabet(const std::vector<std::vector<std::string>>& corpus, std::size_t size,
                        const std::string& padding = kPaddingToken);

/// Splits "[C][=O][Branch1]" into {"[C]", "[=O]", "[Branch1]"}. Throws
/// ErrorKind::data on text outside brackets.
std::vector<std::string> tokenize(const std::string& text);
std::string join_tokens(const std::vector<std::string>& tokens);

struct SequenceSample {
    std::vector<std::string> tokens;
    Matrix onehot;  // length x alphabet size
    double target = 0.0;

    bool operator==(const SequenceSample& o) const {
        return tokens == o.tokens && onehot == o.onehot && target == o.target;
    }
};

/// Row i is one-hot at tokens[i]; rows past the end are padding.
Matrix one_hot_encode(const std::vector<std::string>& tokens, const Alphabet& alphabet, std::size_t length);

/// Row-wise numerically stable softmax.
Matrix row_softmax(const Matrix& logits);

struct DecodedSequence {
    std::vector<std::string> tokens;  // trailing padding stripped
    Matrix onehot;                    // argmax re-encoded
};

/// Softmax, then argmax per row (ties go to the lowest index).
DecodedSequence one_hot_decode(const Matrix& logits, const Alphabet& alphabet);

/// Index of the largest entry of each row, lowest index on ties.
std::vector<std::size_t> row_argmax(const Matrix& m);

struct CsvIssue {
    std::size_t line = 0;  // 1-based, header is line 1
    std::string reason;
};

struct CsvLoadResult {
    std::vector<SequenceSample> samples;
    std::vector<CsvIssue> malformed;
    std::size_t rows_read = 0;
};

/// Reads a UTF-8 CSV with columns `sequence` and `target` (other columns are
/// ignored). In strict mode any malformed row raises ErrorKind::data listing
/// the offending line numbers; otherwise malformed rows are skipped and
/// reported.
CsvLoadResult load_sequence_csv(const std::filesystem::path& path, const Alphabet& alphabet,
                                std::size_t length, bool strict = true);

/// Tokens of every parseable row, for building an alphabet.
std::vector<std::vector<std::string>> read_csv_token_lists(const std::filesystem::path& path);

void write_sequence_csv(const std::filesystem::path& path, const std::vector<SequenceSample>& samples);

// ---- synthetic corpus -------------------------------------------------

enum class TokenModel {
    uniform,  // every position uniform over the non-padding tokens
    markov,   // first-order chain with one preferred successor per token
};

std::string to_string(TokenModel m);
TokenModel token_model_from_string(const std::string& name);

struct SyntheticConfig {
    std::size_t length = 21;
    std::size_t alphabet_size = 27;
    std::size_t min_length = 3;
    double target_lo = -500.0;
    double target_hi = -200.0;
    TokenModel token_model = TokenModel::uniform;
    /// markov only: probability of taking the preferred successor.
    double stickiness = 0.9;

    void validate() const;
};

/// Alphabet of the synthetic corpus: alphabet_size - 1 element tokens
/// followed by the padding token.
Alphabet synthetic_alphabet(std::size_t alphabet_size);

/// Weight of element token k (0-based index into the synthetic alphabet).
double token_weight(std::size_t k);
/// Bonus for token a immediately followed by token b.
double adjacency_bonus(std::size_t a, std::size_t b);
/// Preferred successor of token k under the markov model.
std::size_t preferred_successor(std::size_t k, std::size_t element_count);

/// Sum of token weights plus adjacency bonuses, before rescaling.
double raw_synthetic_score(const std::vector<std::size_t>& token_indices);

struct SyntheticCorpus {
    Alphabet alphabet;
    std::vector<SequenceSample> samples;
    double raw_min = 0.0;  // rescaling anchors: raw_min -> target_lo
    double raw_max = 0.0;  //                    raw_max -> target_hi
};

/// target = lo + (raw - raw_min) * (hi - lo) / (raw_max - raw_min).
double rescale_score(double raw, double raw_min, double raw_max, double lo, double hi);

/// Sample i is drawn from rng.split(i). raw_min/raw_max are the extremes of
/// the generated raw scores, so targets span [target_lo, target_hi].
SyntheticCorpus generate_synthetic_sequences(std::size_t n, const SyntheticConfig& config, const Rng& rng);

using TargetSplit = RangeSplit;

struct SequenceSplit {
    std::vector<SequenceSample> train;
    std::vector<SequenceSample> test;
    std::size_t dropped = 0;
};

SequenceSplit split_by_target(const std::vector<SequenceSample>& samples, const TargetSplit& split);

}  // namespace dklvae::sequences
