#include "dklvae/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dklvae/textio.hpp"

namespace dklvae::sequences {

namespace {

constexpr std::array<const char*, 26> kElementNames{
    "[C]",      "[N]",       "[O]",       "[F]",        "[=C]",       "[=N]",   "[=O]",
    "[#C]",     "[#N]",      "[Ring1]",   "[Ring2]",    "[=Ring1]",   "[Branch1]",
    "[Branch2]", "[=Branch1]", "[=Branch2]", "[#Branch1]", "[#Branch2]", "[CH1]",
    "[NH1]",    "[C@H1]",    "[C@@H1]",   "[O-1]",      "[N+1]",      "[=N+1]", "[NH3+1]"};

// Adjacency bonus by (k mod 4) classes of the left and right token.
constexpr double kBonus[4][4] = {
    {-3.0, 1.0, 2.0, -1.0},
    {1.0, -2.0, 0.0, 3.0},
    {2.0, 0.0, -4.0, 1.0},
    {-1.0, 3.0, 1.0, -2.0},
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

struct CsvColumns {
    std::size_t sequence = 0;
    std::size_t target = 0;
};

CsvColumns parse_header(const std::string& header_line, const std::filesystem::path& path) {
    const auto header = split_csv_line(header_line);
    std::optional<std::size_t> seq, tgt;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = unquote(trim(header[i]));
        if (name == "sequence") seq = i;
        if (name == "target") tgt = i;
    }
    if (!seq || !tgt) {
        throw Error(ErrorKind::data, path.string() + ": header must contain 'sequence' and 'target' columns");
    }
    return {*seq, *tgt};
}

}  // namespace

Alphabet::Alphabet(std::vector<std::string> tokens, const std::string& padding) : tokens_(std::move(tokens)) {
    std::set<std::string> seen;
    bool found = false;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!seen.insert(tokens_[i]).second) {
            throw Error(ErrorKind::data, "alphabet: duplicate token '" + tokens_[i] + "'");
        }
        if (tokens_[i] == padding) {
            padding_index_ = i;
            found = true;
        }
    }
    if (!found) {
        throw Error(ErrorKind::data, "alphabet: padding token '" + padding + "' missing");
    }
}

std::optional<std::size_t> Alphabet::index_of(const std::string& token) const {
    const auto it = std::find(tokens_.begin(), tokens_.end(), token);
    if (it == tokens_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - tokens_.begin());
}

Alphabet build_alphabet(const std::vector<std::vector<std::string>>& corpus, std::size_t size,
                        const std::string& padding) {
    std::set<std::string> distinct;
    for (const auto& seq : corpus) {
        for (const auto& t : seq) {
            if (t != padding) distinct.insert(t);
        }
    }
    if (distinct.size() + 1 > size) {
        throw Error(ErrorKind::data, "alphabet: corpus has " + std::to_string(distinct.size()) +
                                         " distinct tokens, more than the configured size " +
                                         std::to_string(size) + " allows");
    }
    std::vector<std::string> tokens(distinct.begin(), distinct.end());
    for (std::size_t k = 0; tokens.size() + 1 < size; ++k) {
        const std::string filler = "[unused" + std::to_string(k) + "]";
        if (!distinct.contains(filler)) tokens.push_back(filler);
    }
    tokens.push_back(padding);
    return Alphabet(std::move(tokens), padding);
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '[') {
            throw Error(ErrorKind::data, "tokenize: unexpected character '" + std::string(1, text[i]) +
                                             "' at offset " + std::to_string(i));
        }
        const auto close = text.find(']', i);
        if (close == std::string::npos) {
            throw Error(ErrorKind::data, "tokenize: unterminated token at offset " + std::to_string(i));
        }
        if (close == i + 1 || text.find('[', i + 1) < close) {
            throw Error(ErrorKind::data, "tokenize: malformed token at offset " + std::to_string(i));
        }
        tokens.push_back(text.substr(i, close - i + 1));
        i = close + 1;
    }
    return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) out += t;
    return out;
}

Matrix one_hot_encode(const std::vector<std::string>& tokens, const Alphabet& alphabet, std::size_t length) {
    if (tokens.size() > length) {
        throw Error(ErrorKind::data, "one_hot_encode: sequence of " + std::to_string(tokens.size()) +
                                         " tokens exceeds length " + std::to_string(length));
    }
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(alphabet.size()));
    for (std::size_t i = 0; i < length; ++i) {
        std::size_t col = alphabet.padding_index();
        if (i < tokens.size()) {
            const auto idx = alphabet.index_of(tokens[i]);
            if (!idx) {
                throw Error(ErrorKind::data, "one_hot_encode: unknown token '" + tokens[i] + "' at position " +
                                                 std::to_string(i));
            }
            if (*idx == alphabet.padding_index()) {
                throw Error(ErrorKind::data, "one_hot_encode: padding token inside the sequence at position " +
                                                 std::to_string(i));
            }
            col = *idx;
        }
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) = 1.0;
    }
    return m;
}

Matrix row_softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double max = logits.row(i).maxCoeff();
        out.row(i) = (logits.row(i).array() - max).exp();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

std::vector<std::size_t> row_argmax(const Matrix& m) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(m.rows()), 0);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < m.cols(); ++j) {
            if (m(i, j) > m(i, best)) best = j;
        }
        idx[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    }
    return idx;
}

DecodedSequence one_hot_decode(const Matrix& logits, const Alphabet& alphabet) {
    if (static_cast<std::size_t>(logits.cols()) != alphabet.size()) {
        throw Error(ErrorKind::shape, "one_hot_decode: logits have " + std::to_string(logits.cols()) +
                                          " columns, alphabet has " + std::to_string(alphabet.size()));
    }
    const auto best = row_argmax(row_softmax(logits));
    DecodedSequence out;
    out.onehot = Matrix::Zero(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < best.size(); ++i) {
        out.onehot(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best[i])) = 1.0;
        out.tokens.push_back(alphabet.token(best[i]));
    }
    while (!out.tokens.empty() && out.tokens.back() == alphabet.padding()) {
        out.tokens.pop_back();
    }
    return out;
}

CsvLoadResult load_sequence_csv(const std::filesystem::path& path, const Alphabet& alphabet,
                                std::size_t length, bool strict) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open sequence CSV " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorKind::data, path.string() + ": empty file");
    }
    const CsvColumns cols = parse_header(line, path);

    CsvLoadResult result;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++result.rows_read;
        const auto fields = split_csv_line(line);
        try {
            if (fields.size() <= std::max(cols.sequence, cols.target)) {
                throw Error(ErrorKind::data, "missing columns");
            }
            SequenceSample s;
            s.tokens = tokenize(unquote(trim(fields[cols.sequence])));
            s.target = parse_double(unquote(trim(fields[cols.target])));
            if (!std::isfinite(s.target)) {
                throw Error(ErrorKind::data, "non-finite target");
            }
            s.onehot = one_hot_encode(s.tokens, alphabet, length);
            result.samples.push_back(std::move(s));
        } catch (const Error& e) {
            result.malformed.push_back({line_no, e.what()});
        }
    }
    if (strict && !result.malformed.empty()) {
        std::ostringstream os;
        os << path.string() << ": " << result.malformed.size() << " malformed row(s): ";
        for (std::size_t i = 0; i < result.malformed.size() && i < 10; ++i) {
            os << (i ? "; " : "") << "line " << result.malformed[i].line << " (" << result.malformed[i].reason
               << ")";
        }
        if (result.malformed.size() > 10) os << "; ...";
        throw Error(ErrorKind::data, os.str());
    }
    return result;
}

std::vector<std::vector<std::string>> read_csv_token_lists(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open sequence CSV " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorKind::data, path.string() + ": empty file");
    }
    const CsvColumns cols = parse_header(line, path);
    std::vector<std::vector<std::string>> lists;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() <= cols.sequence) continue;
        try {
            lists.push_back(tokenize(unquote(trim(fields[cols.sequence]))));
        } catch (const Error&) {
            // reported by load_sequence_csv
        }
    }
    return lists;
}

void write_sequence_csv(const std::filesystem::path& path, const std::vector<SequenceSample>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out << "sequence,target\n";
    for (const auto& s : samples) {
        out << join_tokens(s.tokens) << ',' << format_double(s.target) << '\n';
    }
    if (!out) {
        throw Error(ErrorKind::io, "write failed for " + path.string());
    }
}

std::string to_string(TokenModel m) {
    return m == TokenModel::markov ? "markov" : "uniform";
}

TokenModel token_model_from_string(const std::string& name) {
    if (name == "uniform") return TokenModel::uniform;
    if (name == "markov") return TokenModel::markov;
    throw Error(ErrorKind::config, "unknown token model '" + name + "' (expected uniform or markov)");
}

void SyntheticConfig::validate() const {
    if (alphabet_size < 2) {
        throw Error(ErrorKind::config, "synthetic sequences: alphabet_size must be at least 2");
    }
    if (min_length < 1 || min_length > length) {
        throw Error(ErrorKind::config, "synthetic sequences: need 1 <= min_length <= length");
    }
    if (!(target_lo < target_hi)) {
        throw Error(ErrorKind::config, "synthetic sequences: target range needs lo < hi");
    }
    if (!(stickiness >= 0.0 && stickiness <= 1.0)) {
        throw Error(ErrorKind::config, "synthetic sequences: stickiness must lie in [0, 1]");
    }
}

Alphabet synthetic_alphabet(std::size_t alphabet_size) {
    std::vector<std::string> tokens;
    for (std::size_t k = 0; k + 1 < alphabet_size; ++k) {
        tokens.push_back(k < kElementNames.size() ? std::string(kElementNames[k])
                                                  : "[X" + std::to_string(k) + "]");
    }
    tokens.emplace_back(kPaddingToken);
    return Alphabet(std::move(tokens));
}

double token_weight(std::size_t k) {
    return -(12.0 + 1.5 * static_cast<double>((7 * k) % 13));
}

double adjacency_bonus(std::size_t a, std::size_t b) {
    return kBonus[a % 4][b % 4];
}

std::size_t preferred_successor(std::size_t k, std::size_t element_count) {
    return (5 * k + 3) % element_count;
}

double raw_synthetic_score(const std::vector<std::size_t>& token_indices) {
    double score = 0.0;
    for (std::size_t i = 0; i < token_indices.size(); ++i) {
        if (i > 0) score += adjacency_bonus(token_indices[i - 1], token_indices[i]);
        score += token_weight(token_indices[i]);
    }
    return score;
}

double rescale_score(double raw, double raw_min, double raw_max, double lo, double hi) {
    if (raw_max == raw_min) {
        return lo + 0.5 * (hi - lo);
    }
    return lo + (raw - raw_min) * (hi - lo) / (raw_max - raw_min);
}

SyntheticCorpus generate_synthetic_sequences(std::size_t n, const SyntheticConfig& config, const Rng& rng) {
    if (n == 0) {
        throw Error(ErrorKind::config, "generate_synthetic_sequences: n must be at least 1");
    }
    config.validate();
    SyntheticCorpus corpus;
    corpus.alphabet = synthetic_alphabet(config.alphabet_size);
    const std::size_t elements = config.alphabet_size - 1;

    std::vector<std::vector<std::size_t>> indices(n);
    std::vector<double> raw(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng local = rng.split(i);
        const std::size_t len = config.min_length + local.uniform_index(config.length - config.min_length + 1);
        auto& seq = indices[i];
        for (std::size_t p = 0; p < len; ++p) {
            if (config.token_model == TokenModel::markov && p > 0 && local.uniform() < config.stickiness) {
                seq.push_back(preferred_successor(seq.back(), elements));
            } else {
                seq.push_back(local.uniform_index(elements));
            }
        }
        raw[i] = raw_synthetic_score(seq);
    }
    corpus.raw_min = *std::min_element(raw.begin(), raw.end());
    corpus.raw_max = *std::max_element(raw.begin(), raw.end());

    corpus.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = corpus.samples[i];
        for (auto k : indices[i]) s.tokens.push_back(corpus.alphabet.token(k));
        s.onehot = one_hot_encode(s.tokens, corpus.alphabet, config.length);
        s.target = rescale_score(raw[i], corpus.raw_min, corpus.raw_max, config.target_lo, config.target_hi);
    }
    return corpus;
}

SequenceSplit split_by_target(const std::vector<SequenceSample>& samples, const TargetSplit& split) {
    std::vector<double> targets;
    targets.reserve(samples.size());
    for (const auto& s : samples) targets.push_back(s.target);
    const SplitIndices idx = split_by_value(targets, split);
    SequenceSplit out;
    for (auto i : idx.train) out.train.push_back(samples[i]);
    for (auto i : idx.test) out.test.push_back(samples[i]);
    out.dropped = idx.dropped.size();
    return out;
}

}  // namespace dklvae::sequences
