#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rgram/grammar.hpp"

namespace rgram {

/// Stand-in for r-grams that are nothing but whitespace.
inline constexpr std::string_view kWhitespaceToken = "<ws>";

/// Trims Unicode whitespace from both ends and maps 0-9 to N.
std::string embedding_form(std::string_view rgram);

class EmbedVocab {
public:
    /// Adds `count` to `token`, creating it if needed; returns its index.
    std::uint32_t add(const std::string& token, std::uint64_t count);
    std::optional<std::uint32_t> find(std::string_view token) const;

    std::size_t size() const noexcept { return tokens_.size(); }
    const std::string& token(std::uint32_t i) const { return tokens_.at(i); }
    std::uint64_t count(std::uint32_t i) const { return counts_.at(i); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
    std::uint64_t total() const noexcept { return total_; }

private:
    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::uint64_t total_ = 0;
};

/// Vocabulary of embedding forms with summed counts, keeping those seen at
/// least `min_token_count` times. Ordered by count descending, then token.
EmbedVocab build_vocab(const SegmentedCorpus& corpus, std::uint64_t min_token_count = 1);

/// Token stream over vocabulary indices; tokens outside the vocabulary are
/// removed and boundaries kept.
struct EmbedCorpus {
    std::vector<std::uint32_t> tokens;
    std::vector<std::size_t> boundaries;

    std::vector<std::pair<std::size_t, std::size_t>> segments() const;
};

EmbedCorpus map_corpus(const SegmentedCorpus& corpus, const EmbedVocab& vocab);

struct SubwordRange {
    unsigned min_n = 3;
    unsigned max_n = 6;
};

struct TrainConfig {
    std::size_t dim = 100;
    std::size_t window = 2;
    std::size_t negatives = 5;
    std::size_t epochs = 5;
    double initial_lr = 0.025;  // decays linearly to 0
    double subsample_threshold = 1e-4;  // 0 disables
    std::optional<SubwordRange> subword_ngrams;
    std::size_t buckets = std::size_t{1} << 21;
    std::uint64_t min_token_count = 1;
    std::uint64_t seed = 1;
    /// 1 is the deterministic mode. More threads apply lock-free concurrent
    /// updates and results vary run to run.
    std::size_t threads = 1;

    void validate() const;
};

/// Character n-grams of `<token>`, each hashed (FNV-1a) into `buckets`.
std::vector<std::uint32_t> subword_buckets(std::string_view token, const SubwordRange& range, std::size_t buckets);

/// Token vectors for lookup and evaluation.
class WordVectors {
public:
    WordVectors() = default;
    explicit WordVectors(std::size_t dim) : dim_(dim) {}

    /// Throws ValidationError on a duplicate token or dimension mismatch.
    void add(std::string token, std::span<const float> values);

    std::size_t size() const noexcept { return tokens_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::string& token(std::size_t i) const { return tokens_.at(i); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    std::optional<std::uint32_t> find(std::string_view token) const;
    std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

private:
    std::size_t dim_ = 0;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::vector<float> data_;
};

/// Input rows: one per token, then the subword buckets (if enabled).
/// Output rows: one per token. A token's input vector is the mean of its
/// own row and its bucket rows.
template <typename Real>
class BasicEmbeddingMatrix {
public:
    BasicEmbeddingMatrix() = default;
    BasicEmbeddingMatrix(EmbedVocab vocab, const TrainConfig& config);

    const EmbedVocab& vocab() const noexcept { return vocab_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t input_rows() const noexcept { return input_.size() / (dim_ ? dim_ : 1); }
    std::size_t output_rows() const noexcept { return output_.size() / (dim_ ? dim_ : 1); }

    std::span<Real> input_row(std::size_t r) { return {input_.data() + r * dim_, dim_}; }
    std::span<const Real> input_row(std::size_t r) const { return {input_.data() + r * dim_, dim_}; }
    std::span<Real> output_row(std::size_t r) { return {output_.data() + r * dim_, dim_}; }
    std::span<const Real> output_row(std::size_t r) const { return {output_.data() + r * dim_, dim_}; }

    /// Input rows averaged into the token's input vector.
    const std::vector<std::uint32_t>& components(std::uint32_t token) const { return components_.at(token); }
    void compose(std::uint32_t token, std::span<Real> out) const;

    std::vector<Real>& input_data() noexcept { return input_; }
    std::vector<Real>& output_data() noexcept { return output_; }
    const std::vector<Real>& input_data() const noexcept { return input_; }
    const std::vector<Real>& output_data() const noexcept { return output_; }

    /// Composed input vectors for every token.
    WordVectors word_vectors() const;

    bool operator==(const BasicEmbeddingMatrix& other) const {
        return dim_ == other.dim_ && vocab_.tokens() == other.vocab_.tokens() && input_ == other.input_ &&
               output_ == other.output_;
    }

private:
    EmbedVocab vocab_;
    std::size_t dim_ = 0;
    std::vector<Real> input_;
    std::vector<Real> output_;
    std::vector<std::vector<std::uint32_t>> components_;
};

using EmbeddingMatrix = BasicEmbeddingMatrix<float>;

/// Samples token indices with probability proportional to count^0.75.
class NegativeSampler {
public:
    explicit NegativeSampler(std::span<const std::uint64_t> counts, double power = 0.75);

    template <typename Rng>
    std::uint32_t operator()(Rng& rng) const {
        return draw(static_cast<double>(rng() >> 11) * 0x1.0p-53);
    }

    /// `u` in [0, 1).
    std::uint32_t draw(double u) const;
    double probability(std::uint32_t token) const;

private:
    std::vector<double> cumulative_;
};

/// Loss of one (center, context) pair with the given negatives:
/// -log s(u_ctx . v) - sum log s(-u_neg . v), v = composed center vector.
template <typename Real>
double pair_loss(const BasicEmbeddingMatrix<Real>& m, std::uint32_t center, std::uint32_t context,
                 std::span<const std::uint32_t> negatives);

/// Exact gradient of pair_loss with respect to every parameter it touches.
struct PairGradient {
    double loss = 0.0;
    std::vector<std::pair<std::uint32_t, std::vector<double>>> input;   // per input row
    std::vector<std::pair<std::uint32_t, std::vector<double>>> output;  // per output row, duplicates summed
};

template <typename Real>
PairGradient pair_gradient(const BasicEmbeddingMatrix<Real>& m, std::uint32_t center, std::uint32_t context,
                           std::span<const std::uint32_t> negatives);

/// One SGD step along -pair_gradient scaled by `lr`; returns the loss
/// before the step.
template <typename Real>
double sgd_step(BasicEmbeddingMatrix<Real>& m, std::uint32_t center, std::uint32_t context,
                std::span<const std::uint32_t> negatives, double lr);

struct TrainReport {
    std::vector<double> epoch_mean_loss;
    std::uint64_t pairs = 0;
};

/// Optional instrumentation. Positions index EmbedCorpus::tokens.
struct TrainObserver {
    std::function<void(std::size_t center_pos, std::size_t context_pos, double loss)> on_pair;
};

/// Skipgram with negative sampling. Throws DomainError for an empty
/// vocabulary or corpus.
template <typename Real>
TrainReport train_skipgram(BasicEmbeddingMatrix<Real>& m, const EmbedCorpus& corpus, const TrainConfig& config,
                           std::ostream* progress = nullptr, const TrainObserver* observer = nullptr);

/// Builds the vocabulary, initializes a matrix and trains it.
EmbeddingMatrix train_skipgram(const SegmentedCorpus& corpus, const TrainConfig& config,
                               std::ostream* progress = nullptr, TrainReport* report = nullptr);

/// Header `<vocab-size> <dim>`, then `token v1 ... vdim` per line with the
/// token escaped as in the segmented corpus and values to 9 significant digits.
void export_vectors(const WordVectors& v, std::ostream& out);
void export_vectors(const WordVectors& v, const std::string& path);
/// Throws ParseError on malformed rows and ValidationError on duplicates.
WordVectors import_vectors(std::istream& in);
WordVectors import_vectors(const std::string& path);

}  // namespace rgram
