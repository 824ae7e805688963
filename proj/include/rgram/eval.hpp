#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rgram/embed.hpp"

namespace rgram {

/// Throws DomainError if either vector is zero or the sizes differ.
double cosine(std::span<const float> u, std::span<const float> v);

struct Neighbor {
    std::string token;
    double cosine = 0.0;

    bool operator==(const Neighbor&) const = default;
};

/// Empty `oov` means the query was found.
struct NeighborResult {
    std::vector<Neighbor> neighbors;
    std::optional<std::string> oov;

    bool found() const noexcept { return !oov; }
};

/// Unit-length copies of every row; zero rows stay zero and never rank.
class NormalizedVectors {
public:
    explicit NormalizedVectors(const WordVectors& v);

    const WordVectors& source() const noexcept { return *source_; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    bool zero(std::size_t i) const { return zero_[i]; }
    std::size_t size() const noexcept { return zero_.size(); }
    std::size_t dim() const noexcept { return dim_; }

private:
    const WordVectors* source_;
    std::size_t dim_;
    std::vector<double> data_;
    std::vector<bool> zero_;
};

/// Top-k by cosine with `target` (already unit length), skipping `exclude`.
/// Ties go to the lexicographically smaller token.
std::vector<Neighbor> rank_by_cosine(const NormalizedVectors& nv, std::span<const double> target, std::size_t k,
                                     std::span<const std::uint32_t> exclude);
/// Single-threaded reference for rank_by_cosine().
std::vector<Neighbor> rank_by_cosine_serial(const NormalizedVectors& nv, std::span<const double> target,
                                            std::size_t k, std::span<const std::uint32_t> exclude);

NeighborResult nearest_neighbors(const NormalizedVectors& nv, std::string_view query, std::size_t k);
NeighborResult nearest_neighbors(const WordVectors& v, std::string_view query, std::size_t k);

/// "b is to a as gold is to c": target v(b) - v(a) + v(c).
struct AnalogyQuery {
    std::string a, b, c, gold;
    std::string section;
};

NeighborResult analogy(const NormalizedVectors& nv, const AnalogyQuery& q, std::size_t k);
NeighborResult analogy(const WordVectors& v, const AnalogyQuery& q, std::size_t k);

struct AnalogyOutcome {
    AnalogyQuery query;
    bool attempted = false;
    bool correct = false;
    std::string top1;
    bool near_synonym = false;  // gold is a proper substring of top1
};

struct SuiteResult {
    std::size_t total = 0;
    std::size_t attempted = 0;
    std::size_t correct = 0;
    double score = 0.0;     // correct / attempted, 0 if nothing attempted
    double coverage = 0.0;  // attempted / total
    std::vector<AnalogyOutcome> outcomes;
};

/// Throws DomainError on an empty suite.
SuiteResult analogy_suite(const WordVectors& v, std::span<const AnalogyQuery> queries);

struct SimilarityPair {
    std::string t1, t2;
    double gold = 0.0;
};

struct SimilarityResult {
    double spearman = 0.0;
    double coverage = 0.0;
    std::size_t scored = 0;
    std::size_t total = 0;
};

/// Spearman correlation with average ranks for ties. Throws DomainError
/// when fewer than two pairs are in vocabulary or a ranking is constant.
SimilarityResult similarity_suite(const WordVectors& v, std::span<const SimilarityPair> pairs);

/// Average (1-based) ranks, ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> x);
double spearman(std::span<const double> x, std::span<const double> y);

/// `:` lines start a section; other non-blank lines hold `a b c gold`.
std::vector<AnalogyQuery> read_analogies(std::istream& in);
std::vector<AnalogyQuery> read_analogies(const std::string& path);
/// `t1<TAB>t2<TAB>score` per non-blank line.
std::vector<SimilarityPair> read_similarity(std::istream& in);
std::vector<SimilarityPair> read_similarity(const std::string& path);

}  // namespace rgram
