#include "rgram/embed.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rgram/error.hpp"

#ifdef RGRAM_HAVE_OPENMP
#include <omp.h>
#endif

namespace rgram {

namespace {

bool is_unicode_space(char32_t cp) {
    return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
           (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F || cp == 0x205F ||
           cp == 0x3000;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::uint32_t fnv1a(std::string_view bytes) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

// Dot products and loss coefficients shared by loss, gradient and SGD.
// coeff[k] = dL/d(u_k . v) for targets [context, negatives...].
template <typename Real>
double forward(const BasicEmbeddingMatrix<Real>& m, std::span<const double> v, std::uint32_t context,
               std::span<const std::uint32_t> negatives, std::vector<double>& coeff) {
    coeff.assign(negatives.size() + 1, 0.0);
    double loss = 0.0;
    for (std::size_t k = 0; k <= negatives.size(); ++k) {
        const std::uint32_t target = k == 0 ? context : negatives[k - 1];
        const auto u = m.output_row(target);
        double dot = 0.0;
        for (std::size_t d = 0; d < v.size(); ++d) dot += static_cast<double>(u[d]) * v[d];
        if (k == 0) {
            loss -= log_sigmoid(dot);
            coeff[k] = sigmoid(dot) - 1.0;
        } else {
            loss -= log_sigmoid(-dot);
            coeff[k] = sigmoid(dot);
        }
    }
    return loss;
}

template <typename Real>
void composed(const BasicEmbeddingMatrix<Real>& m, std::uint32_t center, std::vector<double>& v) {
    const auto& rows = m.components(center);
    v.assign(m.dim(), 0.0);
    for (std::uint32_t r : rows) {
        const auto row = m.input_row(r);
        for (std::size_t d = 0; d < v.size(); ++d) v[d] += static_cast<double>(row[d]);
    }
    const double scale = 1.0 / static_cast<double>(rows.size());
    for (double& x : v) x *= scale;
}

}  // namespace

std::string embedding_form(std::string_view rgram) {
    const std::u32string text = decode_utf8(rgram);
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && is_unicode_space(text[begin])) ++begin;
    while (end > begin && is_unicode_space(text[end - 1])) --end;
    if (begin == end) return std::string(kWhitespaceToken);
    std::string out;
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) append_utf8(out, (text[i] >= U'0' && text[i] <= U'9') ? U'N' : text[i]);
    return out;
}

std::uint32_t EmbedVocab::add(const std::string& token, std::uint64_t count) {
    auto [it, inserted] = index_.try_emplace(token, static_cast<std::uint32_t>(tokens_.size()));
    if (inserted) {
        tokens_.push_back(token);
        counts_.push_back(0);
    }
    counts_[it->second] += count;
    total_ += count;
    return it->second;
}

std::optional<std::uint32_t> EmbedVocab::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

EmbedVocab build_vocab(const SegmentedCorpus& corpus, std::uint64_t min_token_count) {
    std::vector<std::uint64_t> type_counts(corpus.types.size(), 0);
    for (std::uint32_t t : corpus.tokens) ++type_counts[t];
    EmbedVocab merged;
    for (std::size_t t = 0; t < corpus.types.size(); ++t)
        if (type_counts[t] > 0) merged.add(embedding_form(corpus.types[t]), type_counts[t]);

    std::vector<std::uint32_t> order(merged.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (merged.count(a) != merged.count(b)) return merged.count(a) > merged.count(b);
        return merged.token(a) < merged.token(b);
    });
    EmbedVocab out;
    for (std::uint32_t i : order)
        if (merged.count(i) >= min_token_count) out.add(merged.token(i), merged.count(i));
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> EmbedCorpus::segments() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t begin = 0;
    for (std::size_t b : boundaries) {
        if (b > begin) out.emplace_back(begin, b);
        begin = b;
    }
    if (tokens.size() > begin) out.emplace_back(begin, tokens.size());
    return out;
}

EmbedCorpus map_corpus(const SegmentedCorpus& corpus, const EmbedVocab& vocab) {
    std::vector<std::optional<std::uint32_t>> type_to_vocab(corpus.types.size());
    for (std::size_t t = 0; t < corpus.types.size(); ++t) type_to_vocab[t] = vocab.find(embedding_form(corpus.types[t]));
    EmbedCorpus out;
    out.tokens.reserve(corpus.tokens.size());
    std::size_t next = 0;
    for (std::size_t i = 0; i <= corpus.tokens.size(); ++i) {
        while (next < corpus.boundaries.size() && corpus.boundaries[next] == i) {
            out.boundaries.push_back(out.tokens.size());
            ++next;
        }
        if (i < corpus.tokens.size())
            if (auto v = type_to_vocab[corpus.tokens[i]]) out.tokens.push_back(*v);
    }
    return out;
}

void TrainConfig::validate() const {
    if (dim == 0) throw DomainError("dim must be positive");
    if (window < 1) throw DomainError("window must be at least 1");
    if (negatives < 1) throw DomainError("negatives must be at least 1");
    if (initial_lr <= 0) throw DomainError("initial learning rate must be positive");
    if (subsample_threshold < 0) throw DomainError("subsample threshold must be non-negative");
    if (subword_ngrams) {
        if (subword_ngrams->min_n < 1 || subword_ngrams->min_n > subword_ngrams->max_n)
            throw DomainError("subword n-gram range must satisfy 1 <= min <= max");
        if (buckets == 0) throw DomainError("subword buckets must be positive");
    }
}

std::vector<std::uint32_t> subword_buckets(std::string_view token, const SubwordRange& range, std::size_t buckets) {
    std::u32string word = U"<";
    word += decode_utf8(token);
    word += U">";
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < word.size(); ++i) {
        for (std::size_t n = range.min_n; n <= range.max_n && i + n <= word.size(); ++n) {
            if (n == 1 && (i == 0 || i + 1 == word.size())) continue;
            const std::string gram = to_utf8(std::u32string_view(word).substr(i, n));
            out.push_back(static_cast<std::uint32_t>(fnv1a(gram) % buckets));
        }
    }
    return out;
}

void WordVectors::add(std::string token, std::span<const float> values) {
    if (values.size() != dim_)
        throw ValidationError("vector for '" + token + "' has " + std::to_string(values.size()) +
                              " values, expected " + std::to_string(dim_));
    auto [it, inserted] = index_.try_emplace(token, static_cast<std::uint32_t>(tokens_.size()));
    if (!inserted) throw ValidationError("duplicate token '" + token + "'");
    tokens_.push_back(std::move(token));
    data_.insert(data_.end(), values.begin(), values.end());
}

std::optional<std::uint32_t> WordVectors::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

template <typename Real>
BasicEmbeddingMatrix<Real>::BasicEmbeddingMatrix(EmbedVocab vocab, const TrainConfig& config)
    : vocab_(std::move(vocab)), dim_(config.dim) {
    config.validate();
    const std::size_t v = vocab_.size();
    const std::size_t extra = config.subword_ngrams ? config.buckets : 0;
    input_.assign((v + extra) * dim_, Real(0));
    output_.assign(v * dim_, Real(0));
    components_.resize(v);
    for (std::uint32_t t = 0; t < v; ++t) {
        components_[t].push_back(t);
        if (config.subword_ngrams)
            for (std::uint32_t b : subword_buckets(vocab_.token(t), *config.subword_ngrams, config.buckets))
                components_[t].push_back(static_cast<std::uint32_t>(v + b));
    }
    std::mt19937_64 rng(config.seed);
    const double scale = 1.0 / static_cast<double>(dim_);
    for (Real& x : input_) x = static_cast<Real>((uniform01(rng) - 0.5) * scale);
}

template <typename Real>
void BasicEmbeddingMatrix<Real>::compose(std::uint32_t token, std::span<Real> out) const {
    std::vector<double> v;
    composed(*this, token, v);
    for (std::size_t d = 0; d < dim_; ++d) out[d] = static_cast<Real>(v[d]);
}

template <typename Real>
WordVectors BasicEmbeddingMatrix<Real>::word_vectors() const {
    WordVectors out(dim_);
    std::vector<double> v;
    std::vector<float> row(dim_);
    for (std::uint32_t t = 0; t < vocab_.size(); ++t) {
        composed(*this, t, v);
        for (std::size_t d = 0; d < dim_; ++d) row[d] = static_cast<float>(v[d]);
        out.add(vocab_.token(t), row);
    }
    return out;
}

NegativeSampler::NegativeSampler(std::span<const std::uint64_t> counts, double power) {
    if (counts.empty()) throw DomainError("negative sampler needs a non-empty vocabulary");
    cumulative_.reserve(counts.size());
    double total = 0.0;
    for (std::uint64_t c : counts) {
        total += std::pow(static_cast<double>(c), power);
        cumulative_.push_back(total);
    }
    if (total <= 0.0) throw DomainError("negative sampler needs positive counts");
}

std::uint32_t NegativeSampler::draw(double u) const {
    const double x = u * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    if (it == cumulative_.end()) --it;
    return static_cast<std::uint32_t>(it - cumulative_.begin());
}

double NegativeSampler::probability(std::uint32_t token) const {
    const double lo = token == 0 ? 0.0 : cumulative_[token - 1];
    return (cumulative_[token] - lo) / cumulative_.back();
}

template <typename Real>
double pair_loss(const BasicEmbeddingMatrix<Real>& m, std::uint32_t center, std::uint32_t context,
                 std::span<const std::uint32_t> negatives) {
    std::vector<double> v, coeff;
    composed(m, center, v);
    return forward(m, v, context, negatives, coeff);
}

template <typename Real>
PairGradient pair_gradient(const BasicEmbeddingMatrix<Real>& m, std::uint32_t center, std::uint32_t context,
                           std::span<const std::uint32_t> negatives) {
    std::vector<double> v, coeff;
    composed(m, center, v);
    PairGradient g;
    g.loss = forward(m, v, context, negatives, coeff);
    const std::size_t dim = m.dim();

    std::vector<double> dv(dim, 0.0);
    for (std::size_t k = 0; k <= negatives.size(); ++k) {
        const std::uint32_t target = k == 0 ? context : negatives[k - 1];
        const auto u = m.output_row(target);
        for (std::size_t d = 0; d < dim; ++d) dv[d] += coeff[k] * static_cast<double>(u[d]);
        auto it = std::find_if(g.output.begin(), g.output.end(), [&](const auto& e) { return e.first == target; });
        if (it == g.output.end()) {
            g.output.emplace_back(target, std::vector<double>(dim, 0.0));
            it = g.output.end() - 1;
        }
        for (std::size_t d = 0; d < dim; ++d) it->second[d] += coeff[k] * v[d];
    }
    const auto& rows = m.components(center);
    const double share = 1.0 / static_cast<double>(rows.size());
    for (std::uint32_t r : rows) {
        auto it = std::find_if(g.input.begin(), g.input.end(), [&](const auto& e) { return e.first == r; });
        if (it == g.input.end()) {
            g.input.emplace_back(r, std::vector<double>(dim, 0.0));
            it = g.input.end() - 1;
        }
        for (std::size_t d = 0; d < dim; ++d) it->second[d] += share * dv[d];
    }
    return g;
}

template <typename Real>
double sgd_step(BasicEmbeddingMatrix<Real>& m, std::uint32_t center, std::uint32_t context,
                std::span<const std::uint32_t> negatives, double lr) {
    thread_local std::vector<double> v, coeff, dv;
    composed(m, center, v);
    const double loss = forward(m, v, context, negatives, coeff);
    const std::size_t dim = m.dim();
    dv.assign(dim, 0.0);
    // Dot products are all taken before any write, so repeated targets see
    // the same parameters, matching pair_gradient.
    for (std::size_t k = 0; k <= negatives.size(); ++k) {
        const std::uint32_t target = k == 0 ? context : negatives[k - 1];
        auto u = m.output_row(target);
        for (std::size_t d = 0; d < dim; ++d) {
            dv[d] += coeff[k] * static_cast<double>(u[d]);
            u[d] = static_cast<Real>(static_cast<double>(u[d]) - lr * coeff[k] * v[d]);
        }
    }
    // dv above picked up partially updated rows only when a target repeats;
    // recompute it from the pre-step values in that case.
    bool repeated = false;
    for (std::size_t k = 1; k <= negatives.size() && !repeated; ++k)
        for (std::size_t j = 0; j < k && !repeated; ++j)
            repeated = (k == 0 ? context : negatives[k - 1]) == (j == 0 ? context : negatives[j - 1]);
    if (repeated) {
        // Undo the row writes' effect: u_pre = u_post + lr * (sum of coeffs for that row) * v.
        dv.assign(dim, 0.0);
        for (std::size_t k = 0; k <= negatives.size(); ++k) {
            const std::uint32_t target = k == 0 ? context : negatives[k - 1];
            double total = 0.0;
            for (std::size_t j = 0; j <= negatives.size(); ++j)
                if ((j == 0 ? context : negatives[j - 1]) == target) total += coeff[j];
            const auto u = m.output_row(target);
            for (std::size_t d = 0; d < dim; ++d)
                dv[d] += coeff[k] * (static_cast<double>(u[d]) + lr * total * v[d]);
        }
    }
    const auto& rows = m.components(center);
    const double share = lr / static_cast<double>(rows.size());
    for (std::uint32_t r : rows) {
        auto row = m.input_row(r);
        for (std::size_t d = 0; d < dim; ++d) row[d] = static_cast<Real>(static_cast<double>(row[d]) - share * dv[d]);
    }
    return loss;
}

template <typename Real>
TrainReport train_skipgram(BasicEmbeddingMatrix<Real>& m, const EmbedCorpus& corpus, const TrainConfig& config,
                           std::ostream* progress, const TrainObserver* observer) {
    config.validate();
    const EmbedVocab& vocab = m.vocab();
    if (vocab.size() == 0) throw DomainError("empty vocabulary");
    if (corpus.tokens.empty()) throw DomainError("empty corpus");

    const NegativeSampler sampler(vocab.counts());
    std::vector<double> keep(vocab.size(), 1.0);
    if (config.subsample_threshold > 0) {
        const double t = config.subsample_threshold * static_cast<double>(vocab.total());
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            const double f = static_cast<double>(vocab.count(static_cast<std::uint32_t>(i)));
            keep[i] = std::min(1.0, (std::sqrt(f / t) + 1.0) * t / f);
        }
    }

    const auto segments = corpus.segments();
    const double total_work = static_cast<double>(config.epochs) * static_cast<double>(corpus.tokens.size());
    std::atomic<std::uint64_t> processed{0};
    TrainReport report;

    auto train_segment = [&](std::size_t s, std::mt19937_64& rng, std::vector<std::size_t>& kept,
                             std::vector<std::uint32_t>& negs, double& loss_sum, std::uint64_t& pairs) {
        const auto [begin, end] = segments[s];
        kept.clear();
        for (std::size_t i = begin; i < end; ++i)
            if (keep[corpus.tokens[i]] >= 1.0 || uniform01(rng) < keep[corpus.tokens[i]]) kept.push_back(i);
        const std::uint64_t done = processed.fetch_add(end - begin, std::memory_order_relaxed);
        const double lr = config.initial_lr * std::max(0.0, 1.0 - static_cast<double>(done) / total_work);
        for (std::size_t c = 0; c < kept.size(); ++c) {
            const std::size_t lo = c >= config.window ? c - config.window : 0;
            const std::size_t hi = std::min(kept.size() - 1, c + config.window);
            const std::uint32_t center = corpus.tokens[kept[c]];
            for (std::size_t o = lo; o <= hi; ++o) {
                if (o == c) continue;
                const std::uint32_t context = corpus.tokens[kept[o]];
                negs.clear();
                for (std::size_t k = 0; k < config.negatives; ++k) {
                    std::uint32_t neg = sampler(rng);
                    for (int tries = 0; neg == context && tries < 16 && vocab.size() > 1; ++tries) neg = sampler(rng);
                    negs.push_back(neg);
                }
                const double loss = sgd_step(m, center, context, negs, lr);
                loss_sum += loss;
                ++pairs;
                if (observer && observer->on_pair) observer->on_pair(kept[c], kept[o], loss);
            }
        }
    };

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::uint64_t pairs = 0;
        const std::size_t threads = std::max<std::size_t>(1, config.threads);
        if (threads == 1) {
            std::mt19937_64 rng(config.seed * 0x9E3779B97F4A7C15ull + epoch + 1);
            std::vector<std::size_t> kept;
            std::vector<std::uint32_t> negs;
            for (std::size_t s = 0; s < segments.size(); ++s) train_segment(s, rng, kept, negs, loss_sum, pairs);
        } else {
#ifdef RGRAM_HAVE_OPENMP
            const auto count = static_cast<std::ptrdiff_t>(segments.size());
#pragma omp parallel num_threads(static_cast<int>(threads)) reduction(+ : loss_sum, pairs)
            {
                std::mt19937_64 rng(config.seed * 0x9E3779B97F4A7C15ull + epoch * 1000003ull +
                                    static_cast<std::uint64_t>(omp_get_thread_num()) + 1);
                std::vector<std::size_t> kept;
                std::vector<std::uint32_t> negs;
#pragma omp for schedule(dynamic, 64)
                for (std::ptrdiff_t s = 0; s < count; ++s)
                    train_segment(static_cast<std::size_t>(s), rng, kept, negs, loss_sum, pairs);
            }
#else
            std::mt19937_64 rng(config.seed * 0x9E3779B97F4A7C15ull + epoch + 1);
            std::vector<std::size_t> kept;
            std::vector<std::uint32_t> negs;
            for (std::size_t s = 0; s < segments.size(); ++s) train_segment(s, rng, kept, negs, loss_sum, pairs);
#endif
        }
        const double mean = pairs ? loss_sum / static_cast<double>(pairs) : 0.0;
        report.epoch_mean_loss.push_back(mean);
        report.pairs += pairs;
        if (progress) {
            const double lr = config.initial_lr *
                              std::max(0.0, 1.0 - static_cast<double>(processed.load()) / total_work);
            *progress << "epoch " << epoch + 1 << "/" << config.epochs << " lr " << lr << " mean_loss " << mean
                      << " pairs " << pairs << '\n';
        }
    }
    return report;
}

EmbeddingMatrix train_skipgram(const SegmentedCorpus& corpus, const TrainConfig& config, std::ostream* progress,
                               TrainReport* report) {
    config.validate();
    EmbedVocab vocab = build_vocab(corpus, config.min_token_count);
    if (vocab.size() == 0) throw DomainError("empty vocabulary");
    const EmbedCorpus mapped = map_corpus(corpus, vocab);
    EmbeddingMatrix m(std::move(vocab), config);
    TrainReport r = train_skipgram(m, mapped, config, progress);
    if (report) *report = std::move(r);
    return m;
}

void export_vectors(const WordVectors& v, std::ostream& out) {
    out << v.size() << ' ' << v.dim() << '\n';
    char buf[32];
    for (std::size_t i = 0; i < v.size(); ++i) {
        out << escape_token(v.token(i));
        for (float x : v.row(i)) {
            std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(x));
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("failed to write vectors");
}

void export_vectors(const WordVectors& v, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    export_vectors(v, out);
}

WordVectors import_vectors(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "missing header");
    std::size_t count = 0;
    std::size_t dim = 0;
    {
        std::istringstream header(line);
        std::string extra;
        if (!(header >> count >> dim) || (header >> extra) || dim == 0)
            throw ParseError(1, "header must be '<vocab-size> <dim>'");
    }
    WordVectors out(dim);
    std::vector<float> values;
    values.reserve(dim);
    std::size_t number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        const std::size_t space = line.find(' ');
        if (space == std::string::npos || space == 0) throw ParseError(number, "expected token followed by values");
        std::string token = unescape_token(std::string_view(line).substr(0, space), number);
        values.clear();
        const char* p = line.data() + space;
        const char* end = line.data() + line.size();
        while (p < end) {
            while (p < end && *p == ' ') ++p;
            if (p == end) break;
            float x;
            auto [ptr, ec] = std::from_chars(p, end, x);
            if (ec != std::errc() || (ptr < end && *ptr != ' ')) throw ParseError(number, "bad number");
            values.push_back(x);
            p = ptr;
        }
        if (values.size() != dim)
            throw ParseError(number, "expected " + std::to_string(dim) + " values, got " + std::to_string(values.size()));
        if (out.find(token)) throw ValidationError("line " + std::to_string(number) + ": duplicate token '" + token + "'");
        out.add(std::move(token), values);
    }
    if (in.bad()) throw IoError("failed to read vectors");
    if (out.size() != count)
        throw ParseError(number, "header announced " + std::to_string(count) + " rows, found " + std::to_string(out.size()));
    return out;
}

WordVectors import_vectors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return import_vectors(in);
}

template class BasicEmbeddingMatrix<float>;
template class BasicEmbeddingMatrix<double>;

template double pair_loss(const BasicEmbeddingMatrix<float>&, std::uint32_t, std::uint32_t,
                          std::span<const std::uint32_t>);
template double pair_loss(const BasicEmbeddingMatrix<double>&, std::uint32_t, std::uint32_t,
                          std::span<const std::uint32_t>);
template PairGradient pair_gradient(const BasicEmbeddingMatrix<float>&, std::uint32_t, std::uint32_t,
                                    std::span<const std::uint32_t>);
template PairGradient pair_gradient(const BasicEmbeddingMatrix<double>&, std::uint32_t, std::uint32_t,
                                    std::span<const std::uint32_t>);
template double sgd_step(BasicEmbeddingMatrix<float>&, std::uint32_t, std::uint32_t, std::span<const std::uint32_t>,
                         double);
template double sgd_step(BasicEmbeddingMatrix<double>&, std::uint32_t, std::uint32_t, std::span<const std::uint32_t>,
                         double);
template TrainReport train_skipgram(BasicEmbeddingMatrix<float>&, const EmbedCorpus&, const TrainConfig&,
                                    std::ostream*, const TrainObserver*);
template TrainReport train_skipgram(BasicEmbeddingMatrix<double>&, const EmbedCorpus&, const TrainConfig&,
                                    std::ostream*, const TrainObserver*);

}  // namespace rgram
