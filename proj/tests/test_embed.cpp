#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "rgram/embed.hpp"
#include "rgram/error.hpp"

using namespace rgram;

namespace {

SegmentedCorpus segmented(const std::vector<std::vector<std::string>>& docs) {
    SegmentedCorpus c;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        if (d > 0) c.boundaries.push_back(c.tokens.size());
        for (const std::string& t : docs[d]) {
            auto it = std::find(c.types.begin(), c.types.end(), t);
            if (it == c.types.end()) {
                c.types.push_back(t);
                it = c.types.end() - 1;
            }
            c.tokens.push_back(static_cast<std::uint32_t>(it - c.types.begin()));
        }
    }
    return c;
}

SegmentedCorpus toy() {
    return segmented({{"the ", "cat", " sat", "the ", "dog", " sat", "the ", "cat", " ran"},
                      {"a ", "dog", " ran", "the ", "cat", " sat"}});
}

TrainConfig small_config() {
    TrainConfig c;
    c.dim = 4;
    c.negatives = 3;
    c.epochs = 1;
    c.subsample_threshold = 0;
    return c;
}

template <typename Real>
void randomize_outputs(BasicEmbeddingMatrix<Real>& m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (Real& x : m.output_data()) x = static_cast<Real>(u(rng));
}

// Max relative error between pair_gradient and central differences, h=1e-5.
double gradient_error(BasicEmbeddingMatrix<double>& m, std::uint32_t center, std::uint32_t context,
                      const std::vector<std::uint32_t>& negs) {
    const PairGradient g = pair_gradient(m, center, context, negs);
    const double h = 1e-5;
    double worst = 0.0;
    auto check = [&](std::vector<double>& data, std::size_t row, const std::vector<double>& analytic) {
        for (std::size_t d = 0; d < m.dim(); ++d) {
            double& x = data[row * m.dim() + d];
            const double saved = x;
            x = saved + h;
            const double up = pair_loss(m, center, context, negs);
            x = saved - h;
            const double down = pair_loss(m, center, context, negs);
            x = saved;
            const double numeric = (up - down) / (2 * h);
            const double scale = std::max({std::abs(numeric), std::abs(analytic[d]), 1e-6});
            worst = std::max(worst, std::abs(numeric - analytic[d]) / scale);
        }
    };
    std::set<std::uint32_t> in_rows, out_rows;
    for (const auto& [row, grad] : g.input) {
        check(m.input_data(), row, grad);
        in_rows.insert(row);
    }
    for (const auto& [row, grad] : g.output) {
        check(m.output_data(), row, grad);
        out_rows.insert(row);
    }
    // Rows outside the gradient must not affect the loss.
    const std::vector<double> zero(m.dim(), 0.0);
    for (std::uint32_t r = 0; r < m.output_rows(); ++r)
        if (!out_rows.count(r)) check(m.output_data(), r, zero);
    return worst;
}

}  // namespace

TEST(EmbeddingForm, TrimsAndSubstitutesDigits) {
    EXPECT_EQ(embedding_form("the "), "the");
    EXPECT_EQ(embedding_form(" new york "), "new york");
    EXPECT_EQ(embedding_form("   "), "<ws>");
    EXPECT_EQ(embedding_form("\t "), "<ws>");
    EXPECT_EQ(embedding_form("born 1949"), "born NNNN");
    EXPECT_EQ(embedding_form("example_"), "example_");
}

TEST(BuildVocab, Examples) {
    const EmbedVocab v = build_vocab(segmented({{"the ", "the", " the"}}));
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v.token(0), "the");
    EXPECT_EQ(v.count(0), 3u);

    const EmbedVocab ws = build_vocab(segmented({{"   ", "x", " "}}));
    EXPECT_EQ(ws.token(0), "<ws>");
    EXPECT_EQ(ws.count(0), 2u);

    const EmbedVocab cut = build_vocab(segmented({{"a", "b", "a"}}), 2);
    ASSERT_EQ(cut.size(), 1u);
    EXPECT_EQ(cut.token(0), "a");
    EXPECT_EQ(cut.count(0), 2u);
}

TEST(BuildVocab, OrderedByCountThenToken) {
    const EmbedVocab v = build_vocab(segmented({{"b", "c", "a", "c", "b", "d", "c"}}));
    EXPECT_EQ(v.tokens(), (std::vector<std::string>{"c", "b", "a", "d"}));
    EXPECT_EQ(v.total(), 7u);
}

TEST(MapCorpus, DropsRareTokensKeepsBoundaries) {
    const SegmentedCorpus c = segmented({{"a", "b", "a"}, {"b", "z"}, {"a"}});
    const EmbedVocab v = build_vocab(c, 2);
    const EmbedCorpus e = map_corpus(c, v);
    EXPECT_EQ(e.tokens.size(), 5u);
    EXPECT_EQ(e.boundaries, (std::vector<std::size_t>{3, 4}));
    EXPECT_EQ(e.segments().size(), 3u);
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.window, 2u);
    c.window = 0;
    EXPECT_THROW(c.validate(), DomainError);
    c = {};
    c.negatives = 0;
    EXPECT_THROW(c.validate(), DomainError);
    c = {};
    c.subword_ngrams = SubwordRange{4, 3};
    EXPECT_THROW(c.validate(), DomainError);
}

TEST(Subwords, BucketsAreDeterministicAndBounded) {
    const auto a = subword_buckets("where", {3, 6}, 1000);
    // <where> has 7 characters: 5 trigrams, 4 four-grams, 3 five-grams, 2 six-grams.
    EXPECT_EQ(a.size(), 14u);
    EXPECT_EQ(a, subword_buckets("where", {3, 6}, 1000));
    for (std::uint32_t b : a) EXPECT_LT(b, 1000u);
    EXPECT_NE(subword_buckets("here", {3, 3}, 1 << 20), subword_buckets("hera", {3, 3}, 1 << 20));
    // Single characters exclude the bare markers.
    EXPECT_EQ(subword_buckets("ab", {1, 1}, 97).size(), 2u);
}

TEST(NegativeSampler, EmpiricalFrequenciesMatch) {
    const std::vector<std::uint64_t> counts{140, 130, 120, 110, 100, 90, 80, 70, 60, 50};
    const NegativeSampler sampler(counts);
    double z = 0.0;
    for (auto c : counts) z += std::pow(static_cast<double>(c), 0.75);
    std::vector<std::uint64_t> hits(counts.size(), 0);
    std::mt19937_64 rng(71);
    const int draws = 1'000'000;
    for (int i = 0; i < draws; ++i) ++hits[sampler(rng)];
    for (std::size_t t = 0; t < counts.size(); ++t) {
        const double expected = std::pow(static_cast<double>(counts[t]), 0.75) / z;
        EXPECT_NEAR(sampler.probability(static_cast<std::uint32_t>(t)), expected, 1e-12);
        const double observed = static_cast<double>(hits[t]) / draws;
        EXPECT_LT(std::abs(observed - expected) / expected, 0.01) << t;
    }
}

TEST(NegativeSampler, Edges) {
    const std::vector<std::uint64_t> counts{1, 0, 3};
    const NegativeSampler s(counts);
    EXPECT_EQ(s.draw(0.0), 0u);
    EXPECT_EQ(s.draw(0.999999), 2u);
    EXPECT_EQ(s.probability(1), 0.0);
    EXPECT_THROW(NegativeSampler(std::vector<std::uint64_t>{}), DomainError);
}

TEST(Skipgram, InitialLossIsLn2PerTarget) {
    for (std::size_t negatives : {1u, 5u, 9u}) {
        TrainConfig c = small_config();
        c.negatives = negatives;
        const EmbedVocab v = build_vocab(toy());
        const EmbeddingMatrix m(v, c);
        for (float x : m.output_data()) ASSERT_EQ(x, 0.0f);
        std::vector<std::uint32_t> negs(negatives, 2);
        EXPECT_NEAR(pair_loss(m, 0, 1, negs), (1.0 + negatives) * std::log(2.0), 1e-9);
    }
}

TEST(Skipgram, GradientMatchesFiniteDifferences) {
    const EmbedVocab v = build_vocab(toy());
    for (bool subwords : {false, true}) {
        TrainConfig c = small_config();
        if (subwords) {
            c.subword_ngrams = SubwordRange{2, 3};
            c.buckets = 11;  // small table so rows collide
        }
        BasicEmbeddingMatrix<double> m(v, c);
        randomize_outputs(m, 73);
        std::mt19937_64 rng(79);
        std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(v.size() - 1));
        for (int trial = 0; trial < 30; ++trial) {
            const std::uint32_t center = pick(rng), context = pick(rng);
            std::vector<std::uint32_t> negs{pick(rng), pick(rng), pick(rng)};
            if (trial % 5 == 0) negs[1] = negs[0] = context;  // repeated targets
            EXPECT_LT(gradient_error(m, center, context, negs), 1e-4) << trial;
        }
    }
}

TEST(Skipgram, SgdStepFollowsGradient) {
    const EmbedVocab v = build_vocab(toy());
    TrainConfig c = small_config();
    c.subword_ngrams = SubwordRange{2, 4};
    c.buckets = 13;
    BasicEmbeddingMatrix<double> m(v, c);
    randomize_outputs(m, 83);
    const double lr = 0.1;
    for (const std::vector<std::uint32_t>& negs :
         {std::vector<std::uint32_t>{2, 3, 4}, std::vector<std::uint32_t>{1, 1, 0}}) {
        BasicEmbeddingMatrix<double> stepped = m;
        const PairGradient g = pair_gradient(m, 0, 1, negs);
        const double loss = sgd_step(stepped, 0, 1, negs, lr);
        EXPECT_DOUBLE_EQ(loss, g.loss);
        BasicEmbeddingMatrix<double> expected = m;
        for (const auto& [row, grad] : g.input)
            for (std::size_t d = 0; d < m.dim(); ++d) expected.input_row(row)[d] -= lr * grad[d];
        for (const auto& [row, grad] : g.output)
            for (std::size_t d = 0; d < m.dim(); ++d) expected.output_row(row)[d] -= lr * grad[d];
        for (std::size_t i = 0; i < m.input_data().size(); ++i)
            EXPECT_NEAR(stepped.input_data()[i], expected.input_data()[i], 1e-14);
        for (std::size_t i = 0; i < m.output_data().size(); ++i)
            EXPECT_NEAR(stepped.output_data()[i], expected.output_data()[i], 1e-14);
    }
}

TEST(Skipgram, DeterministicSingleThread) {
    TrainConfig c = small_config();
    c.epochs = 3;
    c.seed = 5;
    const EmbeddingMatrix a = train_skipgram(toy(), c);
    const EmbeddingMatrix b = train_skipgram(toy(), c);
    EXPECT_TRUE(a == b);
    c.seed = 6;
    EXPECT_FALSE(a == train_skipgram(toy(), c));
}

TEST(Skipgram, LossDecreasesOverFirstEpoch) {
    // A repetitive corpus so there is something to learn.
    std::vector<std::vector<std::string>> docs;
    std::mt19937_64 rng(89);
    const std::vector<std::string> subjects{"the cat", "a dog", "my bird"}, verbs{" sat", " ran", " flew"};
    for (int d = 0; d < 200; ++d) {
        std::vector<std::string> doc;
        for (int k = 0; k < 10; ++k) {
            const std::size_t i = rng() % 3;
            doc.push_back(subjects[i]);
            doc.push_back(verbs[i]);
        }
        docs.push_back(doc);
    }
    const SegmentedCorpus corpus = segmented(docs);
    TrainConfig c;
    c.dim = 16;
    c.epochs = 1;
    c.subsample_threshold = 0;
    const EmbedVocab v = build_vocab(corpus);
    const EmbedCorpus mapped = map_corpus(corpus, v);
    EmbeddingMatrix m(v, c);
    std::vector<double> losses;
    TrainObserver obs;
    obs.on_pair = [&](std::size_t, std::size_t, double loss) { losses.push_back(loss); };
    train_skipgram(m, mapped, c, nullptr, &obs);
    ASSERT_GT(losses.size(), 1000u);
    const std::size_t q = losses.size() / 4;
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
        first += losses[i];
        last += losses[losses.size() - 1 - i];
    }
    EXPECT_LT(last, first);
}

TEST(Skipgram, WindowNeverCrossesBoundaries) {
    const SegmentedCorpus corpus = segmented({{"a", "b", "c", "d"}, {"e", "f"}, {"g", "h", "i"}});
    TrainConfig c = small_config();
    c.window = 3;
    const EmbedVocab v = build_vocab(corpus);
    const EmbedCorpus mapped = map_corpus(corpus, v);
    const auto segs = mapped.segments();
    auto segment_of = [&](std::size_t pos) {
        for (std::size_t s = 0; s < segs.size(); ++s)
            if (pos >= segs[s].first && pos < segs[s].second) return s;
        return segs.size();
    };
    std::size_t pairs = 0;
    TrainObserver obs;
    obs.on_pair = [&](std::size_t center, std::size_t context, double) {
        ++pairs;
        EXPECT_EQ(segment_of(center), segment_of(context));
        EXPECT_NE(center, context);
        EXPECT_LE(center > context ? center - context : context - center, 3u);
    };
    EmbeddingMatrix m(v, c);
    const TrainReport r = train_skipgram(m, mapped, c, nullptr, &obs);
    // 4 tokens: 12 ordered pairs; 2 tokens: 2; 3 tokens: 6.
    EXPECT_EQ(pairs, 20u);
    EXPECT_EQ(r.pairs, 20u);
}

TEST(Skipgram, ProgressAndErrors) {
    TrainConfig c = small_config();
    c.epochs = 2;
    std::ostringstream progress;
    TrainReport report;
    train_skipgram(toy(), c, &progress, &report);
    EXPECT_EQ(report.epoch_mean_loss.size(), 2u);
    EXPECT_NE(progress.str().find("epoch 2/2"), std::string::npos);
    EXPECT_THROW(train_skipgram(SegmentedCorpus{}, c), DomainError);
}

TEST(Skipgram, EntriesStayFinite) {
    TrainConfig c = small_config();
    c.initial_lr = 1.0;
    c.epochs = 20;
    const EmbeddingMatrix m = train_skipgram(toy(), c);
    for (float x : m.input_data()) EXPECT_TRUE(std::isfinite(x));
    for (float x : m.output_data()) EXPECT_TRUE(std::isfinite(x));
}

TEST(WordVectors, Validation) {
    WordVectors v(2);
    const float row[] = {1.0f, 2.0f};
    v.add("a", row);
    EXPECT_THROW(v.add("a", row), ValidationError);
    const float longer[] = {1.0f, 2.0f, 3.0f};
    EXPECT_THROW(v.add("b", longer), ValidationError);
}

TEST(VectorFile, RoundTrip) {
    TrainConfig c = small_config();
    c.dim = 7;
    c.epochs = 2;
    const WordVectors v = train_skipgram(toy(), c).word_vectors();
    std::stringstream io;
    export_vectors(v, io);
    const WordVectors back = import_vectors(io);
    ASSERT_EQ(back.size(), v.size());
    ASSERT_EQ(back.dim(), v.dim());
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_EQ(back.token(i), v.token(i));
        for (std::size_t d = 0; d < v.dim(); ++d) {
            EXPECT_NEAR(back.row(i)[d], v.row(i)[d], 1e-8);
            EXPECT_EQ(back.row(i)[d], v.row(i)[d]);  // 9 digits round-trip a float exactly
        }
    }
}

TEST(VectorFile, Format) {
    WordVectors v(2);
    const float row[] = {0.5f, -1.25f};
    v.add("new york", row);
    std::ostringstream out;
    export_vectors(v, out);
    EXPECT_EQ(out.str(), "1 2\nnew_york 0.5 -1.25\n");
}

TEST(VectorFile, Errors) {
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return import_vectors(in);
    };
    EXPECT_THROW(parse("2 3\na 1 2 3 4\n"), ParseError);
    EXPECT_THROW(parse("2 3\na 1 2 3\na 1 2 3\n"), ValidationError);
    EXPECT_THROW(parse("2 3\na 1 2 3\n"), ParseError);
    EXPECT_THROW(parse("1 2\na 1 x\n"), ParseError);
    EXPECT_THROW(parse(""), ParseError);
    EXPECT_THROW(import_vectors(std::string("/nonexistent/vectors.txt")), IoError);
}
