#include "rgram/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rgram/error.hpp"

#ifdef RGRAM_HAVE_OPENMP
#include <omp.h>
#endif

namespace rgram {

namespace {

struct Scored {
    double cosine;
    std::uint32_t index;
};

// Better-first order: higher cosine, then smaller token.
struct Before {
    const WordVectors* v;
    bool operator()(const Scored& x, const Scored& y) const {
        if (x.cosine != y.cosine) return x.cosine > y.cosine;
        return v->token(x.index) < v->token(y.index);
    }
};

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) s += a[d] * b[d];
    return s;
}

bool excluded(std::span<const std::uint32_t> exclude, std::uint32_t i) {
    return std::find(exclude.begin(), exclude.end(), i) != exclude.end();
}

// Keeps the best k of `pool` in order.
void keep_top(std::vector<Scored>& pool, std::size_t k, const Before& before) {
    if (pool.size() > k) {
        std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end(), before);
        pool.resize(k);
    }
    std::sort(pool.begin(), pool.end(), before);
}

std::vector<Neighbor> to_neighbors(const WordVectors& v, const std::vector<Scored>& pool) {
    std::vector<Neighbor> out;
    out.reserve(pool.size());
    for (const Scored& s : pool) out.push_back({v.token(s.index), s.cosine});
    return out;
}

std::vector<double> unit(std::span<const double> x) {
    std::vector<double> out(x.begin(), x.end());
    const double norm = std::sqrt(dot(out, out));
    if (norm > 0)
        for (double& e : out) e /= norm;
    return out;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(std::move(w));
    return out;
}

}  // namespace

double cosine(std::span<const float> u, std::span<const float> v) {
    if (u.size() != v.size()) throw DomainError("cosine of vectors with different sizes");
    double uv = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t d = 0; d < u.size(); ++d) {
        uv += static_cast<double>(u[d]) * v[d];
        uu += static_cast<double>(u[d]) * u[d];
        vv += static_cast<double>(v[d]) * v[d];
    }
    if (uu == 0.0 || vv == 0.0) throw DomainError("cosine with a zero vector");
    return std::clamp(uv / std::sqrt(uu * vv), -1.0, 1.0);
}

NormalizedVectors::NormalizedVectors(const WordVectors& v)
    : source_(&v), dim_(v.dim()), data_(v.size() * v.dim(), 0.0), zero_(v.size(), false) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto row = v.row(i);
        double norm = 0.0;
        for (float x : row) norm += static_cast<double>(x) * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            zero_[i] = true;
            continue;
        }
        for (std::size_t d = 0; d < dim_; ++d) data_[i * dim_ + d] = row[d] / norm;
    }
}

std::vector<Neighbor> rank_by_cosine_serial(const NormalizedVectors& nv, std::span<const double> target,
                                            std::size_t k, std::span<const std::uint32_t> exclude) {
    std::vector<Scored> pool;
    pool.reserve(nv.size());
    for (std::uint32_t i = 0; i < nv.size(); ++i) {
        if (nv.zero(i) || excluded(exclude, i)) continue;
        pool.push_back({std::clamp(dot(nv.row(i), target), -1.0, 1.0), i});
    }
    const Before before{&nv.source()};
    keep_top(pool, k, before);
    return to_neighbors(nv.source(), pool);
}

std::vector<Neighbor> rank_by_cosine(const NormalizedVectors& nv, std::span<const double> target, std::size_t k,
                                     std::span<const std::uint32_t> exclude) {
#ifdef RGRAM_HAVE_OPENMP
    if (nv.size() < 4096 || omp_get_max_threads() == 1) return rank_by_cosine_serial(nv, target, k, exclude);
    const Before before{&nv.source()};
    std::vector<Scored> merged;
    const auto n = static_cast<std::ptrdiff_t>(nv.size());
#pragma omp parallel
    {
        std::vector<Scored> local;
#pragma omp for nowait
        for (std::ptrdiff_t s = 0; s < n; ++s) {
            const auto i = static_cast<std::uint32_t>(s);
            if (nv.zero(i) || excluded(exclude, i)) continue;
            local.push_back({std::clamp(dot(nv.row(i), target), -1.0, 1.0), i});
        }
        keep_top(local, k, before);
#pragma omp critical
        merged.insert(merged.end(), local.begin(), local.end());
    }
    keep_top(merged, k, before);
    return to_neighbors(nv.source(), merged);
#else
    return rank_by_cosine_serial(nv, target, k, exclude);
#endif
}

NeighborResult nearest_neighbors(const NormalizedVectors& nv, std::string_view query, std::size_t k) {
    NeighborResult r;
    const auto q = nv.source().find(query);
    if (!q) {
        r.oov = std::string(query);
        return r;
    }
    if (nv.zero(*q)) throw DomainError("query '" + std::string(query) + "' has a zero vector");
    const std::uint32_t self[] = {*q};
    r.neighbors = rank_by_cosine(nv, nv.row(*q), k, self);
    return r;
}

NeighborResult nearest_neighbors(const WordVectors& v, std::string_view query, std::size_t k) {
    return nearest_neighbors(NormalizedVectors(v), query, k);
}

NeighborResult analogy(const NormalizedVectors& nv, const AnalogyQuery& q, std::size_t k) {
    NeighborResult r;
    std::uint32_t ids[3];
    const std::string* terms[3] = {&q.a, &q.b, &q.c};
    for (int t = 0; t < 3; ++t) {
        const auto id = nv.source().find(*terms[t]);
        if (!id) {
            r.oov = *terms[t];
            return r;
        }
        ids[t] = *id;
    }
    std::vector<double> target(nv.dim(), 0.0);
    const auto a = nv.row(ids[0]), b = nv.row(ids[1]), c = nv.row(ids[2]);
    for (std::size_t d = 0; d < nv.dim(); ++d) target[d] = b[d] - a[d] + c[d];
    r.neighbors = rank_by_cosine(nv, unit(target), k, ids);
    return r;
}

NeighborResult analogy(const WordVectors& v, const AnalogyQuery& q, std::size_t k) {
    return analogy(NormalizedVectors(v), q, k);
}

SuiteResult analogy_suite(const WordVectors& v, std::span<const AnalogyQuery> queries) {
    if (queries.empty()) throw DomainError("empty analogy suite");
    const NormalizedVectors nv(v);
    SuiteResult s;
    s.total = queries.size();
    for (const AnalogyQuery& q : queries) {
        AnalogyOutcome o;
        o.query = q;
        o.attempted = v.find(q.a) && v.find(q.b) && v.find(q.c) && v.find(q.gold);
        if (o.attempted) {
            ++s.attempted;
            const NeighborResult r = analogy(nv, q, 1);
            if (!r.neighbors.empty()) {
                o.top1 = r.neighbors.front().token;
                o.correct = o.top1 == q.gold;
                o.near_synonym = !o.correct && o.top1.find(q.gold) != std::string::npos;
            }
            if (o.correct) ++s.correct;
        }
        s.outcomes.push_back(std::move(o));
    }
    s.coverage = static_cast<double>(s.attempted) / static_cast<double>(s.total);
    s.score = s.attempted ? static_cast<double>(s.correct) / static_cast<double>(s.attempted) : 0.0;
    return s;
}

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DomainError("spearman over sequences of different lengths");
    if (x.size() < 2) throw DomainError("spearman needs at least two pairs");
    const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
    const double mean = (static_cast<double>(x.size()) + 1.0) / 2.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mean) * (ry[i] - mean);
        sxx += (rx[i] - mean) * (rx[i] - mean);
        syy += (ry[i] - mean) * (ry[i] - mean);
    }
    if (sxx == 0.0 || syy == 0.0) throw DomainError("spearman undefined for a constant ranking");
    return sxy / std::sqrt(sxx * syy);
}

SimilarityResult similarity_suite(const WordVectors& v, std::span<const SimilarityPair> pairs) {
    SimilarityResult r;
    r.total = pairs.size();
    std::vector<double> predicted, gold;
    for (const SimilarityPair& p : pairs) {
        const auto i = v.find(p.t1), j = v.find(p.t2);
        if (!i || !j) continue;
        predicted.push_back(cosine(v.row(*i), v.row(*j)));
        gold.push_back(p.gold);
    }
    r.scored = predicted.size();
    if (r.scored < 2) throw DomainError("similarity suite needs at least two in-vocabulary pairs");
    r.coverage = static_cast<double>(r.scored) / static_cast<double>(r.total);
    r.spearman = spearman(predicted, gold);
    return r;
}

std::vector<AnalogyQuery> read_analogies(std::istream& in) {
    std::vector<AnalogyQuery> out;
    std::string section;
    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.find_first_not_of(" \t") == std::string::npos) continue;
        if (line.front() == ':') {
            const auto begin = line.find_first_not_of(" \t", 1);
            section = begin == std::string::npos ? "" : line.substr(begin);
            continue;
        }
        const auto words = split_ws(line);
        if (words.size() != 4) throw ParseError(number, "expected 4 tokens, got " + std::to_string(words.size()));
        out.push_back({unescape_token(words[0], number), unescape_token(words[1], number),
                       unescape_token(words[2], number), unescape_token(words[3], number), section});
    }
    if (in.bad()) throw IoError("failed to read analogy file");
    return out;
}

std::vector<AnalogyQuery> read_analogies(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_analogies(in);
}

std::vector<SimilarityPair> read_similarity(std::istream& in) {
    std::vector<SimilarityPair> out;
    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos)
            throw ParseError(number, "expected t1<TAB>t2<TAB>score");
        SimilarityPair p;
        p.t1 = unescape_token(std::string_view(line).substr(0, t1), number);
        p.t2 = unescape_token(std::string_view(line).substr(t1 + 1, t2 - t1 - 1), number);
        const char* first = line.data() + t2 + 1;
        const char* last = line.data() + line.size();
        auto [ptr, ec] = std::from_chars(first, last, p.gold);
        if (ec != std::errc() || ptr != last) throw ParseError(number, "bad score");
        out.push_back(std::move(p));
    }
    if (in.bad()) throw IoError("failed to read similarity file");
    return out;
}

std::vector<SimilarityPair> read_similarity(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_similarity(in);
}

}  // namespace rgram
