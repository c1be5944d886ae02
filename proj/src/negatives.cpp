#include "ntm/negatives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "ntm/error.hpp"

namespace ntm {
namespace {

std::size_t uniform_below(std::size_t n, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<std::size_t> pool_for(const TfidfIndex& index, std::size_t doc_id, std::size_t n) {
  std::vector<std::pair<double, std::size_t>> sims;
  sims.reserve(index.size() - 1);
  for (std::size_t j = 0; j < index.size(); ++j)
    if (j != doc_id) sims.emplace_back(index.cosine(doc_id, j), j);
  const auto mid = sims.begin() + static_cast<std::ptrdiff_t>(n);
  std::partial_sort(sims.begin(), mid, sims.end());
  std::vector<std::size_t> out;
  out.reserve(n);
  for (auto it = sims.begin(); it != mid; ++it) out.push_back(it->second);
  return out;
}

void check_size(std::size_t n_docs, std::size_t n) {
  if (n < 1) throw Error(ErrorCode::kInvalidConfig, "need at least one negative");
  if (n_docs < n + 1)
    throw Error(ErrorCode::kCorpusTooSmall, "corpus of " + std::to_string(n_docs) +
                                                " documents cannot supply " + std::to_string(n) +
                                                " negatives");
}

}  // namespace

void NegativeStrategy::validate() const {
  if (n_neg_docs < 1) throw Error(ErrorCode::kInvalidConfig, "n_neg_docs must be >= 1");
  if (n_neg_words < 1) throw Error(ErrorCode::kInvalidConfig, "n_neg_words must be >= 1");
  if (kind == NegativeKind::kSimilarity && pool_size < n_neg_docs)
    throw Error(ErrorCode::kInvalidConfig, "pool_size must be >= n_neg_docs");
}

std::vector<std::size_t> select_negatives_random(std::size_t n_docs, std::size_t doc_id,
                                                 std::size_t n, Rng& rng) {
  check_size(n_docs, n);
  std::vector<std::size_t> out;
  out.reserve(n);
  if (2 * n > n_docs) {
    // Dense request: partial Fisher-Yates over the other ids.
    std::vector<std::size_t> ids;
    ids.reserve(n_docs - 1);
    for (std::size_t i = 0; i < n_docs; ++i)
      if (i != doc_id) ids.push_back(i);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + uniform_below(ids.size() - i, rng);
      std::swap(ids[i], ids[j]);
      out.push_back(ids[i]);
    }
    return out;
  }
  while (out.size() < n) {
    std::size_t c = uniform_below(n_docs - 1, rng);
    if (c >= doc_id) ++c;
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

TfidfIndex TfidfIndex::build(const Corpus& corpus) {
  TfidfIndex index;
  const std::size_t n = corpus.size();
  index.rows.resize(n);
  index.norms.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector dense = tfidf(corpus.docs[i], corpus.vocab, n);
    double sq = 0.0;
    for (const auto& [w, c] : corpus.docs[i].counts) {
      const double v = dense[w];
      if (v != 0.0) index.rows[i].emplace_back(w, v);
      sq += v * v;
    }
    index.norms[i] = std::sqrt(sq);
  }
  return index;
}

double TfidfIndex::cosine(std::size_t a, std::size_t b) const {
  if (norms[a] == 0.0 || norms[b] == 0.0) return 0.0;
  const auto& ra = rows[a];
  const auto& rb = rows[b];
  double dot = 0.0;
  std::size_t i = 0, j = 0;
  while (i < ra.size() && j < rb.size()) {
    if (ra[i].first == rb[j].first) {
      dot += ra[i].second * rb[j].second;
      ++i;
      ++j;
    } else if (ra[i].first < rb[j].first) {
      ++i;
    } else {
      ++j;
    }
  }
  return dot / (norms[a] * norms[b]);
}

std::vector<std::size_t> select_negatives_dissimilar(const TfidfIndex& index, std::size_t doc_id,
                                                     std::size_t n) {
  check_size(index.size(), n);
  return pool_for(index, doc_id, n);
}

namespace serial {
DissimilarityPools build_pools(const TfidfIndex& index, std::size_t pool_size) {
  const std::size_t size = std::min(pool_size, index.size() - 1);
  check_size(index.size(), size);
  DissimilarityPools out{size, std::vector<std::vector<std::size_t>>(index.size())};
  for (std::size_t i = 0; i < index.size(); ++i) out.pools[i] = pool_for(index, i, size);
  return out;
}
}  // namespace serial

namespace omp {
DissimilarityPools build_pools(const TfidfIndex& index, std::size_t pool_size) {
  const std::size_t size = std::min(pool_size, index.size() - 1);
  check_size(index.size(), size);
  DissimilarityPools out{size, std::vector<std::vector<std::size_t>>(index.size())};
  const auto n = static_cast<std::int64_t>(index.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto d = static_cast<std::size_t>(i);
    out.pools[d] = pool_for(index, d, size);
  }
  return out;
}
}  // namespace omp

void save_pools(const std::filesystem::path& path, const DissimilarityPools& pools,
                std::uint64_t corpus_hash) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write pool cache " + path.string());
  out << "ntm-dmie-pools " << corpus_hash << " " << pools.pool_size << " " << pools.pools.size() << "\n";
  for (const auto& p : pools.pools) {
    for (std::size_t i = 0; i < p.size(); ++i) out << (i ? " " : "") << p[i];
    out << "\n";
  }
}

std::optional<DissimilarityPools> load_pools(const std::filesystem::path& path,
                                             std::uint64_t corpus_hash, std::size_t pool_size) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string magic;
  std::uint64_t hash = 0;
  std::size_t size = 0, n = 0;
  if (!(in >> magic >> hash >> size >> n) || magic != "ntm-dmie-pools") return std::nullopt;
  if (hash != corpus_hash || size != std::min(pool_size, n - 1)) return std::nullopt;
  DissimilarityPools pools{size, std::vector<std::vector<std::size_t>>(n)};
  for (auto& p : pools.pools) {
    p.resize(size);
    for (auto& id : p)
      if (!(in >> id) || id >= n) return std::nullopt;
  }
  return pools;
}

std::vector<std::size_t> sample_negative_words(const BowDocument& doc, std::size_t vocab_size,
                                               std::size_t n, Rng& rng) {
  if (doc.n_types() >= vocab_size)
    throw Error(ErrorCode::kNoNegativeWordsAvailable, "document covers the whole vocabulary");
  std::vector<std::size_t> complement;
  complement.reserve(vocab_size - doc.n_types());
  std::size_t j = 0;
  for (std::size_t w = 0; w < vocab_size; ++w) {
    if (j < doc.counts.size() && doc.counts[j].first == w) {
      ++j;
      continue;
    }
    complement.push_back(w);
  }
  std::vector<std::size_t> out;
  out.reserve(n);
  if (n <= complement.size()) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = i + uniform_below(complement.size() - i, rng);
      std::swap(complement[i], complement[k]);
      out.push_back(complement[i]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out.push_back(complement[uniform_below(complement.size(), rng)]);
  }
  return out;
}

NegativeSampler::NegativeSampler(const Corpus& corpus, const NegativeStrategy& strategy,
                                 const std::optional<std::filesystem::path>& pool_cache)
    : n_docs_(corpus.size()), strategy_(strategy) {
  strategy_.validate();
  check_size(n_docs_, strategy_.n_neg_docs);
  if (strategy_.kind != NegativeKind::kSimilarity) return;
  const std::uint64_t hash = corpus.hash();
  if (pool_cache) {
    if (auto cached = load_pools(*pool_cache, hash, strategy_.pool_size)) {
      pools_ = std::move(*cached);
      return;
    }
  }
  pools_ = build_pools(TfidfIndex::build(corpus), strategy_.pool_size);
  if (pool_cache) save_pools(*pool_cache, pools_, hash);
}

std::vector<std::size_t> NegativeSampler::draw_documents(std::size_t doc_id, Rng& rng) const {
  const std::size_t n = strategy_.n_neg_docs;
  if (strategy_.kind == NegativeKind::kRandom) return select_negatives_random(n_docs_, doc_id, n, rng);
  std::vector<std::size_t> pool = pools_.pools.at(doc_id);
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n && i < pool.size(); ++i) {
    const std::size_t k = i + uniform_below(pool.size() - i, rng);
    std::swap(pool[i], pool[k]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace ntm
