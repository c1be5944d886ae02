#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ntm/corpus.hpp"
#include "ntm/numkernel.hpp"

namespace ntm {

enum class NegativeKind { kRandom, kSimilarity };

struct NegativeStrategy {
  NegativeKind kind = NegativeKind::kSimilarity;
  std::size_t n_neg_docs = 1;
  std::size_t n_neg_words = 1;  // per positive word type
  std::size_t pool_size = 50;

  void validate() const;
};

/// n distinct ids from [0, n_docs) \ {doc_id}, uniform without replacement.
std::vector<std::size_t> select_negatives_random(std::size_t n_docs, std::size_t doc_id,
                                                 std::size_t n, Rng& rng);

/// Sparse TF-IDF rows with their norms, for cosine similarity.
struct TfidfIndex {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows;
  std::vector<double> norms;

  static TfidfIndex build(const Corpus& corpus);
  std::size_t size() const { return rows.size(); }
  /// Cosine similarity; 0 when either vector has zero norm.
  double cosine(std::size_t a, std::size_t b) const;
};

/// The n documents least cosine-similar to doc_id, ties by ascending id.
std::vector<std::size_t> select_negatives_dissimilar(const TfidfIndex& index, std::size_t doc_id,
                                                     std::size_t n);

/// Per-document pools of the most dissimilar documents.
struct DissimilarityPools {
  std::size_t pool_size = 0;
  std::vector<std::vector<std::size_t>> pools;
};

namespace serial {
DissimilarityPools build_pools(const TfidfIndex& index, std::size_t pool_size);
}
namespace omp {
DissimilarityPools build_pools(const TfidfIndex& index, std::size_t pool_size);
}
using omp::build_pools;

void save_pools(const std::filesystem::path& path, const DissimilarityPools& pools,
                std::uint64_t corpus_hash);
/// Returns nullopt when the file is missing, unreadable or for another corpus.
std::optional<DissimilarityPools> load_pools(const std::filesystem::path& path,
                                             std::uint64_t corpus_hash, std::size_t pool_size);

/// n word indices not present in doc: distinct when the complement allows,
/// otherwise drawn with replacement. Throws NoNegativeWordsAvailable.
std::vector<std::size_t> sample_negative_words(const BowDocument& doc, std::size_t vocab_size,
                                               std::size_t n, Rng& rng);

/// Draws negative documents for anchors under a fixed strategy.
class NegativeSampler {
 public:
  NegativeSampler(const Corpus& corpus, const NegativeStrategy& strategy,
                  const std::optional<std::filesystem::path>& pool_cache = std::nullopt);

  std::vector<std::size_t> draw_documents(std::size_t doc_id, Rng& rng) const;
  const NegativeStrategy& strategy() const { return strategy_; }
  const DissimilarityPools& pools() const { return pools_; }

 private:
  std::size_t n_docs_;
  NegativeStrategy strategy_;
  DissimilarityPools pools_;
};

}  // namespace ntm
