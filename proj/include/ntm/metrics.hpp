#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ntm/corpus.hpp"
#include "ntm/model.hpp"

namespace ntm {

/// Boolean sliding-window counts over a reference corpus.
class CooccurrenceTable {
 public:
  CooccurrenceTable() = default;
  CooccurrenceTable(std::size_t vocab_size, std::size_t window);

  std::size_t window() const { return window_; }
  std::uint64_t n_windows() const { return n_windows_; }
  std::uint64_t word_count(std::size_t w) const { return word_counts_[w]; }
  std::uint64_t pair_count(std::size_t a, std::size_t b) const;
  double word_prob(std::size_t w) const;
  double pair_prob(std::size_t a, std::size_t b) const;
  std::size_t vocab_size() const { return word_counts_.size(); }
  /// Number of distinct co-occurring pairs stored.
  std::size_t pair_entries() const { return pair_counts_.size(); }

  void add_window(std::span<const std::uint32_t> distinct_words);
  void merge(const CooccurrenceTable& other);

  friend bool operator==(const CooccurrenceTable&, const CooccurrenceTable&) = default;

 private:
  static std::uint64_t key(std::size_t a, std::size_t b);

  std::size_t window_ = 0;
  std::uint64_t n_windows_ = 0;
  std::vector<std::uint64_t> word_counts_;
  std::unordered_map<std::uint64_t, std::uint64_t> pair_counts_;
};

namespace serial {
CooccurrenceTable cooccurrence_counts(std::span<const std::vector<std::uint32_t>> docs,
                                      std::size_t vocab_size, std::size_t window);
}
namespace omp {
CooccurrenceTable cooccurrence_counts(std::span<const std::vector<std::uint32_t>> docs,
                                      std::size_t vocab_size, std::size_t window);
}
/// Window of `window` tokens slid with stride 1; documents no longer than the
/// window contribute one window. A word or pair counts once per window.
using omp::cooccurrence_counts;

using TopicWordSet = std::vector<std::vector<std::size_t>>;

struct TopicScores {
  std::vector<double> per_topic;
  double mean = 0.0;
};

enum class NpmiNorm {
  kLiteral,  // 1/M
  kPairs,    // 2/(M(M-1))
};

/// One NPMI pair term. Pairs whose words never occur score -1; a pair present
/// in every window scores 1.
double npmi_pair(double p_i, double p_j, double p_ij, double eps);

TopicScores npmi(const TopicWordSet& topics, const CooccurrenceTable& table, double eps = 1e-12,
                 NpmiNorm norm = NpmiNorm::kLiteral);

/// TU(k) = (1/M) sum_i 1/cnt(i, k).
TopicScores topic_uniqueness(const TopicWordSet& topics);

/// Argmax of the eval-mode topic distribution for every document.
std::vector<std::size_t> assign_clusters(const ModelParams& params, const Corpus& corpus);

/// Max over one-to-one cluster/label mappings of matched / N (Hungarian method).
double clustering_accuracy(std::span<const std::int64_t> clusters, std::span<const std::int64_t> labels);

/// Minimum-cost assignment on a rectangular cost matrix (rows <= cols).
/// Returns the column assigned to each row.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost);

TopicWordSet topic_word_set(const DecoderParams& decoder, std::size_t m);

struct MetricsConfig {
  std::size_t window = 10;
  double eps = 1e-12;
  std::size_t top_m = 10;
  NpmiNorm norm = NpmiNorm::kLiteral;
};

struct MetricsReport {
  TopicScores npmi;
  TopicScores tu;
  std::optional<double> acc;
  TopicWordSet top_words;
  MetricsConfig config;
  std::size_t n_docs = 0;
  std::size_t n_topics = 0;

  nlohmann::json to_json(const Vocabulary& vocab) const;
};

/// NPMI against `corpus` as reference, TU, and ACC when every document is labelled.
MetricsReport evaluate(const ModelParams& params, const Corpus& corpus, const MetricsConfig& cfg);

}  // namespace ntm
