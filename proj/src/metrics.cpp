#include "ntm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <omp.h>

#include "ntm/error.hpp"

namespace ntm {
namespace {

void count_document(std::span<const std::uint32_t> tokens, std::size_t window, CooccurrenceTable& table,
                    std::vector<std::uint32_t>& scratch) {
  if (tokens.empty()) return;
  const std::size_t n_windows = tokens.size() <= window ? 1 : tokens.size() - window + 1;
  const std::size_t span_len = std::min(window, tokens.size());
  for (std::size_t s = 0; s < n_windows; ++s) {
    scratch.assign(tokens.begin() + static_cast<std::ptrdiff_t>(s),
                   tokens.begin() + static_cast<std::ptrdiff_t>(s + span_len));
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
    table.add_window(scratch);
  }
}

}  // namespace

CooccurrenceTable::CooccurrenceTable(std::size_t vocab_size, std::size_t window)
    : window_(window), word_counts_(vocab_size, 0) {
  if (window < 2) throw Error(ErrorCode::kInvalidConfig, "window must be >= 2");
}

std::uint64_t CooccurrenceTable::key(std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

std::uint64_t CooccurrenceTable::pair_count(std::size_t a, std::size_t b) const {
  if (a == b) return word_counts_[a];
  auto it = pair_counts_.find(key(a, b));
  return it == pair_counts_.end() ? 0 : it->second;
}

double CooccurrenceTable::word_prob(std::size_t w) const {
  return n_windows_ == 0 ? 0.0 : static_cast<double>(word_counts_[w]) / static_cast<double>(n_windows_);
}

double CooccurrenceTable::pair_prob(std::size_t a, std::size_t b) const {
  return n_windows_ == 0 ? 0.0 : static_cast<double>(pair_count(a, b)) / static_cast<double>(n_windows_);
}

void CooccurrenceTable::add_window(std::span<const std::uint32_t> distinct_words) {
  ++n_windows_;
  for (std::size_t i = 0; i < distinct_words.size(); ++i) {
    ++word_counts_[distinct_words[i]];
    for (std::size_t j = i + 1; j < distinct_words.size(); ++j)
      ++pair_counts_[key(distinct_words[i], distinct_words[j])];
  }
}

void CooccurrenceTable::merge(const CooccurrenceTable& other) {
  assert(other.word_counts_.size() == word_counts_.size() && other.window_ == window_);
  n_windows_ += other.n_windows_;
  for (std::size_t w = 0; w < word_counts_.size(); ++w) word_counts_[w] += other.word_counts_[w];
  for (const auto& [k, c] : other.pair_counts_) pair_counts_[k] += c;
}

namespace serial {
CooccurrenceTable cooccurrence_counts(std::span<const std::vector<std::uint32_t>> docs,
                                      std::size_t vocab_size, std::size_t window) {
  CooccurrenceTable table(vocab_size, window);
  std::vector<std::uint32_t> scratch;
  for (const auto& d : docs) count_document(d, window, table, scratch);
  return table;
}
}  // namespace serial

namespace omp {
CooccurrenceTable cooccurrence_counts(std::span<const std::vector<std::uint32_t>> docs,
                                      std::size_t vocab_size, std::size_t window) {
  CooccurrenceTable table(vocab_size, window);
  const int n_threads = omp_get_max_threads();
  std::vector<CooccurrenceTable> partial(static_cast<std::size_t>(n_threads), table);
  const auto n = static_cast<std::int64_t>(docs.size());
#pragma omp parallel num_threads(n_threads)
  {
    auto& local = partial[static_cast<std::size_t>(omp_get_thread_num())];
    std::vector<std::uint32_t> scratch;
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) count_document(docs[static_cast<std::size_t>(i)], window, local, scratch);
  }
  // Integer counts: the merged table is independent of the thread split.
  for (const auto& p : partial) table.merge(p);
  return table;
}
}  // namespace omp

double npmi_pair(double p_i, double p_j, double p_ij, double eps) {
  if (p_i <= 0.0 || p_j <= 0.0) return -1.0;
  const double joint = p_ij + eps;
  const double denom = -std::log(joint);
  if (denom <= 0.0) return 1.0;
  return std::log(joint / (p_i * p_j)) / denom;
}

TopicScores npmi(const TopicWordSet& topics, const CooccurrenceTable& table, double eps, NpmiNorm norm) {
  TopicScores out;
  for (const auto& words : topics) {
    const std::size_t m = words.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j)
        sum += npmi_pair(table.word_prob(words[i]), table.word_prob(words[j]),
                         table.pair_prob(words[i], words[j]), eps);
    double scale = m == 0 ? 0.0 : 1.0 / static_cast<double>(m);
    if (norm == NpmiNorm::kPairs) scale = m < 2 ? 0.0 : 2.0 / static_cast<double>(m * (m - 1));
    out.per_topic.push_back(sum * scale);
  }
  for (double v : out.per_topic) out.mean += v;
  if (!out.per_topic.empty()) out.mean /= static_cast<double>(out.per_topic.size());
  return out;
}

TopicScores topic_uniqueness(const TopicWordSet& topics) {
  std::map<std::size_t, std::size_t> cnt;
  for (const auto& words : topics) {
    std::vector<std::size_t> uniq(words);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (auto w : uniq) ++cnt[w];
  }
  TopicScores out;
  for (const auto& words : topics) {
    double s = 0.0;
    for (auto w : words) s += 1.0 / static_cast<double>(cnt[w]);
    out.per_topic.push_back(words.empty() ? 0.0 : s / static_cast<double>(words.size()));
  }
  for (double v : out.per_topic) out.mean += v;
  if (!out.per_topic.empty()) out.mean /= static_cast<double>(out.per_topic.size());
  return out;
}

std::vector<std::size_t> assign_clusters(const ModelParams& params, const Corpus& corpus) {
  if (params.dims.vocab != corpus.vocab.size())
    throw Error(ErrorCode::kIncompatibleVocabulary, "model and corpus vocabularies differ in size");
  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> out;
  out.reserve(corpus.size());
  for (std::size_t at = 0; at < corpus.size(); at += kChunk) {
    const std::size_t len = std::min(kChunk, corpus.size() - at);
    const Matrix freq = frequency_matrix(std::span(corpus.docs).subspan(at, len), corpus.vocab.size());
    const auto theta = encode(freq, params.encoder, Mode::kEval).theta;
    for (auto k : argmax_rows(theta)) out.push_back(k);
  }
  return out;
}

std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return {};
  const std::size_t m = cost[0].size();
  if (m < n) throw Error(ErrorCode::kLengthMismatch, "hungarian needs rows <= cols");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Potentials formulation, 1-based with a virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double clustering_accuracy(std::span<const std::int64_t> clusters, std::span<const std::int64_t> labels) {
  if (clusters.size() != labels.size())
    throw Error(ErrorCode::kLengthMismatch, "clusters and labels differ in length");
  if (clusters.empty()) throw Error(ErrorCode::kLengthMismatch, "clustering accuracy of no documents");
  std::map<std::int64_t, std::size_t> cid, lid;
  for (auto c : clusters) cid.emplace(c, cid.size());
  for (auto l : labels) lid.emplace(l, lid.size());
  std::vector<std::vector<double>> confusion(cid.size(), std::vector<double>(lid.size(), 0.0));
  for (std::size_t i = 0; i < clusters.size(); ++i) confusion[cid[clusters[i]]][lid[labels[i]]] += 1.0;

  const bool transpose = cid.size() > lid.size();
  const std::size_t rows = transpose ? lid.size() : cid.size();
  const std::size_t cols = transpose ? cid.size() : lid.size();
  std::vector<std::vector<double>> cost(rows, std::vector<double>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) cost[r][c] = -(transpose ? confusion[c][r] : confusion[r][c]);
  const auto assign = hungarian(cost);
  double matched = 0.0;
  for (std::size_t r = 0; r < rows; ++r) matched -= cost[r][assign[r]];
  return matched / static_cast<double>(clusters.size());
}

TopicWordSet topic_word_set(const DecoderParams& decoder, std::size_t m) {
  TopicWordSet out;
  for (std::size_t k = 0; k < decoder.topic_word.cols(); ++k) out.push_back(top_words(decoder, k, m));
  return out;
}

nlohmann::json MetricsReport::to_json(const Vocabulary& vocab) const {
  using nlohmann::json;
  json words = json::array();
  for (const auto& t : top_words) {
    json row = json::array();
    for (auto w : t) row.push_back(vocab.word(w));
    words.push_back(row);
  }
  json j{{"npmi", {{"per_topic", npmi.per_topic}, {"mean", npmi.mean}}},
         {"tu", {{"per_topic", tu.per_topic}, {"mean", tu.mean}}},
         {"top_words", words},
         {"config",
          {{"window", config.window},
           {"eps", config.eps},
           {"top", config.top_m},
           {"npmi_norm", config.norm == NpmiNorm::kLiteral ? "literal" : "pairs"},
           {"n_docs", n_docs},
           {"topics", n_topics}}}};
  j["acc"] = acc ? json(*acc) : json(nullptr);
  return j;
}

MetricsReport evaluate(const ModelParams& params, const Corpus& corpus, const MetricsConfig& cfg) {
  MetricsReport r;
  r.config = cfg;
  r.n_docs = corpus.size();
  r.n_topics = params.dims.topics;
  const std::size_t m = std::min(cfg.top_m, params.dims.vocab);
  r.top_words = topic_word_set(params.decoder, m);
  const auto table = cooccurrence_counts(corpus.sequences, corpus.vocab.size(), cfg.window);
  r.npmi = npmi(r.top_words, table, cfg.eps, cfg.norm);
  r.tu = topic_uniqueness(r.top_words);
  if (corpus.has_labels()) {
    const auto clusters = assign_clusters(params, corpus);
    std::vector<std::int64_t> c(clusters.begin(), clusters.end()), l;
    for (const auto& d : corpus.docs) l.push_back(*d.label);
    r.acc = clustering_accuracy(c, l);
  }
  return r;
}

}  // namespace ntm
