#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ntm/tensor.hpp"

namespace ntm {

using TokenList = std::vector<std::string>;

const std::unordered_set<std::string>& default_stopwords();
/// One stopword per line; blank lines and `#` comments ignored.
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

struct PreprocessConfig {
  bool lowercase = true;
  std::unordered_set<std::string> stopword_list = default_stopwords();
  std::size_t min_token_len = 2;
  bool stemming = false;
  std::size_t min_df = 1;
  double max_df_ratio = 1.0;
  std::optional<std::size_t> max_vocab;

  void validate() const;
};

/// Splits on any non-alphanumeric byte, drops tokens containing digits,
/// then applies case folding, optional stemming, length and stopword filters.
TokenList tokenize(std::string_view raw, const PreprocessConfig& cfg);

/// Light suffix stripper (plural and -ing/-ed forms).
std::string stem(std::string_view word);

class Vocabulary {
 public:
  Vocabulary() = default;
  /// Words are taken in the given order. doc_freq must be empty or aligned.
  Vocabulary(std::vector<std::string> words, std::vector<std::uint32_t> doc_freq);

  std::size_t size() const { return words_.size(); }
  const std::string& word(std::size_t i) const { return words_[i]; }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::uint32_t>& doc_freq() const { return doc_freq_; }
  std::optional<std::size_t> find(std::string_view w) const;
  /// Fingerprint of the ordered word list.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::uint32_t> doc_freq_;
};

/// Keeps tokens with min_df <= df and df/|docs| <= max_df_ratio, ordered by
/// descending df then lexicographically, truncated to max_vocab.
Vocabulary build_vocabulary(const std::vector<TokenList>& docs, const PreprocessConfig& cfg);

/// Sparse bag of words; entries sorted by word index, all counts > 0.
struct BowDocument {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> counts;
  std::optional<std::int64_t> label;
  std::uint64_t token_count = 0;

  std::size_t n_types() const { return counts.size(); }
  bool contains(std::uint32_t word) const;
};

/// Throws EmptyDocument when no token is in the vocabulary.
BowDocument vectorize(const TokenList& tokens, const Vocabulary& vocab);

/// Counts normalized to sum 1, dense over the vocabulary.
Vector frequencies(const BowDocument& doc, std::size_t vocab_size);

/// (count_w / token_count) * ln(n_docs / doc_freq_w), zero where count is zero.
Vector tfidf(const BowDocument& doc, const Vocabulary& vocab, std::size_t n_docs);

struct RawCorpus {
  std::vector<std::string> texts;
  std::vector<std::optional<std::int64_t>> labels;  // aligned with texts
};

/// Plain text (one document per line, optional aligned label file) or
/// JSON lines with `text` and optional `label` when the extension is .jsonl.
RawCorpus read_corpus(const std::filesystem::path& path,
                      const std::optional<std::filesystem::path>& labels = std::nullopt);

struct Corpus {
  Vocabulary vocab;
  std::vector<BowDocument> docs;
  /// In-vocabulary token id sequence for each admitted document.
  std::vector<std::vector<std::uint32_t>> sequences;
  /// Line of the raw corpus each admitted document came from.
  std::vector<std::size_t> source_line;
  /// Raw lines that had no in-vocabulary token.
  std::vector<std::size_t> skipped;

  std::size_t size() const { return docs.size(); }
  bool has_labels() const;
  std::uint64_t hash() const;
};

/// Tokenizes, builds the vocabulary and vectorizes; empty documents are skipped.
Corpus build_corpus(const RawCorpus& raw, const PreprocessConfig& cfg);
/// Same with a fixed vocabulary. When the vocabulary carries no document
/// frequencies they are recomputed from the admitted documents.
Corpus build_corpus(const RawCorpus& raw, const PreprocessConfig& cfg, const Vocabulary& vocab);
Corpus corpus_from_tokens(const std::vector<TokenList>& docs, const Vocabulary& vocab,
                          const std::vector<std::optional<std::int64_t>>& labels = {});

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab,
                      const PreprocessConfig& cfg);
std::vector<std::string> read_vocabulary(const std::filesystem::path& path);

}  // namespace ntm
