#include "ntm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "ntm/error.hpp"
#include "ntm/hash.hpp"

namespace ntm {
namespace {

bool is_alnum(unsigned char c) { return std::isalnum(c) != 0; }
bool is_digit(unsigned char c) { return std::isdigit(c) != 0; }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> words = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any",
      "are", "as", "at", "be", "because", "been", "before", "being", "below", "between",
      "both", "but", "by", "can", "could", "did", "do", "does", "doing", "don", "down",
      "during", "each", "else", "ever", "few", "for", "from", "further", "get", "got", "had",
      "has", "have", "having", "he", "her", "here", "hers", "herself", "him", "himself",
      "his", "how", "however", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
      "like", "ll", "may", "me", "might", "more", "most", "much", "must", "my", "myself",
      "no", "nor", "not", "now", "of", "off", "on", "once", "one", "only", "or", "other",
      "our", "ours", "ourselves", "out", "over", "own", "re", "said", "same", "she", "should",
      "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "themselves",
      "then", "there", "these", "they", "this", "those", "through", "to", "too", "under",
      "until", "up", "us", "ve", "very", "was", "we", "well", "were", "what", "when", "where",
      "which", "while", "who", "whom", "why", "will", "with", "would", "yet", "you", "your",
      "yours", "yourself", "yourselves", "also", "another", "around", "many", "never",
      "since", "still", "within", "without"};
  return words;
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open stopword file " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto w = trim(line);
    if (w.empty() || w.front() == '#') continue;
    words.insert(std::move(w));
  }
  return words;
}

void PreprocessConfig::validate() const {
  if (min_token_len < 1) throw Error(ErrorCode::kInvalidConfig, "min_token_len must be >= 1");
  if (min_df < 1) throw Error(ErrorCode::kInvalidConfig, "min_df must be >= 1");
  if (!(max_df_ratio > 0.0 && max_df_ratio <= 1.0))
    throw Error(ErrorCode::kInvalidConfig, "max_df_ratio must lie in (0, 1]");
  if (max_vocab && *max_vocab == 0) throw Error(ErrorCode::kInvalidConfig, "max_vocab must be >= 1");
}

std::string stem(std::string_view word) {
  std::string w(word);
  auto strip = [&](std::string_view suffix, std::string_view replacement, std::size_t min_stem) {
    if (ends_with(w, suffix) && w.size() - suffix.size() >= min_stem) {
      w.resize(w.size() - suffix.size());
      w += replacement;
      return true;
    }
    return false;
  };
  if (strip("ies", "y", 2)) return w;
  if (strip("sses", "ss", 2)) return w;
  if (strip("ing", "", 3)) return w;
  if (strip("ed", "", 3)) return w;
  if (!ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is")) strip("s", "", 3);
  return w;
}

TokenList tokenize(std::string_view raw, const PreprocessConfig& cfg) {
  TokenList out;
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && !is_alnum(static_cast<unsigned char>(raw[i]))) ++i;
    const std::size_t start = i;
    bool has_digit = false;
    while (i < raw.size() && is_alnum(static_cast<unsigned char>(raw[i]))) {
      has_digit |= is_digit(static_cast<unsigned char>(raw[i]));
      ++i;
    }
    if (start == i || has_digit) continue;
    std::string tok(raw.substr(start, i - start));
    if (cfg.lowercase)
      for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (cfg.stopword_list.contains(tok)) continue;
    if (cfg.stemming) tok = stem(tok);
    if (tok.size() < cfg.min_token_len || cfg.stopword_list.contains(tok)) continue;
    out.push_back(std::move(tok));
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<std::uint32_t> doc_freq)
    : words_(std::move(words)), doc_freq_(std::move(doc_freq)) {
  if (!doc_freq_.empty() && doc_freq_.size() != words_.size())
    throw Error(ErrorCode::kLengthMismatch, "doc_freq not aligned with words");
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second)
      throw Error(ErrorCode::kInvalidConfig, "duplicate vocabulary word '" + words_[i] + "'");
  }
}

std::optional<std::size_t> Vocabulary::find(std::string_view w) const {
  auto it = index_.find(std::string(w));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Vocabulary::hash() const {
  Fnv1a h;
  for (const auto& w : words_) {
    h.update(w);
    h.update("\n");
  }
  return h.digest();
}

Vocabulary build_vocabulary(const std::vector<TokenList>& docs, const PreprocessConfig& cfg) {
  cfg.validate();
  if (docs.empty()) throw Error(ErrorCode::kEmptyVocabulary, "no documents");
  std::unordered_map<std::string, std::uint32_t> df;
  for (const auto& doc : docs) {
    std::unordered_set<std::string_view> seen;
    for (const auto& tok : doc)
      if (seen.insert(tok).second) ++df[tok];
  }
  const double n_docs = static_cast<double>(docs.size());
  std::vector<std::pair<std::string, std::uint32_t>> kept;
  for (auto& [w, f] : df) {
    if (f < cfg.min_df) continue;
    if (static_cast<double>(f) / n_docs > cfg.max_df_ratio) continue;
    kept.emplace_back(w, f);
  }
  if (kept.empty()) throw Error(ErrorCode::kEmptyVocabulary, "no token survives filtering");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (cfg.max_vocab && kept.size() > *cfg.max_vocab) kept.resize(*cfg.max_vocab);
  std::vector<std::string> words;
  std::vector<std::uint32_t> freq;
  for (auto& [w, f] : kept) {
    words.push_back(w);
    freq.push_back(f);
  }
  return Vocabulary(std::move(words), std::move(freq));
}

bool BowDocument::contains(std::uint32_t word) const {
  auto it = std::lower_bound(counts.begin(), counts.end(), word,
                             [](const auto& e, std::uint32_t w) { return e.first < w; });
  return it != counts.end() && it->first == word;
}

BowDocument vectorize(const TokenList& tokens, const Vocabulary& vocab) {
  std::map<std::uint32_t, std::uint32_t> counts;
  for (const auto& tok : tokens)
    if (auto idx = vocab.find(tok)) ++counts[static_cast<std::uint32_t>(*idx)];
  if (counts.empty()) throw Error(ErrorCode::kEmptyDocument, "no in-vocabulary token");
  BowDocument doc;
  doc.counts.assign(counts.begin(), counts.end());
  for (const auto& [w, c] : doc.counts) doc.token_count += c;
  return doc;
}

Vector frequencies(const BowDocument& doc, std::size_t vocab_size) {
  Vector x(vocab_size, 0.0);
  const double total = static_cast<double>(doc.token_count);
  for (const auto& [w, c] : doc.counts) x[w] = static_cast<double>(c) / total;
  return x;
}

Vector tfidf(const BowDocument& doc, const Vocabulary& vocab, std::size_t n_docs) {
  if (n_docs < 1) throw Error(ErrorCode::kInvalidConfig, "tfidf needs n_docs >= 1");
  Vector v(vocab.size(), 0.0);
  const double total = static_cast<double>(doc.token_count);
  for (const auto& [w, c] : doc.counts) {
    const double df = static_cast<double>(vocab.doc_freq().at(w));
    v[w] = (static_cast<double>(c) / total) * std::log(static_cast<double>(n_docs) / df);
  }
  return v;
}

RawCorpus read_corpus(const std::filesystem::path& path,
                      const std::optional<std::filesystem::path>& labels) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open corpus " + path.string());
  RawCorpus raw;
  std::string line;
  const bool jsonl = path.extension() == ".jsonl";
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (jsonl) {
      if (trim(line).empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kIo, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
      if (!j.contains("text") || !j["text"].is_string())
        throw Error(ErrorCode::kIo, path.string() + ":" + std::to_string(lineno) + ": missing text");
      raw.texts.push_back(j["text"].get<std::string>());
      if (j.contains("label") && !j["label"].is_null())
        raw.labels.emplace_back(j["label"].get<std::int64_t>());
      else
        raw.labels.emplace_back(std::nullopt);
    } else {
      raw.texts.push_back(line);
      raw.labels.emplace_back(std::nullopt);
    }
  }
  if (labels) {
    std::ifstream lin(*labels);
    if (!lin) throw Error(ErrorCode::kIo, "cannot open labels " + labels->string());
    std::size_t i = 0;
    while (std::getline(lin, line)) {
      auto t = trim(line);
      if (i >= raw.texts.size()) {
        if (t.empty()) continue;
        throw Error(ErrorCode::kLengthMismatch, "label file longer than corpus");
      }
      try {
        raw.labels[i] = std::stoll(t);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kIo, "bad label on line " + std::to_string(i + 1));
      }
      ++i;
    }
    if (i != raw.texts.size()) throw Error(ErrorCode::kLengthMismatch, "label file shorter than corpus");
  }
  return raw;
}

bool Corpus::has_labels() const {
  return !docs.empty() &&
         std::all_of(docs.begin(), docs.end(), [](const BowDocument& d) { return d.label.has_value(); });
}

std::uint64_t Corpus::hash() const {
  Fnv1a h;
  h.update_value(vocab.hash());
  for (const auto& d : docs) {
    const auto n = static_cast<std::uint64_t>(d.counts.size());
    h.update_value(n);
    for (const auto& [w, c] : d.counts) {
      h.update_value(w);
      h.update_value(c);
    }
  }
  return h.digest();
}

Corpus corpus_from_tokens(const std::vector<TokenList>& docs, const Vocabulary& vocab,
                          const std::vector<std::optional<std::int64_t>>& labels) {
  Corpus corpus;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    std::vector<std::uint32_t> seq;
    for (const auto& tok : docs[i])
      if (auto idx = vocab.find(tok)) seq.push_back(static_cast<std::uint32_t>(*idx));
    if (seq.empty()) {
      corpus.skipped.push_back(i);
      continue;
    }
    BowDocument doc = vectorize(docs[i], vocab);
    if (i < labels.size()) doc.label = labels[i];
    corpus.docs.push_back(std::move(doc));
    corpus.sequences.push_back(std::move(seq));
    corpus.source_line.push_back(i);
  }
  if (vocab.doc_freq().empty()) {
    std::vector<std::uint32_t> df(vocab.size(), 0);
    for (const auto& d : corpus.docs)
      for (const auto& [w, c] : d.counts) ++df[w];
    corpus.vocab = Vocabulary(vocab.words(), std::move(df));
  } else {
    corpus.vocab = vocab;
  }
  return corpus;
}

namespace {
std::vector<TokenList> tokenize_all(const RawCorpus& raw, const PreprocessConfig& cfg) {
  std::vector<TokenList> docs(raw.texts.size());
  for (std::size_t i = 0; i < raw.texts.size(); ++i) docs[i] = tokenize(raw.texts[i], cfg);
  return docs;
}
}  // namespace

Corpus build_corpus(const RawCorpus& raw, const PreprocessConfig& cfg) {
  const auto docs = tokenize_all(raw, cfg);
  const Vocabulary vocab = build_vocabulary(docs, cfg);
  return corpus_from_tokens(docs, vocab, raw.labels);
}

Corpus build_corpus(const RawCorpus& raw, const PreprocessConfig& cfg, const Vocabulary& vocab) {
  cfg.validate();
  return corpus_from_tokens(tokenize_all(raw, cfg), vocab, raw.labels);
}

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab,
                      const PreprocessConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write vocabulary " + path.string());
  out << "# vocabulary size=" << vocab.size() << " min_df=" << cfg.min_df
      << " max_df_ratio=" << cfg.max_df_ratio << " min_token_len=" << cfg.min_token_len
      << " lowercase=" << cfg.lowercase << " stemming=" << cfg.stemming
      << " max_vocab=" << (cfg.max_vocab ? std::to_string(*cfg.max_vocab) : "none") << "\n";
  for (const auto& w : vocab.words()) out << w << "\n";
}

std::vector<std::string> read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open vocabulary " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto w = trim(line);
    if (w.empty() || w.front() == '#') continue;
    words.push_back(std::move(w));
  }
  if (words.empty()) throw Error(ErrorCode::kEmptyVocabulary, "vocabulary file has no words");
  return words;
}

}  // namespace ntm
