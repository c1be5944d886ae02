#include "ntm/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include "ntm/error.hpp"
#include "ntm/hash.hpp"

namespace ntm {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr std::string_view kMagic = "NTMDMIE1";
constexpr int kVersion = 1;

using nlohmann::json;

[[noreturn]] void corrupt(const std::string& why) { throw Error(ErrorCode::kCorruptCheckpoint, why); }

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v;
  std::memcpy(&v, in.data() + at, 8);
  return v;
}

const char* kind_name(NegativeKind k) { return k == NegativeKind::kRandom ? "random" : "similarity"; }

}  // namespace

json to_json(const TrainConfig& c) {
  json frozen = json::array();
  for (auto g : c.frozen) frozen.push_back(param_group_name(g));
  return json{{"topics", c.topics},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"beta", c.weights.beta_w},
              {"gamma", c.weights.gamma_w},
              {"mu", c.weights.mu_w},
              {"temperature", c.gumbel.temperature},
              {"hard", c.gumbel.hard},
              {"final_temperature", c.final_temperature ? json(*c.final_temperature) : json(nullptr)},
              {"sample_noise", c.sample_noise},
              {"kl_mode", kl_mode_name(c.kl_mode)},
              {"neg_strategy", kind_name(c.strategy.kind)},
              {"neg_docs", c.strategy.n_neg_docs},
              {"neg_words", c.strategy.n_neg_words},
              {"pool_size", c.strategy.pool_size},
              {"use_global", c.ablation.use_global},
              {"use_local", c.ablation.use_local},
              {"seed", c.seed},
              {"hidden", c.hidden},
              {"embed", c.embed},
              {"disc_hidden", c.disc_hidden},
              {"frozen", frozen}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.topics = j.at("topics").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.weights.beta_w = j.at("beta").get<double>();
  c.weights.gamma_w = j.at("gamma").get<double>();
  c.weights.mu_w = j.at("mu").get<double>();
  c.gumbel.temperature = j.at("temperature").get<double>();
  c.gumbel.hard = j.at("hard").get<bool>();
  if (!j.at("final_temperature").is_null()) c.final_temperature = j.at("final_temperature").get<double>();
  c.sample_noise = j.at("sample_noise").get<bool>();
  c.kl_mode = parse_kl_mode(j.at("kl_mode").get<std::string>());
  c.strategy.kind = j.at("neg_strategy").get<std::string>() == "random" ? NegativeKind::kRandom
                                                                       : NegativeKind::kSimilarity;
  c.strategy.n_neg_docs = j.at("neg_docs").get<std::size_t>();
  c.strategy.n_neg_words = j.at("neg_words").get<std::size_t>();
  c.strategy.pool_size = j.at("pool_size").get<std::size_t>();
  c.ablation.use_global = j.at("use_global").get<bool>();
  c.ablation.use_local = j.at("use_local").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.embed = j.at("embed").get<std::size_t>();
  c.disc_hidden = j.at("disc_hidden").get<std::size_t>();
  for (const auto& g : j.at("frozen")) {
    const auto name = g.get<std::string>();
    for (auto pg : {ParamGroup::kEncoder, ParamGroup::kDecoder, ParamGroup::kDiscriminator,
                    ParamGroup::kEmbedding})
      if (name == param_group_name(pg)) c.frozen.insert(pg);
  }
  return c;
}

json to_json(const PreprocessConfig& c) {
  std::vector<std::string> stop(c.stopword_list.begin(), c.stopword_list.end());
  std::sort(stop.begin(), stop.end());
  return json{{"lowercase", c.lowercase},
              {"stopwords", stop},
              {"min_token_len", c.min_token_len},
              {"stemming", c.stemming},
              {"min_df", c.min_df},
              {"max_df_ratio", c.max_df_ratio},
              {"max_vocab", c.max_vocab ? json(*c.max_vocab) : json(nullptr)}};
}

PreprocessConfig preprocess_config_from_json(const json& j) {
  PreprocessConfig c;
  c.lowercase = j.at("lowercase").get<bool>();
  c.stopword_list.clear();
  for (const auto& w : j.at("stopwords")) c.stopword_list.insert(w.get<std::string>());
  c.min_token_len = j.at("min_token_len").get<std::size_t>();
  c.stemming = j.at("stemming").get<bool>();
  c.min_df = j.at("min_df").get<std::size_t>();
  c.max_df_ratio = j.at("max_df_ratio").get<double>();
  if (!j.at("max_vocab").is_null()) c.max_vocab = j.at("max_vocab").get<std::size_t>();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  json tensors = json::array();
  std::size_t n_values = 0;
  for (const auto& t : p.all_tensors()) {
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
    n_values += t.values.size();
  }
  const json header{{"format", "ntm-dmie-checkpoint"},
                    {"version", kVersion},
                    {"dims",
                     {{"vocab", p.dims.vocab},
                      {"topics", p.dims.topics},
                      {"hidden", p.dims.hidden},
                      {"embed", p.dims.embed},
                      {"disc_hidden", p.dims.disc_hidden}}},
                    {"bn", {{"momentum", p.encoder.bn.momentum}, {"eps", p.encoder.bn.eps_bn}}},
                    {"config", to_json(ckpt.config)},
                    {"preprocess", to_json(ckpt.preprocess)},
                    {"vocab_hash", ckpt.vocab.hash()},
                    {"vocab", ckpt.vocab.words()},
                    {"doc_freq", ckpt.vocab.doc_freq()},
                    {"tensors", tensors}};
  const std::string head = header.dump();

  std::string blob(kMagic);
  put_u64(blob, head.size());
  blob += head;
  blob.reserve(blob.size() + n_values * 8 + 8);
  for (const auto& t : p.all_tensors())
    blob.append(reinterpret_cast<const char*>(t.values.data()), t.values.size() * sizeof(double));
  Fnv1a h;
  h.update(blob);
  put_u64(blob, h.digest());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write checkpoint " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string_view view(blob);

  if (view.size() < kMagic.size() + 16 || view.substr(0, kMagic.size()) != kMagic) corrupt("bad magic or truncated");
  const std::size_t body = view.size() - 8;
  Fnv1a h;
  h.update(view.substr(0, body));
  if (h.digest() != get_u64(view, body)) corrupt("checksum mismatch");
  const std::uint64_t head_len = get_u64(view, kMagic.size());
  const std::size_t head_at = kMagic.size() + 8;
  if (head_len > body - head_at) corrupt("header length out of range");

  json header;
  try {
    header = json::parse(view.substr(head_at, head_len));
  } catch (const json::exception& e) {
    corrupt(std::string("header: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    if (header.at("format") != "ntm-dmie-checkpoint" || header.at("version") != kVersion)
      corrupt("unsupported format");
    const auto& d = header.at("dims");
    ModelDims dims;
    dims.vocab = d.at("vocab").get<std::size_t>();
    dims.topics = d.at("topics").get<std::size_t>();
    dims.hidden = d.at("hidden").get<std::size_t>();
    dims.embed = d.at("embed").get<std::size_t>();
    dims.disc_hidden = d.at("disc_hidden").get<std::size_t>();
    ckpt.config = train_config_from_json(header.at("config"));
    ckpt.preprocess = preprocess_config_from_json(header.at("preprocess"));
    ckpt.vocab = Vocabulary(header.at("vocab").get<std::vector<std::string>>(),
                            header.at("doc_freq").get<std::vector<std::uint32_t>>());
    if (ckpt.vocab.hash() != header.at("vocab_hash").get<std::uint64_t>()) corrupt("vocabulary hash mismatch");
    if (ckpt.vocab.size() != dims.vocab) corrupt("vocabulary size does not match dims");
    ckpt.params = ModelParams::zeros(dims);
    ckpt.params.encoder.bn.momentum = header.at("bn").at("momentum").get<double>();
    ckpt.params.encoder.bn.eps_bn = header.at("bn").at("eps").get<double>();

    auto refs = ckpt.params.all_tensors();
    const auto& shapes = header.at("tensors");
    if (shapes.size() != refs.size()) corrupt("tensor count mismatch");
    std::size_t at = head_at + head_len;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const auto& s = shapes[i];
      if (s.at("name") != refs[i].name || s.at("rows") != refs[i].rows || s.at("cols") != refs[i].cols)
        corrupt("tensor " + refs[i].name + " has unexpected shape");
      const std::size_t bytes = refs[i].values.size() * sizeof(double);
      if (at + bytes > body) corrupt("tensor data truncated");
      std::memcpy(refs[i].values.data(), view.data() + at, bytes);
      at += bytes;
    }
    if (at != body) corrupt("trailing bytes after tensors");
  } catch (const json::exception& e) {
    corrupt(std::string("header: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptCheckpoint) throw;
    corrupt(e.what());
  }
  if (expected_vocab_hash && *expected_vocab_hash != ckpt.vocab.hash())
    throw Error(ErrorCode::kIncompatibleVocabulary, "checkpoint was trained on a different vocabulary");
  return ckpt;
}

}  // namespace ntm
