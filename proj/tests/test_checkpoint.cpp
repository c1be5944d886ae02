#include <doctest.h>

#include <fstream>
#include <iterator>

#include "ntm/checkpoint.hpp"
#include "ntm/error.hpp"
#include "support/planted.hpp"
#include "support/tempdir.hpp"

using namespace ntm;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ntm::Error");
  return ErrorCode::kIo;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spill(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.config = TrainConfig::desk();
  c.config.topics = 3;
  c.config.hidden = 6;
  c.config.embed = 4;
  c.config.disc_hidden = 5;
  c.config.final_temperature = 0.25;
  c.config.kl_mode = KlMode::kPerDocument;
  c.config.strategy.kind = NegativeKind::kRandom;
  c.config.frozen = {ParamGroup::kDecoder};
  c.preprocess.stemming = true;
  c.preprocess.max_vocab = 100;
  c.preprocess.stopword_list = {"the", "of"};
  c.vocab = Vocabulary({"alpha", "beta", "gamma", "delta"}, {4, 3, 2, 1});
  Rng rng(1);
  c.params = ModelParams::initialize(ModelDims{4, 3, 6, 4, 5}, rng);
  c.params.encoder.bn.running_mean = {0.1, -0.2, 1.0 / 3.0};
  c.params.encoder.bn.running_var = {1.5, 2.5, 3.5};
  return c;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  testing::TempDir dir;
  const auto ckpt = sample_checkpoint();
  save_checkpoint(dir / "a.ckpt", ckpt);
  const auto back = load_checkpoint(dir / "a.ckpt", ckpt.vocab.hash());
  const auto ta = ckpt.params.all_tensors();
  const auto tb = back.params.all_tensors();
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    CAPTURE(ta[i].name);
    CHECK(tb[i].name == ta[i].name);
    CHECK(std::equal(ta[i].values.begin(), ta[i].values.end(), tb[i].values.begin(), tb[i].values.end()));
  }
  CHECK(back.vocab.words() == ckpt.vocab.words());
  CHECK(back.vocab.doc_freq() == ckpt.vocab.doc_freq());
  CHECK(to_json(back.config) == to_json(ckpt.config));
  CHECK(to_json(back.preprocess) == to_json(ckpt.preprocess));

  // Saving what was loaded reproduces the same bytes.
  save_checkpoint(dir / "b.ckpt", back);
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
}

TEST_CASE("config json round trip") {
  const auto c = sample_checkpoint().config;
  const auto back = train_config_from_json(to_json(c));
  CHECK(back.kl_mode == KlMode::kPerDocument);
  CHECK(back.final_temperature == 0.25);
  CHECK(back.strategy.kind == NegativeKind::kRandom);
  CHECK(back.frozen == c.frozen);
  CHECK(back.lr == c.lr);
  CHECK(to_json(back) == to_json(c));

  TrainConfig plain;
  const auto p = train_config_from_json(to_json(plain));
  CHECK_FALSE(p.final_temperature.has_value());
  CHECK(p.kl_mode == KlMode::kAggregate);

  const auto pre = sample_checkpoint().preprocess;
  const auto pb = preprocess_config_from_json(to_json(pre));
  CHECK(pb.stopword_list == pre.stopword_list);
  CHECK(pb.max_vocab == pre.max_vocab);
  CHECK(pb.stemming);
}

TEST_CASE("vocabulary mismatch is reported") {
  testing::TempDir dir;
  const auto ckpt = sample_checkpoint();
  save_checkpoint(dir / "a.ckpt", ckpt);
  const Vocabulary other({"alpha", "beta", "gamma", "epsilon"}, {});
  CHECK(code_of([&] { load_checkpoint(dir / "a.ckpt", other.hash()); }) == ErrorCode::kIncompatibleVocabulary);
  CHECK_NOTHROW(load_checkpoint(dir / "a.ckpt"));
}

TEST_CASE("damaged files are rejected") {
  testing::TempDir dir;
  save_checkpoint(dir / "a.ckpt", sample_checkpoint());
  const std::string good = slurp(dir / "a.ckpt");

  CHECK(code_of([&] { load_checkpoint(dir / "missing.ckpt"); }) == ErrorCode::kIo);

  for (std::size_t cut : {std::size_t{0}, std::size_t{4}, std::size_t{20}, good.size() / 2, good.size() - 1}) {
    CAPTURE(cut);
    spill(dir / "t.ckpt", good.substr(0, cut));
    CHECK(code_of([&] { load_checkpoint(dir / "t.ckpt"); }) == ErrorCode::kCorruptCheckpoint);
  }

  // Single flipped bytes anywhere in the file.
  for (std::size_t at : {std::size_t{1}, std::size_t{30}, good.size() / 3, good.size() - 40, good.size() - 3}) {
    CAPTURE(at);
    std::string bad = good;
    bad[at] = static_cast<char>(bad[at] ^ 0x5a);
    spill(dir / "f.ckpt", bad);
    CHECK(code_of([&] { load_checkpoint(dir / "f.ckpt"); }) == ErrorCode::kCorruptCheckpoint);
  }

  spill(dir / "x.ckpt", good + "trailing");
  CHECK(code_of([&] { load_checkpoint(dir / "x.ckpt"); }) == ErrorCode::kCorruptCheckpoint);
}

TEST_CASE("trained checkpoints reload with their corpus") {
  testing::TempDir dir;
  const auto corpus = testing::planted_corpus({40, 2, 10, 5, 0.1, 20, 2});
  auto cfg = TrainConfig::desk();
  cfg.topics = 2;
  cfg.epochs = 2;
  cfg.hidden = 8;
  cfg.embed = 4;
  cfg.disc_hidden = 8;
  TrainOptions opts;
  opts.run_dir = dir / "run";
  const auto result = train(corpus, cfg, opts);
  const auto ckpt = load_checkpoint(*result.report.final_checkpoint, corpus.vocab.hash());
  CHECK(ckpt.params.dims.vocab == corpus.vocab.size());
  CHECK(ckpt.config.epochs == 2);
}
