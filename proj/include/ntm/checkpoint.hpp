#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "ntm/corpus.hpp"
#include "ntm/model.hpp"
#include "ntm/trainer.hpp"

namespace ntm {

struct Checkpoint {
  ModelParams params;
  TrainConfig config;
  PreprocessConfig preprocess;
  Vocabulary vocab;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PreprocessConfig& cfg);
PreprocessConfig preprocess_config_from_json(const nlohmann::json& j);

/// Binary container: magic, JSON header (config echo, shapes, vocabulary and
/// its hash), raw little-endian doubles in row-major order, FNV-1a checksum.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws CorruptCheckpoint on any structural problem, and
/// IncompatibleVocabulary when expected_vocab_hash is given and differs.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_vocab_hash = std::nullopt);

}  // namespace ntm
