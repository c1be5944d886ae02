#pragma once

#include <stdexcept>
#include <string>

namespace ntm {

enum class ErrorCode {
  kInvalidConfig,
  kEmptyVocabulary,
  kEmptyDocument,
  kDegenerateBatch,
  kIndexOutOfVocabulary,
  kCorpusTooSmall,
  kNoNegativeWordsAvailable,
  kNonFiniteLoss,
  kIncompatibleVocabulary,
  kCorruptCheckpoint,
  kLengthMismatch,
  kIo,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ntm
