#include "ntm/error.hpp"

namespace ntm {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kEmptyVocabulary: return "EmptyVocabulary";
    case ErrorCode::kEmptyDocument: return "EmptyDocument";
    case ErrorCode::kDegenerateBatch: return "DegenerateBatch";
    case ErrorCode::kIndexOutOfVocabulary: return "IndexOutOfVocabulary";
    case ErrorCode::kCorpusTooSmall: return "CorpusTooSmall";
    case ErrorCode::kNoNegativeWordsAvailable: return "NoNegativeWordsAvailable";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kIncompatibleVocabulary: return "IncompatibleVocabulary";
    case ErrorCode::kCorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace ntm
