#include "gjam/error.hpp"

namespace gjam {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NyquistViolation: return "NyquistViolation";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
    case ErrorCode::DelayTooLarge: return "DelayTooLarge";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingLabel: return "MissingLabel";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::MissingScenario: return "MissingScenario";
    case ErrorCode::PlanInvalid: return "PlanInvalid";
    case ErrorCode::DiskFull: return "DiskFull";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedRecord: return "TruncatedRecord";
    case ErrorCode::ManifestMismatch: return "ManifestMismatch";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::DataMissing: return "DataMissing";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace gjam
