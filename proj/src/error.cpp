#include "kvqa/error.hpp"

namespace kvqa {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyAttributeSet: return "EmptyAttributeSet";
    case ErrorKind::NetworkFailure: return "NetworkFailure";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::MissingPrediction: return "MissingPrediction";
    case ErrorKind::UnknownImage: return "UnknownImage";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace kvqa
