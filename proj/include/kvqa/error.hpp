#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kvqa {

enum class ErrorKind {
  MalformedRecord,
  IoFailure,
  EmptyDataset,
  DimensionMismatch,
  EmptyAttributeSet,
  NetworkFailure,
  VersionMismatch,
  MissingPrediction,
  UnknownImage,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// All library failures surface as kvqa::Error; kind() distinguishes them.
/// The message always carries the offending path, id or label.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace kvqa
