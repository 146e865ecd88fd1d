#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hncf {

enum class ErrorKind {
  ShapeMismatch,
  InvalidParam,
  IndexOutOfRange,
  NotOnTape,
  InvalidConfig,
  MissingInput,
  EmptyCandidates,
  NonFiniteGradient,
  EmptyDataset,
  EmptyCorpus,
  MissingColumn,
  MalformedRow,
  EmptyFile,
  FileNotFound,
  DecodeError,
  ExhaustedCandidates,
  EmptyCases,
  IoError,
  BadMagic,
  UnsupportedVersion,
  CorruptDirectory,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace hncf
