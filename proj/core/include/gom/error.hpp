#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace gom {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed inconsistent sizes, counts or flags.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Triangle too small to carry a local frame.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared inside a computation.
class NumericError : public Error {
 public:
  NumericError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Malformed serialized data. Carries the byte offset when known.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::optional<std::size_t> offset = std::nullopt)
      : Error(offset ? what + " (at byte " + std::to_string(*offset) + ")" : what), offset_(offset) {}
  std::optional<std::size_t> offset() const noexcept { return offset_; }

 private:
  std::optional<std::size_t> offset_;
};

/// Well-formed file whose content violates model invariants.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace gom
