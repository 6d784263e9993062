#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hrsar {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated binary file. Carries the byte offset where decoding stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), reason_(what), offset_(offset) {}

  /// Same error, prefixed with the file it came from.
  FormatError(const std::string& context, const FormatError& inner)
      : FormatError(context + ": " + inner.reason_, inner.offset_) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::string reason_;
  std::uint64_t offset_;
};

/// Invalid user configuration (feature selection, topology, width table, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Annotation document that violates the expected GeoJSON layout.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Tensor, raster or parameter shapes that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or degenerate statistics that make a numeric step meaningless.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace hrsar
