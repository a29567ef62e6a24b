#ifndef TRIPMEM_ERRORS_HPP
#define TRIPMEM_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tripmem {

// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// Empty or whitespace-only text handed to an embedding provider.
class InvalidTextError : public Error {
 public:
  using Error::Error;
};

// Vector dimensions do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Triple with an empty subject, relation or object name.
class InvalidTripleError : public Error {
 public:
  using Error::Error;
};

// I/O failure while reading or writing engine files.
class StorageError : public Error {
 public:
  using Error::Error;
};

// Snapshot file that cannot be decoded. Carries the byte offset at which
// decoding stopped.
class CorruptSnapshotError : public StorageError {
 public:
  CorruptSnapshotError(const std::string& message, std::size_t byte_offset)
      : StorageError(message + " (byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// A field value contains one of the protocol's reserved substrings.
class ReservedTokenError : public Error {
 public:
  using Error::Error;
};

// A call string that cannot be parsed.
class MalformedCallError : public Error {
 public:
  using Error::Error;
};

// Token generator could not produce a distribution.
class GeneratorError : public Error {
 public:
  using Error::Error;
};

// Numeric argument outside its documented domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Edit case with a missing prompt or answer.
class InvalidEditError : public Error {
 public:
  using Error::Error;
};

// Bad configuration file or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace tripmem

#endif  // TRIPMEM_ERRORS_HPP
