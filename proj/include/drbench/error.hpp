#ifndef DRBENCH_ERROR_HPP
#define DRBENCH_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace drbench {

// Base for everything the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. `line` is 1-based; 0 when the problem is not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::string path, std::size_t line, const std::string& what)
      : Error(format(path, line, what)), path_(std::move(path)), line_(line) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& path, std::size_t line, const std::string& what) {
    std::string out = path;
    if (line > 0) out += ":" + std::to_string(line);
    return out + ": " + what;
  }

  std::string path_;
  std::size_t line_;
};

// Missing/unreadable/unwritable files.
class IoError : public Error {
 public:
  using Error::Error;
};

// Binary store decoding failures. `offset` is the byte position where decoding stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Contract violations on in-memory data (bad parameters, inconsistent dimensions, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Dataset or configuration failed validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Embedding provider failures: network, protocol, server-side errors.
class ProviderError : public Error {
 public:
  using Error::Error;
};

}  // namespace drbench

#endif  // DRBENCH_ERROR_HPP
