#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace skelsplit {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownLayoutError : public Error {
 public:
  explicit UnknownLayoutError(const std::string& name)
      : Error("unknown layout: " + name) {}
};

/// A joint id or frame index outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Inputs that contradict each other (label map vs layout, sequence vs layout, ...).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// A required input for the requested configuration is missing or invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// A pose keypoint record with the wrong number of values.
class ArityError : public ParseError {
 public:
  ArityError(std::size_t expected, std::size_t found, const std::string& context = {})
      : ParseError((context.empty() ? std::string() : context + ": ") + "arity error: expected " +
                   std::to_string(expected) + " values, found " + std::to_string(found)),
        expected_(expected),
        found_(found) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t found() const noexcept { return found_; }

 private:
  std::size_t expected_;
  std::size_t found_;
};

class NoFramesError : public Error {
 public:
  using Error::Error;
};

class EmptyReferenceSetError : public Error {
 public:
  EmptyReferenceSetError() : Error("empty reference set") {}
};

class EmptyDatasetError : public Error {
 public:
  EmptyDatasetError() : Error("empty dataset") {}
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace skelsplit
