#pragma once

#include <stdexcept>
#include <string>

namespace ptmvqa {

// Base for every failure caused by input data (files, labels, shapes).
// The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Structural problems in a binary feature or checkpoint file.
class FormatError : public Error {
 public:
  enum class Kind { kBadMagic, kBadVersion, kTruncated, kCountMismatch, kBadIndex };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// A value or shape violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Training produced a NaN/Inf in one of the loss terms.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(std::string term, const std::string& what) : Error(what), term_(std::move(term)) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

// Bad command line or configuration key. The CLI maps these to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ptmvqa
