#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sode {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text; carries the 1-based location of the offending token.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column)
      : Error(what + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Evaluation outside the domain of a node (log of a nonpositive value,
/// division by zero, even root of a negative value).
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::string subtree)
      : Error(what + " in '" + subtree + "'"), subtree_(std::move(subtree)) {}
  const std::string& subtree() const { return subtree_; }

 private:
  std::string subtree_;
};

class MissingSymbolError : public Error {
 public:
  explicit MissingSymbolError(const std::string& name)
      : Error("no value assigned to symbol '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

/// Inconsistent dimensions or charts, invalid manifests, bad options.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Numerical procedure failure (integrator, Newton, singular matrices).
/// Carries the last point at which the state was still valid, when known.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::vector<double> last_point = {})
      : Error(what), last_point_(std::move(last_point)) {}
  const std::vector<double>& last_point() const { return last_point_; }

 private:
  std::vector<double> last_point_;
};

}  // namespace sode
