#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sesame {

// Base class for all library errors. The CLI maps subclasses onto its
// stable exit-code contract (config/usage -> 2, divergence -> 3).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Operand shapes do not line up. The message names both shapes.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(what) {}
};

// Invalid configuration value (even blur window, bad strategy, unknown key).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// Bad runtime input (out-of-range token id, mismatched prediction count).
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(what) {}
};

// Malformed external file (TSV/corpus/checkpoint parsing).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what) {}
};

// Objective evaluated to a non-finite value during gradient checking.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, std::string parameter)
      : Error(what), parameter_(std::move(parameter)) {}
  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

// Training loss became non-finite; carries the offending step index.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace sesame
