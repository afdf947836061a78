#pragma once

#include <stdexcept>
#include <string>

namespace onion_anon {

// Rejected input or a computation that is undefined for the given model
// (non-stochastic rows, conditioning on a null event, size limits).
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

class SizeLimitError : public ModelError {
 public:
  explicit SizeLimitError(const std::string& what) : ModelError(what) {}
};

// The observation has prior probability zero under the scenario.
class ImpossibleObservation : public ModelError {
 public:
  explicit ImpossibleObservation(const std::string& what) : ModelError(what) {}
};

// Malformed file contents or command-line values.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace onion_anon
