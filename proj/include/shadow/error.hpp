#pragma once

#include <stdexcept>
#include <string>

namespace shadow {

/// Malformed input document (chain, motion, config, checkpoint manifest).
/// The message starts with the JSON path of the offending field.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Vector/tensor dimensions that do not agree.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical blow-up in the simulator or the optimizer.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace shadow
