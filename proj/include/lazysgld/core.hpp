#pragma once

// Shared vocabulary: parameter vectors, datasets and the error types every
// module throws.

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace lazysgld {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Flat vector of all trainable parameters.
using ParamVector = Eigen::VectorXd;

/// Supervised training set: one sample per row of `inputs`.
struct Dataset {
  Matrix inputs;
  Vector targets;

  Index size() const { return inputs.rows(); }
  Index input_dim() const { return inputs.cols(); }
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A dense object would exceed the configured size cap.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// The optimality gap is zero, so a ratio or log-gap quantity is undefined.
class DegenerateGapError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class SymmetryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A trajectory produced a non-finite coordinate.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::int64_t step, const std::string& what)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step) {}

  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

inline void check_dataset(const Dataset& data) {
  require_dims(data.size() > 0, "dataset is empty");
  require_dims(data.targets.size() == data.size(),
               "dataset targets/inputs length mismatch");
}

}  // namespace lazysgld
