#ifndef SHRINKLAB_TYPES_H_
#define SHRINKLAB_TYPES_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace shrinklab {

// Dense row-major matrix; rows are samples (data points, embeddings, tokens).
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using IndexVector = std::vector<int>;

// Thrown for shape mismatches and violated preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when training produces a non-finite loss or gradient.
class TrainingFault : public std::runtime_error {
 public:
  TrainingFault(const std::string& what, int epoch = -1)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Thrown for unreadable or malformed files; carries the offending line when
// known (1-based, 0 = unknown).
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) +
                                          ")"
                                    : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace shrinklab

#endif  // SHRINKLAB_TYPES_H_
