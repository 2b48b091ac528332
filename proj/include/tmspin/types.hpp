#ifndef TMSPIN_TYPES_HPP
#define TMSPIN_TYPES_HPP

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tmspin {

// Frequencies are cyclic (MHz), times in microseconds. A rate in MHz times a
// duration in us is a number of cycles, so phases pick up a factor kTwoPi.
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <typename Scalar>
using Matrix4 = Eigen::Matrix<std::complex<Scalar>, 4, 4>;
template <typename Scalar>
using SuperOp = Eigen::Matrix<std::complex<Scalar>, 16, 16>;
template <typename Scalar>
using LiouvilleVector = Eigen::Matrix<std::complex<Scalar>, 16, 1>;

using Complex = std::complex<double>;
using Matrix4c = Matrix4<double>;
using Matrix16c = SuperOp<double>;
using Vector16c = LiouvilleVector<double>;

// Basis order of every 4x4 operator in the library.
enum Level : int { kG1 = 0, kG2 = 1, kE1 = 2, kE2 = 3 };

inline constexpr bool is_ground(int level) { return level < 2; }

/// Out-of-domain argument to a model function (negative field, R > 1, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parameters that are individually valid but mutually inconsistent.
class InvalidConfiguration : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure during propagation (step too large, positivity breach).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tmspin

#endif  // TMSPIN_TYPES_HPP
