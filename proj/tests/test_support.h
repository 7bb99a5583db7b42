#ifndef SHRINKLAB_TESTS_TEST_SUPPORT_H_
#define SHRINKLAB_TESTS_TEST_SUPPORT_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "shrinklab/types.h"

namespace shrinklab::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols,
                            std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline constexpr double kFdStep = 1e-5;

// Central difference of f with respect to *x, restoring *x afterwards.
inline double central_difference(const std::function<double()>& f, double* x,
                                 double h = kFdStep) {
  const double saved = *x;
  *x = saved + h;
  const double up = f();
  *x = saved - h;
  const double down = f();
  *x = saved;
  return (up - down) / (2.0 * h);
}

// |a - n| / max(|a|, |n|). Entries where both sides are below 1e-7 are
// compared absolutely instead (1e-9), since a relative error of two zeros is
// meaningless.
inline double gradient_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  const double diff = std::abs(analytic - numeric);
  if (scale < 1e-7) return diff < 1e-9 ? 0.0 : 1.0;
  return diff / scale;
}

// Largest gradient_error over every entry of `param` against `analytic`.
inline double max_gradient_error(const std::function<double()>& loss,
                                 double* param, const double* analytic,
                                 Eigen::Index count) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < count; ++i) {
    const double numeric = central_difference(loss, param + i);
    worst = std::max(worst, gradient_error(analytic[i], numeric));
  }
  return worst;
}

}  // namespace shrinklab::testing

#endif  // SHRINKLAB_TESTS_TEST_SUPPORT_H_
