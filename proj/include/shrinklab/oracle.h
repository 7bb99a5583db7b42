#ifndef SHRINKLAB_ORACLE_H_
#define SHRINKLAB_ORACLE_H_

#include <cstdint>
#include <vector>

#include "shrinklab/synth_data.h"
#include "shrinklab/types.h"

// Brute-force and closed-form references for the test suite. Nothing here
// calls into the main library; only plain data types are shared. Intended for
// small problems: S <= 256, d <= 8, n <= 1e6.
namespace shrinklab::oracle {

// Linear scan, lowest index on ties.
int exhaustive_nearest(const RowVector& z, const Matrix& tokens);

struct LloydMax1D {
  std::vector<double> levels;      // sorted
  std::vector<double> boundaries;  // midpoints of adjacent levels
  double distortion = 0.0;         // mean squared error on the samples
  std::vector<double> distortion_history;  // one entry per partition step
  int iterations = 0;
};

enum class LloydMaxInit {
  // Globally optimal contiguous partition of the sorted samples, so the
  // result is the optimum and not just a local one.
  kOptimalPartition,
  // Evenly spaced sample quantiles.
  kQuantiles,
};

// Alternating optimization on the empirical distribution. Needs at least S
// distinct samples.
LloydMax1D lloyd_max_1d(std::vector<double> samples, int levels,
                        int max_iters = 500, double tol = 1e-12,
                        LloydMaxInit init = LloydMaxInit::kOptimalPartition);

// Mean squared error of quantizing `samples` to the nearest of `levels`.
double scalar_quantizer_distortion(const std::vector<double>& samples,
                                   const std::vector<double>& levels);

struct MonteCarloEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

// Fresh i.i.d. mixture draws (raw frame), each quantized by
// exhaustive_nearest.
MonteCarloEstimate monte_carlo_distortion(const GaussianMixtureSpec& spec,
                                          const Matrix& tokens,
                                          int64_t n_samples, uint64_t seed);

}  // namespace shrinklab::oracle

#endif  // SHRINKLAB_ORACLE_H_
