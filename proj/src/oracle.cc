#include "shrinklab/oracle.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>

namespace shrinklab::oracle {

int exhaustive_nearest(const RowVector& z, const Matrix& tokens) {
  require(tokens.rows() >= 1, "exhaustive_nearest: empty token set");
  require(z.size() == tokens.cols(), "exhaustive_nearest: dimension mismatch");
  int best = -1;
  double best_d = 0.0;
  for (Eigen::Index k = 0; k < tokens.rows(); ++k) {
    double d = 0.0;
    for (Eigen::Index c = 0; c < z.size(); ++c) {
      const double diff = z(c) - tokens(k, c);
      d += diff * diff;
    }
    if (best < 0 || d < best_d) {
      best = static_cast<int>(k);
      best_d = d;
    }
  }
  return best;
}

double scalar_quantizer_distortion(const std::vector<double>& samples,
                                   const std::vector<double>& levels) {
  require(!samples.empty() && !levels.empty(), "empty quantizer input");
  double total = 0.0;
  for (double x : samples) {
    double best = std::abs(x - levels[0]);
    for (double l : levels) best = std::min(best, std::abs(x - l));
    total += best * best;
  }
  return total / static_cast<double>(samples.size());
}

namespace {

// Minimum-distortion split of sorted samples into `levels` contiguous cells,
// by dynamic programming over cut positions. Each layer is filled by divide
// and conquer, which is valid because the optimal cut is monotone in the
// right end (the 1-D squared-error cost satisfies the quadrangle
// inequality). Returns the cell means.
std::vector<double> optimal_partition_means(const std::vector<double>& x,
                                            const std::vector<double>& sum,
                                            const std::vector<double>& sum_sq,
                                            int levels) {
  const auto n = static_cast<int64_t>(x.size());
  auto cost = [&](int64_t a, int64_t b) {
    const double m = static_cast<double>(b - a);
    const double s = sum[b] - sum[a];
    return std::max(0.0, (sum_sq[b] - sum_sq[a]) - s * s / m);
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(n + 1, inf), cur(n + 1, inf);
  for (int64_t j = 1; j <= n; ++j) prev[j] = cost(0, j);
  // from[l][j]: start of the last cell when the first j samples form l+1
  // cells.
  std::vector<std::vector<int32_t>> from(levels,
                                         std::vector<int32_t>(n + 1, 0));
  std::function<void(int64_t, int64_t, int64_t, int64_t, int)> fill =
      [&](int64_t lo, int64_t hi, int64_t opt_lo, int64_t opt_hi, int l) {
        if (lo > hi) return;
        const int64_t mid = lo + (hi - lo) / 2;
        int64_t best_i = opt_lo;
        double best = inf;
        for (int64_t i = opt_lo; i <= std::min(mid - 1, opt_hi); ++i) {
          const double v = prev[i] + cost(i, mid);
          if (v < best) {
            best = v;
            best_i = i;
          }
        }
        cur[mid] = best;
        from[l][mid] = static_cast<int32_t>(best_i);
        fill(lo, mid - 1, opt_lo, best_i, l);
        fill(mid + 1, hi, best_i, opt_hi, l);
      };
  for (int l = 1; l < levels; ++l) {
    std::fill(cur.begin(), cur.end(), inf);
    fill(l + 1, n, l, n - 1, l);
    std::swap(prev, cur);
  }
  std::vector<double> means(levels);
  int64_t end = n;
  for (int l = levels - 1; l >= 0; --l) {
    const int64_t start = l == 0 ? 0 : from[l][end];
    means[l] = (sum[end] - sum[start]) / static_cast<double>(end - start);
    end = start;
  }
  return means;
}

}  // namespace

LloydMax1D lloyd_max_1d(std::vector<double> samples, int levels, int max_iters,
                        double tol, LloydMaxInit init) {
  require(levels >= 1, "lloyd_max_1d: need at least one level");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<int64_t>(samples.size());
  int64_t distinct_count = n > 0 ? 1 : 0;
  for (int64_t i = 1; i < n; ++i) {
    if (samples[i] != samples[i - 1]) ++distinct_count;
  }
  require(distinct_count >= levels,
          "lloyd_max_1d: fewer distinct samples than levels");

  // Prefix sums make each cell's mean and squared error O(1).
  std::vector<double> sum(n + 1, 0.0), sum_sq(n + 1, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    sum[i + 1] = sum[i] + samples[i];
    sum_sq[i + 1] = sum_sq[i] + samples[i] * samples[i];
  }

  LloydMax1D out;
  out.levels.resize(levels);
  if (init == LloydMaxInit::kOptimalPartition) {
    out.levels = optimal_partition_means(samples, sum, sum_sq, levels);
  } else {
    // Distinct values at evenly spaced quantiles.
    std::vector<double> uniq;
    for (int64_t i = 0; i < n; ++i) {
      if (i == 0 || samples[i] != samples[i - 1]) uniq.push_back(samples[i]);
    }
    for (int l = 0; l < levels; ++l) {
      const double q = (l + 0.5) / levels;
      const auto idx = static_cast<int64_t>(q * static_cast<double>(n));
      out.levels[l] = samples[std::min(idx, n - 1)];
    }
    // Quantiles can coincide on heavily repeated data; fall back to spreading
    // over the distinct values.
    if (std::adjacent_find(out.levels.begin(), out.levels.end()) !=
        out.levels.end()) {
      for (int l = 0; l < levels; ++l) {
        const auto idx = static_cast<size_t>(
            (l + 0.5) / levels * static_cast<double>(uniq.size()));
        out.levels[l] = uniq[std::min(idx, uniq.size() - 1)];
      }
    }
  }

  auto partition = [&](const std::vector<double>& lv) {
    // cut[l] = first sample index of cell l; a sample on a boundary goes to
    // the lower cell.
    std::vector<int64_t> cut(levels + 1);
    cut[0] = 0;
    cut[levels] = n;
    for (int l = 1; l < levels; ++l) {
      const double b = 0.5 * (lv[l - 1] + lv[l]);
      cut[l] = std::upper_bound(samples.begin(), samples.end(), b) -
               samples.begin();
    }
    return cut;
  };
  auto cell_error = [&](int64_t a, int64_t b, double level) {
    const double m = static_cast<double>(b - a);
    const double s = sum[b] - sum[a];
    const double ss = sum_sq[b] - sum_sq[a];
    return std::max(0.0, ss - 2.0 * level * s + m * level * level);
  };

  for (int iter = 0; iter <= max_iters; ++iter) {
    const std::vector<int64_t> cut = partition(out.levels);
    double err = 0.0;
    for (int l = 0; l < levels; ++l) {
      err += cell_error(cut[l], cut[l + 1], out.levels[l]);
    }
    out.distortion_history.push_back(err / static_cast<double>(n));
    out.iterations = iter;
    if (iter == max_iters) break;
    double shift = 0.0;
    for (int l = 0; l < levels; ++l) {
      if (cut[l + 1] == cut[l]) continue;  // empty cell keeps its level
      const double mean = (sum[cut[l + 1]] - sum[cut[l]]) /
                          static_cast<double>(cut[l + 1] - cut[l]);
      shift = std::max(shift, std::abs(mean - out.levels[l]));
      out.levels[l] = mean;
    }
    std::sort(out.levels.begin(), out.levels.end());
    if (shift <= tol) {
      const std::vector<int64_t> final_cut = partition(out.levels);
      double final_err = 0.0;
      for (int l = 0; l < levels; ++l) {
        final_err += cell_error(final_cut[l], final_cut[l + 1], out.levels[l]);
      }
      out.distortion_history.push_back(final_err / static_cast<double>(n));
      out.iterations = iter + 1;
      break;
    }
  }
  out.distortion = out.distortion_history.back();
  out.boundaries.resize(levels - 1);
  for (int l = 0; l + 1 < levels; ++l) {
    out.boundaries[l] = 0.5 * (out.levels[l] + out.levels[l + 1]);
  }
  return out;
}

MonteCarloEstimate monte_carlo_distortion(const GaussianMixtureSpec& spec,
                                          const Matrix& tokens,
                                          int64_t n_samples, uint64_t seed) {
  require(n_samples >= 1, "monte_carlo_distortion: n_samples must be >= 1");
  require(spec.means.rows() == spec.num_components &&
              spec.means.cols() == spec.dim && spec.num_components >= 1,
          "monte_carlo_distortion: malformed mixture");
  require(tokens.cols() == spec.dim,
          "monte_carlo_distortion: token dimension mismatch");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> component(0, spec.num_components - 1);
  std::normal_distribution<double> normal(0.0, spec.std);
  RowVector x(spec.dim);
  double mean = 0.0;
  double m2 = 0.0;
  for (int64_t i = 0; i < n_samples; ++i) {
    const int k = component(rng);
    for (int c = 0; c < spec.dim; ++c) x(c) = spec.means(k, c) + normal(rng);
    const int nearest = exhaustive_nearest(x, tokens);
    double err = 0.0;
    for (int c = 0; c < spec.dim; ++c) {
      const double diff = x(c) - tokens(nearest, c);
      err += diff * diff;
    }
    // Welford update.
    const double delta = err - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (err - mean);
  }
  MonteCarloEstimate out;
  out.value = mean;
  out.standard_error =
      n_samples > 1
          ? std::sqrt(m2 / static_cast<double>(n_samples - 1) /
                      static_cast<double>(n_samples))
          : 0.0;
  return out;
}

}  // namespace shrinklab::oracle
