#include "shrinklab/init.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "shrinklab/random.h"

namespace shrinklab {
namespace {

std::vector<int> seeded_permutation(int n, uint64_t seed) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Matrix gather_rows(const Matrix& points, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), points.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = points.row(rows[i]);
  }
  return out;
}

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b,
                        Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

}  // namespace

EmbeddingPool collect_embeddings(const Mlp& encoder,
                                 const LabeledDataset& dataset,
                                 double target_ratio, int codebook_size,
                                 int batch_size, EncoderSource source,
                                 uint64_t seed) {
  require(codebook_size >= 1, "codebook_size must be >= 1");
  require(target_ratio >= 1.0, "embedding-to-token ratio must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  const auto needed =
      static_cast<int>(std::ceil(target_ratio * codebook_size - 1e-9));
  require(needed <= dataset.size(),
          "dataset has " + std::to_string(dataset.size()) +
              " points but ratio * codebook_size needs " +
              std::to_string(needed));
  const std::vector<int> order = seeded_permutation(dataset.size(), seed);
  int taken = 0;
  while (taken < needed) {
    taken = std::min(taken + batch_size, dataset.size());
  }
  Matrix batch = gather_rows(dataset.points, {order.data(), size_t(taken)});
  EmbeddingPool pool;
  pool.embeddings = encoder.apply(batch);
  pool.source = source;
  pool.ratio = static_cast<double>(taken) / codebook_size;
  return pool;
}

double kmeans_objective(const Matrix& points, const Matrix& centers) {
  const IndexVector nearest = assign(points, centers);
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    total += squared_distance(points, i, centers, nearest[i]);
  }
  return total;
}

Matrix kmeans_plus_plus(const Matrix& points, int k, uint64_t seed) {
  const auto n = points.rows();
  require(k >= 1, "k must be >= 1");
  require(n >= k, "fewer points than clusters");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix centers(k, points.cols());
  const auto first = static_cast<Eigen::Index>(
      std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng));
  centers.row(0) = points.row(first);
  std::vector<double> d2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d2[i] = squared_distance(points, i, centers, 0);
  }
  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (!(total > 0.0)) {
      throw InvalidArgument("only " + std::to_string(c) +
                            " distinct points for " + std::to_string(k) +
                            " centers (duplicate-center fault)");
    }
    const double target = unit(rng) * total;
    double running = 0.0;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      running += d2[i];
      pick = i;
      if (running > target) break;
    }
    centers.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points, i, centers, c));
    }
  }
  return centers;
}

namespace {

KMeansResult kmeans_once(const Matrix& points, int k,
                         const KMeansOptions& options) {
  const auto n = points.rows();
  const auto d = points.cols();
  KMeansResult result;
  result.centers = kmeans_plus_plus(points, k, options.seed);
  result.assignment = assign(points, result.centers);
  auto objective_of = [&](const Matrix& centers, const IndexVector& nearest) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      total += squared_distance(points, i, centers, nearest[i]);
    }
    return total;
  };
  result.objective_history.push_back(
      objective_of(result.centers, result.assignment));

  for (int iter = 1; iter <= options.max_iters; ++iter) {
    Matrix sums = Matrix::Zero(k, d);
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(result.assignment[i]) += points.row(i);
      ++counts[result.assignment[i]];
    }
    Matrix next(k, d);
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) next.row(c) = sums.row(c) / counts[c];
    }
    std::vector<bool> relocated(n, false);
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      const int largest = static_cast<int>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (result.assignment[i] != largest || relocated[i]) continue;
        const double dist = squared_distance(points, i, next, largest);
        if (dist > far_d) {
          far_d = dist;
          far = i;
        }
      }
      relocated[far] = true;
      --counts[largest];
      counts[c] = 1;
      next.row(c) = points.row(far);
    }

    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      shift = std::max(shift, (next.row(c) - result.centers.row(c)).norm());
    }
    result.centers = std::move(next);
    result.assignment = assign(points, result.centers);
    const double objective = objective_of(result.centers, result.assignment);
    const double previous = result.objective_history.back();
    if (objective > previous + 1e-12 * std::abs(previous)) {
      throw std::logic_error("Lloyd objective increased");
    }
    result.objective_history.push_back(objective);
    result.iterations = iter;
    if (shift < options.tol) break;
  }
  return result;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, const KMeansOptions& options) {
  require(options.max_iters >= 0, "max_iters must be >= 0");
  require(options.restarts >= 1, "restarts must be >= 1");
  KMeansResult best = kmeans_once(points, k, options);
  for (int r = 1; r < options.restarts; ++r) {
    KMeansOptions o = options;
    o.seed = derive_seed(options.seed, r);
    KMeansResult candidate = kmeans_once(points, k, o);
    if (candidate.objective_history.back() < best.objective_history.back()) {
      best = std::move(candidate);
    }
  }
  return best;
}

std::string to_string(InitMode mode) {
  switch (mode) {
    case InitMode::kUntrainedEncoder:
      return "untrained_encoder";
    case InitMode::kPretrainedEncoder:
      return "pretrained_encoder";
    case InitMode::kRandomUniform:
      return "random_uniform";
  }
  return "?";
}

InitMode parse_init_mode(const std::string& text) {
  for (InitMode m : {InitMode::kUntrainedEncoder, InitMode::kPretrainedEncoder,
                     InitMode::kRandomUniform}) {
    if (to_string(m) == text) return m;
  }
  throw InvalidArgument("unknown init mode '" + text + "'");
}

Codebook init_codebook(InitMode mode, const Mlp& encoder,
                       const LabeledDataset& dataset,
                       const InitOptions& options) {
  require(encoder.in_dim() == dataset.dim(),
          "encoder input dim does not match the dataset");
  const int s = options.codebook_size;
  Matrix tokens;
  if (mode == InitMode::kRandomUniform) {
    const int sample = std::min(options.uniform_sample, dataset.size());
    const std::vector<int> order =
        seeded_permutation(dataset.size(), derive_seed(options.seed, 1));
    Matrix probe = encoder.apply(
        gather_rows(dataset.points, {order.data(), size_t(sample)}));
    const RowVector lo = probe.colwise().minCoeff();
    const RowVector hi = probe.colwise().maxCoeff();
    std::mt19937_64 rng(derive_seed(options.seed, 2));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    tokens.resize(s, probe.cols());
    for (int k = 0; k < s; ++k) {
      for (Eigen::Index c = 0; c < probe.cols(); ++c) {
        tokens(k, c) = lo(c) + (hi(c) - lo(c)) * unit(rng);
      }
    }
  } else {
    const EncoderSource source = mode == InitMode::kPretrainedEncoder
                                     ? EncoderSource::kPretrained
                                     : EncoderSource::kUntrained;
    EmbeddingPool pool =
        collect_embeddings(encoder, dataset, options.ratio, s,
                           options.batch_size, source, options.seed);
    KMeansOptions km;
    km.max_iters = options.kmeans_iters;
    km.tol = options.kmeans_tol;
    km.restarts = options.kmeans_restarts;
    km.seed = derive_seed(options.seed, 3);
    tokens = kmeans(pool.embeddings, s, km).centers;
  }
  return Codebook::from_tokens(std::move(tokens), options.decay, options.beta,
                               options.initial_count);
}

}  // namespace shrinklab
