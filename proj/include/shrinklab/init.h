#ifndef SHRINKLAB_INIT_H_
#define SHRINKLAB_INIT_H_

#include <cstdint>
#include <string>
#include <vector>

#include "shrinklab/nn.h"
#include "shrinklab/quantizer.h"
#include "shrinklab/synth_data.h"

namespace shrinklab {

enum class EncoderSource { kUntrained, kPretrained };

struct EmbeddingPool {
  Matrix embeddings;  // N x d
  EncoderSource source = EncoderSource::kUntrained;
  double ratio = 0.0;  // N / S
};

// Encodes uniformly sampled batches (a seeded permutation walked in
// batch_size steps) until at least ratio * S embeddings are pooled.
EmbeddingPool collect_embeddings(const Mlp& encoder,
                                 const LabeledDataset& dataset,
                                 double target_ratio, int codebook_size,
                                 int batch_size, EncoderSource source,
                                 uint64_t seed);

struct KMeansOptions {
  int max_iters = 100;
  double tol = 1e-6;  // stop once no center moves farther than this
  int restarts = 10;  // independent seedings; the lowest objective wins
  uint64_t seed = 0;
};

struct KMeansResult {
  Matrix centers;
  IndexVector assignment;
  // Objective after each assignment step; objective_history.back() belongs to
  // the returned centers.
  std::vector<double> objective_history;
  int iterations = 0;
};

// Picks k distinct seed points with D^2 weighting. Throws InvalidArgument
// when fewer than k distinct points exist.
Matrix kmeans_plus_plus(const Matrix& points, int k, uint64_t seed);

// k-means++ seeding followed by Lloyd iterations, repeated `restarts` times.
// Restart 0 uses `seed` itself. Empty clusters take the
// point of the largest cluster farthest from its center.
KMeansResult kmeans(const Matrix& points, int k, const KMeansOptions& options);

// Sum of squared distances to the nearest center.
double kmeans_objective(const Matrix& points, const Matrix& centers);

enum class InitMode { kUntrainedEncoder, kPretrainedEncoder, kRandomUniform };

std::string to_string(InitMode mode);
InitMode parse_init_mode(const std::string& text);

struct InitOptions {
  int codebook_size = 128;
  double ratio = 10.0;
  int batch_size = 256;
  int kmeans_iters = 100;
  double kmeans_tol = 1e-6;
  int kmeans_restarts = 10;
  double decay = 0.9;
  double beta = 0.25;
  double initial_count = 1.0;
  // Embeddings drawn to measure the bounding box for kRandomUniform.
  int uniform_sample = 256;
  uint64_t seed = 0;
};

// Encoder modes pool encoder outputs and run k-means; kRandomUniform draws
// tokens uniformly inside the bounding box of a small embedding sample.
Codebook init_codebook(InitMode mode, const Mlp& encoder,
                       const LabeledDataset& dataset,
                       const InitOptions& options);

}  // namespace shrinklab

#endif  // SHRINKLAB_INIT_H_
