#ifndef SHRINKLAB_SYNTH_DATA_H_
#define SHRINKLAB_SYNTH_DATA_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "shrinklab/types.h"

namespace shrinklab {

// Equally weighted mixture of isotropic Gaussians sharing one std.
struct GaussianMixtureSpec {
  int num_components = 10;
  int points_per_component = 1000;
  int dim = 2;
  Matrix means;  // num_components x dim
  double std = 1.0;
  uint64_t seed = 0;

  // Throws InvalidArgument when counts, std or means are unusable.
  void validate() const;
};

// Per-column affine map recorded by standardization: z = (x - mean) / std.
struct StandardScaler {
  RowVector mean;
  RowVector std;

  static StandardScaler fit(const Matrix& points);
  Matrix transform(const Matrix& points) const;
  Matrix inverse_transform(const Matrix& points) const;
};

struct LabeledDataset {
  Matrix points;  // standardized, component-major row order
  IndexVector labels;
  StandardScaler scaler;

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// For dim == 1: K points on a line with spacing `separation`, centred at 0.
// For dim >= 2: K points on a circle of radius `separation` in the first two
// coordinates, zeros elsewhere.
Matrix default_means(int num_components, int dim, double separation);

// Samples every component from its own counter-based stream, then
// standardizes the whole set.
LabeledDataset generate(const GaussianMixtureSpec& spec);

// Raw samples before standardization, same row order as generate().
Matrix sample_raw(const GaussianMixtureSpec& spec);

// Nearest component mean (Euclidean), lowest index on ties. `means` must be in
// the same frame as `points`.
IndexVector assign_to_component(const Matrix& points, const Matrix& means);
IndexVector assign_to_component(const Matrix& points,
                                const GaussianMixtureSpec& spec);

// Component means mapped into the dataset's standardized frame.
Matrix standardized_means(const GaussianMixtureSpec& spec,
                          const StandardScaler& scaler);

// CSV `x0,...,x{d-1},label`, one row per point.
void write_dataset_csv(const std::filesystem::path& path,
                       const LabeledDataset& dataset);

}  // namespace shrinklab

#endif  // SHRINKLAB_SYNTH_DATA_H_
