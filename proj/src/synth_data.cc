#include "shrinklab/synth_data.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "shrinklab/random.h"
#include "shrinklab/text_io.h"

namespace shrinklab {

void GaussianMixtureSpec::validate() const {
  require(num_components >= 1, "num_components must be >= 1");
  require(points_per_component >= 1, "points_per_component must be >= 1");
  require(dim >= 1, "dim must be >= 1");
  require(std > 0.0 && std::isfinite(std), "std must be positive and finite");
  require(means.rows() == num_components && means.cols() == dim,
          "means must be num_components x dim");
  for (int a = 0; a < num_components; ++a) {
    for (int b = a + 1; b < num_components; ++b) {
      require(means.row(a) != means.row(b),
              "component means " + std::to_string(a) + " and " +
                  std::to_string(b) + " coincide");
    }
  }
}

StandardScaler StandardScaler::fit(const Matrix& points) {
  require(points.rows() >= 1, "cannot fit a scaler on zero rows");
  StandardScaler scaler;
  const double n = static_cast<double>(points.rows());
  scaler.mean = points.colwise().sum() / n;
  scaler.std.resize(points.cols());
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    double ss = (points.col(c).array() - scaler.mean(c)).square().sum();
    double s = std::sqrt(ss / n);
    // Constant columns pass through unscaled.
    scaler.std(c) = s > 0.0 ? s : 1.0;
  }
  return scaler;
}

Matrix StandardScaler::transform(const Matrix& points) const {
  require(points.cols() == mean.size(), "scaler dimension mismatch");
  Matrix out = points;
  out.rowwise() -= mean;
  out.array().rowwise() /= std.array();
  return out;
}

Matrix StandardScaler::inverse_transform(const Matrix& points) const {
  require(points.cols() == mean.size(), "scaler dimension mismatch");
  Matrix out = points;
  out.array().rowwise() *= std.array();
  out.rowwise() += mean;
  return out;
}

Matrix default_means(int num_components, int dim, double separation) {
  require(num_components >= 1, "num_components must be >= 1");
  require(dim >= 1, "dim must be >= 1");
  require(separation > 0.0, "separation must be positive");
  Matrix means = Matrix::Zero(num_components, dim);
  if (dim == 1) {
    const double centre = 0.5 * (num_components - 1);
    for (int k = 0; k < num_components; ++k) {
      means(k, 0) = (k - centre) * separation;
    }
    return means;
  }
  for (int k = 0; k < num_components; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / num_components;
    means(k, 0) = separation * std::cos(angle);
    means(k, 1) = separation * std::sin(angle);
  }
  return means;
}

Matrix sample_raw(const GaussianMixtureSpec& spec) {
  spec.validate();
  const int n = spec.num_components * spec.points_per_component;
  Matrix points(n, spec.dim);
  for (int k = 0; k < spec.num_components; ++k) {
    for (int i = 0; i < spec.points_per_component; ++i) {
      CounterRng rng(derive_seed(spec.seed, k, i));
      std::normal_distribution<double> normal(0.0, 1.0);
      const int row = k * spec.points_per_component + i;
      for (int c = 0; c < spec.dim; ++c) {
        points(row, c) = spec.means(k, c) + spec.std * normal(rng);
      }
    }
  }
  return points;
}

LabeledDataset generate(const GaussianMixtureSpec& spec) {
  Matrix raw = sample_raw(spec);
  LabeledDataset dataset;
  dataset.scaler = StandardScaler::fit(raw);
  dataset.points = dataset.scaler.transform(raw);
  dataset.labels.resize(raw.rows());
  for (int k = 0; k < spec.num_components; ++k) {
    for (int i = 0; i < spec.points_per_component; ++i) {
      dataset.labels[k * spec.points_per_component + i] = k;
    }
  }
  return dataset;
}

IndexVector assign_to_component(const Matrix& points, const Matrix& means) {
  require(means.rows() >= 1, "no component means");
  require(points.cols() == means.cols(),
          "points have dim " + std::to_string(points.cols()) +
              " but means have dim " + std::to_string(means.cols()));
  IndexVector out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_d = (points.row(i) - means.row(0)).squaredNorm();
    for (Eigen::Index k = 1; k < means.rows(); ++k) {
      double d = (points.row(i) - means.row(k)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    out[i] = best;
  }
  return out;
}

IndexVector assign_to_component(const Matrix& points,
                                const GaussianMixtureSpec& spec) {
  require(points.cols() == spec.dim, "dimension mismatch with mixture spec");
  return assign_to_component(points, spec.means);
}

Matrix standardized_means(const GaussianMixtureSpec& spec,
                          const StandardScaler& scaler) {
  return scaler.transform(spec.means);
}

void write_dataset_csv(const std::filesystem::path& path,
                       const LabeledDataset& dataset) {
  std::ostringstream out;
  for (int c = 0; c < dataset.dim(); ++c) out << 'x' << c << ',';
  out << "label\n";
  for (int i = 0; i < dataset.size(); ++i) {
    for (int c = 0; c < dataset.dim(); ++c) {
      out << format_real(dataset.points(i, c)) << ',';
    }
    out << dataset.labels[i] << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace shrinklab
