#include "shrinklab/diagnostics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "json.hpp"
#include "shrinklab/text_io.h"
#include "shrinklab/trainer.h"

namespace shrinklab {
namespace {

IndexVector token_components(const Matrix& tokens,
                             const Matrix& component_means,
                             const Mlp* decoder) {
  if (decoder != nullptr) {
    return assign_to_component(decoder->apply(tokens), component_means);
  }
  return assign_to_component(tokens, component_means);
}

// Symmetric PSD square root; eigenvalues below zero are clamped. Flags a
// clamp larger than round-off.
Matrix psd_sqrt(const Matrix& m, bool& degenerate) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  Vector values = eig.eigenvalues();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < -1e-10 * scale) degenerate = true;
    values(i) = std::sqrt(std::max(values(i), 0.0));
  }
  return eig.eigenvectors() * values.asDiagonal() *
         eig.eigenvectors().transpose();
}

Matrix covariance(const Matrix& x, const RowVector& mean) {
  Matrix centered = x.rowwise() - mean;
  return centered.transpose() * centered /
         static_cast<double>(x.rows() - 1);
}

double round_field(double value) { return round_to_text(value); }

}  // namespace

ModeMasses mode_masses(const Matrix& tokens, const Matrix& component_means,
                       const Mlp* decoder) {
  require(tokens.rows() >= 1, "mode_masses needs at least one token");
  const IndexVector comp = token_components(tokens, component_means, decoder);
  ModeMasses out;
  out.masses = Vector::Zero(component_means.rows());
  for (int k : comp) out.masses(k) += 1.0;
  out.masses /= static_cast<double>(tokens.rows());
  out.active_modes = static_cast<int>((out.masses.array() > 0.0).count());
  return out;
}

std::optional<Vector> usage_weighted_mode_masses(
    const Matrix& tokens, std::span<const int64_t> usage,
    const Matrix& component_means, const Mlp* decoder) {
  require(static_cast<Eigen::Index>(usage.size()) == tokens.rows(),
          "usage counts must match the token count");
  const IndexVector comp = token_components(tokens, component_means, decoder);
  Vector masses = Vector::Zero(component_means.rows());
  double total = 0.0;
  for (size_t i = 0; i < comp.size(); ++i) {
    masses(comp[i]) += static_cast<double>(usage[i]);
    total += static_cast<double>(usage[i]);
  }
  if (total <= 0.0) return std::nullopt;
  return masses / total;
}

double mode_entropy(const Vector& p) {
  require(p.size() >= 1, "empty probability vector");
  require((p.array() >= 0.0).all(), "probabilities must be non-negative");
  require(std::abs(p.sum() - 1.0) <= 1e-9, "probabilities must sum to 1");
  double h = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p(k) > 0.0) h -= p(k) * std::log(p(k));
  }
  return h;
}

EntropyBound entropy_bound_check(const Vector& p) {
  EntropyBound out;
  out.entropy = mode_entropy(p);
  out.active_modes = static_cast<int>((p.array() > 0.0).count());
  out.bound = std::log(static_cast<double>(out.active_modes));
  out.holds = out.entropy <= out.bound + 1e-12;
  return out;
}

double distortion(const MlpParams& params, const Codebook& codebook,
                  const Matrix& points) {
  require(points.rows() >= 1, "distortion over an empty dataset");
  const Matrix recon = reconstruct(params, codebook, points);
  return (recon - points).squaredNorm() / static_cast<double>(points.rows());
}

double quantization_distortion(const Matrix& tokens, const Matrix& points) {
  require(points.rows() >= 1, "distortion over an empty dataset");
  const IndexVector idx = assign(points, tokens);
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    total += (points.row(i) - tokens.row(idx[i])).squaredNorm();
  }
  return total / static_cast<double>(points.rows());
}

FrechetResult frechet_gaussian_distance(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "frechet: dimension mismatch");
  require(a.rows() >= a.cols() + 1 && b.rows() >= b.cols() + 1,
          "frechet: each set needs at least dim + 1 points");
  const RowVector mu_a = a.colwise().mean();
  const RowVector mu_b = b.colwise().mean();
  const Matrix cov_a = covariance(a, mu_a);
  const Matrix cov_b = covariance(b, mu_b);
  FrechetResult out;
  // (Sa Sb)^{1/2} shares its trace with (Sa^{1/2} Sb Sa^{1/2})^{1/2}, which
  // is symmetric.
  const Matrix root_a = psd_sqrt(cov_a, out.degenerate);
  const Matrix inner = root_a * cov_b * root_a;
  const Matrix cross = psd_sqrt(inner, out.degenerate);
  const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() +
                       cov_b.trace() - 2.0 * cross.trace();
  out.distance = std::max(value, 0.0);
  return out;
}

int mode_coverage(const Matrix& reconstructions, const Matrix& component_means,
                  double threshold) {
  require(reconstructions.rows() >= 1, "mode_coverage on empty input");
  const IndexVector comp =
      assign_to_component(reconstructions, component_means);
  std::vector<int64_t> counts(component_means.rows(), 0);
  for (int k : comp) ++counts[k];
  const double needed = threshold * static_cast<double>(reconstructions.rows());
  return static_cast<int>(std::count_if(
      counts.begin(), counts.end(),
      [&](int64_t c) { return c > 0 && static_cast<double>(c) >= needed; }));
}

double pairwise_recon_distance(const Matrix& reconstructions, int limit,
                               uint64_t seed) {
  const auto n = reconstructions.rows();
  require(n >= 1, "pairwise_recon_distance on empty input");
  if (n == 1) return 0.0;
  std::vector<Eigen::Index> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  if (n > limit) {
    std::mt19937_64 rng(seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(limit);
    std::sort(rows.begin(), rows.end());
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      total += (reconstructions.row(rows[i]) - reconstructions.row(rows[j]))
                   .norm();
    }
  }
  return total / (0.5 * static_cast<double>(m) * static_cast<double>(m - 1));
}

int count_peaks(std::span<const int64_t> counts, double min_prominence) {
  const auto n = static_cast<int>(counts.size());
  auto at = [&](int i) -> int64_t {
    return i < 0 || i >= n ? 0 : counts[i];
  };
  int peaks = 0;
  int i = 0;
  while (i < n) {
    const int64_t h = at(i);
    if (h <= at(i - 1)) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 < n && at(j + 1) == h) ++j;
    if (at(j + 1) < h) {
      int64_t left_min = h;
      for (int k = i - 1; k >= -1 && at(k) <= h; --k) {
        left_min = std::min(left_min, at(k));
        if (k < 0) break;
      }
      int64_t right_min = h;
      for (int k = j + 1; k <= n && at(k) <= h; ++k) {
        right_min = std::min(right_min, at(k));
        if (k >= n) break;
      }
      const double prominence =
          static_cast<double>(h - std::max(left_min, right_min));
      if (prominence > 0.0 && prominence >= min_prominence) ++peaks;
    }
    i = j + 1;
  }
  return peaks;
}

EmbeddingHistogram histogram_of(const Matrix& embeddings, int bins,
                                double prominence) {
  require(bins >= 10, "histograms need at least 10 bins");
  require(embeddings.rows() >= 1, "histogram of an empty set");
  EmbeddingHistogram out;
  for (Eigen::Index c = 0; c < embeddings.cols(); ++c) {
    const double lo = embeddings.col(c).minCoeff();
    const double hi = embeddings.col(c).maxCoeff();
    std::vector<int64_t> counts(bins, 0);
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
      int b = bins / 2;
      if (hi > lo) {
        b = static_cast<int>((embeddings(i, c) - lo) / (hi - lo) * bins);
        b = std::clamp(b, 0, bins - 1);
      }
      ++counts[b];
    }
    const int64_t tallest = *std::max_element(counts.begin(), counts.end());
    const int p = count_peaks(counts, prominence * static_cast<double>(tallest));
    out.counts.push_back(std::move(counts));
    out.lo.push_back(lo);
    out.hi.push_back(hi);
    out.peaks.push_back(p);
    out.peak_count = std::max(out.peak_count, p);
  }
  return out;
}

EmbeddingHistogram embedding_histogram(const Mlp& encoder, const Matrix& points,
                                       int bins) {
  return histogram_of(encoder.apply(points), bins);
}

bool DiagnosticsReport::all_finite() const {
  for (const auto& [name, value] : report_scalars(*this)) {
    if (!std::isfinite(value)) return false;
  }
  for (const auto* masses : {&mode_masses, &usage_weighted_mode_masses}) {
    if (!*masses) continue;
    for (double v : **masses) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

DiagnosticsReport diagnose_model(const MlpParams& params, Codebook& codebook,
                                 const LabeledDataset& dataset,
                                 const GaussianMixtureSpec& spec) {
  require(dataset.size() >= 1, "diagnostics over an empty dataset");
  DiagnosticsReport r;
  evaluate_usage(params, codebook, dataset.points);
  r.perplexity = perplexity(codebook.usage_counts);
  if (codebook.size() >= 2) {
    r.mean_pairwise_distance = mean_pairwise_distance(codebook.tokens);
  }
  const Matrix means = standardized_means(spec, dataset.scaler);
  const ModeMasses masses = mode_masses(codebook.tokens, means, &params.decoder);
  const EntropyBound bound = entropy_bound_check(masses.masses);
  r.mode_masses = std::vector<double>(masses.masses.begin(), masses.masses.end());
  r.active_modes = masses.active_modes;
  r.mode_entropy = bound.entropy;
  r.entropy_bound = bound.bound;
  r.entropy_bound_holds = bound.holds;
  if (auto weighted = usage_weighted_mode_masses(
          codebook.tokens, codebook.usage_counts, means, &params.decoder)) {
    r.usage_weighted_mode_masses =
        std::vector<double>(weighted->begin(), weighted->end());
  }

  const Matrix recon = reconstruct(params, codebook, dataset.points);
  const double total_sq = (recon - dataset.points).squaredNorm();
  r.distortion = total_sq / dataset.size();
  r.recon_mse = total_sq / static_cast<double>(dataset.points.size());
  if (dataset.size() >= dataset.dim() + 1) {
    const FrechetResult fd = frechet_gaussian_distance(dataset.points, recon);
    r.frechet_distance = fd.distance;
    r.frechet_degenerate = fd.degenerate;
  }
  r.mode_coverage = mode_coverage(recon, means);
  r.pairwise_recon_distance = pairwise_recon_distance(recon);
  r.embedding_peak_count =
      embedding_histogram(params.encoder, dataset.points).peak_count;
  return r;
}

DiagnosticsReport diagnose_autoencoder(const MlpParams& params,
                                       const LabeledDataset& dataset,
                                       const GaussianMixtureSpec& spec) {
  require(dataset.size() >= 1, "diagnostics over an empty dataset");
  DiagnosticsReport r;
  const Matrix means = standardized_means(spec, dataset.scaler);
  const Matrix recon =
      params.decoder.apply(params.encoder.apply(dataset.points));
  const double total_sq = (recon - dataset.points).squaredNorm();
  r.distortion = total_sq / dataset.size();
  r.recon_mse = total_sq / static_cast<double>(dataset.points.size());
  if (dataset.size() >= dataset.dim() + 1) {
    const FrechetResult fd = frechet_gaussian_distance(dataset.points, recon);
    r.frechet_distance = fd.distance;
    r.frechet_degenerate = fd.degenerate;
  }
  r.mode_coverage = mode_coverage(recon, means);
  r.pairwise_recon_distance = pairwise_recon_distance(recon);
  r.embedding_peak_count =
      embedding_histogram(params.encoder, dataset.points).peak_count;
  return r;
}

DiagnosticsReport diagnose_external(const ExternalInputs& in) {
  DiagnosticsReport r;
  require(in.tokens.rows() >= 1, "no tokens to diagnose");
  if (in.tokens.rows() >= 2) {
    r.mean_pairwise_distance = mean_pairwise_distance(in.tokens);
  }
  std::optional<std::vector<int64_t>> usage = in.usage_counts;
  if (!usage && in.embeddings) {
    usage = std::vector<int64_t>(in.tokens.rows(), 0);
    for (int k : assign(*in.embeddings, in.tokens)) ++(*usage)[k];
  }
  if (usage && std::any_of(usage->begin(), usage->end(),
                           [](int64_t c) { return c > 0; })) {
    r.perplexity = perplexity(*usage);
  }
  if (in.embeddings) {
    r.distortion = quantization_distortion(in.tokens, *in.embeddings);
    r.embedding_peak_count =
        histogram_of(*in.embeddings, kDefaultHistogramBins).peak_count;
  }
  if (in.component_means) {
    const ModeMasses masses = mode_masses(in.tokens, *in.component_means, nullptr);
    const EntropyBound bound = entropy_bound_check(masses.masses);
    r.mode_masses =
        std::vector<double>(masses.masses.begin(), masses.masses.end());
    r.active_modes = masses.active_modes;
    r.mode_entropy = bound.entropy;
    r.entropy_bound = bound.bound;
    r.entropy_bound_holds = bound.holds;
    if (usage) {
      if (auto weighted = usage_weighted_mode_masses(
              in.tokens, *usage, *in.component_means, nullptr)) {
        r.usage_weighted_mode_masses =
            std::vector<double>(weighted->begin(), weighted->end());
      }
    }
  }
  return r;
}

std::vector<std::pair<std::string, double>> report_scalars(
    const DiagnosticsReport& r) {
  std::vector<std::pair<std::string, double>> out;
  auto put = [&](const char* name, const auto& field) {
    if (field) out.emplace_back(name, static_cast<double>(*field));
  };
  put("perplexity", r.perplexity);
  put("mean_pairwise_distance", r.mean_pairwise_distance);
  put("mode_entropy", r.mode_entropy);
  put("active_modes", r.active_modes);
  put("entropy_bound", r.entropy_bound);
  put("distortion", r.distortion);
  put("recon_mse", r.recon_mse);
  put("frechet_distance", r.frechet_distance);
  put("mode_coverage", r.mode_coverage);
  put("pairwise_recon_distance", r.pairwise_recon_distance);
  put("embedding_peak_count", r.embedding_peak_count);
  return out;
}

std::string report_to_json(const DiagnosticsReport& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  auto real = [&](const char* name, const std::optional<double>& v) {
    j[name] = v ? nlohmann::ordered_json(round_field(*v)) : nullptr;
  };
  auto integer = [&](const char* name, const std::optional<int>& v) {
    j[name] = v ? nlohmann::ordered_json(*v) : nullptr;
  };
  auto flag = [&](const char* name, const std::optional<bool>& v) {
    j[name] = v ? nlohmann::ordered_json(*v) : nullptr;
  };
  auto list = [&](const char* name,
                  const std::optional<std::vector<double>>& v) {
    if (!v) {
      j[name] = nullptr;
      return;
    }
    auto arr = nlohmann::ordered_json::array();
    for (double x : *v) arr.push_back(round_field(x));
    j[name] = std::move(arr);
  };
  real("perplexity", r.perplexity);
  real("mean_pairwise_distance", r.mean_pairwise_distance);
  real("mode_entropy", r.mode_entropy);
  integer("active_modes", r.active_modes);
  real("entropy_bound", r.entropy_bound);
  flag("entropy_bound_holds", r.entropy_bound_holds);
  list("mode_masses", r.mode_masses);
  list("usage_weighted_mode_masses", r.usage_weighted_mode_masses);
  real("distortion", r.distortion);
  real("recon_mse", r.recon_mse);
  real("frechet_distance", r.frechet_distance);
  flag("frechet_degenerate", r.frechet_degenerate);
  integer("mode_coverage", r.mode_coverage);
  real("pairwise_recon_distance", r.pairwise_recon_distance);
  integer("embedding_peak_count", r.embedding_peak_count);
  return j.dump(2) + "\n";
}

std::string report_to_csv_rows(const std::string& run, const std::string& seed,
                               const DiagnosticsReport& report) {
  std::ostringstream out;
  for (const auto& [name, value] : report_scalars(report)) {
    out << run << ',' << seed << ',' << name << ',' << format_real(value)
        << '\n';
  }
  return out.str();
}

}  // namespace shrinklab
