#ifndef SHRINKLAB_DIAGNOSTICS_H_
#define SHRINKLAB_DIAGNOSTICS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shrinklab/nn.h"
#include "shrinklab/quantizer.h"
#include "shrinklab/synth_data.h"

namespace shrinklab {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr double kCoverageThreshold = 0.001;
inline constexpr double kPeakProminence = 0.02;
inline constexpr int kDefaultHistogramBins = 50;
inline constexpr int kExactPairwiseLimit = 2000;

struct ModeMasses {
  Vector masses;  // p_k, sums to 1
  int active_modes = 0;
};

// Tokens are decoded (when `decoder` is given) and assigned to the nearest
// component mean; p_k is the fraction of tokens landing on component k.
ModeMasses mode_masses(const Matrix& tokens, const Matrix& component_means,
                       const Mlp* decoder);

// Same assignment, but each token is weighted by its usage count.
std::optional<Vector> usage_weighted_mode_masses(
    const Matrix& tokens, std::span<const int64_t> usage,
    const Matrix& component_means, const Mlp* decoder);

// Entropy in nats, 0 ln 0 = 0. Throws unless p is a probability vector
// (sum within 1e-9 of 1, no negative entries).
double mode_entropy(const Vector& p);

struct EntropyBound {
  double entropy = 0.0;
  int active_modes = 0;
  double bound = 0.0;  // ln M
  bool holds = false;  // entropy <= bound + 1e-12
};

EntropyBound entropy_bound_check(const Vector& p);

// Mean over points of ||reconstruct(x) - x||^2.
double distortion(const MlpParams& params, const Codebook& codebook,
                  const Matrix& points);
// Same quantity for an identity encoder/decoder: pure codebook quantization.
double quantization_distortion(const Matrix& tokens, const Matrix& points);

struct FrechetResult {
  double distance = 0.0;
  // Set when an eigenvalue had to be clamped by more than round-off.
  bool degenerate = false;
};

// ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^{1/2}) over Gaussian fits
// (unbiased covariances). Needs at least dim + 1 rows in each set.
FrechetResult frechet_gaussian_distance(const Matrix& a, const Matrix& b);

// Components receiving at least `threshold` of the points.
int mode_coverage(const Matrix& reconstructions, const Matrix& component_means,
                  double threshold = kCoverageThreshold);

// Mean distance over all pairs when rows <= limit, otherwise over all pairs of
// a seeded subsample of `limit` rows.
double pairwise_recon_distance(const Matrix& reconstructions,
                               int limit = kExactPairwiseLimit,
                               uint64_t seed = 0);

// Peaks of a histogram whose topographic prominence reaches
// `min_prominence`. Out-of-range bins count as zero, so edge bins can peak.
int count_peaks(std::span<const int64_t> counts, double min_prominence);

struct EmbeddingHistogram {
  std::vector<std::vector<int64_t>> counts;  // per latent dimension
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<int> peaks;  // per dimension
  int peak_count = 0;      // max over dimensions
};

EmbeddingHistogram histogram_of(const Matrix& embeddings, int bins,
                                double prominence = kPeakProminence);
EmbeddingHistogram embedding_histogram(const Mlp& encoder, const Matrix& points,
                                       int bins = kDefaultHistogramBins);

// Every field is optional so that partial inputs (e.g. a bare codebook dump)
// can still produce a report.
struct DiagnosticsReport {
  std::optional<double> perplexity;
  std::optional<double> mean_pairwise_distance;
  std::optional<double> mode_entropy;
  std::optional<int> active_modes;
  std::optional<double> entropy_bound;
  std::optional<bool> entropy_bound_holds;
  std::optional<std::vector<double>> mode_masses;
  std::optional<std::vector<double>> usage_weighted_mode_masses;
  std::optional<double> distortion;
  std::optional<double> recon_mse;
  std::optional<double> frechet_distance;
  std::optional<bool> frechet_degenerate;
  std::optional<int> mode_coverage;
  std::optional<double> pairwise_recon_distance;
  std::optional<int> embedding_peak_count;

  // Every present real is finite.
  bool all_finite() const;
};

// Full report for a trained or initialized model. Uses (and refreshes) the
// codebook's usage counts with one pass over the dataset.
DiagnosticsReport diagnose_model(const MlpParams& params, Codebook& codebook,
                                 const LabeledDataset& dataset,
                                 const GaussianMixtureSpec& spec);

// Continuous autoencoder (no quantizer): reconstruction metrics only.
DiagnosticsReport diagnose_autoencoder(const MlpParams& params,
                                       const LabeledDataset& dataset,
                                       const GaussianMixtureSpec& spec);

struct ExternalInputs {
  Matrix tokens;
  std::optional<std::vector<int64_t>> usage_counts;
  std::optional<Matrix> embeddings;
  // Component means in the tokens' frame; tokens are assigned directly.
  std::optional<Matrix> component_means;
};

// Tokenizer-agnostic path: computes what the inputs allow, the rest stays
// absent.
DiagnosticsReport diagnose_external(const ExternalInputs& inputs);

// JSON with `schema_version`; absent metrics are null. Reals are printed with
// 9 significant digits.
std::string report_to_json(const DiagnosticsReport& report);

// `run,seed,metric,value` rows (no header) for every present scalar.
std::string report_to_csv_rows(const std::string& run, const std::string& seed,
                               const DiagnosticsReport& report);

// Present scalar metrics by name, in a fixed order.
std::vector<std::pair<std::string, double>> report_scalars(
    const DiagnosticsReport& report);

}  // namespace shrinklab

#endif  // SHRINKLAB_DIAGNOSTICS_H_
