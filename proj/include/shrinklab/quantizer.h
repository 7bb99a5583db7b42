#ifndef SHRINKLAB_QUANTIZER_H_
#define SHRINKLAB_QUANTIZER_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shrinklab/types.h"

namespace shrinklab {

enum class CodebookUpdate { kEma, kGradient };

std::string to_string(CodebookUpdate mode);
CodebookUpdate parse_codebook_update(const std::string& text);

// Token set plus EMA statistics and an evaluation usage histogram.
struct Codebook {
  Matrix tokens;             // S x d
  Vector ema_cluster_size;   // S
  Matrix ema_embed_sum;      // S x d
  std::vector<int64_t> usage_counts;  // S
  double decay = 0.9;
  double beta = 0.25;
  // Additive smoothing of the cluster-size distribution before it is scaled
  // back to the smoothed batch count.
  double laplace_eps = 1e-5;

  // EMA state seeded as if every token had absorbed `initial_count`
  // assignments at its current position.
  static Codebook from_tokens(Matrix tokens, double decay, double beta,
                              double initial_count = 1.0);

  int size() const { return static_cast<int>(tokens.rows()); }
  int dim() const { return static_cast<int>(tokens.cols()); }

  void validate() const;
  void reset_usage();
  void record_usage(const IndexVector& indices);
};

struct QuantizeResult {
  IndexVector indices;
  Matrix quantized;  // row i == tokens.row(indices[i])
  double commit_loss = 0.0;    // beta * mean((z - sg(q))^2)
  double codebook_loss = 0.0;  // mean((sg(z) - q)^2)
  // Forward value of z + sg(q - z). Stored as the token rows themselves; the
  // backward rule is identity (see straight_through_backward).
  Matrix straight_through_output;
};

// Nearest token by Euclidean distance, lowest index on ties.
IndexVector assign(const Matrix& z, const Matrix& tokens);
IndexVector assign(const Matrix& z, const Codebook& codebook);

QuantizeResult quantize(const Matrix& z, const Codebook& codebook);

// d(loss)/dz given d(loss)/d(straight_through_output).
inline Matrix straight_through_backward(const Matrix& grad_output) {
  return grad_output;
}

// d(commit_loss)/dz.
Matrix commit_loss_grad(const Matrix& z, const Matrix& quantized, double beta);

// d(codebook_loss)/d(tokens), rows accumulated per selected token.
Matrix codebook_loss_token_grad(const Matrix& z, const QuantizeResult& result,
                                int codebook_size);

// One EMA step over a batch and its assignments. Tokens whose smoothed count
// is zero keep their position.
void ema_update(Codebook& codebook, const Matrix& z, const IndexVector& indices);

// exp(entropy of counts / sum). Throws on an all-zero histogram.
double perplexity(std::span<const int64_t> counts);

// Mean Euclidean distance over unordered token pairs. Needs S >= 2.
double mean_pairwise_distance(const Matrix& tokens);

struct CodebookDump {
  Matrix tokens;
  std::optional<std::vector<int64_t>> usage_counts;
};

// CSV `token_id,usage_count,c0,...,c{d-1}`.
std::string format_codebook_csv(const Matrix& tokens,
                                std::span<const int64_t> usage_counts);
void write_codebook_csv(const std::filesystem::path& path,
                        const Codebook& codebook);

// Accepts dumps whose usage column is missing or empty (usage then absent).
// Throws FormatError naming the line on malformed rows.
CodebookDump parse_codebook_csv(std::string_view text);
CodebookDump read_codebook_csv(const std::filesystem::path& path);

}  // namespace shrinklab

#endif  // SHRINKLAB_QUANTIZER_H_
