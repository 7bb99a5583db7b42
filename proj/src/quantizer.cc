#include "shrinklab/quantizer.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shrinklab/text_io.h"

namespace shrinklab {

std::string to_string(CodebookUpdate mode) {
  return mode == CodebookUpdate::kEma ? "ema" : "gradient";
}

CodebookUpdate parse_codebook_update(const std::string& text) {
  if (text == "ema") return CodebookUpdate::kEma;
  if (text == "gradient") return CodebookUpdate::kGradient;
  throw InvalidArgument("codebook_update must be 'ema' or 'gradient', got '" +
                        text + "'");
}

Codebook Codebook::from_tokens(Matrix tokens, double decay, double beta,
                               double initial_count) {
  Codebook cb;
  const Eigen::Index s = tokens.rows();
  cb.ema_cluster_size = Vector::Constant(s, initial_count);
  cb.ema_embed_sum = tokens * initial_count;
  cb.tokens = std::move(tokens);
  cb.usage_counts.assign(s, 0);
  cb.decay = decay;
  cb.beta = beta;
  cb.validate();
  return cb;
}

void Codebook::validate() const {
  require(tokens.rows() >= 1, "codebook is empty");
  require(tokens.cols() >= 1, "codebook tokens have zero dimension");
  require(decay > 0.0 && decay < 1.0, "EMA decay must lie in (0, 1)");
  require(beta >= 0.0, "beta must be non-negative");
  require(ema_cluster_size.size() == tokens.rows() &&
              ema_embed_sum.rows() == tokens.rows() &&
              ema_embed_sum.cols() == tokens.cols() &&
              static_cast<Eigen::Index>(usage_counts.size()) == tokens.rows(),
          "codebook state shapes disagree");
  require((ema_cluster_size.array() >= 0.0).all(),
          "EMA cluster sizes must be non-negative");
}

void Codebook::reset_usage() {
  std::fill(usage_counts.begin(), usage_counts.end(), 0);
}

void Codebook::record_usage(const IndexVector& indices) {
  for (int k : indices) {
    require(k >= 0 && k < size(), "usage index out of range");
    ++usage_counts[k];
  }
}

IndexVector assign(const Matrix& z, const Matrix& tokens) {
  require(tokens.rows() >= 1, "cannot assign against an empty codebook");
  require(z.cols() == tokens.cols(),
          "embeddings have dim " + std::to_string(z.cols()) +
              " but tokens have dim " + std::to_string(tokens.cols()));
  const Eigen::Index s = tokens.rows();
  const Eigen::Index d = tokens.cols();
  IndexVector out(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double* zi = z.data() + i * d;
    int best = 0;
    double best_d = 0.0;
    for (Eigen::Index k = 0; k < s; ++k) {
      const double* tk = tokens.data() + k * d;
      double dist = 0.0;
      for (Eigen::Index c = 0; c < d; ++c) {
        const double diff = zi[c] - tk[c];
        dist += diff * diff;
        if (k > 0 && dist >= best_d) break;
      }
      if (k == 0 || dist < best_d) {
        best_d = dist;
        best = static_cast<int>(k);
      }
    }
    out[i] = best;
  }
  return out;
}

IndexVector assign(const Matrix& z, const Codebook& codebook) {
  return assign(z, codebook.tokens);
}

QuantizeResult quantize(const Matrix& z, const Codebook& codebook) {
  QuantizeResult result;
  result.indices = assign(z, codebook);
  result.quantized.resize(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    result.quantized.row(i) = codebook.tokens.row(result.indices[i]);
  }
  const double mean_sq =
      z.size() > 0 ? (z - result.quantized).squaredNorm() / z.size() : 0.0;
  result.codebook_loss = mean_sq;
  result.commit_loss = codebook.beta * mean_sq;
  result.straight_through_output = result.quantized;
  return result;
}

Matrix commit_loss_grad(const Matrix& z, const Matrix& quantized, double beta) {
  require(z.rows() == quantized.rows() && z.cols() == quantized.cols(),
          "commit_loss_grad shape mismatch");
  return (2.0 * beta / static_cast<double>(z.size())) * (z - quantized);
}

Matrix codebook_loss_token_grad(const Matrix& z, const QuantizeResult& result,
                                int codebook_size) {
  Matrix grad = Matrix::Zero(codebook_size, z.cols());
  const double scale = 2.0 / static_cast<double>(z.size());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    grad.row(result.indices[i]) += scale * (result.quantized.row(i) - z.row(i));
  }
  return grad;
}

void ema_update(Codebook& codebook, const Matrix& z, const IndexVector& indices) {
  const int s = codebook.size();
  require(z.cols() == codebook.dim(), "ema_update dimension mismatch");
  require(static_cast<Eigen::Index>(indices.size()) == z.rows(),
          "ema_update needs one index per row");
  Vector counts = Vector::Zero(s);
  Matrix sums = Matrix::Zero(s, codebook.dim());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int k = indices[i];
    require(k >= 0 && k < s, "ema_update index out of range");
    counts(k) += 1.0;
    sums.row(k) += z.row(i);
  }
  const double g = codebook.decay;
  codebook.ema_cluster_size = g * codebook.ema_cluster_size + (1.0 - g) * counts;
  codebook.ema_embed_sum = g * codebook.ema_embed_sum + (1.0 - g) * sums;

  const double n = codebook.ema_cluster_size.sum();
  if (n <= 0.0) return;
  const double eps = codebook.laplace_eps;
  for (int k = 0; k < s; ++k) {
    const double smoothed =
        (codebook.ema_cluster_size(k) + eps) / (n + s * eps) * n;
    if (smoothed > 0.0) {
      codebook.tokens.row(k) = codebook.ema_embed_sum.row(k) / smoothed;
    }
  }
}

double perplexity(std::span<const int64_t> counts) {
  int64_t total = 0;
  int support = 0;
  int64_t first = 0;
  bool uniform = true;
  for (int64_t c : counts) {
    require(c >= 0, "usage counts must be non-negative");
    if (c == 0) continue;
    if (support == 0) first = c;
    uniform = uniform && c == first;
    total += c;
    ++support;
  }
  require(total > 0, "perplexity of an all-zero usage histogram");
  // Uniform usage over m tokens has entropy ln m exactly.
  if (uniform) return static_cast<double>(support);
  double entropy = 0.0;
  for (int64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    entropy -= p * std::log(p);
  }
  return std::clamp(std::exp(entropy), 1.0, static_cast<double>(support));
}

double mean_pairwise_distance(const Matrix& tokens) {
  const Eigen::Index s = tokens.rows();
  require(s >= 2, "mean_pairwise_distance needs at least two tokens");
  double total = 0.0;
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index j = i + 1; j < s; ++j) {
      total += (tokens.row(i) - tokens.row(j)).norm();
    }
  }
  return total / (0.5 * static_cast<double>(s) * static_cast<double>(s - 1));
}

std::string format_codebook_csv(const Matrix& tokens,
                                std::span<const int64_t> usage_counts) {
  require(usage_counts.empty() ||
              static_cast<Eigen::Index>(usage_counts.size()) == tokens.rows(),
          "usage counts must match the token count");
  std::ostringstream out;
  out << "token_id,usage_count";
  for (Eigen::Index c = 0; c < tokens.cols(); ++c) out << ",c" << c;
  out << '\n';
  for (Eigen::Index k = 0; k < tokens.rows(); ++k) {
    out << k << ',';
    if (!usage_counts.empty()) out << usage_counts[k];
    for (Eigen::Index c = 0; c < tokens.cols(); ++c) {
      out << ',' << format_real(tokens(k, c));
    }
    out << '\n';
  }
  return out.str();
}

void write_codebook_csv(const std::filesystem::path& path,
                        const Codebook& codebook) {
  write_file_atomic(path,
                    format_codebook_csv(codebook.tokens, codebook.usage_counts));
}

CodebookDump parse_codebook_csv(std::string_view text) {
  CsvTable table = parse_csv(text);
  if (table.column("token_id") != 0) {
    throw FormatError("codebook dump must start with a token_id column", 1);
  }
  const int usage_col = table.column("usage_count");
  std::vector<int> coord_cols;
  for (int d = 0;; ++d) {
    int col = table.column("c" + std::to_string(d));
    if (col < 0) break;
    coord_cols.push_back(col);
  }
  if (coord_cols.empty()) {
    throw FormatError("codebook dump has no c0.. coordinate columns", 1);
  }
  if (table.rows.empty()) throw FormatError("codebook dump has no tokens", 1);

  CodebookDump dump;
  const auto s = static_cast<Eigen::Index>(table.rows.size());
  dump.tokens.resize(s, static_cast<Eigen::Index>(coord_cols.size()));
  std::vector<int64_t> usage(s, 0);
  int usage_present = 0;
  for (Eigen::Index k = 0; k < s; ++k) {
    const auto& row = table.rows[k];
    const int line = table.line_numbers[k];
    if (parse_integer(row[0], line) != k) {
      throw FormatError("token ids must be 0..S-1 in order", line);
    }
    for (size_t c = 0; c < coord_cols.size(); ++c) {
      dump.tokens(k, static_cast<Eigen::Index>(c)) =
          parse_real(row[coord_cols[c]], line);
    }
    if (usage_col >= 0 && !row[usage_col].empty()) {
      usage[k] = parse_integer(row[usage_col], line);
      if (usage[k] < 0) throw FormatError("negative usage count", line);
      ++usage_present;
    }
  }
  if (usage_present == s) {
    dump.usage_counts = std::move(usage);
  } else if (usage_present != 0) {
    throw FormatError("usage_count must be given for all tokens or none");
  }
  return dump;
}

CodebookDump read_codebook_csv(const std::filesystem::path& path) {
  return parse_codebook_csv(read_file(path));
}

}  // namespace shrinklab
