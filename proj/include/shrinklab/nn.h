#ifndef SHRINKLAB_NN_H_
#define SHRINKLAB_NN_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shrinklab/types.h"

namespace shrinklab {

// View of one parameter tensor and its gradient, used by the optimizer and
// the checkpoint writer.
struct TensorRef {
  std::string name;
  std::vector<int64_t> shape;
  std::span<double> value;
  std::span<const double> grad;
};

struct LinearGrads {
  Matrix grad_in;
  Matrix grad_weight;
  RowVector grad_bias;
};

// y = x * W^T + b, one sample per row.
class LinearLayer {
 public:
  LinearLayer(int in_dim, int out_dim);

  // Weights and bias uniform in +-sqrt(1/in_dim).
  static LinearLayer random(int in_dim, int out_dim, uint64_t seed);

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }

  // Caches x for backward().
  Matrix forward(const Matrix& x);
  // Same value as forward() without touching the cache.
  Matrix apply(const Matrix& x) const;

  // Consumes the cached input. Also stores the parameter gradients so the
  // optimizer can read them through params().
  LinearGrads backward(const Matrix& grad_out);

  bool has_cache() const { return cached_input_.has_value(); }

  void append_params(const std::string& prefix, std::vector<TensorRef>& out);

  Matrix weight;  // out_dim x in_dim
  RowVector bias;

 private:
  std::optional<Matrix> cached_input_;
  Matrix grad_weight_;
  RowVector grad_bias_;
};

Matrix relu_forward(const Matrix& x);
// Gradient mask uses the forward input; the subgradient at exactly 0 is 0.
Matrix relu_backward(const Matrix& input, const Matrix& grad_out);

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};

// Mean over every element of (pred - target)^2.
LossAndGrad mse_loss(const Matrix& pred, const Matrix& target);

// Three linear layers with ReLU between them (none after the last).
class Mlp {
 public:
  static constexpr int kNumLayers = 3;

  Mlp(int in_dim, int hidden_dim, int out_dim, uint64_t seed);

  int in_dim() const { return layers_[0].in_dim(); }
  int hidden_dim() const { return layers_[0].out_dim(); }
  int out_dim() const { return layers_[kNumLayers - 1].out_dim(); }

  Matrix forward(const Matrix& x);
  Matrix apply(const Matrix& x) const;
  // Returns the gradient w.r.t. the input of the last forward().
  Matrix backward(const Matrix& grad_out);

  LinearLayer& layer(int i) { return layers_[i]; }
  const LinearLayer& layer(int i) const { return layers_[i]; }

  void append_params(const std::string& prefix, std::vector<TensorRef>& out);

 private:
  std::array<LinearLayer, kNumLayers> layers_;
  std::array<Matrix, kNumLayers - 1> pre_activations_;
};

// Exact identity map: x = relu(x) - relu(-x). Needs hidden_dim >= 2 * dim.
Mlp make_identity_mlp(int dim, int hidden_dim);

// Encoder and decoder of the VQ-VAE / autoencoder.
struct MlpParams {
  Mlp encoder;
  Mlp decoder;

  static MlpParams random(int input_dim, int hidden_dim, int latent_dim,
                          uint64_t seed);

  int input_dim() const { return encoder.in_dim(); }
  int latent_dim() const { return encoder.out_dim(); }
  int hidden_dim() const { return encoder.hidden_dim(); }

  std::vector<TensorRef> params();
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with bias correction; decay is applied as p -= lr * wd * p before the
// adaptive step.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {});

  // Throws TrainingFault (leaving parameters untouched) on a non-finite
  // gradient. The slot layout must not change between calls.
  void step(std::span<const TensorRef> params);

  int64_t step_count() const { return t_; }
  const AdamWConfig& config() const { return config_; }

 private:
  AdamWConfig config_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace shrinklab

#endif  // SHRINKLAB_NN_H_
