#include "shrinklab/nn.h"

#include <cmath>
#include <random>

#include "shrinklab/random.h"

namespace shrinklab {

LinearLayer::LinearLayer(int in_dim, int out_dim)
    : weight(Matrix::Zero(out_dim, in_dim)), bias(RowVector::Zero(out_dim)) {
  require(in_dim >= 1 && out_dim >= 1, "layer dims must be positive");
}

LinearLayer LinearLayer::random(int in_dim, int out_dim, uint64_t seed) {
  LinearLayer layer(in_dim, out_dim);
  std::mt19937_64 rng(seed);
  const double bound = std::sqrt(1.0 / in_dim);
  std::uniform_real_distribution<double> uniform(-bound, bound);
  for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
    layer.weight.data()[i] = uniform(rng);
  }
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
    layer.bias(i) = uniform(rng);
  }
  return layer;
}

Matrix LinearLayer::apply(const Matrix& x) const {
  require(x.cols() == weight.cols(),
          "linear layer expects " + std::to_string(weight.cols()) +
              " input columns, got " + std::to_string(x.cols()));
  Matrix y = x * weight.transpose();
  y.rowwise() += bias;
  return y;
}

Matrix LinearLayer::forward(const Matrix& x) {
  Matrix y = apply(x);
  cached_input_ = x;
  return y;
}

LinearGrads LinearLayer::backward(const Matrix& grad_out) {
  require(cached_input_.has_value(), "backward called before forward");
  const Matrix& x = *cached_input_;
  require(grad_out.rows() == x.rows() && grad_out.cols() == weight.rows(),
          "grad_out shape does not match the forward output");
  LinearGrads grads;
  grads.grad_in = grad_out * weight;
  grads.grad_weight = grad_out.transpose() * x;
  grads.grad_bias = grad_out.colwise().sum();
  grad_weight_ = grads.grad_weight;
  grad_bias_ = grads.grad_bias;
  cached_input_.reset();
  return grads;
}

void LinearLayer::append_params(const std::string& prefix,
                                std::vector<TensorRef>& out) {
  if (grad_weight_.size() == 0) {
    grad_weight_ = Matrix::Zero(weight.rows(), weight.cols());
    grad_bias_ = RowVector::Zero(bias.size());
  }
  out.push_back({prefix + ".weight",
                 {weight.rows(), weight.cols()},
                 {weight.data(), static_cast<size_t>(weight.size())},
                 {grad_weight_.data(), static_cast<size_t>(grad_weight_.size())}});
  out.push_back({prefix + ".bias",
                 {bias.size()},
                 {bias.data(), static_cast<size_t>(bias.size())},
                 {grad_bias_.data(), static_cast<size_t>(grad_bias_.size())}});
}

Matrix relu_forward(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& input, const Matrix& grad_out) {
  require(input.rows() == grad_out.rows() && input.cols() == grad_out.cols(),
          "relu_backward shape mismatch");
  return (input.array() > 0.0).select(grad_out, 0.0);
}

LossAndGrad mse_loss(const Matrix& pred, const Matrix& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "mse_loss shape mismatch");
  require(pred.size() > 0, "mse_loss on empty input");
  const double n = static_cast<double>(pred.size());
  Matrix diff = pred - target;
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

Mlp::Mlp(int in_dim, int hidden_dim, int out_dim, uint64_t seed)
    : layers_{LinearLayer::random(in_dim, hidden_dim, derive_seed(seed, 0)),
              LinearLayer::random(hidden_dim, hidden_dim, derive_seed(seed, 1)),
              LinearLayer::random(hidden_dim, out_dim, derive_seed(seed, 2))} {}

Matrix Mlp::forward(const Matrix& x) {
  Matrix h = x;
  for (int i = 0; i < kNumLayers; ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < kNumLayers) {
      pre_activations_[i] = h;
      h = relu_forward(h);
    }
  }
  return h;
}

Matrix Mlp::apply(const Matrix& x) const {
  Matrix h = x;
  for (int i = 0; i < kNumLayers; ++i) {
    h = layers_[i].apply(h);
    if (i + 1 < kNumLayers) h = relu_forward(h);
  }
  return h;
}

Matrix Mlp::backward(const Matrix& grad_out) {
  Matrix g = grad_out;
  for (int i = kNumLayers - 1; i >= 0; --i) {
    g = layers_[i].backward(g).grad_in;
    if (i > 0) g = relu_backward(pre_activations_[i - 1], g);
  }
  return g;
}

void Mlp::append_params(const std::string& prefix,
                        std::vector<TensorRef>& out) {
  for (int i = 0; i < kNumLayers; ++i) {
    layers_[i].append_params(prefix + "." + std::to_string(i), out);
  }
}

Mlp make_identity_mlp(int dim, int hidden_dim) {
  require(hidden_dim >= 2 * dim, "identity MLP needs hidden_dim >= 2 * dim");
  Mlp mlp(dim, hidden_dim, dim, 0);
  LinearLayer& first = mlp.layer(0);
  LinearLayer& middle = mlp.layer(1);
  LinearLayer& last = mlp.layer(2);
  first.weight.setZero();
  middle.weight.setZero();
  last.weight.setZero();
  first.bias.setZero();
  middle.bias.setZero();
  last.bias.setZero();
  for (int c = 0; c < dim; ++c) {
    // Units 2c and 2c+1 carry relu(x_c) and relu(-x_c).
    first.weight(2 * c, c) = 1.0;
    first.weight(2 * c + 1, c) = -1.0;
    middle.weight(2 * c, 2 * c) = 1.0;
    middle.weight(2 * c + 1, 2 * c + 1) = 1.0;
    last.weight(c, 2 * c) = 1.0;
    last.weight(c, 2 * c + 1) = -1.0;
  }
  return mlp;
}

MlpParams MlpParams::random(int input_dim, int hidden_dim, int latent_dim,
                            uint64_t seed) {
  return {Mlp(input_dim, hidden_dim, latent_dim, derive_seed(seed, 0xE)),
          Mlp(latent_dim, hidden_dim, input_dim, derive_seed(seed, 0xD))};
}

std::vector<TensorRef> MlpParams::params() {
  std::vector<TensorRef> out;
  encoder.append_params("encoder", out);
  decoder.append_params("decoder", out);
  return out;
}

AdamW::AdamW(AdamWConfig config) : config_(config) {
  require(config_.lr > 0.0, "learning rate must be positive");
}

void AdamW::step(std::span<const TensorRef> params) {
  for (const TensorRef& p : params) {
    require(p.value.size() == p.grad.size(),
            "gradient size mismatch for " + p.name);
    for (double g : p.grad) {
      if (!std::isfinite(g)) {
        throw TrainingFault("non-finite gradient in " + p.name);
      }
    }
  }
  if (m_.empty()) {
    for (const TensorRef& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }
  require(m_.size() == params.size(), "optimizer slot layout changed");
  ++t_;
  const auto& c = config_;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(t_));
  for (size_t s = 0; s < params.size(); ++s) {
    const TensorRef& p = params[s];
    require(m_[s].size() == p.value.size(), "optimizer slot layout changed");
    for (size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      double& w = p.value[i];
      w -= c.lr * c.weight_decay * w;
      double& m = m_[s][i];
      double& v = v_[s][i];
      m = c.beta1 * m + (1.0 - c.beta1) * g;
      v = c.beta2 * v + (1.0 - c.beta2) * g * g;
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      w -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace shrinklab
