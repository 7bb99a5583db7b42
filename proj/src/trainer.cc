#include "shrinklab/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "shrinklab/random.h"
#include "shrinklab/text_io.h"

namespace shrinklab {
namespace {

// Stream ids for derive_seed.
constexpr uint64_t kParamsStream = 1;
constexpr uint64_t kInitStream = 2;
constexpr uint64_t kShuffleStream = 3;

void check_finite(double value, const char* what, int epoch) {
  if (!std::isfinite(value)) {
    throw TrainingFault(std::string("non-finite ") + what + " in epoch " +
                            std::to_string(epoch),
                        epoch);
  }
}

std::vector<int> epoch_order(int n, uint64_t seed, int epoch) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, kShuffleStream, epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Matrix gather(const Matrix& points, const std::vector<int>& order, int begin,
              int end) {
  Matrix out(end - begin, points.cols());
  for (int i = begin; i < end; ++i) out.row(i - begin) = points.row(order[i]);
  return out;
}

double max_abs_grad(const std::vector<TensorRef>& params,
                    const std::string& prefix) {
  double out = 0.0;
  for (const TensorRef& p : params) {
    if (p.name.rfind(prefix, 0) != 0) continue;
    for (double g : p.grad) out = std::max(out, std::abs(g));
  }
  return out;
}

struct Accumulator {
  double loss = 0.0, mse = 0.0, commit = 0.0, codebook = 0.0;
  double rows = 0.0;

  void add(const StepRecord& step, int batch_rows) {
    loss += step.loss * batch_rows;
    mse += step.mse * batch_rows;
    commit += step.commit * batch_rows;
    codebook += step.codebook * batch_rows;
    rows += batch_rows;
  }

  EpochRecord finish(int epoch, double seconds) const {
    EpochRecord r;
    r.epoch = epoch;
    r.loss = loss / rows;
    r.mse = mse / rows;
    r.commit = commit / rows;
    r.codebook = codebook / rows;
    r.seconds = seconds;
    return r;
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

void check_dataset(const TrainConfig& config, const LabeledDataset& dataset) {
  config.validate();
  require(dataset.size() >= 1, "empty dataset");
}

}  // namespace

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::kBaselineVq:
      return "baseline_vq";
    case Regime::kAePretrain:
      return "ae_pretrain";
    case Regime::kDeferredVq:
      return "deferred_vq";
  }
  return "?";
}

Regime parse_regime(const std::string& text) {
  for (Regime r :
       {Regime::kBaselineVq, Regime::kAePretrain, Regime::kDeferredVq}) {
    if (to_string(r) == text) return r;
  }
  throw InvalidArgument("regime: unknown value '" + text + "'");
}

AdamWConfig TrainConfig::optimizer() const {
  AdamWConfig c;
  c.lr = lr;
  c.weight_decay = weight_decay;
  return c;
}

InitOptions TrainConfig::init_options() const {
  InitOptions o;
  o.codebook_size = codebook_size;
  o.ratio = init_ratio;
  o.batch_size = batch_size;
  o.kmeans_iters = kmeans_iters;
  o.kmeans_tol = kmeans_tol;
  o.kmeans_restarts = kmeans_restarts;
  o.decay = decay;
  o.beta = beta;
  o.initial_count = initial_count;
  o.seed = derive_seed(seed, kInitStream);
  return o;
}

void TrainConfig::validate() const {
  require(epochs >= 0, "epochs: must be >= 0");
  require(batch_size >= 1, "batch_size: must be >= 1");
  require(lr > 0.0 && std::isfinite(lr), "lr: must be positive");
  require(weight_decay >= 0.0, "weight_decay: must be >= 0");
  require(beta >= 0.0, "beta: must be >= 0");
  require(decay > 0.0 && decay < 1.0, "decay: must lie in (0, 1)");
  require(codebook_size >= 2, "codebook_size: must be >= 2");
  require(hidden_dim >= 1, "hidden_dim: must be >= 1");
  require(latent_dim >= 0, "latent_dim: must be >= 0");
  require(init_ratio >= 1.0, "init_ratio: must be >= 1");
  require(kmeans_iters >= 0, "kmeans_iters: must be >= 0");
  require(kmeans_tol >= 0.0, "kmeans_tol: must be >= 0");
  require(kmeans_restarts >= 1, "kmeans_restarts: must be >= 1");
  require(initial_count > 0.0, "initial_count: must be > 0");
}

std::string format_train_log_csv(const TrainLog& log) {
  std::ostringstream out;
  out << "epoch,loss,mse,commit,codebook,perplexity,mean_pairwise_dist\n";
  for (const EpochRecord& r : log.epochs) {
    out << r.epoch << ',' << format_real(r.loss) << ',' << format_real(r.mse)
        << ',' << format_real(r.commit) << ',' << format_real(r.codebook)
        << ',' << (r.perplexity ? format_real(*r.perplexity) : "") << ','
        << (r.mean_pairwise_dist ? format_real(*r.mean_pairwise_dist) : "")
        << '\n';
  }
  return out.str();
}

MlpParams initial_params(const TrainConfig& config, int input_dim) {
  return MlpParams::random(input_dim, config.hidden_dim,
                           config.resolved_latent_dim(input_dim),
                           derive_seed(config.seed, kParamsStream));
}

Matrix reconstruct(const MlpParams& params, const Codebook& codebook,
                   const Matrix& points) {
  require(points.cols() == params.input_dim(),
          "reconstruct: points have the wrong dimension");
  const Matrix z = params.encoder.apply(points);
  const IndexVector idx = assign(z, codebook);
  Matrix q(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) q.row(i) = codebook.tokens.row(idx[i]);
  return params.decoder.apply(q);
}

void evaluate_usage(const MlpParams& params, Codebook& codebook,
                    const Matrix& points) {
  codebook.reset_usage();
  codebook.record_usage(assign(params.encoder.apply(points), codebook));
}

void train_vq(const TrainConfig& config, const LabeledDataset& dataset,
              VqRun& run, const TrainHooks& hooks) {
  check_dataset(config, dataset);
  Codebook& cb = run.codebook;
  MlpParams& params = run.params;
  require(cb.dim() == params.latent_dim(),
          "codebook dim does not match the encoder output");
  AdamW optimizer(config.optimizer());
  AdamWConfig token_config = config.optimizer();
  // Decay would pull tokens toward the origin.
  token_config.weight_decay = 0.0;
  AdamW token_optimizer(token_config);
  Matrix token_grad = Matrix::Zero(cb.size(), cb.dim());
  const bool gradient_mode = config.codebook_update == CodebookUpdate::kGradient;
  const int n = dataset.size();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<int> order = epoch_order(n, config.seed, epoch);
    Accumulator acc;
    int step = 0;
    for (int begin = 0; begin < n; begin += config.batch_size) {
      const int end = std::min(n, begin + config.batch_size);
      const Matrix x = gather(dataset.points, order, begin, end);
      const Matrix z = params.encoder.forward(x);
      const QuantizeResult q = quantize(z, cb);
      const Matrix x_hat = params.decoder.forward(q.straight_through_output);
      const LossAndGrad recon = mse_loss(x_hat, x);

      StepRecord rec;
      rec.epoch = epoch;
      rec.step = ++step;
      rec.mse = recon.loss;
      rec.commit = q.commit_loss;
      rec.codebook = q.codebook_loss;
      rec.loss = rec.mse + rec.commit + (gradient_mode ? rec.codebook : 0.0);
      check_finite(rec.loss, "loss", epoch);

      const Matrix grad_st = params.decoder.backward(recon.grad);
      const Matrix grad_z = straight_through_backward(grad_st) +
                            commit_loss_grad(z, q.quantized, cb.beta);
      params.encoder.backward(grad_z);
      std::vector<TensorRef> refs = params.params();
      rec.encoder_grad_max = max_abs_grad(refs, "encoder.");
      try {
        optimizer.step(refs);
      } catch (const TrainingFault& fault) {
        throw TrainingFault(std::string(fault.what()) + " in epoch " +
                                std::to_string(epoch),
                            epoch);
      }

      if (gradient_mode) {
        token_grad = codebook_loss_token_grad(z, q, cb.size());
        std::vector<TensorRef> token_ref{
            {"codebook.tokens",
             {cb.tokens.rows(), cb.tokens.cols()},
             {cb.tokens.data(), static_cast<size_t>(cb.tokens.size())},
             {token_grad.data(), static_cast<size_t>(token_grad.size())}}};
        token_optimizer.step(token_ref);
      } else {
        ema_update(cb, z, q.indices);
      }
      acc.add(rec, end - begin);
      if (hooks.on_step) hooks.on_step(rec);
    }

    EpochRecord record = acc.finish(epoch, 0.0);
    evaluate_usage(params, cb, dataset.points);
    record.perplexity = perplexity(cb.usage_counts);
    record.mean_pairwise_dist = mean_pairwise_distance(cb.tokens);
    check_finite(*record.mean_pairwise_dist, "codebook distance", epoch);
    record.seconds = seconds_since(start);
    run.log.epochs.push_back(record);
  }
}

VqRun train_baseline_vq(const TrainConfig& config,
                        const LabeledDataset& dataset,
                        const TrainHooks& hooks) {
  check_dataset(config, dataset);
  MlpParams params = initial_params(config, dataset.dim());
  Codebook cb = init_codebook(InitMode::kUntrainedEncoder, params.encoder,
                              dataset, config.init_options());
  if (hooks.on_codebook_init) hooks.on_codebook_init(cb);
  VqRun run{std::move(params), std::move(cb), {}};
  train_vq(config, dataset, run, hooks);
  return run;
}

AeRun train_ae(const TrainConfig& config, const LabeledDataset& dataset,
               const TrainHooks& hooks) {
  check_dataset(config, dataset);
  AeRun run{initial_params(config, dataset.dim()), {}};
  MlpParams& params = run.params;
  AdamW optimizer(config.optimizer());
  const int n = dataset.size();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<int> order = epoch_order(n, config.seed, epoch);
    Accumulator acc;
    int step = 0;
    for (int begin = 0; begin < n; begin += config.batch_size) {
      const int end = std::min(n, begin + config.batch_size);
      const Matrix x = gather(dataset.points, order, begin, end);
      const Matrix z = params.encoder.forward(x);
      const Matrix x_hat = params.decoder.forward(z);
      const LossAndGrad recon = mse_loss(x_hat, x);
      StepRecord rec;
      rec.epoch = epoch;
      rec.step = ++step;
      rec.mse = recon.loss;
      rec.loss = recon.loss;
      check_finite(rec.loss, "loss", epoch);
      params.encoder.backward(params.decoder.backward(recon.grad));
      std::vector<TensorRef> refs = params.params();
      rec.encoder_grad_max = max_abs_grad(refs, "encoder.");
      try {
        optimizer.step(refs);
      } catch (const TrainingFault& fault) {
        throw TrainingFault(std::string(fault.what()) + " in epoch " +
                                std::to_string(epoch),
                            epoch);
      }
      acc.add(rec, end - begin);
      if (hooks.on_step) hooks.on_step(rec);
    }
    run.log.epochs.push_back(acc.finish(epoch, seconds_since(start)));
  }
  return run;
}

VqRun train_deferred_vq(const TrainConfig& config,
                        const LabeledDataset& dataset,
                        const Checkpoint& pretrained,
                        const TrainHooks& hooks) {
  check_dataset(config, dataset);
  MlpParams params = params_from_checkpoint(pretrained);
  require(params.input_dim() == dataset.dim(),
          "pretrained checkpoint input dim does not match the dataset");
  require(params.latent_dim() == config.resolved_latent_dim(dataset.dim()) &&
              params.hidden_dim() == config.hidden_dim,
          "pretrained checkpoint shape does not match the config");
  Codebook cb = init_codebook(InitMode::kPretrainedEncoder, params.encoder,
                              dataset, config.init_options());
  if (hooks.on_codebook_init) hooks.on_codebook_init(cb);
  VqRun run{std::move(params), std::move(cb), {}};
  train_vq(config, dataset, run, hooks);
  return run;
}

VqRun train_deferred_vq(const TrainConfig& config,
                        const LabeledDataset& dataset,
                        const std::filesystem::path& pretrained_checkpoint,
                        const TrainHooks& hooks) {
  if (!std::filesystem::exists(pretrained_checkpoint)) {
    throw FormatError("missing pretrained checkpoint " +
                      pretrained_checkpoint.string());
  }
  return train_deferred_vq(config, dataset,
                           Checkpoint::read(pretrained_checkpoint), hooks);
}

Checkpoint make_checkpoint(MlpParams& params, const Codebook* codebook) {
  Checkpoint ckpt;
  const std::vector<TensorRef> refs = params.params();
  ckpt.add(refs);
  if (codebook != nullptr) {
    ckpt.add_matrix("codebook.tokens", codebook->tokens);
    ckpt.add_vector("codebook.ema_cluster_size", codebook->ema_cluster_size);
    ckpt.add_matrix("codebook.ema_embed_sum", codebook->ema_embed_sum);
  }
  return ckpt;
}

Codebook codebook_from_checkpoint(const Checkpoint& ckpt, double decay,
                                  double beta) {
  Codebook cb;
  cb.tokens = ckpt.get_matrix("codebook.tokens");
  cb.ema_cluster_size = ckpt.get_vector("codebook.ema_cluster_size");
  cb.ema_embed_sum = ckpt.get_matrix("codebook.ema_embed_sum");
  cb.usage_counts.assign(cb.tokens.rows(), 0);
  cb.decay = decay;
  cb.beta = beta;
  cb.validate();
  return cb;
}

}  // namespace shrinklab
