#ifndef SHRINKLAB_TRAINER_H_
#define SHRINKLAB_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shrinklab/checkpoint.h"
#include "shrinklab/init.h"
#include "shrinklab/nn.h"
#include "shrinklab/quantizer.h"
#include "shrinklab/synth_data.h"

namespace shrinklab {

enum class Regime { kBaselineVq, kAePretrain, kDeferredVq };

std::string to_string(Regime regime);
Regime parse_regime(const std::string& text);

// Defaults are the reference synthetic configuration.
struct TrainConfig {
  Regime regime = Regime::kBaselineVq;
  int epochs = 200;
  int batch_size = 256;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta = 0.25;
  double decay = 0.9;
  int codebook_size = 128;
  int hidden_dim = 32;
  int latent_dim = 0;  // 0: same as the input dimension
  CodebookUpdate codebook_update = CodebookUpdate::kEma;
  double init_ratio = 10.0;
  int kmeans_iters = 100;
  double kmeans_tol = 1e-6;
  int kmeans_restarts = 10;
  double initial_count = 1.0;
  uint64_t seed = 0;

  int resolved_latent_dim(int input_dim) const {
    return latent_dim > 0 ? latent_dim : input_dim;
  }
  AdamWConfig optimizer() const;
  InitOptions init_options() const;

  // Throws InvalidArgument whose message starts with the offending key.
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double mse = 0.0;
  double commit = 0.0;
  double codebook = 0.0;
  std::optional<double> perplexity;  // absent for ae_pretrain
  std::optional<double> mean_pairwise_dist;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

// CSV `epoch,loss,mse,commit,codebook,perplexity,mean_pairwise_dist`. Wall
// clock is kept out so logs are reproducible byte for byte.
std::string format_train_log_csv(const TrainLog& log);

struct StepRecord {
  int epoch = 0;
  int step = 0;
  double loss = 0.0;
  double mse = 0.0;
  double commit = 0.0;
  double codebook = 0.0;
  // Largest |gradient| reaching any encoder parameter in this step.
  double encoder_grad_max = 0.0;
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  // Called once with the freshly initialized codebook of a VQ regime.
  std::function<void(const Codebook&)> on_codebook_init;
};

struct VqRun {
  MlpParams params;
  Codebook codebook;
  TrainLog log;
};

struct AeRun {
  MlpParams params;
  TrainLog log;
};

// Seed-derived parameter initialization shared by every regime, so an
// ae_pretrain run with epochs=0 reproduces the baseline's starting point.
MlpParams initial_params(const TrainConfig& config, int input_dim);

VqRun train_baseline_vq(const TrainConfig& config,
                        const LabeledDataset& dataset,
                        const TrainHooks& hooks = {});

AeRun train_ae(const TrainConfig& config, const LabeledDataset& dataset,
               const TrainHooks& hooks = {});

VqRun train_deferred_vq(const TrainConfig& config,
                        const LabeledDataset& dataset,
                        const Checkpoint& pretrained,
                        const TrainHooks& hooks = {});
VqRun train_deferred_vq(const TrainConfig& config,
                        const LabeledDataset& dataset,
                        const std::filesystem::path& pretrained_checkpoint,
                        const TrainHooks& hooks = {});

// Continues VQ training of an existing model; the shared core of both VQ
// regimes.
void train_vq(const TrainConfig& config, const LabeledDataset& dataset,
              VqRun& run, const TrainHooks& hooks = {});

// encode -> nearest token -> decode, no gradient state touched.
Matrix reconstruct(const MlpParams& params, const Codebook& codebook,
                   const Matrix& points);

// Resets usage and records one full assignment pass over `points`.
void evaluate_usage(const MlpParams& params, Codebook& codebook,
                    const Matrix& points);

Checkpoint make_checkpoint(MlpParams& params, const Codebook* codebook);
// Codebook tensors: codebook.tokens, codebook.ema_cluster_size,
// codebook.ema_embed_sum.
Codebook codebook_from_checkpoint(const Checkpoint& ckpt, double decay,
                                  double beta);

}  // namespace shrinklab

#endif  // SHRINKLAB_TRAINER_H_
