#ifndef SHRINKLAB_EXPERIMENT_H_
#define SHRINKLAB_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shrinklab/diagnostics.h"
#include "shrinklab/synth_data.h"
#include "shrinklab/trainer.h"

namespace shrinklab {

struct DataConfig {
  int num_components = 10;
  int points_per_component = 1000;
  std::vector<int> dims{2};
  double std = 1.0;
  double separation = 5.0;

  // Every run of a given (dim, seed) pair sees the same dataset.
  GaussianMixtureSpec spec(int dim, uint64_t seed) const;
};

struct RunSpec {
  std::string name;
  TrainConfig config;    // config.seed is filled per seed at execution time
  std::string pretrained;  // name of an ae_pretrain run, deferred_vq only
};

// Plan files are INI:
//   [experiment] name, seeds, out_dir, compare (a:b, ...)
//   [data]       num_components, points_per_component, dims, std, separation
//   [train]      defaults for every run (TrainConfig keys)
//   [run.<name>] regime, pretrained, and any TrainConfig key
struct ExperimentPlan {
  std::string name;
  std::vector<uint64_t> seeds;
  std::filesystem::path out_dir;
  DataConfig data;
  std::vector<RunSpec> runs;
  std::vector<std::pair<std::string, std::string>> comparisons;

  // Throws InvalidArgument whose message starts with the offending key.
  void validate() const;
  const RunSpec* find(std::string_view run) const;

  std::filesystem::path seed_dir(int dim, uint64_t seed) const;
  std::filesystem::path run_dir(int dim, uint64_t seed,
                                std::string_view run) const;
};

// Parses and validates. Errors name the key (`section.key: reason`).
ExperimentPlan parse_plan(const std::string& text);
ExperimentPlan read_plan(const std::filesystem::path& path);

// "1,2,3" -> {1, 2, 3}; `key` prefixes error messages.
std::vector<uint64_t> parse_seed_list(const std::string& text,
                                      const std::string& key = "seeds");

struct RunOutcome {
  std::string run;
  int dim = 0;
  uint64_t seed = 0;
  DiagnosticsReport report;
};

struct ExecutionResult {
  std::vector<RunOutcome> outcomes;  // ordered by dim, run, seed
  // "<run> (dim D, seed S): <message>" per faulted run.
  std::vector<std::string> faults;
  bool all_finite = true;
};

// Runs every (dim, seed) group, up to `threads` groups at a time, writing
// the artifact tree under plan.out_dir. Progress lines go to `log` if given.
ExecutionResult execute_plan(const ExperimentPlan& plan, int threads,
                             std::ostream* log = nullptr);

// Rows `run,seed,metric,value`; run is "d<dim>/<name>". Per-seed rows first,
// then mean/min/max rows per (run, metric).
std::string format_summary_csv(const std::vector<RunOutcome>& outcomes);

struct CheckResult {
  int checked = 0;
  std::vector<std::string> mismatches;  // report paths that differ
};

// Recomputes every stored report from its checkpoint and compares bytes.
CheckResult check_plan(const ExperimentPlan& plan, int threads);

// Full diagnosis of a stored model: dataset regenerated from the plan,
// networks from the checkpoint, tokens from the codebook dump.
DiagnosticsReport diagnose_stored(const ExperimentPlan& plan, int dim,
                                  uint64_t seed, const Checkpoint& checkpoint,
                                  const CodebookDump* dump);

// Thread count from SHRINKLAB_THREADS, else the hardware concurrency.
int configured_threads();

}  // namespace shrinklab

#endif  // SHRINKLAB_EXPERIMENT_H_
