// shrinklab command-line front end.
//
//   shrinklab run <plan.ini> [--seed-list 1,2,3] [--out-dir DIR] [--check]
//   shrinklab diagnose <codebook.csv> [--embeddings CSV] [--means CSV]
//                      [--checkpoint BIN --plan INI --dim D --seed S]
//                      [--out JSON]
//   shrinklab oracle <plan.ini> [--seed-list ...] [--samples N]
//
// Exit status: 0 success, 1 invalid input, 2 training fault or non-finite
// metrics, 3 `--check` found a differing report.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shrinklab/checkpoint.h"
#include "shrinklab/diagnostics.h"
#include "shrinklab/experiment.h"
#include "shrinklab/oracle.h"
#include "shrinklab/quantizer.h"
#include "shrinklab/synth_data.h"
#include "shrinklab/text_io.h"

namespace {

using namespace shrinklab;

constexpr int kExitInvalid = 1;
constexpr int kExitFault = 2;
constexpr int kExitMismatch = 3;

// Numeric CSV with a header; a `label` column is ignored.
Matrix read_matrix_csv(const std::string& path) {
  const CsvTable table = parse_csv(read_file(path));
  std::vector<int> cols;
  for (size_t c = 0; c < table.header.size(); ++c) {
    if (table.header[c] != "label") cols.push_back(static_cast<int>(c));
  }
  if (cols.empty() || table.rows.empty()) {
    throw FormatError(path + ": no numeric data");
  }
  Matrix m(table.rows.size(), cols.size());
  for (size_t i = 0; i < table.rows.size(); ++i) {
    for (size_t j = 0; j < cols.size(); ++j) {
      m(i, j) = parse_real(table.rows[i][cols[j]], table.line_numbers[i]);
    }
  }
  return m;
}

ExperimentPlan load_plan(const std::string& path, const std::string& seeds,
                         const std::string& out_dir) {
  ExperimentPlan plan = read_plan(path);
  if (!seeds.empty()) plan.seeds = parse_seed_list(seeds, "--seed-list");
  if (!out_dir.empty()) plan.out_dir = out_dir;
  plan.validate();
  return plan;
}

int cmd_run(const std::string& plan_path, const std::string& seeds,
            const std::string& out_dir, bool check) {
  ExperimentPlan plan;
  int threads = 1;
  try {
    plan = load_plan(plan_path, seeds, out_dir);
    threads = configured_threads();
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  if (check) {
    const CheckResult r = check_plan(plan, threads);
    for (const std::string& m : r.mismatches) {
      std::cout << "DIFFERS " << m << '\n';
    }
    std::cout << (r.checked - static_cast<int>(r.mismatches.size())) << " of "
              << r.checked << " reports byte-identical\n";
    return r.mismatches.empty() && r.checked > 0 ? 0 : kExitMismatch;
  }
  const ExecutionResult r = execute_plan(plan, threads, &std::cerr);
  for (const std::string& f : r.faults) {
    std::cerr << "training fault: " << f << '\n';
  }
  if (!r.faults.empty()) return kExitFault;
  if (!r.all_finite) {
    std::cerr << "error: a report contains non-finite metrics\n";
    return kExitFault;
  }
  std::cout << "wrote " << r.outcomes.size() << " runs to "
            << plan.out_dir.string() << '\n';
  return 0;
}

struct DiagnoseArgs {
  std::string dump;
  std::string embeddings;
  std::string means;
  std::string checkpoint;
  std::string plan;
  int dim = 0;
  uint64_t seed = 0;
  std::string out;
};

int cmd_diagnose(const DiagnoseArgs& a) {
  DiagnosticsReport report;
  try {
    const CodebookDump dump = read_codebook_csv(a.dump);
    if (!a.checkpoint.empty()) {
      if (a.plan.empty() || a.dim < 1) {
        std::cerr << "error: --checkpoint needs --plan and --dim\n";
        return kExitInvalid;
      }
      const ExperimentPlan plan = read_plan(a.plan);
      report = diagnose_stored(plan, a.dim, a.seed,
                               Checkpoint::read(a.checkpoint), &dump);
    } else {
      ExternalInputs in;
      in.tokens = dump.tokens;
      in.usage_counts = dump.usage_counts;
      if (!a.embeddings.empty()) in.embeddings = read_matrix_csv(a.embeddings);
      if (!a.means.empty()) in.component_means = read_matrix_csv(a.means);
      report = diagnose_external(in);
    }
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  const std::string json = report_to_json(report);
  if (a.out.empty()) {
    std::cout << json;
  } else {
    write_file_atomic(a.out, json);
  }
  return 0;
}

int cmd_oracle(const std::string& plan_path, const std::string& seeds,
               int64_t samples) {
  ExperimentPlan plan;
  try {
    plan = load_plan(plan_path, seeds, "");
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  int codebook_size = plan.runs.front().config.codebook_size;
  std::cout << "dim,seed,baseline,value\n";
  for (int dim : plan.data.dims) {
    for (uint64_t seed : plan.seeds) {
      const GaussianMixtureSpec spec = plan.data.spec(dim, seed);
      // Quantizing to the component means themselves, in the raw frame.
      const oracle::MonteCarloEstimate mc =
          oracle::monte_carlo_distortion(spec, spec.means, samples, seed);
      std::cout << dim << ',' << seed << ",means_distortion_raw,"
                << format_real(mc.value) << '\n';
      if (dim == 1) {
        const LabeledDataset data = generate(spec);
        std::vector<double> xs(data.points.data(),
                               data.points.data() + data.points.size());
        const oracle::LloydMax1D lm = oracle::lloyd_max_1d(xs, codebook_size);
        std::cout << dim << ',' << seed << ",lloyd_max_distortion,"
                  << format_real(lm.distortion) << '\n';
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vector-quantization shrinkage lab"};
  app.require_subcommand(1);

  std::string plan_path, seeds, out_dir;
  bool check = false;
  CLI::App* run = app.add_subcommand("run", "Execute an experiment plan");
  run->add_option("plan", plan_path, "Plan file (INI)")->required();
  run->add_option("--seed-list", seeds, "Comma-separated seeds");
  run->add_option("--out-dir", out_dir, "Artifact directory");
  run->add_flag("--check", check,
                "Recompute reports from stored checkpoints and compare");

  DiagnoseArgs diag;
  CLI::App* diagnose =
      app.add_subcommand("diagnose", "Diagnose a codebook dump");
  diagnose->add_option("dump", diag.dump, "Codebook CSV")->required();
  diagnose->add_option("--embeddings", diag.embeddings, "Embedding CSV");
  diagnose->add_option("--means", diag.means,
                       "Component means CSV, in the tokens' frame");
  diagnose->add_option("--checkpoint", diag.checkpoint, "Model checkpoint");
  diagnose->add_option("--plan", diag.plan, "Plan that produced the model");
  diagnose->add_option("--dim", diag.dim, "Data dimension of the run");
  diagnose->add_option("--seed", diag.seed, "Seed of the run");
  diagnose->add_option("--out", diag.out, "Write the report here");

  std::string oracle_plan, oracle_seeds;
  int64_t samples = 200000;
  CLI::App* oracle = app.add_subcommand("oracle", "Print oracle baselines");
  oracle->add_option("plan", oracle_plan, "Plan file (INI)")->required();
  oracle->add_option("--seed-list", oracle_seeds, "Comma-separated seeds");
  oracle->add_option("--samples", samples, "Monte Carlo samples")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : kExitInvalid;
  }

  try {
    if (run->parsed()) return cmd_run(plan_path, seeds, out_dir, check);
    if (diagnose->parsed()) return cmd_diagnose(diag);
    if (oracle->parsed()) return cmd_oracle(oracle_plan, oracle_seeds, samples);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitInvalid;
}
