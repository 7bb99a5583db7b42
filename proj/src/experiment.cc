#include "shrinklab/experiment.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "shrinklab/random.h"
#include "shrinklab/text_io.h"

namespace shrinklab {

namespace {

namespace pt = boost::property_tree;

constexpr uint64_t kDataStream = 0xDA7A;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

long long to_integer(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw InvalidArgument(key + ": expected an integer, got '" + t + "'");
  }
  return v;
}

int to_int(const std::string& text, const std::string& key) {
  const long long v = to_integer(text, key);
  if (v < INT32_MIN || v > INT32_MAX) {
    throw InvalidArgument(key + ": out of range");
  }
  return static_cast<int>(v);
}

double to_real(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
    throw InvalidArgument(key + ": expected a finite real, got '" + t + "'");
  }
  return v;
}

template <typename Parse>
auto parse_enum(const std::string& text, const std::string& key, Parse parse) {
  try {
    return parse(trim(text));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(key + ": " + e.what());
  }
}

// Returns false for keys that are not TrainConfig fields.
bool apply_train_key(TrainConfig& c, const std::string& key,
                     const std::string& value, const std::string& where) {
  if (key == "epochs") c.epochs = to_int(value, where);
  else if (key == "batch_size") c.batch_size = to_int(value, where);
  else if (key == "lr") c.lr = to_real(value, where);
  else if (key == "weight_decay") c.weight_decay = to_real(value, where);
  else if (key == "beta") c.beta = to_real(value, where);
  else if (key == "decay") c.decay = to_real(value, where);
  else if (key == "codebook_size") c.codebook_size = to_int(value, where);
  else if (key == "hidden_dim") c.hidden_dim = to_int(value, where);
  else if (key == "latent_dim") c.latent_dim = to_int(value, where);
  else if (key == "codebook_update")
    c.codebook_update = parse_enum(value, where, parse_codebook_update);
  else if (key == "init_ratio") c.init_ratio = to_real(value, where);
  else if (key == "kmeans_iters") c.kmeans_iters = to_int(value, where);
  else if (key == "kmeans_tol") c.kmeans_tol = to_real(value, where);
  else if (key == "kmeans_restarts") c.kmeans_restarts = to_int(value, where);
  else if (key == "initial_count") c.initial_count = to_real(value, where);
  else return false;
  return true;
}

std::string run_label(int dim, const std::string& run) {
  return "d" + std::to_string(dim) + "/" + run;
}

std::string format_reconstructions_csv(const Matrix& recon,
                                       const IndexVector& labels) {
  std::ostringstream out;
  for (Eigen::Index c = 0; c < recon.cols(); ++c) out << 'r' << c << ',';
  out << "label\n";
  for (Eigen::Index i = 0; i < recon.rows(); ++i) {
    for (Eigen::Index c = 0; c < recon.cols(); ++c) {
      out << format_real(recon(i, c)) << ',';
    }
    out << labels[i] << '\n';
  }
  return out.str();
}

void append_histogram_rows(std::ostringstream& out, const std::string& stage,
                           const EmbeddingHistogram& h) {
  for (size_t c = 0; c < h.counts.size(); ++c) {
    const int bins = static_cast<int>(h.counts[c].size());
    const double width = (h.hi[c] - h.lo[c]) / bins;
    for (int b = 0; b < bins; ++b) {
      out << stage << ',' << c << ',' << b << ','
          << format_real(h.lo[c] + b * width) << ','
          << format_real(h.lo[c] + (b + 1) * width) << ',' << h.counts[c][b]
          << '\n';
    }
  }
}

std::string format_histogram_csv(const EmbeddingHistogram& initial,
                                 const EmbeddingHistogram& final_) {
  std::ostringstream out;
  out << "stage,dim,bin,left,right,count\n";
  append_histogram_rows(out, "initial", initial);
  append_histogram_rows(out, "final", final_);
  return out.str();
}

// Runs in an order where every pretrained dependency precedes its user.
std::vector<const RunSpec*> execution_order(const ExperimentPlan& plan) {
  std::vector<const RunSpec*> order;
  for (const RunSpec& r : plan.runs) {
    if (r.config.regime == Regime::kAePretrain) order.push_back(&r);
  }
  for (const RunSpec& r : plan.runs) {
    if (r.config.regime != Regime::kAePretrain) order.push_back(&r);
  }
  return order;
}

struct Group {
  int dim;
  uint64_t seed;
};

std::vector<Group> groups_of(const ExperimentPlan& plan) {
  std::vector<Group> out;
  for (int dim : plan.data.dims) {
    for (uint64_t seed : plan.seeds) out.push_back({dim, seed});
  }
  return out;
}

template <typename Fn>
void parallel_for(size_t count, int threads, Fn fn) {
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < count; i = next++) fn(i);
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  std::vector<std::jthread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
}

void canonicalize(Matrix& m) {
  m = m.unaryExpr([](double v) { return round_to_text(v); });
}

struct GroupResult {
  std::vector<RunOutcome> outcomes;
  std::vector<std::string> faults;
};

GroupResult execute_group(const ExperimentPlan& plan, const Group& g,
                          std::ostream* log, std::mutex& log_mutex) {
  GroupResult result;
  const GaussianMixtureSpec spec = plan.data.spec(g.dim, g.seed);
  const LabeledDataset dataset = generate(spec);
  write_dataset_csv(plan.seed_dir(g.dim, g.seed) / "dataset.csv", dataset);

  std::map<std::string, Checkpoint> pretrained;
  std::set<std::string> failed;
  for (const RunSpec* run : execution_order(plan)) {
    const auto where = run->name + " (dim " + std::to_string(g.dim) +
                       ", seed " + std::to_string(g.seed) + ")";
    if (!run->pretrained.empty() && failed.count(run->pretrained)) {
      failed.insert(run->name);
      result.faults.push_back(where + ": pretrained run " + run->pretrained +
                              " did not complete");
      continue;
    }
    TrainConfig cfg = run->config;
    cfg.seed = g.seed;
    const auto dir = plan.run_dir(g.dim, g.seed, run->name);
    try {
      RunOutcome outcome{run->name, g.dim, g.seed, {}};
      Checkpoint ckpt;
      Matrix recon;
      EmbeddingHistogram initial_hist;
      if (cfg.regime == Regime::kAePretrain) {
        initial_hist = embedding_histogram(
            initial_params(cfg, dataset.dim()).encoder, dataset.points);
        AeRun ae = train_ae(cfg, dataset);
        outcome.report = diagnose_autoencoder(ae.params, dataset, spec);
        recon = ae.params.decoder.apply(ae.params.encoder.apply(dataset.points));
        ckpt = make_checkpoint(ae.params, nullptr);
        write_file_atomic(dir / "train_log.csv", format_train_log_csv(ae.log));
        write_file_atomic(dir / "embedding_histogram.csv",
                          format_histogram_csv(initial_hist,
                                               embedding_histogram(
                                                   ae.params.encoder,
                                                   dataset.points)));
        pretrained.emplace(run->name, ckpt);
      } else {
        TrainHooks hooks;
        hooks.on_codebook_init = [&](const Codebook& cb) {
          const std::vector<int64_t> unused(cb.size(), 0);
          write_file_atomic(dir / "codebook_init.csv",
                            format_codebook_csv(cb.tokens, unused));
        };
        const bool deferred = cfg.regime == Regime::kDeferredVq;
        const Checkpoint* source =
            deferred ? &pretrained.at(run->pretrained) : nullptr;
        initial_hist = embedding_histogram(
            deferred ? mlp_from_checkpoint(*source, "encoder")
                     : initial_params(cfg, dataset.dim()).encoder,
            dataset.points);
        VqRun vq = deferred ? train_deferred_vq(cfg, dataset, *source, hooks)
                            : train_baseline_vq(cfg, dataset, hooks);
        // Stored tokens are exactly their 9-digit text form, so a codebook
        // dump carries the same model as the checkpoint.
        canonicalize(vq.codebook.tokens);
        outcome.report = diagnose_model(vq.params, vq.codebook, dataset, spec);
        recon = reconstruct(vq.params, vq.codebook, dataset.points);
        ckpt = make_checkpoint(vq.params, &vq.codebook);
        write_file_atomic(dir / "train_log.csv", format_train_log_csv(vq.log));
        write_codebook_csv(dir / "codebook.csv", vq.codebook);
        write_file_atomic(dir / "embedding_histogram.csv",
                          format_histogram_csv(initial_hist,
                                               embedding_histogram(
                                                   vq.params.encoder,
                                                   dataset.points)));
      }
      ckpt.write(dir / "checkpoint.bin");
      write_file_atomic(dir / "reconstructions.csv",
                        format_reconstructions_csv(recon, dataset.labels));
      write_file_atomic(dir / "report.json", report_to_json(outcome.report));
      if (log != nullptr) {
        std::lock_guard lock(log_mutex);
        *log << "done " << where << '\n' << std::flush;
      }
      result.outcomes.push_back(std::move(outcome));
    } catch (const TrainingFault& e) {
      failed.insert(run->name);
      result.faults.push_back(where + ": epoch " + std::to_string(e.epoch()) +
                              ": " + e.what());
    } catch (const InvalidArgument& e) {
      failed.insert(run->name);
      result.faults.push_back(where + ": " + e.what());
    }
  }
  return result;
}

DiagnosticsReport diagnose_loaded(const LabeledDataset& dataset,
                                  const GaussianMixtureSpec& spec,
                                  const Checkpoint& checkpoint,
                                  const CodebookDump* dump) {
  MlpParams params = params_from_checkpoint(checkpoint);
  if (dump == nullptr && !checkpoint.contains("codebook.tokens")) {
    return diagnose_autoencoder(params, dataset, spec);
  }
  Codebook cb;
  if (checkpoint.contains("codebook.tokens")) {
    cb = codebook_from_checkpoint(checkpoint, 0.9, 0.25);
  }
  if (dump != nullptr) {
    cb = Codebook::from_tokens(dump->tokens, 0.9, 0.25);
  }
  require(cb.dim() == params.latent_dim(),
          "codebook dimension does not match the checkpoint latent size");
  return diagnose_model(params, cb, dataset, spec);
}

}  // namespace

GaussianMixtureSpec DataConfig::spec(int dim, uint64_t seed) const {
  GaussianMixtureSpec s;
  s.num_components = num_components;
  s.points_per_component = points_per_component;
  s.dim = dim;
  s.means = default_means(num_components, dim, separation);
  s.std = std;
  s.seed = derive_seed(seed, kDataStream);
  return s;
}

const RunSpec* ExperimentPlan::find(std::string_view run) const {
  for (const RunSpec& r : runs) {
    if (r.name == run) return &r;
  }
  return nullptr;
}

std::filesystem::path ExperimentPlan::seed_dir(int dim, uint64_t seed) const {
  return out_dir / ("d" + std::to_string(dim)) /
         ("seed" + std::to_string(seed));
}

std::filesystem::path ExperimentPlan::run_dir(int dim, uint64_t seed,
                                              std::string_view run) const {
  return seed_dir(dim, seed) / std::string(run);
}

void ExperimentPlan::validate() const {
  require(!name.empty(), "experiment.name: missing");
  require(!seeds.empty(), "experiment.seeds: at least one seed is required");
  require(std::set<uint64_t>(seeds.begin(), seeds.end()).size() ==
              seeds.size(),
          "experiment.seeds: duplicate seed");
  require(!out_dir.empty(), "experiment.out_dir: missing");
  require(data.num_components >= 1, "data.num_components: must be >= 1");
  require(data.points_per_component >= 1,
          "data.points_per_component: must be >= 1");
  require(data.std > 0.0, "data.std: must be positive");
  require(data.separation > 0.0, "data.separation: must be positive");
  require(!data.dims.empty(), "data.dims: at least one dim is required");
  for (int d : data.dims) require(d >= 1, "data.dims: must be >= 1");
  require(std::set<int>(data.dims.begin(), data.dims.end()).size() ==
              data.dims.size(),
          "data.dims: duplicate dim");
  require(!runs.empty(), "runs: the plan declares no [run.<name>] section");

  std::set<std::string> names;
  for (const RunSpec& r : runs) {
    const std::string key = "run." + r.name;
    require(!r.name.empty() &&
                r.name.find_first_of("/\\ ") == std::string::npos,
            key + ": run names must be non-empty without '/' or spaces");
    require(names.insert(r.name).second, key + ": duplicate run name");
    try {
      r.config.validate();
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(key + "." + e.what());
    }
    if (r.config.regime == Regime::kDeferredVq) {
      require(!r.pretrained.empty(),
              key + ".pretrained: deferred_vq needs a pretrained run");
      const RunSpec* source = find(r.pretrained);
      require(source != nullptr,
              key + ".pretrained: unknown run '" + r.pretrained + "'");
      require(source->config.regime == Regime::kAePretrain,
              key + ".pretrained: '" + r.pretrained +
                  "' is not an ae_pretrain run");
      require(source->config.hidden_dim == r.config.hidden_dim &&
                  source->config.latent_dim == r.config.latent_dim,
              key + ".pretrained: network shape differs from '" +
                  r.pretrained + "'");
    } else {
      require(r.pretrained.empty(),
              key + ".pretrained: only deferred_vq runs take a pretrained run");
    }
  }
  for (const auto& [a, b] : comparisons) {
    require(find(a) != nullptr, "experiment.compare: unknown run '" + a + "'");
    require(find(b) != nullptr, "experiment.compare: unknown run '" + b + "'");
  }
}

std::vector<uint64_t> parse_seed_list(const std::string& text,
                                      const std::string& key) {
  std::vector<uint64_t> seeds;
  for (const std::string& item : split_list(text)) {
    uint64_t v = 0;
    const auto [ptr, ec] =
        std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() ||
        ptr != item.data() + item.size()) {
      throw InvalidArgument(key + ": expected unsigned integers, got '" +
                            item + "'");
    }
    seeds.push_back(v);
  }
  return seeds;
}

ExperimentPlan parse_plan(const std::string& text) {
  pt::ptree tree;
  {
    std::istringstream in(text);
    try {
      pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      throw InvalidArgument("plan: " + e.message() + " (line " +
                            std::to_string(e.line()) + ")");
    }
  }

  ExperimentPlan plan;
  TrainConfig defaults;
  bool have_out_dir = false;
  std::vector<std::pair<std::string, const pt::ptree*>> run_sections;

  for (const auto& [section, body] : tree) {
    if (!body.data().empty() && body.empty()) {
      throw InvalidArgument(section + ": key outside of any section");
    }
    if (section == "experiment") {
      for (const auto& [key, node] : body) {
        const std::string where = "experiment." + key;
        const std::string value = trim(node.data());
        if (key == "name") {
          plan.name = value;
        } else if (key == "seeds") {
          plan.seeds = parse_seed_list(value, where);
        } else if (key == "out_dir") {
          plan.out_dir = value;
          have_out_dir = true;
        } else if (key == "compare") {
          for (const std::string& pair : split_list(value)) {
            const auto colon = pair.find(':');
            if (colon == std::string::npos) {
              throw InvalidArgument(where + ": expected 'a:b', got '" + pair +
                                    "'");
            }
            plan.comparisons.emplace_back(trim(pair.substr(0, colon)),
                                          trim(pair.substr(colon + 1)));
          }
        } else {
          throw InvalidArgument(where + ": unknown key");
        }
      }
    } else if (section == "data") {
      for (const auto& [key, node] : body) {
        const std::string where = "data." + key;
        const std::string& value = node.data();
        if (key == "num_components") {
          plan.data.num_components = to_int(value, where);
        } else if (key == "points_per_component") {
          plan.data.points_per_component = to_int(value, where);
        } else if (key == "dims") {
          plan.data.dims.clear();
          for (const std::string& d : split_list(value)) {
            plan.data.dims.push_back(to_int(d, where));
          }
        } else if (key == "std") {
          plan.data.std = to_real(value, where);
        } else if (key == "separation") {
          plan.data.separation = to_real(value, where);
        } else {
          throw InvalidArgument(where + ": unknown key");
        }
      }
    } else if (section == "train") {
      for (const auto& [key, node] : body) {
        if (!apply_train_key(defaults, key, node.data(), "train." + key)) {
          throw InvalidArgument("train." + key + ": unknown key");
        }
      }
    } else if (section.rfind("run.", 0) == 0) {
      run_sections.emplace_back(section.substr(4), &body);
    } else {
      throw InvalidArgument(section + ": unknown section");
    }
  }
  if (!have_out_dir && !plan.name.empty()) plan.out_dir = "out/" + plan.name;

  // Runs are applied after [train] so that section order does not matter.
  for (const auto& [name, body] : run_sections) {
    RunSpec run;
    run.name = name;
    run.config = defaults;
    bool have_regime = false;
    for (const auto& [key, node] : *body) {
      const std::string where = "run." + name + "." + key;
      if (key == "regime") {
        run.config.regime = parse_enum(node.data(), where, parse_regime);
        have_regime = true;
      } else if (key == "pretrained") {
        run.pretrained = trim(node.data());
      } else if (!apply_train_key(run.config, key, node.data(), where)) {
        throw InvalidArgument(where + ": unknown key");
      }
    }
    require(have_regime, "run." + name + ".regime: missing");
    plan.runs.push_back(std::move(run));
  }
  plan.validate();
  return plan;
}

ExperimentPlan read_plan(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw InvalidArgument("plan: cannot read " + path.string());
  }
  return parse_plan(read_file(path));
}

ExecutionResult execute_plan(const ExperimentPlan& plan, int threads,
                             std::ostream* log) {
  plan.validate();
  const std::vector<Group> groups = groups_of(plan);
  std::vector<GroupResult> results(groups.size());
  std::mutex log_mutex;
  parallel_for(groups.size(), threads, [&](size_t i) {
    results[i] = execute_group(plan, groups[i], log, log_mutex);
  });

  ExecutionResult out;
  for (GroupResult& r : results) {
    for (RunOutcome& o : r.outcomes) out.outcomes.push_back(std::move(o));
    for (std::string& f : r.faults) out.faults.push_back(std::move(f));
  }
  std::map<std::string, size_t> run_rank;
  for (size_t i = 0; i < plan.runs.size(); ++i) run_rank[plan.runs[i].name] = i;
  std::stable_sort(out.outcomes.begin(), out.outcomes.end(),
                   [&](const RunOutcome& a, const RunOutcome& b) {
                     if (a.dim != b.dim) return a.dim < b.dim;
                     return run_rank[a.run] < run_rank[b.run];
                   });
  for (const RunOutcome& o : out.outcomes) {
    out.all_finite = out.all_finite && o.report.all_finite();
  }

  write_file_atomic(plan.out_dir / "summary.csv",
                    format_summary_csv(out.outcomes));

  std::ostringstream cmp;
  cmp << "dim,metric,first,second,first_mean,second_mean\n";
  for (const auto& [a, b] : plan.comparisons) {
    for (int dim : plan.data.dims) {
      std::map<std::string, std::pair<double, int>> sum_a, sum_b;
      std::vector<std::string> metric_order;
      for (const RunOutcome& o : out.outcomes) {
        if (o.dim != dim || (o.run != a && o.run != b)) continue;
        for (const auto& [metric, value] : report_scalars(o.report)) {
          auto& slot = (o.run == a ? sum_a : sum_b)[metric];
          slot.first += value;
          ++slot.second;
          if (std::find(metric_order.begin(), metric_order.end(), metric) ==
              metric_order.end()) {
            metric_order.push_back(metric);
          }
        }
      }
      for (const std::string& m : metric_order) {
        if (!sum_a.count(m) || !sum_b.count(m)) continue;
        cmp << dim << ',' << m << ',' << a << ',' << b << ','
            << format_real(sum_a[m].first / sum_a[m].second) << ','
            << format_real(sum_b[m].first / sum_b[m].second) << '\n';
      }
    }
  }
  write_file_atomic(plan.out_dir / "comparison.csv", cmp.str());
  return out;
}

std::string format_summary_csv(const std::vector<RunOutcome>& outcomes) {
  std::ostringstream out;
  out << "run,seed,metric,value\n";
  std::vector<std::string> runs;
  std::map<std::string, std::vector<std::pair<std::string, double>>> values;
  for (const RunOutcome& o : outcomes) {
    const std::string label = run_label(o.dim, o.run);
    out << report_to_csv_rows(label, std::to_string(o.seed), o.report);
    if (std::find(runs.begin(), runs.end(), label) == runs.end()) {
      runs.push_back(label);
    }
    for (const auto& mv : report_scalars(o.report)) {
      values[label].push_back(mv);
    }
  }
  for (const std::string& label : runs) {
    std::vector<std::string> metrics;
    std::map<std::string, std::vector<double>> by_metric;
    for (const auto& [m, v] : values[label]) {
      if (!by_metric.count(m)) metrics.push_back(m);
      by_metric[m].push_back(v);
    }
    for (const std::string& m : metrics) {
      const std::vector<double>& v = by_metric[m];
      double sum = 0.0;
      for (double x : v) sum += x;
      out << label << ",mean," << m << ',' << format_real(sum / v.size())
          << '\n';
      out << label << ",min," << m << ','
          << format_real(*std::min_element(v.begin(), v.end())) << '\n';
      out << label << ",max," << m << ','
          << format_real(*std::max_element(v.begin(), v.end())) << '\n';
    }
  }
  return out.str();
}

DiagnosticsReport diagnose_stored(const ExperimentPlan& plan, int dim,
                                  uint64_t seed, const Checkpoint& checkpoint,
                                  const CodebookDump* dump) {
  const GaussianMixtureSpec spec = plan.data.spec(dim, seed);
  return diagnose_loaded(generate(spec), spec, checkpoint, dump);
}

CheckResult check_plan(const ExperimentPlan& plan, int threads) {
  plan.validate();
  const std::vector<Group> groups = groups_of(plan);
  std::vector<CheckResult> partial(groups.size());
  parallel_for(groups.size(), threads, [&](size_t i) {
    const Group& g = groups[i];
    const GaussianMixtureSpec spec = plan.data.spec(g.dim, g.seed);
    const LabeledDataset dataset = generate(spec);
    for (const RunSpec& run : plan.runs) {
      const auto dir = plan.run_dir(g.dim, g.seed, run.name);
      const auto report_path = dir / "report.json";
      try {
        const std::string stored = read_file(report_path);
        const Checkpoint ckpt = Checkpoint::read(dir / "checkpoint.bin");
        ++partial[i].checked;
        if (report_to_json(diagnose_loaded(dataset, spec, ckpt, nullptr)) !=
            stored) {
          partial[i].mismatches.push_back(report_path.string());
          continue;
        }
        if (run.config.regime != Regime::kAePretrain) {
          // The dump must describe the same model as the checkpoint.
          const CodebookDump dump = read_codebook_csv(dir / "codebook.csv");
          ++partial[i].checked;
          if (report_to_json(diagnose_loaded(dataset, spec, ckpt, &dump)) !=
              stored) {
            partial[i].mismatches.push_back((dir / "codebook.csv").string());
          }
        }
      } catch (const std::exception& e) {
        partial[i].mismatches.push_back(report_path.string() + ": " +
                                        e.what());
      }
    }
  });
  CheckResult out;
  for (CheckResult& p : partial) {
    out.checked += p.checked;
    for (std::string& m : p.mismatches) out.mismatches.push_back(std::move(m));
  }
  return out;
}

int configured_threads() {
  if (const char* env = std::getenv("SHRINKLAB_THREADS")) {
    const int n = to_int(env, "SHRINKLAB_THREADS");
    require(n >= 1, "SHRINKLAB_THREADS: must be >= 1");
    return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace shrinklab
