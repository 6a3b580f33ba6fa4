// rankprop command line: each subcommand recomputes the stages it needs
// from the config (run 0 of the seed ladder) and writes its artifacts to --out.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rankprop/config.hpp"
#include "rankprop/pipeline.hpp"

namespace fs = std::filesystem;
using namespace rankprop;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Config file (key=value lines)");
  cmd->add_option("--set", opts.overrides, "Override one key: key=value (repeatable)");
  cmd->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--seed", opts.seed, "Master seed");
}

ExperimentConfig resolve(const CommonOptions& opts) {
  ExperimentConfig cfg = opts.config_path.empty() ? ExperimentConfig{} : load_config(opts.config_path);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed) cfg.master_seed = *opts.seed;
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const CommonOptions& opts, const std::string& name) {
  fs::create_directories(opts.out_dir);
  const fs::path path = fs::path(opts.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void write_manifest(const ExperimentConfig& cfg, const CommonOptions& opts, const std::string& command,
                    std::size_t runs) {
  std::vector<std::size_t> idx(runs);
  for (std::size_t i = 0; i < runs; ++i) idx[i] = i;
  open_out(opts, "manifest.json") << manifest_json(cfg, command, idx);
}

std::string join_docs(const Impression& imp) {
  std::string s;
  for (std::size_t i = 0; i < imp.size(); ++i) s += (i ? " " : "") + std::to_string(imp.docs[i].value);
  return s;
}

std::string join_clicks(const ClickVector& c) {
  std::string s;
  for (std::size_t i = 0; i < c.size(); ++i) s += (i ? " " : "") + std::to_string(int{c[i]});
  return s;
}

int cmd_generate(const CommonOptions& opts) {
  const ExperimentConfig cfg = resolve(opts);
  const RunSeeds seeds = seeds_for_run(cfg.master_seed, 0);
  PoolSplits splits;
  if (cfg.data_source == "synthetic") {
    SyntheticConfig sc = cfg.synthetic;
    sc.seed = seeds.at("data");
    SplitSpec spec = cfg.split;
    spec.seed = seeds.at("split");
    splits = split_pool(generate_synthetic(sc, cfg.k), spec);
  } else {
    const PreparedData data = prepare_data(cfg, seeds);
    splits = data.splits;
  }
  {
    auto f = open_out(opts, "train.txt");
    serialize_letor(splits.train, f);
  }
  {
    auto f = open_out(opts, "validate.txt");
    serialize_letor(splits.validate, f);
  }
  {
    auto f = open_out(opts, "test.txt");
    serialize_letor(splits.test, f);
  }
  write_manifest(cfg, opts, "generate", 1);
  std::cout << "queries: train " << splits.train.queries.size() << ", validate "
            << splits.validate.queries.size() << ", test " << splits.test.queries.size() << '\n';
  return 0;
}

int cmd_train_rankers(const CommonOptions& opts) {
  const ExperimentConfig cfg = resolve(opts);
  const RunSeeds seeds = seeds_for_run(cfg.master_seed, 0);
  const PreparedData data = prepare_data(cfg, seeds);
  const TrainedRankers rankers = train_rankers(cfg, data, seeds);
  {
    auto f = open_out(opts, "pi.ranker");
    write_linear_ranker(rankers.pi, f);
  }
  {
    auto f = open_out(opts, "mu.ranker");
    write_linear_ranker(rankers.mu, f);
  }
  auto f = open_out(opts, "ranker_diff.csv");
  f << "rmse,mae,kendallTau\n"
    << rankers.diff.rmse << ',' << rankers.diff.mae << ',' << rankers.diff.kendall_tau << '\n';
  write_manifest(cfg, opts, "train-rankers", 1);
  std::cout << "ranker diff: rmse " << rankers.diff.rmse << ", mae " << rankers.diff.mae
            << ", tau " << rankers.diff.kendall_tau << '\n';
  return 0;
}

int cmd_simulate(const CommonOptions& opts) {
  const ExperimentConfig cfg = resolve(opts);
  const RunSeeds seeds = seeds_for_run(cfg.master_seed, 0);
  const PreparedData data = prepare_data(cfg, seeds);
  const Simulation sim = simulate(cfg, data, train_rankers(cfg, data, seeds), seeds);
  {
    auto f = open_out(opts, "logged.csv");
    f << "query,docs,clicks\n";
    for (const auto& r : sim.logged.records) {
      f << r.query.value << ',' << join_docs(r.impression) << ',' << join_clicks(r.clicks) << '\n';
    }
  }
  {
    auto f = open_out(opts, "measurement.csv");
    f << "query,docs,clicks\n";
    for (std::size_t i = 0; i < sim.measurement.impressions.size(); ++i) {
      const auto& imp = sim.measurement.impressions[i];
      f << imp.query.value << ',' << join_docs(imp) << ',' << join_clicks(sim.measurement.clicks[i])
        << '\n';
    }
  }
  write_manifest(cfg, opts, "simulate", 1);
  std::cout << "logged " << sim.logged.records.size() << " impressions, measurement "
            << sim.measurement.impressions.size() << '\n';
  return 0;
}

int cmd_train_ir(const CommonOptions& opts) {
  const ExperimentConfig cfg = resolve(opts);
  const RunSeeds seeds = seeds_for_run(cfg.master_seed, 0);
  const PreparedData data = prepare_data(cfg, seeds);
  const Simulation sim = simulate(cfg, data, train_rankers(cfg, data, seeds), seeds);
  const ImitationStage ir = train_imitation_stage(cfg, data, sim, seeds);
  {
    auto f = open_out(opts, "ir.mlp");
    write_mlp(ir.model.params, f);
  }
  {
    auto f = open_out(opts, "training.csv");
    f << "epoch,loss\n";
    const auto& curve = ir.model.report.loss_curve;
    for (std::size_t e = 0; e < curve.size(); ++e) f << e + 1 << ',' << curve[e] << '\n';
  }
  {
    auto f = open_out(opts, "ir_report.csv");
    f << "swapPercent,validationTau,sigma,logSigma,logLikelihood\n"
      << ir.model.report.swap_percent << ',' << ir.model.report.validation_tau << ','
      << ir.sigma.sigma << ',' << ir.sigma.log_sigma << ',' << ir.sigma.log_likelihood << '\n';
  }
  write_manifest(cfg, opts, "train-ir", 1);
  std::cout << "swap% " << ir.model.report.swap_percent << ", validation tau "
            << ir.model.report.validation_tau << ", sigma " << ir.sigma.sigma << '\n';
  return 0;
}

int cmd_evaluate(const CommonOptions& opts) {
  const ExperimentConfig cfg = resolve(opts);
  const ExperimentResult result = run_pipeline(cfg);
  {
    auto f = open_out(opts, "results.csv");
    write_results_csv(result, f);
  }
  {
    auto f = open_out(opts, "diagnostics.csv");
    write_diagnostics_csv(result, f);
  }
  {
    auto f = open_out(opts, "summary.csv");
    write_summary_csv(result, f);
  }
  write_manifest(cfg, opts, "evaluate", cfg.runs);
  write_summary_csv(result, std::cout);
  return 0;
}

int cmd_sweep(const CommonOptions& opts, const std::string& axis, const std::vector<std::string>& values) {
  const ExperimentConfig cfg = resolve(opts);
  const SweepResult result = sweep(cfg, axis, values);
  {
    auto f = open_out(opts, "sweep_" + axis + ".csv");
    write_sweep_csv(result, f);
  }
  write_manifest(cfg, opts, "sweep", cfg.runs);
  write_sweep_csv(result, std::cout);
  int failed = 0;
  for (const auto& cell : result.cells) {
    if (!cell.result) {
      std::cerr << axis << "=" << cell.value << " failed: " << cell.error << '\n';
      ++failed;
    }
  }
  return failed ? 1 : 0;
}

int cmd_validate(const CommonOptions& opts) {
  const ExperimentConfig cfg = resolve(opts);
  const RunSeeds seeds = seeds_for_run(cfg.master_seed, 0);
  const PreparedData data = prepare_data(cfg, seeds);
  const Simulation sim = simulate(cfg, data, train_rankers(cfg, data, seeds), seeds);
  const ValidationReport report = validate_dataset(sim.logged);
  for (const auto& v : report) {
    std::cout << (v.record ? "record " + std::to_string(*v.record) : std::string("dataset")) << ": "
              << v.rule << ": " << v.detail << '\n';
  }
  std::cout << "config ok; logged dataset: " << report.size() << " violation(s)\n";
  write_manifest(cfg, opts, "validate", 1);
  return report.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rankprop: off-policy evaluation of rankers with imitation-ranker propensities"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string axis;
  std::vector<std::string> values;

  auto* generate = app.add_subcommand("generate", "Write train/validate/test LETOR files");
  auto* rankers = app.add_subcommand("train-rankers", "Train logging and measurement rankers");
  auto* simulate_cmd = app.add_subcommand("simulate", "Write logged and measurement impressions with clicks");
  auto* train_ir = app.add_subcommand("train-ir", "Train the imitation ranker and infer sigma");
  auto* evaluate = app.add_subcommand("evaluate", "Run the full pipeline over all runs");
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the pipeline once per value of one axis");
  auto* validate = app.add_subcommand("validate", "Check the config and the simulated logged dataset");
  for (auto* cmd : {generate, rankers, simulate_cmd, train_ir, evaluate, sweep_cmd, validate}) {
    add_common(cmd, opts);
  }
  sweep_cmd->add_option("--axis", axis, "t_pi | C | eta | eps_minus | B | size | epochs | objective")
      ->required();
  sweep_cmd->add_option("--values", values, "Comma-separated axis values")->required()->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return cmd_generate(opts);
    if (*rankers) return cmd_train_rankers(opts);
    if (*simulate_cmd) return cmd_simulate(opts);
    if (*train_ir) return cmd_train_ir(opts);
    if (*evaluate) return cmd_evaluate(opts);
    if (*sweep_cmd) return cmd_sweep(opts, axis, values);
    if (*validate) return cmd_validate(opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
