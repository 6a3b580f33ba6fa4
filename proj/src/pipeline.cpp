#include "rankprop/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <thread>

#include "json.hpp"

#include "rankprop/random.hpp"
#include "rankprop/simd/kernels.hpp"

namespace rankprop {

namespace {

std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

LabeledPool read_letor_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open LETOR file '" + path + "'");
  return parse_letor(in);
}

// Re-lays features so that every pool shares the same width.
void widen(LabeledPool& pool, std::size_t dim) {
  if (pool.dim == dim) return;
  for (auto& q : pool.queries) {
    std::vector<double> wide(q.num_docs() * dim, 0.0);
    for (std::size_t i = 0; i < q.num_docs(); ++i) {
      std::copy_n(q.features.begin() + static_cast<std::ptrdiff_t>(i * pool.dim), pool.dim,
                  wide.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
    q.features = std::move(wide);
  }
  pool.dim = dim;
}

std::vector<Metric> metrics_for(const ExperimentConfig& cfg) {
  return {Metric{MetricKind::kNoC, cfg.mrr_normalized}, Metric{MetricKind::kMrr, cfg.mrr_normalized}};
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"data",        "split",     "ranker.pi",
                                                 "ranker.mu",   "observation", "swap",
                                                 "click.log",   "ir",        "click.gt"};
  return names;
}

RunSeeds seeds_for_run(std::uint64_t master_seed, std::size_t run_index) {
  RunSeeds s;
  s.run = derive_seed(master_seed, static_cast<std::uint64_t>(run_index));
  for (const auto& name : stage_names()) s.stages[name] = derive_seed(s.run, name);
  return s;
}

PreparedData prepare_data(const ExperimentConfig& cfg, const RunSeeds& seeds) {
  return stage("prepare-data", [&] {
    PreparedData out;
    if (cfg.data_source == "synthetic") {
      SyntheticConfig sc = cfg.synthetic;
      sc.seed = seeds.at("data");
      const LabeledPool pool = binarize_labels(generate_synthetic(sc, cfg.k), cfg.label_threshold);
      SplitSpec spec = cfg.split;
      spec.seed = seeds.at("split");
      out.splits = split_pool(pool, spec);
    } else {
      out.splits.train = binarize_labels(read_letor_file(cfg.letor_train), cfg.label_threshold);
      out.splits.validate = binarize_labels(read_letor_file(cfg.letor_validate), cfg.label_threshold);
      out.splits.test = binarize_labels(read_letor_file(cfg.letor_test), cfg.label_threshold);
      const std::size_t dim =
          std::max({out.splits.train.dim, out.splits.validate.dim, out.splits.test.dim});
      widen(out.splits.train, dim);
      widen(out.splits.validate, dim);
      widen(out.splits.test, dim);
    }
    auto& test = out.splits.test.queries;
    const auto before = test.size();
    std::erase_if(test, [&](const LabeledQuery& q) { return q.num_docs() < cfg.k; });
    out.dropped_test_queries = before - test.size();
    if (test.empty()) throw std::invalid_argument("no test query has at least K candidates");
    return out;
  });
}

TrainedRankers train_rankers(const ExperimentConfig& cfg, const PreparedData& data,
                             const RunSeeds& seeds) {
  return stage("train-rankers", [&] {
    TrainedRankers out;
    const std::uint64_t pi_seed = seeds.at("ranker.pi");
    const std::uint64_t mu_seed = cfg.shared_ranker_seed ? pi_seed : seeds.at("ranker.mu");
    out.pi = train_linear_ranker(data.splits.train, cfg.c, cfg.t_pi, pi_seed, cfg.ranker);
    out.mu = train_linear_ranker(data.splits.train, cfg.c, cfg.t_mu, mu_seed, cfg.ranker);
    out.diff = compare_rankers(out.pi, out.mu, data.splits.validate);
    return out;
  });
}

Simulation simulate(const ExperimentConfig& cfg, const PreparedData& data,
                    const TrainedRankers& rankers, const RunSeeds& seeds) {
  return stage("simulate", [&] {
    const LabeledPool& test = data.splits.test;
    Simulation out;
    out.logged.k = cfg.k;
    out.logged.features = test.feature_store();

    const auto observed =
        build_observation_queries(test, cfg.observation_count, seeds.at("observation"));
    std::vector<Impression> logged;
    logged.reserve(observed.size());
    for (const auto& q : observed) {
      const LabeledQuery* lq = test.find(q);
      logged.push_back(rank_top_k(rankers.pi, q, lq->features, test.dim, cfg.k));
    }
    Rng swap_rng = make_rng(seeds.at("swap"));
    logged = apply_randpair(logged, cfg.swap, swap_rng);

    Rng click_rng = make_rng(seeds.at("click.log"));
    out.logged.records.reserve(logged.size());
    for (auto& imp : logged) {
      const LabeledQuery* lq = test.find(imp.query);
      ClickVector clicks = simulate_clicks(imp, lq->labels, cfg.click, click_rng);
      out.logged.records.push_back(LoggedRecord{imp.query, std::move(imp), std::move(clicks)});
    }

    Rng gt_rng = make_rng(seeds.at("click.gt"));
    for (const auto& lq : test.queries) {
      const Impression imp = rank_top_k(rankers.mu, lq.id, lq.features, test.dim, cfg.k);
      for (std::size_t r = 0; r < cfg.measurement_repeats; ++r) {
        out.measurement.clicks.push_back(simulate_clicks(imp, lq.labels, cfg.click, gt_rng));
        out.measurement.impressions.push_back(imp);
      }
    }
    return out;
  });
}

ImitationStage train_imitation_stage(const ExperimentConfig& cfg, const PreparedData& data,
                                     const Simulation& sim, const RunSeeds& seeds) {
  ImitationStage out;
  out.model = stage("train-ir", [&] {
    ImitationTrainConfig ic = cfg.imitation;
    ic.seed = seeds.at("ir");
    return train_imitation(sim.logged, ic, &data.splits.validate);
  });
  stage("score", [&] {
    const auto& test = data.splits.test;
    for (const auto& lq : test.queries) {
      std::vector<double> s(lq.num_docs());
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = mlp_forward(out.model.params, lq.row(i, test.dim));
      out.scores.emplace(lq.id, std::move(s));
    }
    return 0;
  });
  out.sigma = stage("infer-sigma", [&] { return infer_sigma(sim.logged, out.scores, cfg.sigma); });
  return out;
}

RunResult run_single(const ExperimentConfig& cfg, std::size_t run_index) {
  RunResult out;
  out.index = run_index;
  out.seeds = seeds_for_run(cfg.master_seed, run_index);
  const PreparedData data = prepare_data(cfg, out.seeds);
  const TrainedRankers rankers = train_rankers(cfg, data, out.seeds);
  const Simulation sim = simulate(cfg, data, rankers, out.seeds);

  const auto wants = [&](const char* name) {
    return std::find(cfg.estimators.begin(), cfg.estimators.end(), name) != cfg.estimators.end();
  };
  std::optional<ImitationStage> ir;
  if (wants("IR") || wants("IR(T)")) {
    ir = train_imitation_stage(cfg, data, sim, out.seeds);
    out.training = ir->model.report;
    out.sigma = ir->sigma;
  } else {
    out.training.validation_tau = std::numeric_limits<double>::quiet_NaN();
  }
  out.ranker_diff = rankers.diff;

  stage("estimate", [&] {
    const MeasurementIndex index(sim.measurement.impressions);
    const PropensityTable table = empirical_propensities(sim.logged);
    const TablePropensities empirical(table);
    std::optional<ParametricPropensities> parametric;
    if (ir) parametric.emplace(ir->scores, ir->sigma.sigma, cfg.sinkhorn);

    for (const Metric& metric : metrics_for(cfg)) {
      for (const auto& name : cfg.estimators) {
        EstimatorReport r;
        if (name == "GT") {
          r.estimator = "GT";
          r.metric = std::string(metric.name());
          r.value = ground_truth_value(sim.measurement, metric);
          r.matched_terms = sim.measurement.impressions.size();
          r.max_weight = 1.0;
          r.effective_sample_size = static_cast<double>(r.matched_terms);
        } else if (name == "Naive") {
          r = estimate_naive(sim.logged, index, metric);
        } else if (name == "List") {
          r = estimate_list_ipw(sim.logged, index, metric);
        } else if (name == "EP") {
          r = estimate_item_ipw(sim.logged, index, empirical, metric, kNoTruncation, "EP");
        } else if (name == "IR") {
          r = estimate_item_ipw(sim.logged, index, *parametric, metric, kNoTruncation, "IR");
        } else if (name == "IR(T)") {
          r = estimate_item_ipw(sim.logged, index, *parametric, metric, cfg.truncation, "IR(T)");
        } else {
          throw std::invalid_argument("unknown estimator '" + name + "'");
        }
        out.reports.push_back(std::move(r));
      }
    }
    return 0;
  });
  return out;
}

double ExperimentResult::mean_value(const std::string& estimator, const std::string& metric) const {
  for (const auto& r : mean) {
    if (r.estimator == estimator && r.metric == metric) return r.value;
  }
  throw std::out_of_range("no mean value for " + estimator + "/" + metric);
}

double ExperimentResult::run_value(std::size_t run, const std::string& estimator,
                                   const std::string& metric) const {
  for (const auto& r : runs.at(run).reports) {
    if (r.estimator == estimator && r.metric == metric) return r.value;
  }
  throw std::out_of_range("no value for " + estimator + "/" + metric);
}

ExperimentResult run_pipeline(const ExperimentConfig& cfg) {
  stage("config", [&] {
    cfg.validate();
    return 0;
  });
  ExperimentResult result;
  result.runs.resize(cfg.runs);
  std::vector<std::exception_ptr> errors(cfg.runs);

  const std::size_t workers = std::min(cfg.threads, cfg.runs);
  if (workers <= 1) {
    for (std::size_t r = 0; r < cfg.runs; ++r) result.runs[r] = run_single(cfg, r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < cfg.runs; r = next++) {
          try {
            result.runs[r] = run_single(cfg, r);
          } catch (...) {
            errors[r] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Means in report order of run 0; every run has the same layout.
  const auto& layout = result.runs.front().reports;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    EstimatorReport m;
    m.estimator = layout[i].estimator;
    m.metric = layout[i].metric;
    double value = 0.0, max_w = 0.0, ess = 0.0, matched = 0.0;
    for (const auto& run : result.runs) {
      const auto& r = run.reports[i];
      value += r.value;
      max_w += r.max_weight;
      ess += r.effective_sample_size;
      matched += static_cast<double>(r.matched_terms);
    }
    const double n = static_cast<double>(result.runs.size());
    m.value = value / n;
    m.max_weight = max_w / n;
    m.effective_sample_size = ess / n;
    m.matched_terms = static_cast<std::size_t>(matched / n + 0.5);
    result.mean.push_back(std::move(m));
  }
  return result;
}

void write_results_csv(const ExperimentResult& result, std::ostream& out) {
  out << "run," << kEstimatorCsvHeader << '\n';
  for (const auto& run : result.runs) {
    for (const auto& r : run.reports) out << run.index << ',' << to_csv_row(r) << '\n';
  }
  for (const auto& r : result.mean) out << "mean," << to_csv_row(r) << '\n';
}

void write_summary_csv(const ExperimentResult& result, std::ostream& out) {
  std::vector<std::string> estimators, metrics;
  for (const auto& r : result.mean) {
    if (std::find(estimators.begin(), estimators.end(), r.estimator) == estimators.end()) {
      estimators.push_back(r.estimator);
    }
    if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) metrics.push_back(r.metric);
  }
  out << "metric";
  for (const auto& e : estimators) out << ',' << e;
  out << '\n';
  for (const auto& m : metrics) {
    out << m;
    for (const auto& e : estimators) out << ',' << num(result.mean_value(e, m));
    out << '\n';
  }
}

void write_diagnostics_csv(const ExperimentResult& result, std::ostream& out) {
  out << "run,seed,sigma,logSigma,swapPercent,validationTau,finalLoss,rmse,mae,tau\n";
  for (const auto& run : result.runs) {
    const double loss = run.training.loss_curve.empty() ? 0.0 : run.training.loss_curve.back();
    out << run.index << ',' << run.seeds.run << ',' << num(run.sigma.sigma) << ','
        << num(run.sigma.log_sigma) << ',' << num(run.training.swap_percent) << ','
        << num(run.training.validation_tau) << ',' << num(loss) << ',' << num(run.ranker_diff.rmse)
        << ',' << num(run.ranker_diff.mae) << ',' << num(run.ranker_diff.kendall_tau) << '\n';
  }
}

const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes = {"t_pi", "C",    "eta",    "eps_minus",
                                                "B",    "size", "epochs", "objective"};
  return axes;
}

std::string sweep_axis_key(const std::string& axis) {
  static const std::map<std::string, std::string> keys = {
      {"t_pi", "ranker.t_pi"},   {"C", "ranker.C"},       {"eta", "click.eta"},
      {"eps_minus", "click.eps_minus"}, {"B", "swap.B"},  {"size", "ir.size"},
      {"epochs", "ir.epochs"},   {"objective", "ir.objective"}};
  auto it = keys.find(axis);
  if (it == keys.end()) throw std::invalid_argument("unknown sweep axis '" + axis + "'");
  return it->second;
}

SweepResult sweep(const ExperimentConfig& base, const std::string& axis,
                  const std::vector<std::string>& values) {
  const std::string key = sweep_axis_key(axis);
  if (values.empty()) throw std::invalid_argument("sweep over '" + axis + "' has no values");
  SweepResult out;
  out.axis = axis;
  out.estimators = base.estimators;
  for (const auto& v : values) {
    SweepCell cell;
    cell.value = v;
    try {
      ExperimentConfig cfg = base;
      set_config_value(cfg, key, v);
      cell.result = run_pipeline(cfg);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    out.cells.push_back(std::move(cell));
  }
  return out;
}

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  const char* metrics[] = {"NoC", "MRR"};
  out << result.axis << ",status";
  for (const char* m : metrics) {
    for (const auto& e : result.estimators) out << ',' << e << '_' << m;
  }
  out << '\n';
  for (const auto& cell : result.cells) {
    out << cell.value << ',' << (cell.result ? "ok" : "failed");
    for (const char* m : metrics) {
      for (const auto& e : result.estimators) {
        out << ',';
        if (cell.result) out << num(cell.result->mean_value(e, m));
      }
    }
    out << '\n';
  }
}

std::string manifest_json(const ExperimentConfig& cfg, const std::string& command,
                          const std::vector<std::size_t>& run_indices) {
  nlohmann::ordered_json j;
  j["schema"] = "rankprop-manifest";
  j["version"] = 1;
  j["command"] = command;
  j["simd"] = std::string(simd::backend_name(simd::active_backend()));
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config_entries(cfg)) config[k] = v;
  j["config"] = config;
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (std::size_t r : run_indices) {
    const RunSeeds s = seeds_for_run(cfg.master_seed, r);
    nlohmann::ordered_json run;
    run["run"] = r;
    run["seed"] = s.run;
    nlohmann::ordered_json stages = nlohmann::ordered_json::object();
    for (const auto& name : stage_names()) stages[name] = s.at(name);
    run["stages"] = stages;
    runs.push_back(run);
  }
  j["runs"] = runs;
  return j.dump(2) + "\n";
}

}  // namespace rankprop
