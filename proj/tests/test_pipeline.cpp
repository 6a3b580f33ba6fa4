#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rankprop/pipeline.hpp"

using namespace rankprop;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  for (auto [k, v] : std::vector<std::pair<std::string, std::string>>{
           {"synthetic.queries", "200"},
           {"observation.count", "800"},
           {"ir.epochs", "4"},
           {"ranker.epochs", "50"},
           {"runs", "3"},
           {"seed", "11"}}) {
    set_config_value(cfg, k, v);
  }
  return cfg;
}

std::string results_csv(const ExperimentResult& r) {
  std::ostringstream out;
  write_results_csv(r, out);
  write_summary_csv(r, out);
  write_diagnostics_csv(r, out);
  return out.str();
}

}  // namespace

TEST(Seeds, LadderIsStableAndDistinct) {
  const auto a = seeds_for_run(1, 0), b = seeds_for_run(1, 1);
  EXPECT_EQ(a.run, seeds_for_run(1, 0).run);
  EXPECT_NE(a.run, b.run);
  std::set<std::uint64_t> all;
  for (const auto& name : stage_names()) all.insert(a.at(name));
  EXPECT_EQ(all.size(), stage_names().size());
  EXPECT_THROW(a.at("nope"), std::out_of_range);
}

TEST(Pipeline, ResultSchema) {
  const auto cfg = small_config();
  const auto res = run_pipeline(cfg);
  ASSERT_EQ(res.runs.size(), 3u);
  for (const char* metric : {"NoC", "MRR"}) {
    for (const char* est : {"GT", "Naive", "List", "EP", "IR", "IR(T)"}) {
      EXPECT_NO_THROW(res.mean_value(est, metric)) << est << metric;
    }
  }
  EXPECT_EQ(res.mean.size(), 12u);
  const auto csv = results_csv(res);
  EXPECT_EQ(csv.rfind("run,estimator,metric,value,matchedTerms,maxWeight,ess\n", 0), 0u);
  EXPECT_NE(csv.find("metric,GT,Naive,List,EP,IR,IR(T)\n"), std::string::npos);
  EXPECT_NE(csv.find("run,seed,sigma,logSigma,swapPercent,validationTau,finalLoss,rmse,mae,tau\n"),
            std::string::npos);
  for (const auto& run : res.runs) {
    EXPECT_GE(run.sigma.log_sigma, cfg.sigma.log_lo);
    EXPECT_LE(run.sigma.log_sigma, cfg.sigma.log_hi);
    EXPECT_EQ(run.training.loss_curve.size(), 4u);
  }
}

TEST(Pipeline, MeansAreArithmeticMeans) {
  const auto res = run_pipeline(small_config());
  for (const auto& m : res.mean) {
    double s = 0.0;
    for (std::size_t r = 0; r < res.runs.size(); ++r) s += res.run_value(r, m.estimator, m.metric);
    const double expect = s / static_cast<double>(res.runs.size());
    EXPECT_NEAR(m.value, expect, 1e-12 * std::max(1.0, std::abs(expect))) << m.estimator;
  }
}

TEST(Pipeline, DeterministicAndThreadInvariant) {
  auto cfg = small_config();
  const auto first = results_csv(run_pipeline(cfg));
  EXPECT_EQ(results_csv(run_pipeline(cfg)), first);
  cfg.threads = 3;
  EXPECT_EQ(results_csv(run_pipeline(cfg)), first);
}

TEST(Pipeline, MasterSeedChangesValuesNotSchema) {
  auto cfg = small_config();
  const auto a = run_pipeline(cfg);
  cfg.master_seed = 12;
  const auto b = run_pipeline(cfg);
  ASSERT_EQ(a.mean.size(), b.mean.size());
  for (std::size_t i = 0; i < a.mean.size(); ++i) {
    EXPECT_EQ(a.mean[i].estimator, b.mean[i].estimator);
    EXPECT_EQ(a.mean[i].metric, b.mean[i].metric);
  }
  EXPECT_NE(a.mean_value("GT", "NoC"), b.mean_value("GT", "NoC"));
}

TEST(Pipeline, IdenticalRankersMakeEmpiricalIpwMatchLoggedMean) {
  auto cfg = small_config();
  cfg.shared_ranker_seed = true;
  const auto seeds = seeds_for_run(cfg.master_seed, 0);
  const auto data = prepare_data(cfg, seeds);
  const auto rankers = train_rankers(cfg, data, seeds);
  ASSERT_EQ(rankers.pi.weights, rankers.mu.weights);
  EXPECT_EQ(rankers.diff.rmse, 0.0);
  const auto sim = simulate(cfg, data, rankers, seeds);

  const MeasurementIndex index(sim.measurement.impressions);
  const auto table = empirical_propensities(sim.logged);
  const auto ep = estimate_item_ipw(sim.logged, index, TablePropensities(table), kNoC);
  double sum = 0.0, sq = 0.0;
  for (const auto& rec : sim.logged.records) {
    const double m = impression_metric(rec.clicks, kNoC);
    sum += m;
    sq += m * m;
  }
  const double n = static_cast<double>(sim.logged.records.size());
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_LE(std::abs(ep.value - mean), 3.0 * se);
  EXPECT_EQ(ep.max_weight, 1.0);
}

TEST(Pipeline, StageErrorsNameTheStage) {
  auto cfg = small_config();
  cfg.runs = 0;
  try {
    run_pipeline(cfg);
    FAIL() << "expected PipelineError";
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
  cfg = small_config();
  cfg.data_source = "letor";
  cfg.letor_train = cfg.letor_validate = cfg.letor_test = "/nonexistent.txt";
  try {
    run_pipeline(cfg);
    FAIL() << "expected PipelineError";
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "prepare-data");
  }
}

TEST(Sweep, TableShapeAndErrors) {
  auto cfg = small_config();
  cfg.runs = 1;
  cfg.estimators = {"GT", "EP"};
  const auto res = sweep(cfg, "B", {"0", "100", "150"});
  ASSERT_EQ(res.cells.size(), 3u);
  EXPECT_TRUE(res.cells[0].result.has_value());
  EXPECT_TRUE(res.cells[1].result.has_value());
  EXPECT_FALSE(res.cells[2].result.has_value());
  EXPECT_FALSE(res.cells[2].error.empty());
  std::ostringstream out;
  write_sweep_csv(res, out);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header, "B,status,GT_NoC,EP_NoC,GT_MRR,EP_MRR");
  std::size_t rows = 0;
  while (std::getline(in, row)) ++rows;
  EXPECT_EQ(rows, 3u);
  EXPECT_NE(out.str().find("150,failed"), std::string::npos);

  EXPECT_THROW(sweep(cfg, "B", {}), std::invalid_argument);
  EXPECT_THROW(sweep(cfg, "colour", {"1"}), std::invalid_argument);
  for (const auto& axis : sweep_axes()) EXPECT_NO_THROW(sweep_axis_key(axis));
  EXPECT_EQ(sweep_axis_key("eta"), "click.eta");
}

TEST(Manifest, SchemaAndSeeds) {
  const auto cfg = small_config();
  const auto j = nlohmann::json::parse(manifest_json(cfg, "evaluate", {0, 1}));
  EXPECT_EQ(j["schema"], "rankprop-manifest");
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["command"], "evaluate");
  EXPECT_EQ(j["config"]["synthetic.queries"], "200");
  ASSERT_EQ(j["runs"].size(), 2u);
  const auto seeds = seeds_for_run(cfg.master_seed, 1);
  EXPECT_EQ(j["runs"][1]["seed"].get<std::uint64_t>(), seeds.run);
  EXPECT_EQ(j["runs"][1]["stages"]["click.log"].get<std::uint64_t>(), seeds.at("click.log"));
}
