#pragma once

// End-to-end experiment runs: data -> logging/measurement rankers ->
// logged clicks -> imitation ranker -> sigma -> estimates vs. ground truth,
// averaged over seeded runs, plus one-axis sweeps.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rankprop/config.hpp"
#include "rankprop/estimators.hpp"

namespace rankprop {

class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Per-run seed = derive(masterSeed, run); per-stage seed = derive(runSeed, stage).
struct RunSeeds {
  std::uint64_t run = 0;
  std::map<std::string, std::uint64_t> stages;

  std::uint64_t at(const std::string& stage) const { return stages.at(stage); }
};

const std::vector<std::string>& stage_names();
RunSeeds seeds_for_run(std::uint64_t master_seed, std::size_t run_index);

// Individual stages, reused by the CLI subcommands.
struct PreparedData {
  PoolSplits splits;  // binarized labels
  std::size_t dropped_test_queries = 0;  // fewer than K candidates
};
PreparedData prepare_data(const ExperimentConfig& cfg, const RunSeeds& seeds);

struct TrainedRankers {
  LinearRankerParams pi;
  LinearRankerParams mu;
  RankerDiffReport diff;
};
TrainedRankers train_rankers(const ExperimentConfig& cfg, const PreparedData& data,
                             const RunSeeds& seeds);

struct Simulation {
  LoggedDataset logged;
  MeasurementSet measurement;
};
Simulation simulate(const ExperimentConfig& cfg, const PreparedData& data,
                    const TrainedRankers& rankers, const RunSeeds& seeds);

struct ImitationStage {
  ImitationResult model;
  ScoreTable scores;  // every test candidate
  SigmaEstimate sigma;
};
ImitationStage train_imitation_stage(const ExperimentConfig& cfg, const PreparedData& data,
                                     const Simulation& sim, const RunSeeds& seeds);

struct RunResult {
  std::size_t index = 0;
  RunSeeds seeds;
  std::vector<EstimatorReport> reports;  // GT first, per metric, in estimator order
  RankerDiffReport ranker_diff;
  TrainingReport training;
  SigmaEstimate sigma;
};

RunResult run_single(const ExperimentConfig& cfg, std::size_t run_index);

struct ExperimentResult {
  std::vector<RunResult> runs;
  std::vector<EstimatorReport> mean;  // arithmetic mean of per-run reports

  /// Mean value for (estimator, metric); throws std::out_of_range if absent.
  double mean_value(const std::string& estimator, const std::string& metric) const;
  double run_value(std::size_t run, const std::string& estimator, const std::string& metric) const;
};

/// Runs cfg.runs independent runs (up to cfg.threads at a time); results are
/// ordered by run index and do not depend on the thread count.
ExperimentResult run_pipeline(const ExperimentConfig& cfg);

void write_results_csv(const ExperimentResult& result, std::ostream& out);
void write_summary_csv(const ExperimentResult& result, std::ostream& out);
void write_diagnostics_csv(const ExperimentResult& result, std::ostream& out);

/// Sweep axes: t_pi, C, eta, eps_minus, B, size, epochs, objective.
const std::vector<std::string>& sweep_axes();
std::string sweep_axis_key(const std::string& axis);

struct SweepCell {
  std::string value;
  std::optional<ExperimentResult> result;
  std::string error;  // set when the cell failed
};

struct SweepResult {
  std::string axis;
  std::vector<SweepCell> cells;
  std::vector<std::string> estimators;
};

/// One run_pipeline per value; a failing cell is recorded, not thrown.
/// Throws std::invalid_argument for an unknown axis or an empty value list.
SweepResult sweep(const ExperimentConfig& base, const std::string& axis,
                  const std::vector<std::string>& values);

/// Rows = axis values; columns = status then <estimator>_<metric> means.
void write_sweep_csv(const SweepResult& result, std::ostream& out);

/// JSON manifest (schema "rankprop-manifest", version 1) with the resolved
/// config and per-run stage seeds.
std::string manifest_json(const ExperimentConfig& cfg, const std::string& command,
                          const std::vector<std::size_t>& run_indices);

}  // namespace rankprop
