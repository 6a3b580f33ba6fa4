#pragma once

// Experiment configuration: a flat "dotted.key=value" text format. Unknown
// keys are errors; '#' starts a comment line.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rankprop/clicks.hpp"
#include "rankprop/data.hpp"
#include "rankprop/imitation.hpp"
#include "rankprop/rankdist.hpp"
#include "rankprop/rankers.hpp"

namespace rankprop {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  // data
  std::string data_source = "synthetic";  // synthetic | letor
  std::string letor_train, letor_validate, letor_test;
  int label_threshold = 3;
  SyntheticConfig synthetic;
  SplitSpec split;
  std::size_t k = 10;

  // rankers
  double t_pi = 0.5;
  double t_mu = 0.5;
  double c = 0.1;
  LinearRankerOptions ranker;
  bool shared_ranker_seed = false;

  // logging and measurement
  ClickModelConfig click;
  SwapConfig swap;
  std::size_t observation_count = 5000;
  std::size_t measurement_repeats = 1;

  // imitation ranker and propensities
  ImitationTrainConfig imitation;
  SigmaSearch sigma;
  SinkhornOptions sinkhorn;

  // estimation
  double truncation = 100.0;
  std::vector<std::string> estimators = {"GT", "Naive", "List", "EP", "IR", "IR(T)"};
  bool mrr_normalized = true;

  // harness
  std::size_t runs = 5;
  std::uint64_t master_seed = 1;
  std::size_t threads = 1;

  void validate() const;
};

/// Names accepted in the estimator list.
const std::vector<std::string>& known_estimators();

/// Applies one "key=value" setting; throws ConfigError for unknown keys or
/// malformed values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Every key with its current value, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg);

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
void write_config(const ExperimentConfig& cfg, std::ostream& out);

}  // namespace rankprop
