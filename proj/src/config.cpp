#include "rankprop/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

namespace rankprop {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define RP_DOUBLE(KEY, MEMBER)                                                               \
  Field {                                                                                    \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_double(KEY, v); },   \
        [](const ExperimentConfig& c) { return fmt(c.MEMBER); }                              \
  }
#define RP_SIZE(KEY, MEMBER)                                                                          \
  Field {                                                                                             \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_int<std::size_t>(KEY, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }                            \
  }
#define RP_STRING(KEY, MEMBER)                                                 \
  Field {                                                                      \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = v; },      \
        [](const ExperimentConfig& c) { return c.MEMBER; }                     \
  }
#define RP_BOOL(KEY, MEMBER)                                                               \
  Field {                                                                                  \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_bool(KEY, v); },   \
        [](const ExperimentConfig& c) { return std::string(c.MEMBER ? "true" : "false"); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      RP_STRING("data.source", data_source),
      RP_STRING("data.train", letor_train),
      RP_STRING("data.validate", letor_validate),
      RP_STRING("data.test", letor_test),
      Field{"data.label_threshold",
            [](ExperimentConfig& c, const std::string& v) {
              c.label_threshold = to_int<int>("data.label_threshold", v);
            },
            [](const ExperimentConfig& c) { return std::to_string(c.label_threshold); }},
      RP_SIZE("synthetic.queries", synthetic.num_queries),
      RP_SIZE("synthetic.candidates", synthetic.candidates_per_query),
      RP_SIZE("synthetic.features", synthetic.feature_dim),
      RP_SIZE("synthetic.hidden", synthetic.hidden_dim),
      RP_SIZE("synthetic.latent_width", synthetic.latent_width),
      RP_DOUBLE("synthetic.nonlinearity", synthetic.nonlinearity),
      RP_DOUBLE("synthetic.noise", synthetic.relevance_noise),
      RP_DOUBLE("split.train", split.train),
      RP_DOUBLE("split.validate", split.validate),
      RP_DOUBLE("split.test", split.test),
      RP_SIZE("k", k),
      RP_DOUBLE("ranker.t_pi", t_pi),
      RP_DOUBLE("ranker.t_mu", t_mu),
      RP_DOUBLE("ranker.C", c),
      RP_SIZE("ranker.epochs", ranker.epochs),
      RP_DOUBLE("ranker.lr", ranker.learning_rate),
      RP_BOOL("ranker.shared_seed", shared_ranker_seed),
      RP_DOUBLE("click.eta", click.eta),
      RP_DOUBLE("click.eps_plus", click.eps_plus),
      RP_DOUBLE("click.eps_minus", click.eps_minus),
      RP_DOUBLE("swap.B", swap.percent),
      RP_SIZE("observation.count", observation_count),
      RP_SIZE("measurement.repeats", measurement_repeats),
      Field{"ir.objective",
            [](ExperimentConfig& c, const std::string& v) {
              try {
                c.imitation.objective = parse_objective(v);
              } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("config key 'ir.objective': ") + e.what());
              }
            },
            [](const ExperimentConfig& c) { return std::string(objective_name(c.imitation.objective)); }},
      Field{"ir.size",
            [](ExperimentConfig& c, const std::string& v) {
              try {
                c.imitation.size = parse_model_size(v);
              } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("config key 'ir.size': ") + e.what());
              }
            },
            [](const ExperimentConfig& c) { return std::string(model_size_name(c.imitation.size)); }},
      RP_SIZE("ir.epochs", imitation.epochs),
      RP_DOUBLE("ir.lr", imitation.learning_rate),
      RP_SIZE("ir.batch", imitation.batch_size),
      RP_DOUBLE("sigma.log_lo", sigma.log_lo),
      RP_DOUBLE("sigma.log_hi", sigma.log_hi),
      RP_SIZE("sigma.grid", sigma.grid_points),
      RP_DOUBLE("sigma.tol", sigma.tolerance),
      RP_DOUBLE("sinkhorn.tol", sinkhorn.tolerance),
      RP_SIZE("sinkhorn.max_iter", sinkhorn.max_iterations),
      RP_DOUBLE("sinkhorn.floor", sinkhorn.floor),
      RP_SIZE("sinkhorn.newton_after", sinkhorn.newton_after),
      RP_DOUBLE("estimators.truncation", truncation),
      Field{"estimators.list",
            [](ExperimentConfig& c, const std::string& v) {
              std::vector<std::string> names;
              std::stringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ',')) {
                item = trim(item);
                if (item.empty()) continue;
                const auto& known = known_estimators();
                if (std::find(known.begin(), known.end(), item) == known.end()) {
                  throw ConfigError("config key 'estimators.list': unknown estimator '" + item + "'");
                }
                names.push_back(item);
              }
              c.estimators = std::move(names);
            },
            [](const ExperimentConfig& c) {
              std::string out;
              for (std::size_t i = 0; i < c.estimators.size(); ++i) {
                out += (i ? "," : "") + c.estimators[i];
              }
              return out;
            }},
      RP_BOOL("metric.mrr_normalize", mrr_normalized),
      RP_SIZE("runs", runs),
      Field{"seed",
            [](ExperimentConfig& c, const std::string& v) {
              c.master_seed = to_int<std::uint64_t>("seed", v);
            },
            [](const ExperimentConfig& c) { return std::to_string(c.master_seed); }},
      RP_SIZE("threads", threads),
  };
  return table;
}

#undef RP_DOUBLE
#undef RP_SIZE
#undef RP_STRING
#undef RP_BOOL

}  // namespace

const std::vector<std::string>& known_estimators() {
  static const std::vector<std::string> names = {"GT", "Naive", "List", "EP", "IR", "IR(T)"};
  return names;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
  if (data_source != "synthetic" && data_source != "letor") fail("data.source must be synthetic or letor");
  if (data_source == "letor" && (letor_train.empty() || letor_validate.empty() || letor_test.empty())) {
    fail("data.source=letor needs data.train, data.validate and data.test");
  }
  if (k == 0) fail("k must be positive");
  if (runs == 0) fail("runs must be >= 1");
  if (threads == 0) fail("threads must be >= 1");
  if (observation_count == 0) fail("observation.count must be positive");
  if (measurement_repeats == 0) fail("measurement.repeats must be positive");
  if (!(t_pi > 0.0 && t_pi <= 1.0) || !(t_mu > 0.0 && t_mu <= 1.0)) fail("ranker fractions must lie in (0,1]");
  if (!(c > 0.0)) fail("ranker.C must be positive");
  if (ranker.epochs == 0) fail("ranker.epochs must be positive");
  if (!(truncation > 0.0)) fail("estimators.truncation must be positive (inf disables it)");
  if (estimators.empty()) fail("estimators.list is empty");
  try {
    if (data_source == "synthetic") synthetic.validate(k);
    click.validate();
    swap.validate();
    imitation.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (swap.percent > 0.0 && k < 2) fail("swaps need k >= 2");
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    try {
      set_config_value(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

void write_config(const ExperimentConfig& cfg, std::ostream& out) {
  for (const auto& [k, v] : config_entries(cfg)) out << k << '=' << v << '\n';
}

}  // namespace rankprop
