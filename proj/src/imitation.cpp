#include "rankprop/imitation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "rankprop/random.hpp"
#include "rankprop/simd/kernels.hpp"

namespace rankprop {

MlpParams MlpParams::zeros(std::span<const std::size_t> dims) {
  if (dims.size() < 2 || dims.back() != 1) {
    throw std::invalid_argument("MLP needs at least an input and a scalar output layer");
  }
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] == 0) throw std::invalid_argument("MLP layer widths must be positive");
    p.layers.push_back(DenseLayer{dims[l], dims[l + 1],
                                  std::vector<double>(dims[l] * dims[l + 1], 0.0),
                                  std::vector<double>(dims[l + 1], 0.0)});
  }
  return p;
}

std::vector<std::size_t> MlpParams::dims() const {
  std::vector<std::size_t> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().in);
  for (const auto& l : layers) d.push_back(l.out);
  return d;
}

std::size_t MlpParams::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> out;
  out.reserve(num_params());
  for (const auto& l : layers) {
    out.insert(out.end(), l.weights.begin(), l.weights.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void MlpParams::assign_flat(std::span<const double> values) {
  if (values.size() != num_params()) throw std::invalid_argument("flat parameter size mismatch");
  std::size_t off = 0;
  for (auto& l : layers) {
    std::copy_n(values.begin() + off, l.weights.size(), l.weights.begin());
    off += l.weights.size();
    std::copy_n(values.begin() + off, l.bias.size(), l.bias.begin());
    off += l.bias.size();
  }
}

void MlpParams::add_scaled(double alpha, const MlpParams& other) {
  if (other.layers.size() != layers.size()) throw std::invalid_argument("MLP shape mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    simd::axpy(alpha, other.layers[i].weights, layers[i].weights);
    simd::axpy(alpha, other.layers[i].bias, layers[i].bias);
  }
}

namespace {

// Per-document forward activations; acts[l] is the output of layer l
// (tanh applied on hidden layers).
struct Trace {
  std::span<const double> input;
  std::vector<std::vector<double>> acts;
};

void forward(const MlpParams& p, std::span<const double> x, Trace& t) {
  if (x.size() != p.input_dim()) throw std::invalid_argument("feature dimension mismatch");
  t.input = x;
  t.acts.resize(p.layers.size());
  std::span<const double> in = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    auto& out = t.acts[l];
    out.resize(layer.out);
    simd::gemv(layer.weights, layer.out, layer.in, in, out);
    for (std::size_t i = 0; i < layer.out; ++i) out[i] += layer.bias[i];
    if (l + 1 < p.layers.size()) simd::tanh_inplace(out);
    in = out;
  }
}

void backward(const MlpParams& p, const Trace& t, double upstream, MlpParams& grad,
              std::vector<double>& delta, std::vector<double>& prev) {
  delta.assign(1, upstream);
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const auto& layer = p.layers[l];
    auto& g = grad.layers[l];
    std::span<const double> in = l == 0 ? t.input : std::span<const double>(t.acts[l - 1]);
    simd::axpy(1.0, delta, g.bias);
    simd::ger(1.0, delta, in, g.weights);
    if (l == 0) break;
    prev.assign(layer.in, 0.0);
    simd::gemv_transposed_acc(layer.weights, layer.out, layer.in, delta, prev);
    const auto& a = t.acts[l - 1];
    for (std::size_t i = 0; i < layer.in; ++i) prev[i] *= 1.0 - a[i] * a[i];
    std::swap(delta, prev);
  }
}

double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// Loss and dL/ds for one impression's scores in logged order.
double impression_loss(Objective obj, std::span<const double> s, std::span<double> ds) {
  const std::size_t k = s.size();
  double loss = 0.0;
  std::fill(ds.begin(), ds.end(), 0.0);
  if (obj == Objective::kPairwise) {
    for (std::size_t i = 0; i + 1 < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        // softplus(-diff) and sigmoid(-diff) from one exponential
        const double diff = s[i] - s[j];
        const double e = std::exp(-std::abs(diff));
        loss += std::max(-diff, 0.0) + std::log1p(e);
        const double g = diff >= 0.0 ? e / (1.0 + e) : 1.0 / (1.0 + e);
        ds[i] -= g;
        ds[j] += g;
      }
    }
    return loss;
  }
  // ListMLE: suffix log-sum-exp in logged order.
  std::vector<double> lse(k);
  lse[k - 1] = s[k - 1];
  for (std::size_t i = k - 1; i-- > 0;) lse[i] = log_add_exp(s[i], lse[i + 1]);
  for (std::size_t i = 0; i < k; ++i) {
    loss += lse[i] - s[i];
    ds[i] -= 1.0;
    for (std::size_t j = i; j < k; ++j) ds[j] += std::exp(s[j] - lse[i]);
  }
  return loss;
}

// Loss over the selected records; every distinct (query, doc) row is
// forwarded and backpropagated once, with its dL/ds summed over the batch
// (backprop is linear in the upstream gradient). Slots follow first
// appearance, so the reduction order is fixed.
class BatchEvaluator {
 public:
  BatchEvaluator(const MlpParams& params, const FeatureStore& features)
      : params_(params), features_(features) {}

  template <typename RecordAt>
  double run(std::size_t count, RecordAt&& record_at, Objective obj, MlpParams* grad) {
    slot_of_.clear();
    used_ = 0;
    imp_slots_.clear();
    imp_offsets_.assign(1, 0);
    for (std::size_t r = 0; r < count; ++r) {
      const LoggedRecord& rec = record_at(r);
      for (DocId d : rec.impression.docs) {
        auto row = features_.row(rec.impression.query, d);
        auto [it, inserted] = slot_of_.try_emplace(row.data(), used_);
        if (inserted) {
          if (traces_.size() <= used_) traces_.emplace_back();
          forward(params_, row, traces_[used_]);
          ++used_;
        }
        imp_slots_.push_back(it->second);
      }
      imp_offsets_.push_back(imp_slots_.size());
    }
    upstream_.assign(used_, 0.0);
    double loss = 0.0;
    for (std::size_t r = 0; r + 1 < imp_offsets_.size(); ++r) {
      const std::size_t b = imp_offsets_[r], e = imp_offsets_[r + 1];
      scores_.resize(e - b);
      ds_.resize(e - b);
      for (std::size_t i = b; i < e; ++i) scores_[i - b] = traces_[imp_slots_[i]].acts.back()[0];
      if (e - b == 0) continue;
      loss += impression_loss(obj, scores_, ds_);
      for (std::size_t i = b; i < e; ++i) upstream_[imp_slots_[i]] += ds_[i - b];
    }
    if (grad) {
      for (std::size_t slot = 0; slot < used_; ++slot) {
        if (upstream_[slot] != 0.0) backward(params_, traces_[slot], upstream_[slot], *grad, delta_, prev_);
      }
    }
    return loss;
  }

 private:
  const MlpParams& params_;
  const FeatureStore& features_;
  std::unordered_map<const double*, std::size_t> slot_of_;
  std::vector<Trace> traces_;
  std::size_t used_ = 0;
  std::vector<std::size_t> imp_slots_, imp_offsets_;
  std::vector<double> upstream_, scores_, ds_, delta_, prev_;
};

LossGrad loss_grad(const MlpParams& params, std::span<const LoggedRecord> batch,
                   const FeatureStore& features, Objective obj) {
  LossGrad out{0.0, MlpParams::zeros(params.dims())};
  BatchEvaluator eval(params, features);
  out.loss = eval.run(batch.size(), [&](std::size_t i) -> const LoggedRecord& { return batch[i]; },
                      obj, &out.grad);
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

double mlp_forward(const MlpParams& params, std::span<const double> x) {
  Trace t;
  forward(params, x, t);
  return t.acts.back()[0];
}

std::string_view objective_name(Objective o) {
  return o == Objective::kPairwise ? "pairwise" : "listmle";
}

Objective parse_objective(std::string_view s) {
  if (s == "pairwise") return Objective::kPairwise;
  if (s == "listmle") return Objective::kListMle;
  throw std::invalid_argument("unknown objective '" + std::string(s) + "'");
}

std::string_view model_size_name(ModelSize s) {
  switch (s) {
    case ModelSize::kSmall: return "small";
    case ModelSize::kMedium: return "medium";
    case ModelSize::kBig: return "big";
  }
  return "medium";
}

ModelSize parse_model_size(std::string_view s) {
  if (s == "small") return ModelSize::kSmall;
  if (s == "medium") return ModelSize::kMedium;
  if (s == "big") return ModelSize::kBig;
  throw std::invalid_argument("unknown model size '" + std::string(s) + "'");
}

std::vector<std::size_t> architecture(ModelSize size, std::size_t input_dim) {
  switch (size) {
    case ModelSize::kSmall: return {input_dim, 1};
    case ModelSize::kMedium: return {input_dim, 32, 1};
    case ModelSize::kBig: return {input_dim, 128, 32, 1};
  }
  return {input_dim, 32, 1};
}

MlpParams init_mlp(std::span<const std::size_t> dims, std::uint64_t seed) {
  MlpParams p = MlpParams::zeros(dims);
  Rng rng = make_rng(seed);
  for (auto& l : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& w : l.weights) w = u(rng);
  }
  return p;
}

LossGrad pairwise_loss_grad(const MlpParams& params, std::span<const LoggedRecord> batch,
                            const FeatureStore& features) {
  return loss_grad(params, batch, features, Objective::kPairwise);
}

LossGrad listmle_loss_grad(const MlpParams& params, std::span<const LoggedRecord> batch,
                           const FeatureStore& features) {
  return loss_grad(params, batch, features, Objective::kListMle);
}

void ImitationTrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("imitation epochs must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("imitation learning rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("imitation batch size must be positive");
}

ImitationResult train_imitation(const LoggedDataset& ds, const ImitationTrainConfig& cfg,
                                const LabeledPool* validation) {
  cfg.validate();
  if (ds.records.empty()) throw std::invalid_argument("cannot train an imitation ranker on an empty dataset");
  const auto dims = architecture(cfg.size, ds.features.dim());
  ImitationResult result{init_mlp(dims, derive_seed(cfg.seed, "init")), {}};
  MlpParams& params = result.params;
  MlpParams grad = MlpParams::zeros(dims);

  std::vector<std::size_t> order(ds.records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = make_rng(derive_seed(cfg.seed, "shuffle"));
  BatchEvaluator eval(params, ds.features);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - begin);
      for (auto& l : grad.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
      }
      epoch_loss += eval.run(
          count, [&](std::size_t i) -> const LoggedRecord& { return ds.records[order[begin + i]]; },
          cfg.objective, &grad);
      params.add_scaled(-cfg.learning_rate / static_cast<double>(count), grad);
    }
    result.report.loss_curve.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  result.report.swap_percent = swap_percent(params, ds);
  result.report.validation_tau = validation ? validation_tau(params, *validation)
                                            : std::numeric_limits<double>::quiet_NaN();
  return result;
}

double swap_percent(const MlpParams& params, const LoggedDataset& ds) {
  std::unordered_map<const double*, double> cache;
  std::size_t pairs = 0, swapped = 0;
  std::vector<double> s;
  for (const auto& rec : ds.records) {
    s.clear();
    for (DocId d : rec.impression.docs) {
      auto row = ds.features.row(rec.impression.query, d);
      auto it = cache.find(row.data());
      if (it == cache.end()) it = cache.emplace(row.data(), mlp_forward(params, row)).first;
      s.push_back(it->second);
    }
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        ++pairs;
        swapped += s[i] <= s[j];
      }
    }
  }
  if (pairs == 0) throw std::invalid_argument("swap_percent: dataset has no logged pairs");
  return 100.0 * static_cast<double>(swapped) / static_cast<double>(pairs);
}

double validation_tau(const MlpParams& params, const LabeledPool& pool) {
  if (pool.queries.empty()) throw std::invalid_argument("validation_tau: empty pool");
  double sum = 0.0;
  std::size_t n = 0;
  std::vector<double> scores, labels;
  for (const auto& lq : pool.queries) {
    if (lq.num_docs() < 2) continue;
    scores.resize(lq.num_docs());
    labels.resize(lq.num_docs());
    for (std::size_t i = 0; i < lq.num_docs(); ++i) {
      scores[i] = mlp_forward(params, lq.row(i, pool.dim));
      labels[i] = lq.labels[i];
    }
    const double tau = kendall_tau(scores, labels);
    if (!std::isnan(tau)) {
      sum += tau;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

void write_mlp(const MlpParams& params, std::ostream& out) {
  out << "format=rankprop-mlp\nversion=1\nactivation=tanh\ndims=";
  const auto d = params.dims();
  for (std::size_t i = 0; i < d.size(); ++i) out << (i ? " " : "") << d[i];
  out << '\n';
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    out << 'W' << l << '=';
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      out << (i ? " " : "") << format_double(layer.weights[i]);
    }
    out << "\nb" << l << '=';
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      out << (i ? " " : "") << format_double(layer.bias[i]);
    }
    out << '\n';
  }
}

MlpParams read_mlp(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("mlp: malformed line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (kv["format"] != "rankprop-mlp" || kv["version"] != "1" || kv["activation"] != "tanh") {
    throw std::runtime_error("mlp: unsupported format, version or activation");
  }
  std::vector<std::size_t> dims;
  {
    std::istringstream ds(kv["dims"]);
    std::size_t v;
    while (ds >> v) dims.push_back(v);
  }
  MlpParams p = MlpParams::zeros(dims);
  auto read_values = [&](const std::string& key, std::vector<double>& dst) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("mlp: missing " + key);
    std::istringstream vs(it->second);
    std::string tok;
    std::size_t i = 0;
    while (vs >> tok) {
      if (i >= dst.size()) throw std::runtime_error("mlp: too many values in " + key);
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), dst[i]);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw std::runtime_error("mlp: bad value in " + key + ": " + tok);
      }
      ++i;
    }
    if (i != dst.size()) throw std::runtime_error("mlp: too few values in " + key);
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    read_values("W" + std::to_string(l), p.layers[l].weights);
    read_values("b" + std::to_string(l), p.layers[l].bias);
  }
  return p;
}

}  // namespace rankprop
