#include "rankprop/rankers.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "rankprop/random.hpp"
#include "rankprop/simd/kernels.hpp"

namespace rankprop {

double LinearRankerParams::score(std::span<const double> x) const {
  return simd::dot(weights, x);
}

namespace {

struct PairSet {
  const LabeledQuery* query;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // (higher, lower)
};

std::vector<PairSet> collect_pairs(const LabeledPool& pool,
                                   std::span<const std::size_t> query_indices) {
  std::vector<PairSet> out;
  for (auto qi : query_indices) {
    const auto& lq = pool.queries[qi];
    PairSet ps{&lq, {}};
    for (std::uint32_t d = 0; d < lq.num_docs(); ++d) {
      for (std::uint32_t z = 0; z < lq.num_docs(); ++z) {
        if (lq.labels[d] > lq.labels[z]) ps.pairs.emplace_back(d, z);
      }
    }
    if (!ps.pairs.empty()) out.push_back(std::move(ps));
  }
  return out;
}

// Objective value at w; writes the hinge subgradient of the data term
// (sum of coefficient * x) into data_grad.
double objective_and_grad(const std::vector<PairSet>& sets, std::size_t dim,
                          std::span<const double> w, double c, std::vector<double>& data_grad) {
  std::fill(data_grad.begin(), data_grad.end(), 0.0);
  double hinge = 0.0;
  std::vector<double> scores, coef;
  for (const auto& ps : sets) {
    const auto& lq = *ps.query;
    const std::size_t n = lq.num_docs();
    scores.resize(n);
    coef.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) scores[i] = simd::dot(w, lq.row(i, dim));
    for (auto [d, z] : ps.pairs) {
      const double margin = scores[d] - scores[z];
      if (margin < 1.0) {
        hinge += 1.0 - margin;
        coef[d] += 1.0;
        coef[z] -= 1.0;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (coef[i] != 0.0) simd::axpy(coef[i], lq.row(i, dim), data_grad);
    }
  }
  return 0.5 * simd::dot(w, w) + c * hinge;
}

}  // namespace

LinearRankerParams train_linear_ranker(const LabeledPool& pool, double c, double fraction,
                                       std::uint64_t seed, const LinearRankerOptions& options) {
  if (!(c > 0.0)) throw std::invalid_argument("ranker C must be positive");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("ranker training fraction must lie in (0,1]");
  }
  if (options.epochs == 0) throw std::invalid_argument("ranker epochs must be positive");
  const std::size_t n = pool.queries.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto take = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n);
  idx.resize(take);
  std::sort(idx.begin(), idx.end());

  const auto sets = collect_pairs(pool, idx);
  if (sets.empty()) throw std::invalid_argument("no valid training pairs in the sampled queries");

  const std::size_t dim = pool.dim;
  std::vector<double> w(dim, 0.0), data_grad(dim), best_w(dim, 0.0);
  double best = objective_and_grad(sets, dim, w, c, data_grad);
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const double obj = objective_and_grad(sets, dim, w, c, data_grad);
    if (obj < best) {
      best = obj;
      best_w = w;
    }
    // subgradient: w - C * data_grad
    const double step = options.learning_rate / std::sqrt(static_cast<double>(epoch));
    for (std::size_t f = 0; f < dim; ++f) w[f] -= step * (w[f] - c * data_grad[f]);
  }
  if (objective_and_grad(sets, dim, w, c, data_grad) < best) best_w = w;

  return LinearRankerParams{std::move(best_w), c, fraction, seed};
}

double linear_ranker_objective(const LabeledPool& pool, std::span<const double> w, double c) {
  std::vector<std::size_t> idx(pool.queries.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto sets = collect_pairs(pool, idx);
  std::vector<double> g(pool.dim);
  return objective_and_grad(sets, pool.dim, w, c, g);
}

Impression rank_top_k(const LinearRankerParams& params, const QueryId& query,
                      std::span<const double> candidates, std::size_t dim, std::size_t k) {
  if (dim == 0 || candidates.size() % dim != 0) {
    throw std::invalid_argument("candidate matrix does not match the feature dimension");
  }
  const std::size_t n = candidates.size() / dim;
  if (n < k) throw std::invalid_argument("fewer candidates than K for query '" + query.value + "'");
  std::vector<std::pair<double, std::uint32_t>> scored(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    scored[i] = {params.score(candidates.subspan(i * dim, dim)), i};
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  Impression imp{query, {}};
  imp.docs.reserve(k);
  for (std::size_t i = 0; i < k; ++i) imp.docs.emplace_back(scored[i].second);
  return imp;
}

RankerDiffReport compare_rankers(const LinearRankerParams& pi, const LinearRankerParams& mu,
                                 const LabeledPool& validation) {
  if (pi.weights.size() != mu.weights.size() || pi.weights.size() != validation.dim) {
    throw std::invalid_argument("rankers and pool disagree on the feature dimension");
  }
  double sq = 0.0, abs_sum = 0.0, tau_sum = 0.0;
  std::size_t count = 0, tau_count = 0;
  std::vector<double> a, b;
  for (const auto& lq : validation.queries) {
    const std::size_t n = lq.num_docs();
    a.resize(n);
    b.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = pi.score(lq.row(i, validation.dim));
      b[i] = mu.score(lq.row(i, validation.dim));
      const double diff = a[i] - b[i];
      sq += diff * diff;
      abs_sum += std::abs(diff);
      ++count;
    }
    if (n >= 2) {
      const double tau = kendall_tau(a, b);
      if (!std::isnan(tau)) {
        tau_sum += tau;
        ++tau_count;
      }
    }
  }
  if (count == 0) throw std::invalid_argument("empty validation pool");
  RankerDiffReport r;
  r.rmse = std::sqrt(sq / static_cast<double>(count));
  r.mae = abs_sum / static_cast<double>(count);
  r.kendall_tau = tau_count ? tau_sum / static_cast<double>(tau_count) : 0.0;
  return r;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& s, const std::string& key) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("linear ranker: bad value for '" + key + "': " + s);
  }
  return v;
}

}  // namespace

// Format: "key=value" lines; weights are space separated, shortest
// round-trip decimal.
void write_linear_ranker(const LinearRankerParams& params, std::ostream& out) {
  out << "format=rankprop-linear-ranker\n";
  out << "version=1\n";
  out << "dim=" << params.weights.size() << '\n';
  out << "C=" << format_double(params.c) << '\n';
  out << "t=" << format_double(params.fraction) << '\n';
  out << "seed=" << params.seed << '\n';
  out << "weights=";
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    if (i) out << ' ';
    out << format_double(params.weights[i]);
  }
  out << '\n';
}

LinearRankerParams read_linear_ranker(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("linear ranker: malformed line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"format", "version", "dim", "C", "t", "seed", "weights"}) {
    if (!kv.count(key)) throw std::runtime_error(std::string("linear ranker: missing key ") + key);
  }
  if (kv["format"] != "rankprop-linear-ranker" || kv["version"] != "1") {
    throw std::runtime_error("linear ranker: unsupported format/version");
  }
  LinearRankerParams p;
  p.c = parse_double(kv["C"], "C");
  p.fraction = parse_double(kv["t"], "t");
  p.seed = std::stoull(kv["seed"]);
  const auto dim = std::stoull(kv["dim"]);
  std::istringstream ws(kv["weights"]);
  std::string tok;
  while (ws >> tok) p.weights.push_back(parse_double(tok, "weights"));
  if (p.weights.size() != dim) throw std::runtime_error("linear ranker: dim does not match weights");
  return p;
}

}  // namespace rankprop
