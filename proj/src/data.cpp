#include "rankprop/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string_view>

#include "rankprop/random.hpp"

namespace rankprop {

const LabeledQuery* LabeledPool::find(const QueryId& q) const {
  for (const auto& lq : queries) {
    if (lq.id == q) return &lq;
  }
  return nullptr;
}

FeatureStore LabeledPool::feature_store() const {
  FeatureStore store(dim);
  for (const auto& lq : queries) store.set_query(lq.id, lq.features);
  return store;
}

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;  // from_chars rejects a leading '+'
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

LabeledPool parse_letor(std::istream& in) {
  struct PendingDoc {
    int label;
    std::vector<std::pair<std::size_t, double>> sparse;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<PendingDoc>> by_query;
  std::size_t dim = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    auto tokens = split_ws(view);
    if (tokens.empty()) continue;

    PendingDoc doc;
    if (!parse_number(tokens[0], doc.label)) {
      throw ParseError(line_no, "malformed label '" + std::string(tokens[0]) + "'");
    }
    if (tokens.size() < 2 || !tokens[1].starts_with("qid:") || tokens[1].size() == 4) {
      throw ParseError(line_no, "expected qid:<id> after the label");
    }
    std::string qid(tokens[1].substr(4));
    for (std::size_t t = 2; t < tokens.size(); ++t) {
      auto tok = tokens[t];
      auto colon = tok.find(':');
      std::size_t idx = 0;
      double value = 0.0;
      if (colon == std::string_view::npos || !parse_number(tok.substr(0, colon), idx) ||
          idx == 0 || !parse_number(tok.substr(colon + 1), value)) {
        throw ParseError(line_no, "malformed feature '" + std::string(tok) + "'");
      }
      dim = std::max(dim, idx);
      doc.sparse.emplace_back(idx, value);
    }
    auto [it, inserted] = by_query.try_emplace(qid);
    if (inserted) order.push_back(qid);
    it->second.push_back(std::move(doc));
  }

  LabeledPool pool;
  pool.dim = dim;
  pool.queries.reserve(order.size());
  for (const auto& qid : order) {
    const auto& docs = by_query[qid];
    LabeledQuery lq;
    lq.id = QueryId(qid);
    lq.features.assign(docs.size() * dim, 0.0);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      lq.labels.push_back(docs[i].label);
      for (auto [idx, v] : docs[i].sparse) lq.features[i * dim + idx - 1] = v;
    }
    pool.queries.push_back(std::move(lq));
  }
  return pool;
}

void serialize_letor(const LabeledPool& pool, std::ostream& out) {
  std::string line;
  for (const auto& lq : pool.queries) {
    for (std::size_t i = 0; i < lq.num_docs(); ++i) {
      line.clear();
      line += std::to_string(lq.labels[i]);
      line += " qid:";
      line += lq.id.value;
      auto row = lq.row(i, pool.dim);
      for (std::size_t f = 0; f < pool.dim; ++f) {
        line += ' ';
        line += std::to_string(f + 1);
        line += ':';
        append_double(line, row[f]);
      }
      line += '\n';
      out << line;
    }
  }
}

LabeledPool binarize_labels(const LabeledPool& pool, int threshold) {
  LabeledPool out = pool;
  for (auto& lq : out.queries) {
    for (int& l : lq.labels) l = l >= threshold ? 1 : 0;
  }
  return out;
}

void SyntheticConfig::validate(std::size_t k) const {
  if (num_queries == 0 || candidates_per_query == 0 || feature_dim == 0 || latent_width == 0) {
    throw std::invalid_argument("synthetic config: counts must be positive");
  }
  if (candidates_per_query < k) {
    throw std::invalid_argument("synthetic config: candidates per query must be >= K");
  }
  if (!(relevance_noise >= 0.0 && relevance_noise <= 1.0)) {
    throw std::invalid_argument("synthetic config: relevance noise must lie in [0,1]");
  }
}

LabeledPool generate_synthetic(const SyntheticConfig& cfg, std::size_t k) {
  cfg.validate(k);
  const std::size_t exported = cfg.feature_dim;
  const std::size_t full = cfg.feature_dim + cfg.hidden_dim;
  const std::size_t width = cfg.latent_width;

  std::normal_distribution<double> gauss(0.0, 1.0);

  Rng latent_rng = make_rng(derive_seed(cfg.seed, "latent"));
  std::vector<double> linear(full), hidden_w(width * full), out_w(width);
  for (double& v : linear) v = gauss(latent_rng);
  for (double& v : hidden_w) v = gauss(latent_rng);
  for (double& v : out_w) v = gauss(latent_rng);
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(full));
  const double out_scale = 1.0 / std::sqrt(static_cast<double>(width));

  Rng feature_rng = make_rng(derive_seed(cfg.seed, "features"));
  const std::size_t total = cfg.num_queries * cfg.candidates_per_query;
  std::vector<double> utility(total);
  LabeledPool pool;
  pool.dim = exported;
  pool.queries.resize(cfg.num_queries);
  std::vector<double> z(full);
  for (std::size_t q = 0; q < cfg.num_queries; ++q) {
    auto& lq = pool.queries[q];
    lq.id = QueryId(std::to_string(q + 1));
    lq.features.resize(cfg.candidates_per_query * exported);
    lq.labels.assign(cfg.candidates_per_query, 0);
    for (std::size_t d = 0; d < cfg.candidates_per_query; ++d) {
      for (double& v : z) v = gauss(feature_rng);
      std::copy_n(z.begin(), exported, lq.features.begin() + d * exported);
      double u = 0.0;
      for (std::size_t f = 0; f < full; ++f) u += linear[f] * z[f];
      u *= in_scale;
      double nl = 0.0;
      for (std::size_t h = 0; h < width; ++h) {
        double pre = 0.0;
        for (std::size_t f = 0; f < full; ++f) pre += hidden_w[h * full + f] * z[f];
        nl += out_w[h] * std::tanh(pre * in_scale);
      }
      utility[q * cfg.candidates_per_query + d] = u + cfg.nonlinearity * nl * out_scale;
    }
  }

  std::vector<double> sorted = utility;
  std::sort(sorted.begin(), sorted.end());
  const double cuts[3] = {sorted[total / 4], sorted[total / 2], sorted[(3 * total) / 4]};

  Rng noise_rng = make_rng(derive_seed(cfg.seed, "noise"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t q = 0; q < cfg.num_queries; ++q) {
    for (std::size_t d = 0; d < cfg.candidates_per_query; ++d) {
      const double u = utility[q * cfg.candidates_per_query + d];
      int grade = (u >= cuts[0]) + (u >= cuts[1]) + (u >= cuts[2]);
      const double flip = unit(noise_rng);
      const double dir = unit(noise_rng);
      if (flip < cfg.relevance_noise) grade = std::clamp(grade + (dir < 0.5 ? -1 : 1), 0, 3);
      pool.queries[q].labels[d] = grade;
    }
  }
  return pool;
}

PoolSplits split_pool(const LabeledPool& pool, const SplitSpec& spec) {
  const double fr[3] = {spec.train, spec.validate, spec.test};
  for (double f : fr) {
    if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("split fractions must lie in (0,1)");
  }
  if (std::abs(fr[0] + fr[1] + fr[2] - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
  const std::size_t n = pool.queries.size();
  std::size_t counts[3];
  double remainders[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = fr[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainders[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (remainders[i] > remainders[best]) best = i;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  for (auto c : counts) {
    if (c == 0) throw std::invalid_argument("too few queries to populate every split");
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(spec.seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  PoolSplits out;
  LabeledPool* parts[3] = {&out.train, &out.validate, &out.test};
  std::size_t begin = 0;
  for (int p = 0; p < 3; ++p) {
    std::vector<std::size_t> chosen(idx.begin() + begin, idx.begin() + begin + counts[p]);
    std::sort(chosen.begin(), chosen.end());
    parts[p]->dim = pool.dim;
    for (auto i : chosen) parts[p]->queries.push_back(pool.queries[i]);
    begin += counts[p];
  }
  return out;
}

std::vector<QueryId> build_observation_queries(const LabeledPool& test_pool,
                                               std::size_t target_count,
                                               std::uint64_t seed) {
  std::vector<double> weights;
  weights.reserve(test_pool.queries.size());
  double total = 0.0;
  for (const auto& lq : test_pool.queries) {
    const auto rel = std::count(lq.labels.begin(), lq.labels.end(), 1);
    weights.push_back(static_cast<double>(rel));
    total += static_cast<double>(rel);
  }
  if (total <= 0.0) {
    throw std::invalid_argument("no test query has a relevant document");
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  Rng rng = make_rng(seed);
  std::vector<QueryId> out;
  out.reserve(target_count);
  for (std::size_t i = 0; i < target_count; ++i) out.push_back(test_pool.queries[pick(rng)].id);
  return out;
}

}  // namespace rankprop
