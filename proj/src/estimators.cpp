#include "rankprop/estimators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace rankprop {

double rank_reward(std::uint8_t click, std::size_t rank, std::size_t list_size, const Metric& metric) {
  if (click == 0) return 0.0;
  if (metric.kind == MetricKind::kNoC) return 1.0;
  const double rr = 1.0 / static_cast<double>(rank);
  return metric.mrr_normalized ? rr / static_cast<double>(list_size) : rr;
}

double impression_metric(const ClickVector& clicks, const Metric& metric) {
  double total = 0.0;
  for (std::size_t k = 0; k < clicks.size(); ++k) {
    total += rank_reward(clicks[k], k + 1, clicks.size(), metric);
  }
  return total;
}

double ground_truth_value(const MeasurementSet& measurement, const Metric& metric) {
  if (measurement.impressions.empty()) throw std::invalid_argument("ground truth: empty measurement set");
  if (measurement.clicks.size() != measurement.impressions.size()) {
    throw std::invalid_argument("ground truth: clicks missing for some measurement impressions");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < measurement.clicks.size(); ++i) {
    if (measurement.clicks[i].size() != measurement.impressions[i].size()) {
      throw std::invalid_argument("ground truth: click vector length mismatch");
    }
    total += impression_metric(measurement.clicks[i], metric);
  }
  return total / static_cast<double>(measurement.impressions.size());
}

std::string to_csv_row(const EstimatorReport& r) {
  auto num = [](double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
  };
  return r.estimator + ',' + r.metric + ',' + num(r.value) + ',' + std::to_string(r.matched_terms) +
         ',' + num(r.max_weight) + ',' + num(r.effective_sample_size);
}

MeasurementIndex::MeasurementIndex(std::span<const Impression> impressions) {
  for (const auto& imp : impressions) {
    auto [it, inserted] = by_query_.try_emplace(imp.query, imp);
    if (!inserted && it->second != imp) {
      throw std::invalid_argument("measurement ranker produced two different lists for query '" +
                                  imp.query.value + "'");
    }
  }
}

const Impression* MeasurementIndex::find(const QueryId& q) const {
  auto it = by_query_.find(q);
  return it == by_query_.end() ? nullptr : &it->second;
}

namespace {

class WeightStats {
 public:
  void add(double w) {
    ++count_;
    sum_ += w;
    sum_sq_ += w * w;
    max_ = std::max(max_, w);
  }
  void fill(EstimatorReport& r) const {
    r.matched_terms = count_;
    r.max_weight = max_;
    r.effective_sample_size = sum_sq_ > 0.0 ? sum_ * sum_ / sum_sq_ : 0.0;
  }

 private:
  std::size_t count_ = 0;
  double sum_ = 0.0, sum_sq_ = 0.0, max_ = 0.0;
};

EstimatorReport finish(std::string name, const Metric& metric, double total, std::size_t records,
                       const WeightStats& stats) {
  EstimatorReport r;
  r.estimator = std::move(name);
  r.metric = std::string(metric.name());
  stats.fill(r);
  r.value = (records == 0 || r.matched_terms == 0) ? 0.0 : total / static_cast<double>(records);
  return r;
}

}  // namespace

EstimatorReport estimate_naive(const LoggedDataset& ds, const MeasurementIndex& measurement,
                               const Metric& metric) {
  double total = 0.0;
  WeightStats stats;
  for (const auto& rec : ds.records) {
    const Impression* ibar = measurement.find(rec.query);
    if (!ibar || ibar->docs != rec.impression.docs) continue;
    stats.add(1.0);
    total += impression_metric(rec.clicks, metric);
  }
  return finish("Naive", metric, total, ds.records.size(), stats);
}

EstimatorReport estimate_list_ipw(const LoggedDataset& ds, const MeasurementIndex& measurement,
                                  const Metric& metric) {
  // p(Ibar | q): share of q's records whose list equals Ibar.
  std::map<QueryId, std::pair<std::size_t, std::size_t>> counts;  // (matching, total)
  for (const auto& rec : ds.records) {
    auto& c = counts[rec.query];
    ++c.second;
    const Impression* ibar = measurement.find(rec.query);
    if (ibar && ibar->docs == rec.impression.docs) ++c.first;
  }
  double total = 0.0;
  WeightStats stats;
  for (const auto& rec : ds.records) {
    const Impression* ibar = measurement.find(rec.query);
    if (!ibar || ibar->docs != rec.impression.docs) continue;
    const auto [matching, all] = counts[rec.query];
    const double w = static_cast<double>(all) / static_cast<double>(matching);
    stats.add(w);
    total += w * impression_metric(rec.clicks, metric);
  }
  return finish("List", metric, total, ds.records.size(), stats);
}

std::optional<double> PropensityTable::get(const QueryId& q, DocId d, std::size_t k) const {
  auto it = values.find({q, d, k});
  if (it == values.end()) return std::nullopt;
  return it->second;
}

PropensityTable empirical_propensities(const LoggedDataset& ds) {
  PropensityTable table;
  std::map<std::tuple<QueryId, DocId, std::size_t>, std::size_t> hits;
  for (const auto& rec : ds.records) {
    ++table.impression_counts[rec.query];
    for (std::size_t k = 0; k < rec.impression.size(); ++k) {
      ++hits[{rec.query, rec.impression.docs[k], k + 1}];
    }
  }
  for (const auto& [key, n] : hits) {
    table.values[key] = static_cast<double>(n) /
                        static_cast<double>(table.impression_counts[std::get<0>(key)]);
  }
  return table;
}

std::vector<double> TablePropensities::diagonal(const Impression& impression) const {
  std::vector<double> out(impression.size(), 0.0);
  for (std::size_t k = 0; k < impression.size(); ++k) {
    out[k] = table_.get(impression.query, impression.docs[k], k + 1).value_or(0.0);
  }
  return out;
}

std::vector<double> ParametricPropensities::diagonal(const Impression& impression) const {
  const auto dist = impression_rank_distribution(impression, scores_, sigma_, options_);
  std::vector<double> out(impression.size());
  for (std::size_t k = 0; k < impression.size(); ++k) out[k] = dist(k, k);
  return out;
}

double truncate_weight(double p, double m) {
  if (!(p > 0.0)) throw std::invalid_argument("truncate_weight: propensity must be positive");
  if (!(m > 0.0)) throw std::invalid_argument("truncate_weight: truncation must be positive");
  return std::min(1.0 / p, m);
}

EstimatorReport estimate_item_ipw(const LoggedDataset& ds, const MeasurementIndex& measurement,
                                  const PropensitySource& propensities, const Metric& metric,
                                  double truncation, std::string name) {
  std::map<QueryId, std::vector<double>> diag;
  double total = 0.0;
  WeightStats stats;
  for (const auto& rec : ds.records) {
    const Impression* ibar = measurement.find(rec.query);
    if (!ibar) continue;
    const std::size_t k_max = std::min(ibar->size(), rec.impression.size());
    const std::vector<double>* p = nullptr;
    for (std::size_t k = 0; k < k_max; ++k) {
      if (ibar->docs[k] != rec.impression.docs[k]) continue;
      if (!p) {
        auto it = diag.find(rec.query);
        if (it == diag.end()) it = diag.emplace(rec.query, propensities.diagonal(*ibar)).first;
        p = &it->second;
      }
      const double w = truncate_weight((*p)[k], truncation);
      stats.add(w);
      total += w * rank_reward(rec.clicks[k], k + 1, rec.impression.size(), metric);
    }
  }
  return finish(std::move(name), metric, total, ds.records.size(), stats);
}

}  // namespace rankprop
