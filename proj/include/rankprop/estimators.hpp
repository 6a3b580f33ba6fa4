#pragma once

// Impression metrics, ground truth and the off-policy estimators: naive
// list matching, list-level IPW and item+position IPW with empirical,
// tabulated or parametric (document, rank) propensities.

#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "rankprop/core.hpp"
#include "rankprop/rankdist.hpp"

namespace rankprop {

enum class MetricKind { kNoC, kMrr };

struct Metric {
  MetricKind kind = MetricKind::kNoC;
  bool mrr_normalized = true;  // divide MRR by K

  std::string_view name() const { return kind == MetricKind::kNoC ? "NoC" : "MRR"; }
};

inline constexpr Metric kNoC{MetricKind::kNoC, true};
inline constexpr Metric kMrr{MetricKind::kMrr, true};

/// m(c_k, k) for 1-based rank k in a list of length list_size.
double rank_reward(std::uint8_t click, std::size_t rank, std::size_t list_size, const Metric& metric);

double impression_metric(const ClickVector& clicks, const Metric& metric);

/// Mean metric over measurement impressions; throws when the set is empty or
/// clicks are missing.
double ground_truth_value(const MeasurementSet& measurement, const Metric& metric);

struct EstimatorReport {
  std::string estimator;
  std::string metric;
  double value = 0.0;
  std::size_t matched_terms = 0;
  double max_weight = 0.0;
  double effective_sample_size = 0.0;
};

inline constexpr std::string_view kEstimatorCsvHeader =
    "estimator,metric,value,matchedTerms,maxWeight,ess";

/// "estimator,metric,value,matchedTerms,maxWeight,ess" with shortest
/// round-trip decimals.
std::string to_csv_row(const EstimatorReport& report);

/// The deterministic ranker's impression per query. Throws
/// std::invalid_argument when one query has two different impressions.
class MeasurementIndex {
 public:
  explicit MeasurementIndex(std::span<const Impression> impressions);
  const Impression* find(const QueryId& q) const;
  const std::map<QueryId, Impression>& entries() const { return by_query_; }

 private:
  std::map<QueryId, Impression> by_query_;
};

EstimatorReport estimate_naive(const LoggedDataset& ds, const MeasurementIndex& measurement,
                               const Metric& metric);

EstimatorReport estimate_list_ipw(const LoggedDataset& ds, const MeasurementIndex& measurement,
                                  const Metric& metric);

struct PropensityTable {
  std::map<std::tuple<QueryId, DocId, std::size_t>, double> values;  // (q, d, 1-based k)
  std::map<QueryId, std::size_t> impression_counts;

  std::optional<double> get(const QueryId& q, DocId d, std::size_t k) const;
};

PropensityTable empirical_propensities(const LoggedDataset& ds);

/// Supplies (document, rank) propensities for a measurement impression.
class PropensitySource {
 public:
  virtual ~PropensitySource() = default;
  /// Entry k-1 is the propensity of (impression.docs[k-1], k); 0 means the
  /// source has no mass there.
  virtual std::vector<double> diagonal(const Impression& impression) const = 0;
};

class TablePropensities final : public PropensitySource {
 public:
  explicit TablePropensities(const PropensityTable& table) : table_(table) {}
  std::vector<double> diagonal(const Impression& impression) const override;

 private:
  const PropensityTable& table_;
};

/// Rank distributions of imitation scores over exactly the impression's
/// documents.
class ParametricPropensities final : public PropensitySource {
 public:
  ParametricPropensities(const ScoreTable& scores, double sigma, SinkhornOptions options = {})
      : scores_(scores), sigma_(sigma), options_(options) {}
  std::vector<double> diagonal(const Impression& impression) const override;

 private:
  const ScoreTable& scores_;
  double sigma_;
  SinkhornOptions options_;
};

inline constexpr double kNoTruncation = std::numeric_limits<double>::infinity();

/// min(1/p, M); throws for p <= 0 or M <= 0.
double truncate_weight(double p, double m);

/// (1/|D|) * sum over records and ranks with matching documents of
/// min(1/p, M) * m(c_k, k).
EstimatorReport estimate_item_ipw(const LoggedDataset& ds, const MeasurementIndex& measurement,
                                  const PropensitySource& propensities, const Metric& metric,
                                  double truncation = kNoTruncation,
                                  std::string name = "ItemIPW");

}  // namespace rankprop
