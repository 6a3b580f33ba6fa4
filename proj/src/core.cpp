#include "rankprop/core.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace rankprop {

void FeatureStore::set_query(const QueryId& q, std::vector<double> rows) {
  if (dim_ == 0 || rows.size() % dim_ != 0) {
    throw std::invalid_argument("feature rows for query '" + q.value +
                                "' are not a multiple of the dimension");
  }
  rows_[q] = std::move(rows);
}

bool FeatureStore::contains(const QueryId& q, DocId d) const {
  return d.value < num_docs(q);
}

std::size_t FeatureStore::num_docs(const QueryId& q) const {
  auto it = rows_.find(q);
  if (it == rows_.end() || dim_ == 0) return 0;
  return it->second.size() / dim_;
}

std::span<const double> FeatureStore::row(const QueryId& q, DocId d) const {
  auto it = rows_.find(q);
  if (it == rows_.end() || d.value >= it->second.size() / dim_) {
    throw std::out_of_range("no features for query '" + q.value + "' doc " +
                            std::to_string(d.value));
  }
  return std::span<const double>(it->second).subspan(d.value * dim_, dim_);
}

std::span<const double> FeatureStore::matrix(const QueryId& q) const {
  auto it = rows_.find(q);
  if (it == rows_.end()) return {};
  return it->second;
}

ValidationReport validate_dataset(const LoggedDataset& ds) {
  ValidationReport report;
  if (ds.k == 0) {
    report.push_back({std::nullopt, kRuleBadK, "K must be positive"});
  }

  for (const auto& [q, rows] : ds.features.queries()) {
    for (double v : rows) {
      if (!std::isfinite(v)) {
        report.push_back({std::nullopt, kRuleNonFinite, "query '" + q.value + "'"});
        break;
      }
    }
  }

  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& rec = ds.records[i];
    if (rec.query.value.empty()) {
      report.push_back({i, kRuleEmptyQuery, ""});
    }
    if (rec.impression.query != rec.query) {
      report.push_back({i, kRuleQueryMismatch,
                        "record '" + rec.query.value + "' vs impression '" +
                            rec.impression.query.value + "'"});
    }
    if (rec.impression.size() != ds.k) {
      report.push_back({i, kRuleLengthMismatch,
                        "impression has " + std::to_string(rec.impression.size()) +
                            " docs, K=" + std::to_string(ds.k)});
    }
    if (rec.clicks.size() != rec.impression.size()) {
      report.push_back({i, kRuleClickLength,
                        std::to_string(rec.clicks.size()) + " clicks for " +
                            std::to_string(rec.impression.size()) + " docs"});
    }
    for (auto c : rec.clicks) {
      if (c > 1) {
        report.push_back({i, kRuleClickValue, "click value " + std::to_string(c)});
        break;
      }
    }
    std::set<DocId> seen;
    for (DocId d : rec.impression.docs) {
      if (!seen.insert(d).second) {
        report.push_back({i, kRuleDuplicateDoc, "doc " + std::to_string(d.value)});
      }
      if (!ds.features.contains(rec.impression.query, d)) {
        report.push_back({i, kRuleMissingFeatures, "doc " + std::to_string(d.value)});
      }
    }
  }
  return report;
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("kendall_tau: length mismatch");
  }
  if (a.size() < 2) {
    throw std::invalid_argument("kendall_tau: need at least two elements");
  }
  // tau-b = (C - D) / sqrt((n0 - n1) (n0 - n2)); n1, n2 count tied pairs.
  long long concordant_minus_discordant = 0;
  long long untied_a = 0;
  long long untied_b = 0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int sa = (a[i] < a[j]) - (a[i] > a[j]);
      const int sb = (b[i] < b[j]) - (b[i] > b[j]);
      concordant_minus_discordant += sa * sb;
      untied_a += sa != 0;
      untied_b += sb != 0;
    }
  }
  if (untied_a == 0 || untied_b == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return static_cast<double>(concordant_minus_discordant) /
         std::sqrt(static_cast<double>(untied_a) * static_cast<double>(untied_b));
}

}  // namespace rankprop
