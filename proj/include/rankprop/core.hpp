#pragma once

// Domain types shared by every stage of the offline-evaluation pipeline,
// dataset validation and rank correlation.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rankprop {

/// Opaque query identifier. Never empty in a valid dataset.
struct QueryId {
  std::string value;

  QueryId() = default;
  explicit QueryId(std::string v) : value(std::move(v)) {}

  auto operator<=>(const QueryId&) const = default;
  bool operator==(const QueryId&) const = default;
};

/// Document identifier, unique within one query's candidate pool. Documents
/// are numbered by their position in the pool, which is also the tie-break
/// order wherever scores are equal.
struct DocId {
  std::uint32_t value = 0;

  constexpr DocId() = default;
  constexpr explicit DocId(std::uint32_t v) : value(v) {}

  auto operator<=>(const DocId&) const = default;
  bool operator==(const DocId&) const = default;
};

using FeatureVector = std::vector<double>;

/// Ordered top-K list. docs[0] is rank 1.
struct Impression {
  QueryId query;
  std::vector<DocId> docs;

  std::size_t size() const { return docs.size(); }
  bool operator==(const Impression&) const = default;
};

/// Click indicators aligned with an impression; each entry is 0 or 1.
using ClickVector = std::vector<std::uint8_t>;

struct LoggedRecord {
  QueryId query;
  Impression impression;
  ClickVector clicks;
};

/// Dense per-query feature matrices (row = DocId, row-major).
class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }

  /// Registers the candidate matrix for a query; rows.size() must be a
  /// multiple of dim(). Replaces any previous entry.
  void set_query(const QueryId& q, std::vector<double> rows);

  bool contains(const QueryId& q, DocId d) const;
  std::size_t num_docs(const QueryId& q) const;

  /// Feature row for (q, d); throws std::out_of_range when absent.
  std::span<const double> row(const QueryId& q, DocId d) const;

  /// All candidate rows of q (row-major), empty span when q is unknown.
  std::span<const double> matrix(const QueryId& q) const;

  const std::map<QueryId, std::vector<double>>& queries() const { return rows_; }

 private:
  std::size_t dim_ = 0;
  std::map<QueryId, std::vector<double>> rows_;
};

/// The logged observation set: impressions from the logging ranker with
/// their clicks and a feature store covering every logged document.
struct LoggedDataset {
  std::vector<LoggedRecord> records;
  FeatureStore features;
  std::size_t k = 10;
};

/// Impressions produced by the ranker under evaluation. clicks, when
/// present, holds held-out ground-truth clicks aligned with impressions.
struct MeasurementSet {
  std::vector<Impression> impressions;
  std::vector<ClickVector> clicks;
};

struct Violation {
  std::optional<std::size_t> record;
  std::string rule;
  std::string detail;
};

using ValidationReport = std::vector<Violation>;

// Rule names reported by validate_dataset.
inline constexpr const char* kRuleDuplicateDoc = "duplicate doc";
inline constexpr const char* kRuleLengthMismatch = "length mismatch";
inline constexpr const char* kRuleClickLength = "click length mismatch";
inline constexpr const char* kRuleClickValue = "non-binary click";
inline constexpr const char* kRuleQueryMismatch = "query mismatch";
inline constexpr const char* kRuleEmptyQuery = "empty query id";
inline constexpr const char* kRuleMissingFeatures = "missing features";
inline constexpr const char* kRuleNonFinite = "non-finite feature";
inline constexpr const char* kRuleBadK = "invalid K";

ValidationReport validate_dataset(const LoggedDataset& ds);

/// Kendall tau-b between two equal-length sequences. Throws
/// std::invalid_argument on length mismatch or length < 2. Returns NaN when
/// either sequence is constant (tau-b is undefined there).
double kendall_tau(std::span<const double> a, std::span<const double> b);

}  // namespace rankprop
