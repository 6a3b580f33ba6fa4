#pragma once

// Labeled candidate pools: LETOR ingestion/serialization, the synthetic
// generator, query-level splits and the relevance-proportional bootstrap of
// observation queries.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rankprop/core.hpp"

namespace rankprop {

/// One query's candidate pool. Candidate i has DocId i.
struct LabeledQuery {
  QueryId id;
  std::vector<double> features;  // row-major, num_docs() x dim
  std::vector<int> labels;

  std::size_t num_docs() const { return labels.size(); }
  std::span<const double> row(std::size_t i, std::size_t dim) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }
  bool operator==(const LabeledQuery&) const = default;
};

struct LabeledPool {
  std::size_t dim = 0;
  std::vector<LabeledQuery> queries;

  const LabeledQuery* find(const QueryId& q) const;
  /// Feature store over every candidate of every query.
  FeatureStore feature_store() const;
  bool operator==(const LabeledPool&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads "<label> qid:<id> <idx>:<value> ... [# comment]" lines. Indices are
/// 1-based and sparse; the dimension is the largest index seen. Blank lines
/// and lines starting with '#' are skipped. Queries keep first-seen order.
LabeledPool parse_letor(std::istream& in);

/// Writes every feature densely so that parse_letor reproduces the pool.
void serialize_letor(const LabeledPool& pool, std::ostream& out);

LabeledPool binarize_labels(const LabeledPool& pool, int threshold = 3);

struct SyntheticConfig {
  std::size_t num_queries = 1000;
  std::size_t candidates_per_query = 20;
  std::size_t feature_dim = 20;
  std::size_t hidden_dim = 0;
  std::size_t latent_width = 8;    // hidden units of the latent utility network
  double nonlinearity = 1.0;       // weight of the tanh layer vs. the linear term
  double relevance_noise = 0.0;
  std::uint64_t seed = 1;

  void validate(std::size_t k) const;
};

/// Graded labels in {0,1,2,3} from the quartile of a fixed random utility
/// u = a.x + nonlinearity * v.tanh(A x) over [exported | hidden] features,
/// with each label moved one grade (up or down, clamped) with probability
/// relevance_noise. Hidden features are not exported.
LabeledPool generate_synthetic(const SyntheticConfig& cfg, std::size_t k = 10);

struct SplitSpec {
  double train = 0.6;
  double validate = 0.2;
  double test = 0.2;
  std::uint64_t seed = 1;
};

struct PoolSplits {
  LabeledPool train;
  LabeledPool validate;
  LabeledPool test;
};

/// Query-level partition after a seeded shuffle; split sizes use largest
/// remainders so they sum to the number of queries. Throws
/// std::invalid_argument when a split would be empty.
PoolSplits split_pool(const LabeledPool& pool, const SplitSpec& spec);

/// Samples target_count query ids with replacement, each query weighted by
/// its number of relevant (label 1) candidates. Throws when no query has a
/// relevant candidate.
std::vector<QueryId> build_observation_queries(const LabeledPool& test_pool,
                                               std::size_t target_count,
                                               std::uint64_t seed);

}  // namespace rankprop
