#pragma once

// Linear pairwise hinge rankers used as the logging (observation) and
// measurement rankers.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rankprop/core.hpp"
#include "rankprop/data.hpp"

namespace rankprop {

struct LinearRankerParams {
  std::vector<double> weights;
  double c = 0.1;
  double fraction = 1.0;
  std::uint64_t seed = 0;

  double score(std::span<const double> x) const;
  bool operator==(const LinearRankerParams&) const = default;
};

struct LinearRankerOptions {
  std::size_t epochs = 200;
  // Step at epoch e is learning_rate / sqrt(e).
  double learning_rate = 1.0;
};

/// Minimizes 0.5*|w|^2 + C * sum over pairs (label_d > label_z) of
/// max(0, 1 - w.(x_d - x_z)) by full-batch subgradient descent on a seeded
/// query sample of size round(fraction * #queries). Returns the best iterate
/// seen. Throws std::invalid_argument when the sample has no pairs.
LinearRankerParams train_linear_ranker(const LabeledPool& pool, double c, double fraction,
                                       std::uint64_t seed,
                                       const LinearRankerOptions& options = {});

/// Hinge objective at w over the given queries (all of them).
double linear_ranker_objective(const LabeledPool& pool, std::span<const double> w, double c);

/// Top-k candidates by descending score, ties by ascending DocId.
Impression rank_top_k(const LinearRankerParams& params, const QueryId& query,
                      std::span<const double> candidates, std::size_t dim, std::size_t k);

struct RankerDiffReport {
  double rmse = 0.0;
  double mae = 0.0;
  double kendall_tau = 0.0;
};

/// Score-level RMSE/MAE over every (q, d) of the pool and the mean per-query
/// Kendall tau-b between the two score vectors (queries where tau is
/// undefined are skipped).
RankerDiffReport compare_rankers(const LinearRankerParams& pi, const LinearRankerParams& mu,
                                 const LabeledPool& validation);

void write_linear_ranker(const LinearRankerParams& params, std::ostream& out);
LinearRankerParams read_linear_ranker(std::istream& in);

}  // namespace rankprop
