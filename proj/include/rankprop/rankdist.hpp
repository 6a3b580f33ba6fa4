#pragma once

// Smooth (document, rank) propensities from imitation scores: Gaussian
// score uncertainty, maximum-likelihood sigma, the SoftRank rank-distribution
// recursion and Sinkhorn normalization.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rankprop/core.hpp"

namespace rankprop {

/// Square row-major matrix; rows are documents, columns ranks.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const { return n_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * n_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * n_ + c]; }
  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * n_, n_); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * n_, n_);
  }
  std::span<const double> values() const { return data_; }

  double max_row_residual() const;
  double max_col_residual() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

using RankDistribution = SquareMatrix;

/// Phi((s_d - s_z) / (sigma * sqrt(2))): probability that d outranks z when
/// both scores carry independent N(0, sigma^2) noise. Evaluated from the
/// smaller tail so that p(a,b) + p(b,a) == 1. Throws for sigma <= 0.
double contest_probability(double s_d, double s_z, double sigma);

/// log Phi(x), accurate deep into the lower tail.
double log_normal_cdf(double x);

/// W[d][z] = contest_probability(s_d, s_z, sigma), diagonal 0.5.
SquareMatrix contest_matrix(std::span<const double> scores, double sigma);

struct SigmaSearch {
  double log_lo = -10.0;
  double log_hi = 3.0;
  std::size_t grid_points = 27;
  double tolerance = 1e-6;  // golden-section bracket width in log sigma
};

struct SigmaEstimate {
  double sigma = 1.0;
  double log_sigma = 0.0;
  double log_likelihood = 0.0;
  double log_lo = -10.0;
  double log_hi = 3.0;
};

/// Per-query score vectors indexed by DocId.
using ScoreTable = std::map<QueryId, std::vector<double>>;

/// Score of (q, d); throws std::out_of_range when missing or non-finite.
double lookup_score(const ScoreTable& scores, const QueryId& q, DocId d);

/// Sum over logged pairs (d above z) of log Phi((s_d - s_z) / (sigma sqrt 2)).
double sigma_log_likelihood(std::span<const double> score_gaps, double sigma);

/// Score gaps s_d - s_z for every logged pair of every record.
std::vector<double> logged_score_gaps(const LoggedDataset& ds, const ScoreTable& scores);

/// Maximizes the pairwise log-likelihood over log sigma: a coarse grid, then
/// golden-section search on the bracket around the best grid point. When an
/// end point of the search interval is at least as likely as the refined
/// optimum, that bound is returned exactly. Throws when there are no pairs.
SigmaEstimate infer_sigma(const LoggedDataset& ds, const ScoreTable& scores,
                          const SigmaSearch& search = {});
SigmaEstimate infer_sigma_from_gaps(std::span<const double> score_gaps,
                                    const SigmaSearch& search = {});

/// Row for each anchor d starts at rank 1 with mass 1; each competitor z != d
/// (in input order) moves the anchor down one rank with probability
/// 1 - p_dz. Rows sum to 1. Throws on non-finite scores or sigma <= 0.
RankDistribution rank_distribution_unnormalized(std::span<const double> scores, double sigma);

struct SinkhornOptions {
  double tolerance = 1e-8;
  std::size_t max_iterations = 1000;
  double floor = 1e-12;  // added to every entry before balancing
  // Alternating sweeps before switching to Newton steps on the log scalings
  // (same fixed point; nearly decomposable matrices stall plain alternation).
  std::size_t newton_after = 100;
};

class SinkhornError : public std::runtime_error {
 public:
  SinkhornError(std::size_t iterations, double residual)
      : std::runtime_error("Sinkhorn did not converge after " + std::to_string(iterations) +
                           " iterations (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct SinkhornResult {
  SquareMatrix matrix;
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Adds the entry floor, then alternately rescales rows and columns to unit
/// sums until both residuals are below tolerance. After newton_after sweeps
/// the remaining iterations are Newton steps on the row/column log scalings.
/// Every sweep or Newton step counts as one iteration.
SinkhornResult sinkhorn_normalize(const SquareMatrix& m, const SinkhornOptions& options = {});

/// Unnormalized recursion followed by Sinkhorn normalization.
RankDistribution rank_distribution(std::span<const double> scores, double sigma,
                                   const SinkhornOptions& options = {});

/// Normalized distribution over exactly the documents of impression, in
/// impression order; entry (k-1, k-1) is the propensity of (I_k, k).
RankDistribution impression_rank_distribution(const Impression& impression,
                                              const ScoreTable& scores, double sigma,
                                              const SinkhornOptions& options = {});

/// Propensity of the document at 1-based rank k of impression being placed
/// at rank k.
double propensity(const Impression& impression, std::size_t k, const ScoreTable& scores,
                  double sigma, const SinkhornOptions& options = {});

/// Debug dump: "# impression <i> query <q> K <k>" header, then K rows of K
/// space-separated values.
void write_rank_distribution(std::ostream& out, std::size_t index, const Impression& impression,
                             const RankDistribution& dist);

}  // namespace rankprop
