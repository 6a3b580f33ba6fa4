#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rankprop/random.hpp"
#include "rankprop/rankdist.hpp"

using namespace rankprop;

namespace {

const double kExampleSigma = std::exp(-2.5);

std::vector<double> random_scores(Rng& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> s(n);
  for (double& x : s) x = g(rng);
  return s;
}

double row_sum(const SquareMatrix& m, std::size_t r) {
  double s = 0.0;
  for (double v : m.row(r)) s += v;
  return s;
}

Impression impression_of(std::vector<std::uint32_t> docs) {
  Impression imp{QueryId("q"), {}};
  for (auto d : docs) imp.docs.emplace_back(d);
  return imp;
}

LoggedDataset two_doc_log(std::size_t forward, std::size_t backward) {
  LoggedDataset ds;
  ds.k = 2;
  ds.features = FeatureStore(1);
  ds.features.set_query(QueryId("q"), {0, 1});
  for (std::size_t i = 0; i < forward; ++i) ds.records.push_back({QueryId("q"), impression_of({0, 1}), {0, 0}});
  for (std::size_t i = 0; i < backward; ++i) ds.records.push_back({QueryId("q"), impression_of({1, 0}), {0, 0}});
  return ds;
}

}  // namespace

TEST(ContestProbability, Examples) {
  EXPECT_EQ(contest_probability(0.3, 0.3, 0.01), 0.5);
  EXPECT_EQ(contest_probability(-2.0, -2.0, 100.0), 0.5);
  EXPECT_NEAR(contest_probability(0.76, 0.73, kExampleSigma), 0.602, 0.001);
  EXPECT_NEAR(contest_probability(0.76, 0.73, 1e-6), 1.0, 1e-15);
  EXPECT_THROW(contest_probability(0.0, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(contest_probability(0.0, 1.0, -1.0), std::invalid_argument);
}

TEST(ContestProbability, ComplementsExactly) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0), ls(-8.0, 2.0);
  for (int t = 0; t < 2000; ++t) {
    const double a = u(rng), b = u(rng), sigma = std::exp(ls(rng));
    const double p = contest_probability(a, b, sigma);
    EXPECT_EQ(p + contest_probability(b, a, sigma), 1.0);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(LogNormalCdf, MatchesErfcAndStaysFiniteInTail) {
  for (double x : {-5.0, -1.0, 0.0, 0.5, 3.0}) {
    EXPECT_NEAR(log_normal_cdf(x), std::log(0.5 * std::erfc(-x / std::sqrt(2.0))), 1e-12);
  }
  // Leading asymptotic term -x^2/2 - log(-x sqrt(2 pi)).
  const double x = -100.0;
  EXPECT_NEAR(log_normal_cdf(x), -x * x / 2 - std::log(-x * std::sqrt(2 * M_PI)), 1e-3);
  EXPECT_TRUE(std::isfinite(log_normal_cdf(-1e4)));
}

TEST(ContestMatrix, Structure) {
  const std::vector<double> s{0.2, -1.0, 0.7};
  const auto w = contest_matrix(s, 0.5);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(w(i, i), 0.5);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(w(i, j) + w(j, i), 1.0);
  }
}

TEST(RankDistribution, WorkedExampleRow) {
  const std::vector<double> s{0.76, 0.73, 0.45};  // B, A, C
  const auto raw = rank_distribution_unnormalized(s, kExampleSigma);
  EXPECT_NEAR(raw(0, 0), 0.602, 0.005);
  EXPECT_NEAR(raw(0, 1), 0.398, 0.005);
  EXPECT_NEAR(raw(0, 2), 0.0, 0.005);
  const auto imp = impression_of({0, 1, 2});
  const ScoreTable table{{QueryId("q"), s}};
  EXPECT_NEAR(propensity(imp, 1, table, kExampleSigma), 0.6, 0.01);
}

TEST(RankDistribution, SingleDocAndTies) {
  const auto one = rank_distribution(std::vector<double>{3.0}, 0.1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_NEAR(one(0, 0), 1.0, 1e-12);
  const auto tie = rank_distribution(std::vector<double>{1.0, 1.0}, 0.3);
  for (double v : tie.values()) EXPECT_NEAR(v, 0.5, 1e-9);
  const ScoreTable table{{QueryId("q"), {2.0, 2.0}}};
  EXPECT_NEAR(propensity(impression_of({1, 0}), 2, table, 0.3), 0.5, 1e-9);
}

TEST(RankDistribution, DeterministicLimitIsPermutation) {
  const std::vector<double> s{0.1, 0.9, 0.5, -0.3};  // descending: 1, 2, 0, 3
  const double min_gap = 0.4;
  const auto m = rank_distribution(s, 1e-9 * min_gap);
  const std::size_t rank_of[] = {2, 0, 1, 3};
  for (std::size_t d = 0; d < 4; ++d) {
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(m(d, k), k == rank_of[d] ? 1.0 : 0.0, 1e-9);
  }
  const ScoreTable table{{QueryId("q"), s}};
  const auto sorted = impression_of({1, 2, 0, 3});
  for (std::size_t k = 1; k <= 4; ++k) EXPECT_NEAR(propensity(sorted, k, table, 1e-10), 1.0, 1e-9);
}

TEST(RankDistribution, TwoDocsMatchExactContest) {
  const std::vector<double> s{0.4, 0.1};
  const auto raw = rank_distribution_unnormalized(s, 0.2);
  const double p = contest_probability(0.4, 0.1, 0.2);
  EXPECT_NEAR(raw(0, 0), p, 1e-15);
  EXPECT_NEAR(raw(1, 0), 1 - p, 1e-15);
  const auto norm = rank_distribution(s, 0.2);
  EXPECT_NEAR(norm(0, 0), p, 1e-8);
}

TEST(RankDistribution, Errors) {
  EXPECT_THROW(rank_distribution_unnormalized(std::vector<double>{1.0, NAN}, 0.1), std::invalid_argument);
  EXPECT_THROW(rank_distribution_unnormalized(std::vector<double>{1.0, 2.0}, 0.0), std::invalid_argument);
  const ScoreTable table{{QueryId("q"), {1.0}}};
  EXPECT_THROW(propensity(impression_of({0, 1}), 1, table, 0.1), std::out_of_range);
  EXPECT_THROW(lookup_score(table, QueryId("other"), DocId(0)), std::out_of_range);
}

TEST(RankDistributionProperty, RowsSumToOneBeforeNormalization) {
  Rng rng(2);
  for (int t = 0; t < 300; ++t) {
    const auto s = random_scores(rng, 1 + t % 12);
    const double sigma = std::exp(std::uniform_real_distribution<double>(-6, 2)(rng));
    const auto raw = rank_distribution_unnormalized(s, sigma);
    for (std::size_t r = 0; r < raw.size(); ++r) EXPECT_NEAR(row_sum(raw, r), 1.0, 1e-12);
    for (double v : raw.values()) EXPECT_GE(v, 0.0);
  }
}

TEST(RankDistributionProperty, NormalizedIsDoublyStochastic) {
  Rng rng(3);
  for (int t = 0; t < 300; ++t) {
    const auto s = random_scores(rng, 1 + t % 12, 3.0);
    const double sigma = std::exp(std::uniform_real_distribution<double>(-8, 2)(rng));
    const auto m = rank_distribution(s, sigma);
    EXPECT_LT(m.max_row_residual(), 1e-6);
    EXPECT_LT(m.max_col_residual(), 1e-6);
    for (double v : m.values()) EXPECT_GE(v, 0.0);
  }
}

TEST(RankDistributionProperty, RaisingScoreNeverLowersTopMass) {
  Rng rng(4);
  std::uniform_real_distribution<double> bump(0.0, 2.0);
  for (int t = 0; t < 300; ++t) {
    auto s = random_scores(rng, 2 + t % 9);
    const std::size_t d = t % s.size();
    const double before = rank_distribution_unnormalized(s, 0.5)(d, 0);
    s[d] += bump(rng);
    EXPECT_GE(rank_distribution_unnormalized(s, 0.5)(d, 0), before - 1e-15);
  }
}

TEST(RankDistributionProperty, PermutationEquivariantRows) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto s = random_scores(rng, 2 + t % 8);
    std::vector<std::size_t> perm(s.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> ps(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) ps[i] = s[perm[i]];
    const auto a = rank_distribution_unnormalized(s, 0.4);
    const auto b = rank_distribution_unnormalized(ps, 0.4);
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(b(i, k), a(perm[i], k), 1e-12);
    }
  }
}

TEST(Sinkhorn, Examples) {
  SquareMatrix perm(3, 0.0);
  perm(0, 2) = perm(1, 0) = perm(2, 1) = 1.0;
  const auto p = sinkhorn_normalize(perm).matrix;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(p(i, j), perm(i, j), 1e-11);
  }

  SquareMatrix diag(2, 0.0);
  diag(0, 0) = diag(1, 1) = 2.0;
  const auto d = sinkhorn_normalize(diag).matrix;
  EXPECT_NEAR(d(0, 0), 1.0, 1e-11);
  EXPECT_NEAR(d(0, 1), 0.0, 1e-11);

  const auto u = sinkhorn_normalize(SquareMatrix(5, 1.0));
  for (double v : u.matrix.values()) EXPECT_NEAR(v, 0.2, 1e-12);
  EXPECT_LE(u.iterations, 2u);
}

TEST(Sinkhorn, ConvergesOnRandomPositiveMatrices) {
  Rng rng(6);
  std::uniform_real_distribution<double> ld(-20.0, 0.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + t % 10;
    SquareMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) m(i, j) = std::exp(ld(rng));
    }
    const auto r = sinkhorn_normalize(m);
    EXPECT_LT(r.matrix.max_row_residual(), 1e-8);
    EXPECT_LT(r.matrix.max_col_residual(), 1e-8);
    EXPECT_LE(r.iterations, 1000u);
  }
}

TEST(Sinkhorn, NonConvergenceReported) {
  SquareMatrix m(3, 1.0);
  m(0, 0) = 1e6;
  SinkhornOptions o;
  o.max_iterations = 1;
  o.newton_after = 1000;
  try {
    sinkhorn_normalize(m, o);
    FAIL() << "expected SinkhornError";
  } catch (const SinkhornError& e) {
    EXPECT_GT(e.residual(), o.tolerance);
  }
}

TEST(InferSigma, AgreeingLogHitsLowerBound) {
  const std::vector<double> gaps{0.5, 0.2, 1.0, 0.01};
  const auto est = infer_sigma_from_gaps(gaps);
  EXPECT_EQ(est.log_sigma, -10.0);
  EXPECT_EQ(est.sigma, std::exp(-10.0));
  EXPECT_EQ(est.log_lo, -10.0);
  EXPECT_EQ(est.log_hi, 3.0);
}

TEST(InferSigma, BalancedLogHitsUpperBound) {
  const auto ds = two_doc_log(25, 25);
  const ScoreTable table{{QueryId("q"), {0.9, 0.2}}};
  const auto est = infer_sigma(ds, table);
  EXPECT_EQ(est.log_sigma, 3.0);
  const double hi = std::exp(3.0);
  EXPECT_NEAR(est.log_likelihood,
              25 * sigma_log_likelihood(std::vector<double>{0.7}, hi) +
                  25 * sigma_log_likelihood(std::vector<double>{-0.7}, hi),
              1e-9);
}

TEST(InferSigma, InteriorOptimumAndShiftInvariance) {
  // 3:1 agreement for a unit gap: p = 0.75 at the optimum.
  const auto ds = two_doc_log(30, 10);
  const ScoreTable table{{QueryId("q"), {1.0, 0.0}}};
  const auto est = infer_sigma(ds, table);
  EXPECT_NEAR(contest_probability(1.0, 0.0, est.sigma), 0.75, 1e-5);
  EXPECT_GT(est.log_sigma, -10.0);
  EXPECT_LT(est.log_sigma, 3.0);

  const ScoreTable shifted{{QueryId("q"), {-4.0, -5.0}}};
  const auto est2 = infer_sigma(ds, shifted);
  EXPECT_NEAR(est2.log_sigma, est.log_sigma, 1e-9);
  EXPECT_EQ(logged_score_gaps(ds, table).size(), 40u);
}

TEST(InferSigma, Errors) {
  EXPECT_THROW(infer_sigma_from_gaps(std::vector<double>{}), std::invalid_argument);
  const auto ds = two_doc_log(1, 0);
  EXPECT_THROW(infer_sigma(ds, ScoreTable{{QueryId("q"), {1.0}}}), std::out_of_range);
}

TEST(RankDistributionIo, DumpFormat) {
  const auto imp = impression_of({1, 0});
  const auto dist = rank_distribution(std::vector<double>{1.0, 1.0}, 1.0);
  std::ostringstream out;
  write_rank_distribution(out, 3, imp, dist);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "# impression 3 query q K 2");
  double v = 0.0;
  std::size_t count = 0;
  while (in >> v) {
    EXPECT_NEAR(v, 0.5, 1e-9);
    ++count;
  }
  EXPECT_EQ(count, 4u);
}
