#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "rankprop/data.hpp"

using namespace rankprop;

namespace {

LabeledPool parse(const std::string& text) {
  std::istringstream in(text);
  return parse_letor(in);
}

LabeledPool pool_with_relevant_counts(const std::vector<int>& counts) {
  LabeledPool pool;
  pool.dim = 1;
  for (std::size_t q = 0; q < counts.size(); ++q) {
    LabeledQuery lq;
    lq.id = QueryId("q" + std::to_string(q));
    for (int d = 0; d < 4; ++d) {
      lq.labels.push_back(d < counts[q] ? 1 : 0);
      lq.features.push_back(d);
    }
    pool.queries.push_back(lq);
  }
  return pool;
}

}  // namespace

TEST(ParseLetor, SparseLineFillsZeros) {
  const auto pool = parse("1 qid:7 1:0.5 3:-0.2\n");
  ASSERT_EQ(pool.queries.size(), 1u);
  EXPECT_EQ(pool.dim, 3u);
  EXPECT_EQ(pool.queries[0].id, QueryId("7"));
  EXPECT_EQ(pool.queries[0].labels, std::vector<int>{1});
  EXPECT_EQ(pool.queries[0].features, (std::vector<double>{0.5, 0.0, -0.2}));
}

TEST(ParseLetor, GroupsByQid) {
  const auto pool = parse("0 qid:7 1:1\n# full-line comment\n\n2 qid:8 2:1 # trailing\n3 qid:7 1:2\n");
  ASSERT_EQ(pool.queries.size(), 2u);
  EXPECT_EQ(pool.queries[0].id, QueryId("7"));
  EXPECT_EQ(pool.queries[0].num_docs(), 2u);
  EXPECT_EQ(pool.queries[0].labels, (std::vector<int>{0, 3}));
  EXPECT_EQ(pool.queries[1].features, (std::vector<double>{0.0, 1.0}));
  ASSERT_NE(pool.find(QueryId("8")), nullptr);
  EXPECT_EQ(pool.find(QueryId("9")), nullptr);
}

TEST(ParseLetor, MalformedLabelReportsLine) {
  try {
    parse("1 qid:1 1:0\nx qid:7 1:0.5\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("x qid:7 1:0.5\n"), ParseError);
  EXPECT_THROW(parse("1 7 1:0.5\n"), ParseError);
  EXPECT_THROW(parse("1 qid:7 0:0.5\n"), ParseError);
  EXPECT_THROW(parse("1 qid:7 1:abc\n"), ParseError);
}

TEST(ParseLetor, RoundTripThroughSerialize) {
  SyntheticConfig cfg;
  cfg.num_queries = 12;
  cfg.candidates_per_query = 11;
  cfg.feature_dim = 6;
  cfg.seed = 5;
  const auto pool = generate_synthetic(cfg, 10);
  std::ostringstream out;
  serialize_letor(pool, out);
  const auto back = parse(out.str());
  EXPECT_EQ(back, pool);
}

TEST(Binarize, Threshold) {
  LabeledPool pool;
  pool.dim = 1;
  pool.queries.push_back(LabeledQuery{QueryId("a"), {0, 0, 0, 0, 0}, {0, 1, 2, 3, 4}});
  EXPECT_EQ(binarize_labels(pool).queries[0].labels, (std::vector<int>{0, 0, 0, 1, 1}));
  pool.queries[0].labels = {0, 0, 0, 0, 0};
  EXPECT_EQ(binarize_labels(pool).queries[0].labels, (std::vector<int>(5, 0)));
  pool.queries[0].labels = {0, 1, 0, 1, 0};
  EXPECT_EQ(binarize_labels(pool, 1).queries[0].labels, (std::vector<int>{0, 1, 0, 1, 0}));
}

TEST(Synthetic, DeterministicAndShaped) {
  SyntheticConfig cfg;
  cfg.num_queries = 40;
  cfg.seed = 3;
  const auto a = generate_synthetic(cfg);
  const auto b = generate_synthetic(cfg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.dim, cfg.feature_dim);
  std::map<int, int> grades;
  for (const auto& q : a.queries) {
    EXPECT_EQ(q.num_docs(), cfg.candidates_per_query);
    EXPECT_EQ(q.features.size(), cfg.candidates_per_query * cfg.feature_dim);
    for (int l : q.labels) ++grades[l];
  }
  // Quartile bins of the utility.
  for (int g = 0; g < 4; ++g) EXPECT_EQ(grades[g], 200) << g;
  cfg.seed = 4;
  EXPECT_NE(generate_synthetic(cfg), a);
}

TEST(Synthetic, HiddenFeaturesAreNotExported) {
  SyntheticConfig cfg;
  cfg.num_queries = 30;
  cfg.hidden_dim = 5;
  const auto pool = generate_synthetic(cfg);
  EXPECT_EQ(pool.dim, cfg.feature_dim);
  EXPECT_EQ(pool.queries[0].features.size(), cfg.candidates_per_query * cfg.feature_dim);
}

TEST(Synthetic, NoiseMovesLabelsOneGrade) {
  SyntheticConfig cfg;
  cfg.num_queries = 500;
  cfg.seed = 9;
  const auto clean = generate_synthetic(cfg);
  cfg.relevance_noise = 0.2;
  const auto noisy = generate_synthetic(cfg);
  std::size_t changed = 0, total = 0;
  for (std::size_t q = 0; q < clean.queries.size(); ++q) {
    EXPECT_EQ(clean.queries[q].features, noisy.queries[q].features);
    for (std::size_t d = 0; d < clean.queries[q].num_docs(); ++d) {
      const int delta = std::abs(clean.queries[q].labels[d] - noisy.queries[q].labels[d]);
      EXPECT_LE(delta, 1);
      changed += delta;
      ++total;
    }
  }
  // A move is lost to clamping for half of the moves from grades 0 and 3: 0.2 * 0.75.
  EXPECT_NEAR(static_cast<double>(changed) / static_cast<double>(total), 0.15, 0.015);
}

TEST(Synthetic, InvalidConfig) {
  SyntheticConfig cfg;
  cfg.candidates_per_query = 5;
  EXPECT_THROW(generate_synthetic(cfg, 10), std::invalid_argument);
  cfg = SyntheticConfig{};
  cfg.relevance_noise = 1.5;
  EXPECT_THROW(generate_synthetic(cfg), std::invalid_argument);
}

TEST(Split, CountsAndPartition) {
  SyntheticConfig cfg;
  cfg.num_queries = 10;
  const auto pool = generate_synthetic(cfg);
  const auto s = split_pool(pool, SplitSpec{0.5, 0.2, 0.3, 1});
  EXPECT_EQ(s.train.queries.size(), 5u);
  EXPECT_EQ(s.validate.queries.size(), 2u);
  EXPECT_EQ(s.test.queries.size(), 3u);
  std::set<QueryId> all;
  for (const auto* part : {&s.train, &s.validate, &s.test}) {
    for (const auto& q : part->queries) EXPECT_TRUE(all.insert(q.id).second);
  }
  EXPECT_EQ(all.size(), 10u);
  const auto again = split_pool(pool, SplitSpec{0.5, 0.2, 0.3, 1});
  EXPECT_EQ(again.test, s.test);
}

TEST(Split, LargestRemainderSumsToAll) {
  SyntheticConfig cfg;
  cfg.num_queries = 7;
  const auto s = split_pool(generate_synthetic(cfg), SplitSpec{0.6, 0.2, 0.2, 2});
  EXPECT_EQ(s.train.queries.size() + s.validate.queries.size() + s.test.queries.size(), 7u);
}

TEST(Split, TooFewQueries) {
  SyntheticConfig cfg;
  cfg.num_queries = 2;
  EXPECT_THROW(split_pool(generate_synthetic(cfg), SplitSpec{0.4, 0.3, 0.3, 1}), std::invalid_argument);
  EXPECT_THROW(split_pool(generate_synthetic(cfg), SplitSpec{0.5, 0.5, 0.0, 1}), std::invalid_argument);
}

TEST(ObservationQueries, ProportionalFrequencies) {
  const auto pool = pool_with_relevant_counts({1, 3});
  const auto sample = build_observation_queries(pool, 50000, 17);
  ASSERT_EQ(sample.size(), 50000u);
  const double f1 = static_cast<double>(std::count(sample.begin(), sample.end(), QueryId("q0"))) / 50000.0;
  EXPECT_NEAR(f1, 0.25, 0.01);
  EXPECT_NEAR(1.0 - f1, 0.75, 0.01);
}

TEST(ObservationQueries, ZeroWeightQueriesExcluded) {
  const auto pool = pool_with_relevant_counts({0, 2, 0});
  const auto sample = build_observation_queries(pool, 100, 1);
  EXPECT_EQ(std::count(sample.begin(), sample.end(), QueryId("q1")), 100);
  EXPECT_EQ(build_observation_queries(pool, 100, 1), sample);
  EXPECT_THROW(build_observation_queries(pool_with_relevant_counts({0, 0}), 10, 1), std::invalid_argument);
}
