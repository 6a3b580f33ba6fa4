#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rankprop/core.hpp"
#include "rankprop/random.hpp"

using namespace rankprop;

namespace {

LoggedDataset two_record_dataset() {
  LoggedDataset ds;
  ds.k = 3;
  ds.features = FeatureStore(2);
  ds.features.set_query(QueryId("q"), {0, 0, 1, 0, 0, 1, 1, 1});
  const QueryId q("q");
  ds.records.push_back({q, Impression{q, {DocId(0), DocId(1), DocId(2)}}, {0, 1, 0}});
  ds.records.push_back({q, Impression{q, {DocId(3), DocId(1), DocId(0)}}, {1, 0, 0}});
  return ds;
}

std::size_t count_rule(const ValidationReport& r, const std::string& rule) {
  std::size_t n = 0;
  for (const auto& v : r) n += v.rule == rule;
  return n;
}

}  // namespace

TEST(ValidateDataset, WellFormedIsClean) {
  EXPECT_TRUE(validate_dataset(two_record_dataset()).empty());
}

TEST(ValidateDataset, DuplicateDoc) {
  auto ds = two_record_dataset();
  ds.records[1].impression.docs = {DocId(1), DocId(1), DocId(0)};
  const auto report = validate_dataset(ds);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].rule, kRuleDuplicateDoc);
  EXPECT_EQ(report[0].record, 1u);
}

TEST(ValidateDataset, ShortImpression) {
  auto ds = two_record_dataset();
  ds.records[0].impression.docs.pop_back();
  ds.records[0].clicks.pop_back();
  const auto report = validate_dataset(ds);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].rule, kRuleLengthMismatch);
  EXPECT_EQ(report[0].record, 0u);
}

TEST(ValidateDataset, OtherRules) {
  auto ds = two_record_dataset();
  ds.records[0].clicks = {0, 2, 0};
  ds.records[1].impression.docs[0] = DocId(9);
  ds.records[1].impression.query = QueryId("other");
  ds.records[1].clicks.pop_back();
  const auto report = validate_dataset(ds);
  EXPECT_EQ(count_rule(report, kRuleClickValue), 1u);
  EXPECT_EQ(count_rule(report, kRuleQueryMismatch), 1u);
  EXPECT_EQ(count_rule(report, kRuleClickLength), 1u);
  EXPECT_GE(count_rule(report, kRuleMissingFeatures), 1u);
}

TEST(ValidateDataset, NonFiniteFeatureAndEmptyQuery) {
  auto ds = two_record_dataset();
  ds.features.set_query(QueryId("q"), {0, 0, NAN, 0, 0, 1, 1, 1});
  ds.records[0].query = QueryId("");
  const auto report = validate_dataset(ds);
  EXPECT_EQ(count_rule(report, kRuleNonFinite), 1u);
  EXPECT_EQ(count_rule(report, kRuleEmptyQuery), 1u);
}

TEST(ValidateDataset, Pure) {
  auto ds = two_record_dataset();
  ds.records[0].impression.docs[1] = DocId(0);
  const auto a = validate_dataset(ds);
  const auto b = validate_dataset(ds);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].rule, b[i].rule);
    EXPECT_EQ(a[i].record, b[i].record);
    EXPECT_EQ(a[i].detail, b[i].detail);
  }
}

TEST(FeatureStore, RowLookup) {
  FeatureStore fs(2);
  fs.set_query(QueryId("a"), {1, 2, 3, 4});
  EXPECT_EQ(fs.num_docs(QueryId("a")), 2u);
  EXPECT_TRUE(fs.contains(QueryId("a"), DocId(1)));
  EXPECT_FALSE(fs.contains(QueryId("a"), DocId(2)));
  EXPECT_DOUBLE_EQ(fs.row(QueryId("a"), DocId(1))[0], 3.0);
  EXPECT_THROW(fs.row(QueryId("b"), DocId(0)), std::out_of_range);
  EXPECT_THROW(fs.set_query(QueryId("c"), {1, 2, 3}), std::invalid_argument);
}

TEST(KendallTau, Examples) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_DOUBLE_EQ(kendall_tau(a, std::vector<double>{10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(kendall_tau(a, std::vector<double>{3, 2, 1}), -1.0);
  // (5 concordant - 1 discordant) / 6 pairs
  EXPECT_NEAR(kendall_tau(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}),
              2.0 / 3.0, 1e-15);
}

TEST(KendallTau, Errors) {
  EXPECT_THROW(kendall_tau(std::vector<double>{1, 2}, std::vector<double>{1}), std::invalid_argument);
  EXPECT_THROW(kendall_tau(std::vector<double>{1}, std::vector<double>{1}), std::invalid_argument);
  EXPECT_TRUE(std::isnan(kendall_tau(std::vector<double>{1, 1}, std::vector<double>{1, 2})));
}

TEST(KendallTau, TauBWithTies) {
  // a = [1,1,2,3], b = [1,2,3,4]: C-D = 5, untied pairs 5 and 6.
  EXPECT_NEAR(kendall_tau(std::vector<double>{1, 1, 2, 3}, std::vector<double>{1, 2, 3, 4}),
              5.0 / std::sqrt(30.0), 1e-15);
}

TEST(KendallTau, Properties) {
  Rng rng(7);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + t % 15;
    std::vector<double> a(n), b(n), fa(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = n01(rng);
      b[i] = std::round(n01(rng) * 2.0);  // ties likely
      fa[i] = std::exp(3.0 * a[i]) + 1.0;
    }
    EXPECT_DOUBLE_EQ(kendall_tau(a, a), 1.0);
    const double ab = kendall_tau(a, b);
    if (std::isnan(ab)) continue;
    EXPECT_DOUBLE_EQ(ab, kendall_tau(b, a));
    EXPECT_DOUBLE_EQ(ab, kendall_tau(fa, b));
    EXPECT_GE(ab, -1.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(SeedLadder, DistinctAndStable) {
  EXPECT_EQ(derive_seed(1, "data"), derive_seed(1, "data"));
  EXPECT_NE(derive_seed(1, "data"), derive_seed(1, "split"));
  EXPECT_NE(derive_seed(1, std::uint64_t{0}), derive_seed(1, std::uint64_t{1}));
  EXPECT_NE(derive_seed(1, std::uint64_t{0}), derive_seed(2, std::uint64_t{0}));
}
