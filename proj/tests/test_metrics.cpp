#include <gtest/gtest.h>

#include <random>

#include "callqa/metrics.hpp"
#include "oracles.hpp"

using namespace callqa;

TEST(Confusion, Examples) {
  std::vector<int> t{1, 1, 0, 0}, p{1, 0, 0, 1};
  EXPECT_EQ(confusion(t, p), (ConfusionMatrix{1, 1, 1, 1}));
  auto same = confusion(t, t);
  EXPECT_EQ(same.fp, 0u);
  EXPECT_EQ(same.fn, 0u);
  EXPECT_THROW(confusion(t, std::vector<int>{1, 0}), std::invalid_argument);
  EXPECT_THROW(confusion(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
  EXPECT_THROW(confusion(std::vector<int>{2}, std::vector<int>{1}), std::invalid_argument);
}

TEST(Ratios, Examples) {
  ConfusionMatrix cm{1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(*precision(cm), 0.5);
  EXPECT_DOUBLE_EQ(*recall(cm), 0.5);
  EXPECT_DOUBLE_EQ(*f1(cm), 0.5);
  ConfusionMatrix reported{662, 17, 54, 3000};
  EXPECT_NEAR(*recall(reported), 662.0 / 716.0, 1e-12);
  EXPECT_NEAR(*recall(reported), 0.9246, 1e-4);
  EXPECT_FALSE(precision(ConfusionMatrix{0, 0, 3, 5}).has_value());
  EXPECT_FALSE(f1(ConfusionMatrix{0, 0, 3, 5}).has_value());
}

TEST(Mce, Examples) {
  EXPECT_NEAR(*mce(ConfusionMatrix{662, 0, 54, 0}), 0.0754, 1e-4);
  EXPECT_EQ(*mce(ConfusionMatrix{5, 2, 0, 9}), 0.0);
  EXPECT_FALSE(mce(ConfusionMatrix{0, 4, 0, 9}).has_value());
}

TEST(Averaging, Examples) {
  std::vector<int> t{1, 1, 0, 0};
  for (auto mode : {Averaging::kPositive, Averaging::kNegative, Averaging::kMacro, Averaging::kWeighted}) {
    EXPECT_EQ(*averaged_recall(t, t, mode), 1.0);
    EXPECT_EQ(*averaged_precision(t, t, mode), 1.0);
    EXPECT_EQ(*averaged_f1(t, t, mode), 1.0);
  }
  std::vector<int> p{1, 0, 0, 0};
  EXPECT_DOUBLE_EQ(*averaged_recall(t, p, Averaging::kPositive), 0.5);
  EXPECT_DOUBLE_EQ(*averaged_recall(t, p, Averaging::kNegative), 1.0);
  EXPECT_DOUBLE_EQ(*averaged_recall(t, p, Averaging::kMacro), 0.75);
  EXPECT_DOUBLE_EQ(*averaged_recall(t, p, Averaging::kWeighted), 0.75);
}

TEST(Averaging, AbsentClassMakesAveragesUndefined) {
  std::vector<int> t{0, 0, 0}, p{0, 1, 0};
  EXPECT_FALSE(averaged_recall(t, p, Averaging::kPositive).has_value());
  EXPECT_TRUE(averaged_recall(t, p, Averaging::kNegative).has_value());
  EXPECT_FALSE(averaged_recall(t, p, Averaging::kMacro).has_value());
  EXPECT_FALSE(averaged_recall(t, p, Averaging::kWeighted).has_value());
}

TEST(Averaging, WeightedReconstructionOfReportedScore) {
  // supports 3169 negative / 716 positive with class recalls 0.984 and 0.865
  double weighted = (3169.0 * 0.984 + 716.0 * 0.865) / 3885.0;
  EXPECT_NEAR(weighted, 0.962, 5e-4);
  // the same through a confusion matrix with those recalls, to count rounding
  ConfusionMatrix cm{619, 51, 97, 3118};
  auto r = average(cm, recall);
  EXPECT_NEAR(*r.neg, 0.984, 5e-4);
  EXPECT_NEAR(*r.pos, 0.865, 5e-4);
  EXPECT_NEAR(*r.weighted, 0.962, 5e-4);
}

TEST(Metrics, BruteForceRecount) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + rng() % 10000;
    double pt = (trial % 10) / 10.0 + 0.05, pp = ((trial * 3) % 10) / 10.0 + 0.05;
    std::bernoulli_distribution bt(pt), bp(pp);
    std::vector<int> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = bt(rng);
      p[i] = bp(rng);
    }
    auto c = oracle::recount(t, p);
    auto b = evaluate(t, p);
    ASSERT_EQ(b.confusion, (ConfusionMatrix{c.tp, c.fp, c.fn, c.tn}));
    ASSERT_EQ(b.confusion.total(), n);
    auto div = [](std::size_t a, std::size_t d) { return d ? std::optional<double>(double(a) / double(d)) : std::nullopt; };
    EXPECT_EQ(b.precision.pos, div(c.tp, c.tp + c.fp));
    EXPECT_EQ(b.precision.neg, div(c.tn, c.tn + c.fn));
    EXPECT_EQ(b.recall.pos, div(c.tp, c.tp + c.fn));
    EXPECT_EQ(b.recall.neg, div(c.tn, c.tn + c.fp));
    EXPECT_EQ(b.mce, div(c.fn, c.tp + c.fn));
    if (b.recall.pos && b.recall.neg) {
      double np = double(c.tp + c.fn), nn = double(c.tn + c.fp);
      EXPECT_NEAR(*b.recall.weighted, (np * *b.recall.pos + nn * *b.recall.neg) / n, 1e-12);
      EXPECT_NEAR(*b.recall.macro, 0.5 * (*b.recall.pos + *b.recall.neg), 1e-12);
      EXPECT_NEAR(*b.mce, 1.0 - *b.recall.pos, 1e-12);
    }
    if (b.precision.pos && b.recall.pos && *b.precision.pos + *b.recall.pos > 0) {
      double f = 2 * *b.precision.pos * *b.recall.pos / (*b.precision.pos + *b.recall.pos);
      EXPECT_NEAR(*b.f1.pos, f, 1e-12);
    }
  }
}

TEST(Selection, NamesRoundTrip) {
  for (auto m : {SelectionMetric::kRecallWeighted, SelectionMetric::kRecallMacro, SelectionMetric::kRecallPositive,
                 SelectionMetric::kRecallNegative})
    EXPECT_EQ(parse_selection_metric(to_string(m)), m);
  EXPECT_FALSE(parse_selection_metric("accuracy"));
}

TEST(MetricsJson, UndefinedIsNullAndRoundTrips) {
  auto b = evaluate(std::vector<int>{0, 0, 1}, std::vector<int>{0, 0, 0});
  auto j = nlohmann::json::parse(to_json(b).dump());
  EXPECT_TRUE(j["precision"]["pos"].is_null());
  EXPECT_EQ(j["confusion"]["fn"], 1);
  auto back = metrics_from_json(j);
  EXPECT_EQ(back.confusion, b.confusion);
  EXPECT_EQ(back.recall.weighted, b.recall.weighted);
  EXPECT_EQ(back.precision.pos, b.precision.pos);
  EXPECT_EQ(format_optional(back.precision.pos), "n/a");
}
