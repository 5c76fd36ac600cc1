#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "callqa/rbm.hpp"
#include "oracles.hpp"

using namespace callqa;

namespace {

oracle::Rbm to_oracle(const RbmModel& m) {
  return {m.n_visible, m.n_hidden, m.weights.data(), m.visible_bias, m.hidden_bias};
}

Matrix rows_from_bits(const std::vector<std::uint64_t>& bits, std::size_t nv) {
  Matrix m(bits.size(), nv);
  for (std::size_t r = 0; r < bits.size(); ++r)
    for (std::size_t i = 0; i < nv; ++i) m(r, i) = static_cast<double>((bits[r] >> i) & 1u);
  return m;
}

}  // namespace

TEST(RbmInit, DeterministicWithZeroBiases) {
  auto a = rbm_init(4, 2, 42), b = rbm_init(4, 2, 42);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.visible_bias, std::vector<double>(4, 0.0));
  EXPECT_EQ(a.hidden_bias, std::vector<double>(2, 0.0));
  EXPECT_NE(a.weights, rbm_init(4, 2, 43).weights);
  EXPECT_THROW(rbm_init(0, 2, 1), std::invalid_argument);
  EXPECT_THROW(rbm_init(2, 0, 1), std::invalid_argument);
}

TEST(RbmInit, WeightScale) {
  auto m = rbm_init(50, 40, 7);
  double s = 0, ss = 0;
  for (double w : m.weights.data()) {
    s += w;
    ss += w * w;
  }
  double n = static_cast<double>(m.weights.data().size());
  EXPECT_NEAR(s / n, 0.0, 0.002);
  EXPECT_NEAR(std::sqrt(ss / n), 0.01, 0.001);
}

TEST(MinMax, Examples) {
  Matrix m(3, 1);
  m.data() = {2, 4, 6};
  auto s = minmax_scale_fit(m);
  EXPECT_EQ(minmax_scale_apply(s, m).values.data(), (std::vector<double>{0, 0.5, 1}));
  Matrix held(2, 1);
  held.data() = {8, -3};
  EXPECT_EQ(minmax_scale_apply(s, held).values.data(), (std::vector<double>{1, 0}));
  Matrix flat(2, 1);
  flat.data() = {3, 3};
  EXPECT_THROW(minmax_scale_fit(flat), DataError);
  EXPECT_THROW(minmax_scale_apply(s, Matrix(1, 2)), std::invalid_argument);
}

TEST(Cd1, ZeroLearningRateIsNoOp) {
  std::mt19937_64 data_rng(1);
  Matrix x(37, 5);
  for (double& v : x.data()) v = uniform01(data_rng);
  auto m = rbm_init(5, 3, 9);
  m.hyper.learning_rate = 0.0;
  m.hyper.batch_size = 4;
  const auto before = m;
  std::mt19937_64 rng(2);
  for (int e = 0; e < 5; ++e) cd1_epoch(m, ScaledInput{x}, rng);
  EXPECT_EQ(m, before);
}

TEST(Cd1, ReconstructionErrorDropsOnTwoPatterns) {
  Matrix x(100, 2);
  for (std::size_t r = 0; r < 100; ++r) {
    x(r, 0) = r % 2 ? 1.0 : 0.0;
    x(r, 1) = r % 2 ? 0.0 : 1.0;
  }
  auto m = rbm_init(2, 2, 7);
  m.hyper = {0.1, 10, 2, 200};
  auto errors = rbm_train(m, ScaledInput{x}, 7);
  ASSERT_EQ(errors.size(), 200u);
  EXPECT_LT(errors.back(), errors.front());
}

TEST(Cd1, LikelihoodIncreasesOnTinyModel) {
  const std::vector<std::uint64_t> bits{0b011, 0b011, 0b100, 0b110};
  auto x = rows_from_bits(bits, 3);
  auto m = rbm_init(3, 2, 7);
  double before = exact_log_likelihood(m, x);
  m.hyper = {0.1, 4, 2, 500};
  rbm_train(m, ScaledInput{x}, 7);
  double after = exact_log_likelihood(m, x);
  EXPECT_GT(after, before);
  EXPECT_NEAR(after, oracle::log_likelihood(to_oracle(m), bits), 1e-9);
}

TEST(Cd1, DeterministicTraining) {
  std::mt19937_64 data_rng(3);
  Matrix x(64, 4);
  for (double& v : x.data()) v = uniform01(data_rng);
  auto run = [&] {
    auto m = rbm_init(4, 6, 11);
    m.hyper = {0.05, 8, 6, 10};
    auto err = rbm_train(m, ScaledInput{x}, 12);
    return std::make_pair(m, err);
  };
  auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Cd1, DivergenceIsReported) {
  // Sigmoid units saturate, so finite rates stay bounded; a non-finite entry
  // is the dependable way to poison the parameters.
  Matrix x(10, 2);
  for (std::size_t r = 0; r < 10; ++r) x(r, 0) = x(r, 1) = r % 2;
  x(7, 1) = NAN;
  auto m = rbm_init(2, 2, 1);
  m.hyper = {0.1, 2, 2, 3};
  try {
    rbm_train(m, ScaledInput{x}, 1);
    FAIL() << "no divergence";
  } catch (const TrainingDivergedError& e) {
    EXPECT_EQ(e.epoch(), 1);
  }
  EXPECT_THROW(
      [&] {
        std::mt19937_64 rng(1);
        auto mm = rbm_init(3, 2, 1);
        cd1_epoch(mm, ScaledInput{x}, rng);
      }(),
      std::invalid_argument);
}

TEST(Cd1, UpdateDirectionAgreesWithExactGradient) {
  RbmModel m = rbm_init(2, 2, 5);
  m.weights.data() = {0.5, -0.3, 0.2, 0.4};
  m.visible_bias = {0.1, -0.2};
  m.hidden_bias = {0.05, 0.1};
  const std::vector<std::uint64_t> bits{0b01, 0b10, 0b11, 0b01};
  auto x = rows_from_bits(bits, 2);
  std::vector<std::size_t> batch{0, 1, 2, 3};
  std::mt19937_64 rng(2024);
  std::vector<double> mean_update(4, 0.0);
  for (int s = 0; s < 10000; ++s) {
    auto g = cd1_gradient(m, x, batch, rng);
    for (std::size_t k = 0; k < 4; ++k) mean_update[k] += g.weights.data()[k] / 10000.0;
  }
  auto exact = oracle::weight_gradient(to_oracle(m), bits);
  double dot = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    dot += mean_update[k] * exact[k];
    na += mean_update[k] * mean_update[k];
    nb += exact[k] * exact[k];
  }
  EXPECT_GT(dot / std::sqrt(na * nb), 0.0);
}

TEST(HiddenFeatures, Examples) {
  auto m = rbm_init(3, 2, 1);
  std::fill(m.weights.data().begin(), m.weights.data().end(), 0.0);
  Matrix x(4, 3, 0.7);
  auto flat = hidden_features(m, ScaledInput{x});
  for (double h : flat.data()) EXPECT_EQ(h, 0.5);

  m.hidden_bias = {50.0, 0.0};
  auto h = hidden_features(m, ScaledInput{x});
  EXPECT_GT(h(0, 0), 0.999999);
  EXPECT_LT(h(0, 0), 1.0);

  auto one = rbm_init(1, 1, 1);
  one.weights(0, 0) = 2.0;
  one.hidden_bias = {-1.0};
  EXPECT_NEAR(hidden_features(one, ScaledInput{Matrix(1, 1, 1.0)})(0, 0), 0.731059, 1e-6);
  EXPECT_THROW(hidden_features(one, ScaledInput{Matrix(1, 2)}), std::invalid_argument);
}

TEST(HiddenFeatures, StrictlyInsideUnitInterval) {
  auto m = rbm_init(2, 3, 1);
  m.hidden_bias = {800.0, -800.0, 0.0};
  auto h = hidden_features(m, ScaledInput{Matrix(2, 2, 1.0)});
  for (double p : h.data()) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(ExactLikelihood, UniformModel) {
  auto m = rbm_init(3, 2, 1);
  std::fill(m.weights.data().begin(), m.weights.data().end(), 0.0);
  auto x = rows_from_bits({0b000, 0b101, 0b111, 0b010, 0b001}, 3);
  EXPECT_NEAR(exact_log_likelihood(m, x), -3.0 * 5 * std::log(2.0), 1e-12);
}

TEST(ExactLikelihood, SaturatedVisibleUnit) {
  auto m = rbm_init(1, 2, 1);
  std::fill(m.weights.data().begin(), m.weights.data().end(), 0.0);
  m.visible_bias = {10.0};
  Matrix x(20, 1, 1.0);
  double ll = exact_log_likelihood(m, x);
  EXPECT_LT(ll, 0.0);
  EXPECT_GT(ll, -0.01 * 20);
}

TEST(ExactLikelihood, MatchesOracleAndRefusesLargeModels) {
  auto m = rbm_init(4, 3, 77);
  for (double& w : m.weights.data()) w *= 100.0;
  m.visible_bias = {0.3, -0.1, 0.2, 0.0};
  m.hidden_bias = {-0.4, 0.5, 0.1};
  const std::vector<std::uint64_t> bits{0, 5, 9, 15, 3};
  EXPECT_NEAR(exact_log_likelihood(m, rows_from_bits(bits, 4)), oracle::log_likelihood(to_oracle(m), bits), 1e-9);
  EXPECT_THROW(exact_log_likelihood(rbm_init(12, 9, 1), Matrix(1, 12)), std::invalid_argument);
}

TEST(RbmJson, RoundTrip) {
  auto m = rbm_init(4, 3, 5);
  m.hyper = {0.004281332398719396, 16, 3, 20};
  auto back = rbm_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(back, m);
  MinMaxScaler s{{0.0, -1.5}, {1.0, 2.25}};
  EXPECT_EQ(scaler_from_json(nlohmann::json::parse(to_json(s).dump())), s);
}
