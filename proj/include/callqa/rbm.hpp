#pragma once
// Restricted Boltzmann machine with [0,1]-valued visible units, trained by
// one-step contrastive divergence. Hidden activation probabilities are the
// learned features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "callqa/common.hpp"
#include "json.hpp"

namespace callqa {

struct RbmHyperparameters {
  double learning_rate = 0.1;
  std::size_t batch_size = 8;
  std::size_t n_hidden = 2;
  int epochs = 20;

  bool operator==(const RbmHyperparameters&) const = default;
};

struct RbmModel {
  std::size_t n_visible = 0;
  std::size_t n_hidden = 0;
  Matrix weights;                // n_visible x n_hidden
  std::vector<double> visible_bias;
  std::vector<double> hidden_bias;
  RbmHyperparameters hyper;
  std::uint64_t seed = 0;

  bool operator==(const RbmModel&) const = default;

  bool parameters_finite() const {
    return all_finite(weights.data()) && all_finite(visible_bias) && all_finite(hidden_bias);
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline RbmModel rbm_init(std::size_t n_visible, std::size_t n_hidden, std::uint64_t seed) {
  if (n_visible == 0 || n_hidden == 0) throw std::invalid_argument("RBM dimensions must be positive");
  RbmModel m;
  m.n_visible = n_visible;
  m.n_hidden = n_hidden;
  m.weights = Matrix(n_visible, n_hidden);
  m.visible_bias.assign(n_visible, 0.0);
  m.hidden_bias.assign(n_hidden, 0.0);
  m.hyper.n_hidden = n_hidden;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.01);
  for (double& w : m.weights.data()) w = normal(rng);
  return m;
}

// ---------------------------------------------------------------------------
// Min-max adapter mapping unbounded features onto [0, 1] visible units.

struct MinMaxScaler {
  std::vector<double> min;
  std::vector<double> max;

  bool operator==(const MinMaxScaler&) const = default;
};

// All entries lie in [0, 1]; held-out values outside the fitted range are clamped.
struct ScaledInput {
  Matrix values;
};

inline MinMaxScaler minmax_scale_fit(const Matrix& train) {
  if (train.rows() == 0) throw DataError("min-max fit needs at least one row");
  MinMaxScaler s;
  for (std::size_t j = 0; j < train.cols(); ++j) {
    auto col = train.column(j);
    auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    if (!(*lo < *hi)) throw DataError("feature " + std::to_string(j) + " is constant; cannot min-max scale");
    s.min.push_back(*lo);
    s.max.push_back(*hi);
  }
  return s;
}

inline ScaledInput minmax_scale_apply(const MinMaxScaler& s, const Matrix& x) {
  if (x.cols() != s.min.size())
    throw std::invalid_argument("scaler expects " + std::to_string(s.min.size()) + " columns");
  ScaledInput out{x};
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j)
      out.values(r, j) = std::clamp((x(r, j) - s.min[j]) / (s.max[j] - s.min[j]), 0.0, 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Contrastive divergence.

namespace detail {

inline void check_visible(const RbmModel& model, const Matrix& v) {
  if (v.cols() != model.n_visible)
    throw std::invalid_argument("RBM expects " + std::to_string(model.n_visible) + " visible columns, got " +
                                std::to_string(v.cols()));
}

// out[j] = sigmoid(c_j + sum_i v_i W_ij)
inline void hidden_probabilities(const RbmModel& m, std::span<const double> v, std::span<double> out) {
  for (std::size_t j = 0; j < m.n_hidden; ++j) {
    double a = m.hidden_bias[j];
    for (std::size_t i = 0; i < m.n_visible; ++i) a += v[i] * m.weights(i, j);
    out[j] = sigmoid(a);
  }
}

inline void visible_probabilities(const RbmModel& m, std::span<const double> h, std::span<double> out) {
  for (std::size_t i = 0; i < m.n_visible; ++i) {
    double a = m.visible_bias[i];
    auto row = m.weights.row(i);
    for (std::size_t j = 0; j < m.n_hidden; ++j) a += row[j] * h[j];
    out[i] = sigmoid(a);
  }
}

}  // namespace detail

// CD-1 sufficient statistics for one mini-batch, already divided by the batch
// size: positive minus negative phase for W, b and c.
struct Cd1Gradient {
  Matrix weights;
  std::vector<double> visible_bias;
  std::vector<double> hidden_bias;
  double reconstruction_error = 0.0;  // summed squared error over the batch
};

// Batch rows are given as indices into data. Positive hidden phase is sampled;
// the negative visible phase uses probabilities.
template <class Engine>
Cd1Gradient cd1_gradient(const RbmModel& m, const Matrix& data, std::span<const std::size_t> batch, Engine& rng) {
  Cd1Gradient g{Matrix(m.n_visible, m.n_hidden), std::vector<double>(m.n_visible, 0.0),
                std::vector<double>(m.n_hidden, 0.0), 0.0};
  std::vector<double> h_pos(m.n_hidden), h_sample(m.n_hidden), v_neg(m.n_visible), h_neg(m.n_hidden);
  for (std::size_t idx : batch) {
    auto v = data.row(idx);
    detail::hidden_probabilities(m, v, h_pos);
    for (std::size_t j = 0; j < m.n_hidden; ++j) h_sample[j] = uniform01(rng) < h_pos[j] ? 1.0 : 0.0;
    detail::visible_probabilities(m, h_sample, v_neg);
    detail::hidden_probabilities(m, v_neg, h_neg);
    for (std::size_t i = 0; i < m.n_visible; ++i) {
      auto w = g.weights.row(i);
      for (std::size_t j = 0; j < m.n_hidden; ++j) w[j] += v[i] * h_pos[j] - v_neg[i] * h_neg[j];
      g.visible_bias[i] += v[i] - v_neg[i];
      g.reconstruction_error += (v[i] - v_neg[i]) * (v[i] - v_neg[i]);
    }
    for (std::size_t j = 0; j < m.n_hidden; ++j) g.hidden_bias[j] += h_pos[j] - h_neg[j];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& w : g.weights.data()) w *= inv;
  for (double& b : g.visible_bias) b *= inv;
  for (double& c : g.hidden_bias) c *= inv;
  return g;
}

// One pass over shuffled mini-batches (the last short batch is kept). Returns
// the mean squared reconstruction error per row. Throws TrainingDivergedError
// if any parameter becomes non-finite.
template <class Engine>
double cd1_epoch(RbmModel& m, const ScaledInput& input, Engine& rng, int epoch = 1) {
  const Matrix& data = input.values;
  detail::check_visible(m, data);
  if (data.rows() == 0) return 0.0;
  const std::size_t batch_size = std::max<std::size_t>(1, m.hyper.batch_size);
  const double rate = m.hyper.learning_rate;
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  double total_error = 0.0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t stop = std::min(order.size(), start + batch_size);
    std::span<const std::size_t> batch(order.data() + start, stop - start);
    auto g = cd1_gradient(m, data, batch, rng);
    total_error += g.reconstruction_error;
    for (std::size_t k = 0; k < g.weights.data().size(); ++k) m.weights.data()[k] += rate * g.weights.data()[k];
    for (std::size_t i = 0; i < m.n_visible; ++i) m.visible_bias[i] += rate * g.visible_bias[i];
    for (std::size_t j = 0; j < m.n_hidden; ++j) m.hidden_bias[j] += rate * g.hidden_bias[j];
    if (!m.parameters_finite()) throw TrainingDivergedError(epoch);
  }
  return total_error / static_cast<double>(data.rows());
}

// Runs hyper.epochs epochs with a shuffling stream seeded from shuffle_seed.
// Returns the per-epoch reconstruction errors.
inline std::vector<double> rbm_train(RbmModel& m, const ScaledInput& input, std::uint64_t shuffle_seed) {
  std::mt19937_64 rng(shuffle_seed);
  std::vector<double> errors;
  for (int e = 1; e <= m.hyper.epochs; ++e) errors.push_back(cd1_epoch(m, input, rng, e));
  return errors;
}

// Deterministic hidden probabilities, clamped to the open interval (0, 1).
inline Matrix hidden_features(const RbmModel& m, const ScaledInput& input) {
  const Matrix& x = input.values;
  detail::check_visible(m, x);
  Matrix out(x.rows(), m.n_hidden);
  constexpr double kLo = std::numeric_limits<double>::min();
  const double kHi = std::nextafter(1.0, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    detail::hidden_probabilities(m, x.row(r), out.row(r));
    for (double& p : out.row(r)) p = std::clamp(p, kLo, kHi);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact log-likelihood by brute-force enumeration of every joint binary state.
// Verification oracle; refuses models with more than 20 units in total.

inline constexpr std::size_t kMaxEnumerableUnits = 20;

namespace detail {

inline double negative_energy(const RbmModel& m, std::span<const double> v, std::span<const double> h) {
  double e = 0.0;
  for (std::size_t i = 0; i < m.n_visible; ++i) {
    e += m.visible_bias[i] * v[i];
    for (std::size_t j = 0; j < m.n_hidden; ++j) e += v[i] * m.weights(i, j) * h[j];
  }
  for (std::size_t j = 0; j < m.n_hidden; ++j) e += m.hidden_bias[j] * h[j];
  return e;
}

inline void bits_to_state(std::uint64_t bits, std::span<double> out) {
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<double>((bits >> k) & 1u);
}

inline double log_sum_exp(const std::vector<double>& xs) {
  double hi = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - hi);
  return hi + std::log(s);
}

// log sum_h exp(-E(v, h)) by enumerating h.
inline double log_unnormalized_marginal(const RbmModel& m, std::span<const double> v) {
  std::vector<double> h(m.n_hidden), terms;
  terms.reserve(std::size_t{1} << m.n_hidden);
  for (std::uint64_t hb = 0; hb < (std::uint64_t{1} << m.n_hidden); ++hb) {
    bits_to_state(hb, h);
    terms.push_back(negative_energy(m, v, h));
  }
  return log_sum_exp(terms);
}

}  // namespace detail

inline double log_partition_function(const RbmModel& m) {
  if (m.n_visible + m.n_hidden > kMaxEnumerableUnits)
    throw std::invalid_argument("RBM too large for exact enumeration");
  std::vector<double> v(m.n_visible), h(m.n_hidden), terms;
  for (std::uint64_t vb = 0; vb < (std::uint64_t{1} << m.n_visible); ++vb) {
    detail::bits_to_state(vb, v);
    for (std::uint64_t hb = 0; hb < (std::uint64_t{1} << m.n_hidden); ++hb) {
      detail::bits_to_state(hb, h);
      terms.push_back(detail::negative_energy(m, v, h));
    }
  }
  return detail::log_sum_exp(terms);
}

inline double exact_log_likelihood(const RbmModel& m, const Matrix& data) {
  if (m.n_visible + m.n_hidden > kMaxEnumerableUnits)
    throw std::invalid_argument("RBM too large for exact enumeration");
  detail::check_visible(m, data);
  const double log_z = log_partition_function(m);
  double ll = 0.0;
  for (std::size_t r = 0; r < data.rows(); ++r) ll += detail::log_unnormalized_marginal(m, data.row(r)) - log_z;
  return ll;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const RbmModel& m) {
  return {{"schema_version", kSchemaVersion},
          {"n_visible", m.n_visible},
          {"n_hidden", m.n_hidden},
          {"W", m.weights.data()},
          {"b", m.visible_bias},
          {"c", m.hidden_bias},
          {"hyperparameters",
           {{"learning_rate", m.hyper.learning_rate},
            {"batch_size", m.hyper.batch_size},
            {"n_hidden", m.hyper.n_hidden},
            {"epochs", m.hyper.epochs}}},
          {"seed", m.seed}};
}

inline RbmModel rbm_from_json(const nlohmann::json& j) {
  RbmModel m;
  m.n_visible = j.at("n_visible").get<std::size_t>();
  m.n_hidden = j.at("n_hidden").get<std::size_t>();
  auto w = j.at("W").get<std::vector<double>>();
  if (w.size() != m.n_visible * m.n_hidden) throw DataError("RBM weight count does not match dimensions");
  m.weights = Matrix(m.n_visible, m.n_hidden);
  m.weights.data() = std::move(w);
  m.visible_bias = j.at("b").get<std::vector<double>>();
  m.hidden_bias = j.at("c").get<std::vector<double>>();
  if (m.visible_bias.size() != m.n_visible || m.hidden_bias.size() != m.n_hidden)
    throw DataError("RBM bias sizes do not match dimensions");
  const auto& h = j.at("hyperparameters");
  m.hyper.learning_rate = h.at("learning_rate").get<double>();
  m.hyper.batch_size = h.at("batch_size").get<std::size_t>();
  m.hyper.n_hidden = h.at("n_hidden").get<std::size_t>();
  m.hyper.epochs = h.at("epochs").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

inline nlohmann::json to_json(const MinMaxScaler& s) { return {{"min", s.min}, {"max", s.max}}; }

inline MinMaxScaler scaler_from_json(const nlohmann::json& j) {
  MinMaxScaler s{j.at("min").get<std::vector<double>>(), j.at("max").get<std::vector<double>>()};
  if (s.min.size() != s.max.size()) throw DataError("scaler min/max sizes differ");
  return s;
}

}  // namespace callqa
