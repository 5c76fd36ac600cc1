#pragma once
// Feature-wise Gaussianizing transforms: z-score, Box-Cox and Yeo-Johnson
// with a maximum-likelihood power parameter.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "callqa/common.hpp"
#include "json.hpp"

namespace callqa {

inline double box_cox(double x, double lambda) {
  if (!(x > 0.0)) throw std::domain_error("box_cox requires x > 0");
  if (lambda == 0.0) return std::log(x);
  return std::expm1(lambda * std::log(x)) / lambda;
}

// For x >= 0 this is box_cox(x + 1, lambda); for x < 0 it mirrors Box-Cox of
// (1 - x) with power 2 - lambda.
inline double yeo_johnson(double x, double lambda) {
  if (!std::isfinite(x) || !std::isfinite(lambda)) throw std::domain_error("yeo_johnson requires finite input");
  if (x >= 0.0) return box_cox(x + 1.0, lambda);
  return -box_cox(1.0 - x, 2.0 - lambda);
}

inline constexpr double kLambdaMin = -5.0;
inline constexpr double kLambdaMax = 5.0;

// Profile log-likelihood of a Yeo-Johnson power parameter:
//   -(n/2) ln(var_biased(transformed)) + (lambda - 1) * sum sign(x) ln(|x| + 1)
inline double yeo_johnson_log_likelihood(std::span<const double> column, double lambda) {
  const auto n = static_cast<double>(column.size());
  double mean = 0.0, jacobian = 0.0;
  std::vector<double> t(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) {
    t[i] = yeo_johnson(column[i], lambda);
    mean += t[i];
    jacobian += std::copysign(std::log1p(std::abs(column[i])), column[i]);
  }
  mean /= n;
  double var = 0.0;
  for (double v : t) var += (v - mean) * (v - mean);
  var /= n;
  if (!(var > 0.0) || !std::isfinite(var)) return -std::numeric_limits<double>::infinity();
  return -0.5 * n * std::log(var) + (lambda - 1.0) * jacobian;
}

namespace detail {

inline bool is_constant(std::span<const double> column) {
  for (double v : column)
    if (v != column.front()) return false;
  return true;
}

inline double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// ddof = 1
inline double sample_std(std::span<const double> xs, double mean) {
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

// Maximizes the profile log-likelihood over [-5, 5]. A coarse scan picks the
// bracket around the best grid point, then Brent's method refines it.
inline double fit_yeo_johnson_lambda(std::span<const double> column) {
  if (column.size() < 2) throw DataError("need at least two values to fit lambda");
  if (!all_finite(column)) throw DataError("non-finite value in column");
  if (detail::is_constant(column)) throw DataError("cannot fit lambda on a constant column");

  constexpr int kCoarse = 100;
  constexpr double kStep = (kLambdaMax - kLambdaMin) / kCoarse;
  int best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kCoarse; ++i) {
    double ll = yeo_johnson_log_likelihood(column, kLambdaMin + i * kStep);
    if (ll > best_ll) {
      best_ll = ll;
      best = i;
    }
  }
  double lo = kLambdaMin + std::max(0, best - 1) * kStep;
  double hi = kLambdaMin + std::min(kCoarse, best + 1) * kStep;
  auto negated = [&](double lambda) { return -yeo_johnson_log_likelihood(column, lambda); };
  // 40 bits of relative precision is well below 1e-6 in lambda on this interval.
  auto [lambda, neg_ll] = boost::math::tools::brent_find_minima(negated, lo, hi, 40);
  if (-neg_ll < best_ll) return kLambdaMin + best * kStep;
  return lambda;
}

enum class TransformKind { kIdentity, kZScore, kYeoJohnson };

inline std::string to_string(TransformKind k) {
  switch (k) {
    case TransformKind::kIdentity: return "identity";
    case TransformKind::kZScore: return "zscore";
    case TransformKind::kYeoJohnson: return "yeo-johnson";
  }
  return "unknown";
}

inline std::optional<TransformKind> parse_transform_kind(std::string_view s) {
  if (s == "identity") return TransformKind::kIdentity;
  if (s == "zscore") return TransformKind::kZScore;
  if (s == "yeo-johnson") return TransformKind::kYeoJohnson;
  return std::nullopt;
}

struct FeatureTransform {
  std::optional<double> lambda;  // yeo-johnson only
  double mean = 0.0;
  double std = 1.0;

  bool operator==(const FeatureTransform&) const = default;
};

struct TransformModel {
  TransformKind kind = TransformKind::kIdentity;
  std::size_t d = 0;
  std::vector<FeatureTransform> per_feature;

  bool operator==(const TransformModel&) const = default;
};

namespace detail {

inline std::string feature_label(std::size_t j, std::span<const std::string> names) {
  if (j < names.size()) return "feature " + std::to_string(j) + " (" + names[j] + ")";
  return "feature " + std::to_string(j);
}

inline void check_fit_input(const Matrix& train) {
  if (train.rows() < 2) throw DataError("transform fit needs at least two rows");
  if (!all_finite(train.data())) throw DataError("transform fit input has non-finite entries");
}

inline void check_apply_dims(const TransformModel& model, const Matrix& x) {
  if (x.cols() != model.d)
    throw std::invalid_argument("transform expects " + std::to_string(model.d) + " columns, got " +
                                std::to_string(x.cols()));
}

}  // namespace detail

inline TransformModel zscore_fit(const Matrix& train, std::span<const std::string> names = {}) {
  detail::check_fit_input(train);
  TransformModel m{TransformKind::kZScore, train.cols(), {}};
  for (std::size_t j = 0; j < train.cols(); ++j) {
    auto col = train.column(j);
    if (detail::is_constant(col)) throw DataError(detail::feature_label(j, names) + " has zero variance");
    double mean = detail::mean_of(col);
    m.per_feature.push_back({std::nullopt, mean, detail::sample_std(col, mean)});
  }
  return m;
}

// Yeo-Johnson per column, then standardization of the transformed training
// columns; apply reuses the stored parameters unchanged.
inline TransformModel power_fit(const Matrix& train, std::span<const std::string> names = {}) {
  detail::check_fit_input(train);
  TransformModel m{TransformKind::kYeoJohnson, train.cols(), {}};
  for (std::size_t j = 0; j < train.cols(); ++j) {
    auto col = train.column(j);
    if (detail::is_constant(col)) throw DataError(detail::feature_label(j, names) + " is constant");
    double lambda = fit_yeo_johnson_lambda(col);
    for (double& v : col) v = yeo_johnson(v, lambda);
    double mean = detail::mean_of(col);
    double sd = detail::sample_std(col, mean);
    if (!(sd > 0.0)) throw DataError(detail::feature_label(j, names) + " collapses under the power transform");
    m.per_feature.push_back({lambda, mean, sd});
  }
  return m;
}

inline TransformModel identity_fit(const Matrix& train) {
  return {TransformKind::kIdentity, train.cols(), std::vector<FeatureTransform>(train.cols())};
}

inline TransformModel transform_fit(TransformKind kind, const Matrix& train, std::span<const std::string> names = {}) {
  switch (kind) {
    case TransformKind::kZScore: return zscore_fit(train, names);
    case TransformKind::kYeoJohnson: return power_fit(train, names);
    case TransformKind::kIdentity: break;
  }
  return identity_fit(train);
}

inline Matrix transform_apply(const TransformModel& model, const Matrix& x) {
  detail::check_apply_dims(model, x);
  Matrix out = x;
  if (model.kind == TransformKind::kIdentity) return out;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const auto& p = model.per_feature[j];
      double v = x(r, j);
      if (model.kind == TransformKind::kYeoJohnson) v = yeo_johnson(v, *p.lambda);
      out(r, j) = (v - p.mean) / p.std;
    }
  }
  return out;
}

inline Matrix zscore_apply(const TransformModel& model, const Matrix& x) { return transform_apply(model, x); }
inline Matrix power_apply(const TransformModel& model, const Matrix& x) { return transform_apply(model, x); }

inline nlohmann::json to_json(const TransformModel& m) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& p : m.per_feature) {
    nlohmann::json e{{"mean", p.mean}, {"std", p.std}};
    e["lambda"] = p.lambda ? nlohmann::json(*p.lambda) : nlohmann::json(nullptr);
    per.push_back(e);
  }
  return {{"schema_version", kSchemaVersion}, {"kind", to_string(m.kind)}, {"d", m.d}, {"per_feature", per}};
}

inline TransformModel transform_from_json(const nlohmann::json& j) {
  TransformModel m;
  auto kind = parse_transform_kind(j.at("kind").get<std::string>());
  if (!kind) throw DataError("unknown transform kind");
  m.kind = *kind;
  m.d = j.at("d").get<std::size_t>();
  for (const auto& e : j.at("per_feature")) {
    FeatureTransform p;
    p.mean = e.at("mean").get<double>();
    p.std = e.at("std").get<double>();
    if (e.contains("lambda") && !e.at("lambda").is_null()) p.lambda = e.at("lambda").get<double>();
    m.per_feature.push_back(p);
  }
  if (m.per_feature.size() != m.d) throw DataError("transform per_feature size does not match d");
  if (m.kind == TransformKind::kYeoJohnson)
    for (const auto& p : m.per_feature)
      if (!p.lambda || !std::isfinite(*p.lambda)) throw DataError("yeo-johnson transform missing lambda");
  return m;
}

}  // namespace callqa
