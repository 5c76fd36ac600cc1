#pragma once
// Binary classification metrics with malpractice (label 1) as the positive
// class. Undefined ratios are std::nullopt, never zero.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "callqa/common.hpp"
#include "json.hpp"

namespace callqa {

using Metric = std::optional<double>;

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;

  // The same counts with class 0 treated as positive.
  ConfusionMatrix swapped() const noexcept { return {tn, fn, fp, tp}; }
};

inline ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("label vectors differ in length");
  if (y_true.empty()) throw std::invalid_argument("no labels");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    int t = y_true[i], p = y_pred[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1)) throw std::invalid_argument("labels must be 0 or 1");
    if (t == 1)
      (p == 1 ? cm.tp : cm.fn)++;
    else
      (p == 1 ? cm.fp : cm.tn)++;
  }
  return cm;
}

namespace detail {
inline Metric ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace detail

inline Metric precision(const ConfusionMatrix& cm) { return detail::ratio(cm.tp, cm.tp + cm.fp); }
inline Metric recall(const ConfusionMatrix& cm) { return detail::ratio(cm.tp, cm.tp + cm.fn); }

inline Metric f1(const ConfusionMatrix& cm) {
  auto p = precision(cm), r = recall(cm);
  if (!p || !r || *p + *r == 0.0) return std::nullopt;
  return 2.0 * *p * *r / (*p + *r);
}

// Share of true malpractice calls predicted non-malpractice.
inline Metric mce(const ConfusionMatrix& cm) { return detail::ratio(cm.fn, cm.tp + cm.fn); }

enum class Averaging { kPositive, kNegative, kMacro, kWeighted };

struct AveragedMetric {
  Metric pos;
  Metric neg;
  Metric macro;
  Metric weighted;

  Metric get(Averaging a) const {
    switch (a) {
      case Averaging::kPositive: return pos;
      case Averaging::kNegative: return neg;
      case Averaging::kMacro: return macro;
      case Averaging::kWeighted: return weighted;
    }
    return std::nullopt;
  }
};

// Per-class terms treat that class as positive; macro is their plain mean and
// weighted is the support-weighted mean. Either average is undefined when a
// per-class term is.
template <class Fn>
AveragedMetric average(const ConfusionMatrix& cm, Fn metric) {
  AveragedMetric a;
  a.pos = metric(cm);
  a.neg = metric(cm.swapped());
  if (a.pos && a.neg) {
    a.macro = 0.5 * (*a.pos + *a.neg);
    const auto n = static_cast<double>(cm.total());
    const auto support_pos = static_cast<double>(cm.tp + cm.fn);
    const auto support_neg = static_cast<double>(cm.tn + cm.fp);
    a.weighted = (support_pos / n) * *a.pos + (support_neg / n) * *a.neg;
  }
  return a;
}

inline Metric averaged_recall(std::span<const int> y_true, std::span<const int> y_pred, Averaging mode) {
  return average(confusion(y_true, y_pred), recall).get(mode);
}
inline Metric averaged_precision(std::span<const int> y_true, std::span<const int> y_pred, Averaging mode) {
  return average(confusion(y_true, y_pred), precision).get(mode);
}
inline Metric averaged_f1(std::span<const int> y_true, std::span<const int> y_pred, Averaging mode) {
  return average(confusion(y_true, y_pred), f1).get(mode);
}

struct MetricsBlock {
  ConfusionMatrix confusion;
  AveragedMetric precision;
  AveragedMetric recall;
  AveragedMetric f1;
  Metric mce;
};

inline MetricsBlock evaluate(std::span<const int> y_true, std::span<const int> y_pred) {
  auto cm = confusion(y_true, y_pred);
  return {cm, average(cm, callqa::precision), average(cm, callqa::recall), average(cm, callqa::f1), callqa::mce(cm)};
}

// Selection metrics accepted by the search and pipeline configuration.
enum class SelectionMetric { kRecallWeighted, kRecallMacro, kRecallPositive, kRecallNegative };

inline std::string to_string(SelectionMetric m) {
  switch (m) {
    case SelectionMetric::kRecallWeighted: return "recall_weighted";
    case SelectionMetric::kRecallMacro: return "recall_macro";
    case SelectionMetric::kRecallPositive: return "recall_pos";
    case SelectionMetric::kRecallNegative: return "recall_neg";
  }
  return "unknown";
}

inline std::optional<SelectionMetric> parse_selection_metric(std::string_view s) {
  for (auto m : {SelectionMetric::kRecallWeighted, SelectionMetric::kRecallMacro, SelectionMetric::kRecallPositive,
                 SelectionMetric::kRecallNegative})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

inline Metric selection_value(const MetricsBlock& b, SelectionMetric m) {
  switch (m) {
    case SelectionMetric::kRecallWeighted: return b.recall.weighted;
    case SelectionMetric::kRecallMacro: return b.recall.macro;
    case SelectionMetric::kRecallPositive: return b.recall.pos;
    case SelectionMetric::kRecallNegative: return b.recall.neg;
  }
  return std::nullopt;
}

inline nlohmann::json metric_json(const Metric& m) { return m ? nlohmann::json(*m) : nlohmann::json(nullptr); }

inline Metric metric_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline nlohmann::json to_json(const AveragedMetric& a) {
  return {{"pos", metric_json(a.pos)}, {"neg", metric_json(a.neg)}, {"macro", metric_json(a.macro)},
          {"weighted", metric_json(a.weighted)}};
}

inline AveragedMetric averaged_from_json(const nlohmann::json& j) {
  return {metric_from_json(j.at("pos")), metric_from_json(j.at("neg")), metric_from_json(j.at("macro")),
          metric_from_json(j.at("weighted"))};
}

inline nlohmann::json to_json(const MetricsBlock& b) {
  return {{"confusion", {{"tp", b.confusion.tp}, {"fp", b.confusion.fp}, {"fn", b.confusion.fn}, {"tn", b.confusion.tn}}},
          {"precision", to_json(b.precision)},
          {"recall", to_json(b.recall)},
          {"f1", to_json(b.f1)},
          {"mce", metric_json(b.mce)}};
}

inline MetricsBlock metrics_from_json(const nlohmann::json& j) {
  MetricsBlock b;
  const auto& c = j.at("confusion");
  b.confusion = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("fn").get<std::size_t>(),
                 c.at("tn").get<std::size_t>()};
  b.precision = averaged_from_json(j.at("precision"));
  b.recall = averaged_from_json(j.at("recall"));
  b.f1 = averaged_from_json(j.at("f1"));
  b.mce = metric_from_json(j.at("mce"));
  return b;
}

}  // namespace callqa
