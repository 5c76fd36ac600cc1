#pragma once
// Exhaustive RBM hyperparameter grid search. Each grid point trains its own
// scaler + RBM + k-means on the unlabeled split and is scored on the labeled
// validation split; the best point maximizes the selection metric.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "callqa/cluster.hpp"
#include "callqa/common.hpp"
#include "callqa/metrics.hpp"
#include "callqa/rbm.hpp"
#include "json.hpp"

namespace callqa {

struct Logspace {
  double lo_exp = -3.0;
  double hi_exp = 0.0;
  std::size_t count = 20;
};

// 10^(lo + i (hi - lo) / (count - 1)), i = 0 .. count - 1; the last element is 10^hi.
inline std::vector<double> logspace(double lo_exp, double hi_exp, std::size_t count) {
  std::vector<double> out;
  if (count == 0) return out;
  if (count == 1) return {std::pow(10.0, lo_exp)};
  for (std::size_t i = 0; i < count; ++i) {
    double e = i + 1 == count ? hi_exp
                              : lo_exp + static_cast<double>(i) * (hi_exp - lo_exp) / static_cast<double>(count - 1);
    out.push_back(std::pow(10.0, e));
  }
  return out;
}

struct GridSpec {
  std::vector<std::size_t> hidden_units;
  std::vector<double> learning_rates;  // used when learning_rate_space is empty
  std::optional<Logspace> learning_rate_space;
  std::vector<std::size_t> batch_sizes;

  std::vector<double> resolved_rates() const {
    if (learning_rate_space)
      return logspace(learning_rate_space->lo_exp, learning_rate_space->hi_exp, learning_rate_space->count);
    return learning_rates;
  }

  // Hyperparameter ranges of the original study.
  static GridSpec reference() {
    return {{2, 20, 45, 70, 135, 170, 200}, {}, Logspace{-3.0, 0.0, 20}, {8, 16, 64, 128}};
  }
};

struct GridPoint {
  std::size_t hidden_units = 0;
  double learning_rate = 0.0;
  std::size_t batch_size = 0;

  bool operator==(const GridPoint&) const = default;
};

// Cartesian product, hidden units outermost and batch size innermost.
inline std::vector<GridPoint> build_grid(const GridSpec& spec) {
  auto rates = spec.resolved_rates();
  if (spec.hidden_units.empty()) throw ConfigError("grid_hidden_units", "empty axis");
  if (rates.empty()) throw ConfigError("grid_learning_rates", "empty axis");
  if (spec.batch_sizes.empty()) throw ConfigError("grid_batch_sizes", "empty axis");
  for (auto h : spec.hidden_units)
    if (h == 0) throw ConfigError("grid_hidden_units", "values must be positive");
  for (auto r : rates)
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("grid_learning_rates", "values must be positive");
  for (auto b : spec.batch_sizes)
    if (b == 0) throw ConfigError("grid_batch_sizes", "values must be positive");
  std::vector<GridPoint> grid;
  grid.reserve(spec.hidden_units.size() * rates.size() * spec.batch_sizes.size());
  for (auto h : spec.hidden_units)
    for (auto r : rates)
      for (auto b : spec.batch_sizes) grid.push_back({h, r, b});
  return grid;
}

struct RbmPipelineOptions {
  int epochs = 20;
  std::uint64_t master_seed = 1;
  std::uint64_t kmeans_seed = 0;
  KMeansOptions kmeans;  // seed field is overridden by kmeans_seed
};

// Everything fitted for one RBM configuration.
struct RbmPointFit {
  MinMaxScaler scaler;
  RbmModel rbm;
  KMeansModel kmeans;
  std::vector<double> reconstruction_errors;
};

inline std::uint64_t point_init_seed(std::uint64_t master, std::size_t index) {
  return derive_seed(master, kStreamRbmInit, index);
}
inline std::uint64_t point_shuffle_seed(std::uint64_t master, std::size_t index) {
  return derive_seed(master, kStreamRbmShuffle, index);
}

// scale -> init -> CD-1 epochs -> hidden features -> k-means -> size rule.
inline RbmPointFit fit_rbm_point(const Matrix& train, const GridPoint& point, std::size_t index,
                                 const RbmPipelineOptions& opt) {
  RbmPointFit fit;
  fit.scaler = minmax_scale_fit(train);
  auto scaled = minmax_scale_apply(fit.scaler, train);
  fit.rbm = rbm_init(train.cols(), point.hidden_units, point_init_seed(opt.master_seed, index));
  fit.rbm.hyper = {point.learning_rate, point.batch_size, point.hidden_units, opt.epochs};
  fit.reconstruction_errors = rbm_train(fit.rbm, scaled, point_shuffle_seed(opt.master_seed, index));
  auto hidden = hidden_features(fit.rbm, scaled);
  KMeansOptions km = opt.kmeans;
  km.k = 2;
  km.seed = opt.kmeans_seed;
  fit.kmeans = kmeans_fit(hidden, km);
  fit.kmeans = assign_classes_by_size(fit.kmeans, kmeans_predict(fit.kmeans, hidden));
  return fit;
}

inline std::vector<int> predict_rbm_point(const RbmPointFit& fit, const Matrix& x) {
  return kmeans_classify(fit.kmeans, hidden_features(fit.rbm, minmax_scale_apply(fit.scaler, x)));
}

struct SearchRecord {
  std::size_t index = 0;
  GridPoint point;
  bool failed = false;
  std::string failure;
  std::optional<MetricsBlock> metrics;
  Metric selection_value;
  double wall_time_s = 0.0;
};

struct SearchReport {
  std::vector<SearchRecord> records;
  std::size_t best_index = 0;
  SelectionMetric selection = SelectionMetric::kRecallWeighted;
  std::uint64_t master_seed = 0;
  std::uint64_t kmeans_seed = 0;
  int epochs = 0;

  const SearchRecord& best() const { return records.at(best_index); }
};

struct SearchOptions {
  RbmPipelineOptions pipeline;
  SelectionMetric selection = SelectionMetric::kRecallWeighted;
  std::size_t workers = 1;
};

// Argmax over non-failed records with a defined selection value; the earliest
// grid index wins ties. Returns nullopt when no record qualifies.
inline std::optional<std::size_t> select_best(const std::vector<SearchRecord>& records) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.failed || !r.selection_value) continue;
    if (!best || *r.selection_value > *records[*best].selection_value) best = i;
  }
  return best;
}

inline SearchRecord evaluate_grid_point(const Matrix& train, const Matrix& val, std::span<const int> val_labels,
                                        const GridPoint& point, std::size_t index, const SearchOptions& opt) {
  SearchRecord rec;
  rec.index = index;
  rec.point = point;
  auto t0 = std::chrono::steady_clock::now();
  try {
    auto fit = fit_rbm_point(train, point, index, opt.pipeline);
    auto pred = predict_rbm_point(fit, val);
    rec.metrics = evaluate(val_labels, pred);
    rec.selection_value = selection_value(*rec.metrics, opt.selection);
  } catch (const TrainingDivergedError& e) {
    rec.failed = true;
    rec.failure = e.what();
  }
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

inline SearchReport grid_search(const Matrix& train, const Matrix& val, std::span<const int> val_labels,
                                const GridSpec& spec, const SearchOptions& opt) {
  if (val.rows() == 0 || val.rows() != val_labels.size())
    throw DataError("validation set is empty or does not match its labels");
  bool has_pos = false, has_neg = false;
  for (int y : val_labels) (y == 1 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) throw DataError("validation set must contain both classes");
  if (val.cols() != train.cols()) throw std::invalid_argument("train and validation widths differ");

  const auto grid = build_grid(spec);
  SearchReport report;
  report.selection = opt.selection;
  report.master_seed = opt.pipeline.master_seed;
  report.kmeans_seed = opt.pipeline.kmeans_seed;
  report.epochs = opt.pipeline.epochs;
  report.records.resize(grid.size());

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(grid.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        report.records[i] = evaluate_grid_point(train, val, val_labels, grid[i], i, opt);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(opt.workers, 1, grid.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  auto best = select_best(report.records);
  if (!best) throw TrainingDivergedError(opt.pipeline.epochs);
  report.best_index = *best;
  return report;
}

inline nlohmann::json to_json(const GridPoint& p) {
  return {{"hidden_units", p.hidden_units}, {"learning_rate", p.learning_rate}, {"batch_size", p.batch_size}};
}

inline nlohmann::json to_json(const SearchReport& r) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& rec : r.records) {
    nlohmann::json j{{"index", rec.index},
                     {"hyperparameters", to_json(rec.point)},
                     {"status", rec.failed ? "failed" : "ok"},
                     {"selection_value", metric_json(rec.selection_value)},
                     {"wall_time_s", rec.wall_time_s}};
    if (rec.failed) j["failure"] = rec.failure;
    j["metrics"] = rec.metrics ? to_json(*rec.metrics) : nlohmann::json(nullptr);
    records.push_back(std::move(j));
  }
  return {{"schema_version", kSchemaVersion},
          {"selection_metric", to_string(r.selection)},
          {"master_seed", r.master_seed},
          {"kmeans_seed", r.kmeans_seed},
          {"epochs", r.epochs},
          {"best_index", r.best_index},
          {"best", to_json(r.best().point)},
          {"records", records}};
}

inline SearchReport search_report_from_json(const nlohmann::json& j) {
  SearchReport r;
  auto sel = parse_selection_metric(j.at("selection_metric").get<std::string>());
  if (!sel) throw DataError("unknown selection metric in search report");
  r.selection = *sel;
  r.master_seed = j.at("master_seed").get<std::uint64_t>();
  r.kmeans_seed = j.at("kmeans_seed").get<std::uint64_t>();
  r.epochs = j.at("epochs").get<int>();
  r.best_index = j.at("best_index").get<std::size_t>();
  for (const auto& e : j.at("records")) {
    SearchRecord rec;
    rec.index = e.at("index").get<std::size_t>();
    const auto& h = e.at("hyperparameters");
    rec.point = {h.at("hidden_units").get<std::size_t>(), h.at("learning_rate").get<double>(),
                 h.at("batch_size").get<std::size_t>()};
    rec.failed = e.at("status").get<std::string>() == "failed";
    if (e.contains("failure")) rec.failure = e.at("failure").get<std::string>();
    if (!e.at("metrics").is_null()) rec.metrics = metrics_from_json(e.at("metrics"));
    rec.selection_value = metric_from_json(e.at("selection_value"));
    rec.wall_time_s = e.at("wall_time_s").get<double>();
    r.records.push_back(std::move(rec));
  }
  return r;
}

inline constexpr std::string_view kSearchCsvHeader =
    "schema_version,index,hidden_units,learning_rate,batch_size,status,selection_value,recall_weighted,"
    "recall_pos,recall_neg,f1_weighted,mce,tp,fp,fn,tn,wall_time_s";

// One row per grid point; undefined metrics print as n/a.
inline void write_search_csv(std::ostream& out, const SearchReport& r) {
  out << kSearchCsvHeader << '\n';
  for (const auto& rec : r.records) {
    out << kSchemaVersion << ',' << rec.index << ',' << rec.point.hidden_units << ','
        << format_double(rec.point.learning_rate) << ',' << rec.point.batch_size << ','
        << (rec.failed ? "failed" : "ok") << ',' << format_optional(rec.selection_value) << ',';
    if (rec.metrics) {
      const auto& m = *rec.metrics;
      out << format_optional(m.recall.weighted) << ',' << format_optional(m.recall.pos) << ','
          << format_optional(m.recall.neg) << ',' << format_optional(m.f1.weighted) << ','
          << format_optional(m.mce) << ',' << m.confusion.tp << ',' << m.confusion.fp << ',' << m.confusion.fn
          << ',' << m.confusion.tn;
    } else {
      out << "n/a,n/a,n/a,n/a,n/a,,,,";
    }
    out << ',' << format_double(rec.wall_time_s) << '\n';
  }
}

}  // namespace callqa
