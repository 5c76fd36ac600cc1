#pragma once
// Config-driven runner: transform -> optional RBM feature learning -> k-means
// -> cluster-size class mapping, fitted on unlabeled rows and scored on
// labeled rows. Also runs the five-arm comparison.

#include <chrono>
#include <cstdint>
#include <exception>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "callqa/cluster.hpp"
#include "callqa/common.hpp"
#include "callqa/dataset.hpp"
#include "callqa/metrics.hpp"
#include "callqa/rbm.hpp"
#include "callqa/search.hpp"
#include "callqa/transform.hpp"
#include "json.hpp"

namespace callqa {

enum class TransformChoice { kNone, kZScore, kPower };

inline std::string to_string(TransformChoice t) {
  switch (t) {
    case TransformChoice::kNone: return "none";
    case TransformChoice::kZScore: return "zscore";
    case TransformChoice::kPower: return "power";
  }
  return "unknown";
}

inline TransformKind to_kind(TransformChoice t) {
  switch (t) {
    case TransformChoice::kZScore: return TransformKind::kZScore;
    case TransformChoice::kPower: return TransformKind::kYeoJohnson;
    case TransformChoice::kNone: break;
  }
  return TransformKind::kIdentity;
}

struct PipelineConfig {
  TransformChoice transform = TransformChoice::kNone;
  bool use_rbm = false;
  std::optional<GridPoint> rbm_fixed;
  std::optional<GridSpec> grid;
  int rbm_epochs = 20;
  std::size_t cluster_k = 2;
  std::optional<std::uint64_t> cluster_seed;
  SelectionMetric selection = SelectionMetric::kRecallWeighted;
  std::uint64_t seed = 1;
  std::string input;
  std::string output;
  std::string output_csv;
  std::string split_policy = "labeled_is_validation";
  std::size_t workers = 1;
  std::optional<SynthSpec> synth;  // used when input is empty; seed derived from `seed`

  std::uint64_t kmeans_seed() const { return cluster_seed ? *cluster_seed : derive_seed(seed, kStreamKMeans); }
};

inline std::uint64_t synth_seed_for(std::uint64_t master) { return derive_seed(master, kStreamSynth); }

inline const std::vector<std::string>& arm_names() {
  static const std::vector<std::string> names = {"k-means", "ZN_k-means", "PT_k-means", "ZN_RBM_k-means",
                                                 "PT_RBM_k-means"};
  return names;
}

inline std::string arm_name(TransformChoice t, bool rbm) {
  if (!rbm) {
    if (t == TransformChoice::kNone) return "k-means";
    return t == TransformChoice::kZScore ? "ZN_k-means" : "PT_k-means";
  }
  if (t == TransformChoice::kZScore) return "ZN_RBM_k-means";
  if (t == TransformChoice::kPower) return "PT_RBM_k-means";
  throw ConfigError("feature_learning", "rbm requires transform zscore or power");
}

// ---------------------------------------------------------------------------
// Flat JSON config.

namespace detail {

template <class T>
T config_get(const nlohmann::json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, std::string("wrong type: ") + e.what());
  }
}

inline std::array<double, 4> config_alpha(const nlohmann::json& j, const std::string& key) {
  auto v = config_get<std::vector<double>>(j, key);
  if (v.size() != 4) throw ConfigError(key, "expects four concentrations");
  return {v[0], v[1], v[2], v[3]};
}

}  // namespace detail

inline void validate(const PipelineConfig& c) {
  if (c.cluster_k != 2) throw ConfigError("cluster_k", "only k = 2 is supported");
  if (c.use_rbm) {
    if (c.rbm_fixed.has_value() == c.grid.has_value())
      throw ConfigError("feature_learning", "rbm needs exactly one of rbm_* fixed hyperparameters or grid_*");
    arm_name(c.transform, true);
    if (c.rbm_epochs < 1) throw ConfigError("rbm_epochs", "must be positive");
    if (c.rbm_fixed) {
      if (c.rbm_fixed->hidden_units == 0) throw ConfigError("rbm_hidden_units", "must be positive");
      if (!(c.rbm_fixed->learning_rate > 0.0)) throw ConfigError("rbm_learning_rate", "must be positive");
      if (c.rbm_fixed->batch_size == 0) throw ConfigError("rbm_batch_size", "must be positive");
    }
    if (c.grid) build_grid(*c.grid);
  }
  if (c.split_policy != "labeled_is_validation")
    throw ConfigError("split_policy", "unknown policy '" + c.split_policy + "'");
  if (c.workers == 0) throw ConfigError("workers", "must be positive");
  std::set<std::string> paths;
  for (const auto& [key, path] : {std::pair<std::string, std::string>{"input", c.input},
                                  {"output", c.output}, {"output_csv", c.output_csv}}) {
    if (path.empty()) continue;
    if (!paths.insert(path).second) throw ConfigError(key, "path '" + path + "' is referenced twice");
  }
  if (c.input.empty() && !c.synth) throw ConfigError("input", "no input path and no synth_* keys");
  if (c.synth) validate(*c.synth);
}

inline PipelineConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  static const std::set<std::string> known = {
      "schema_version", "transform", "feature_learning", "rbm_hidden_units", "rbm_learning_rate",
      "rbm_batch_size", "rbm_epochs", "grid_hidden_units", "grid_learning_rates", "grid_logspace",
      "grid_batch_sizes", "cluster_k", "cluster_seed", "selection_metric", "seed", "input", "output",
      "output_csv", "split_policy", "workers", "synth_n_total", "synth_malpractice_fraction",
      "synth_labeled_fraction", "synth_alpha_malpractice", "synth_alpha_normal", "synth_start_year",
      "synth_end_year"};
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError(key, "unknown key");

  using detail::config_get;
  if (!j.contains("schema_version")) throw ConfigError("schema_version", "missing");
  if (config_get<int>(j, "schema_version") != kSchemaVersion)
    throw ConfigError("schema_version", "unsupported version");

  PipelineConfig c;
  if (j.contains("transform")) {
    auto t = config_get<std::string>(j, "transform");
    if (t == "none") c.transform = TransformChoice::kNone;
    else if (t == "zscore") c.transform = TransformChoice::kZScore;
    else if (t == "power") c.transform = TransformChoice::kPower;
    else throw ConfigError("transform", "expected none, zscore or power");
  }
  if (j.contains("feature_learning")) {
    auto f = config_get<std::string>(j, "feature_learning");
    if (f == "rbm") c.use_rbm = true;
    else if (f != "none") throw ConfigError("feature_learning", "expected none or rbm");
  }
  int fixed_keys = 0;
  GridPoint fixed;
  if (j.contains("rbm_hidden_units")) fixed.hidden_units = config_get<std::size_t>(j, "rbm_hidden_units"), ++fixed_keys;
  if (j.contains("rbm_learning_rate")) fixed.learning_rate = config_get<double>(j, "rbm_learning_rate"), ++fixed_keys;
  if (j.contains("rbm_batch_size")) fixed.batch_size = config_get<std::size_t>(j, "rbm_batch_size"), ++fixed_keys;
  if (fixed_keys == 3) c.rbm_fixed = fixed;
  else if (fixed_keys != 0) throw ConfigError("rbm_hidden_units", "rbm_hidden_units, rbm_learning_rate and rbm_batch_size go together");

  bool any_grid = j.contains("grid_hidden_units") || j.contains("grid_learning_rates") ||
                  j.contains("grid_logspace") || j.contains("grid_batch_sizes");
  if (any_grid) {
    GridSpec g;
    if (!j.contains("grid_hidden_units")) throw ConfigError("grid_hidden_units", "missing");
    if (!j.contains("grid_batch_sizes")) throw ConfigError("grid_batch_sizes", "missing");
    g.hidden_units = config_get<std::vector<std::size_t>>(j, "grid_hidden_units");
    g.batch_sizes = config_get<std::vector<std::size_t>>(j, "grid_batch_sizes");
    if (j.contains("grid_learning_rates") == j.contains("grid_logspace"))
      throw ConfigError("grid_learning_rates", "give exactly one of grid_learning_rates or grid_logspace");
    if (j.contains("grid_learning_rates")) {
      g.learning_rates = config_get<std::vector<double>>(j, "grid_learning_rates");
    } else {
      auto ls = config_get<std::vector<double>>(j, "grid_logspace");
      if (ls.size() != 3 || !(ls[2] >= 1.0) || ls[2] != std::floor(ls[2]))
        throw ConfigError("grid_logspace", "expects [lo_exp, hi_exp, count]");
      g.learning_rate_space = Logspace{ls[0], ls[1], static_cast<std::size_t>(ls[2])};
    }
    c.grid = g;
  }
  if (j.contains("rbm_epochs")) c.rbm_epochs = config_get<int>(j, "rbm_epochs");
  if (j.contains("cluster_k")) c.cluster_k = config_get<std::size_t>(j, "cluster_k");
  if (j.contains("cluster_seed")) c.cluster_seed = config_get<std::uint64_t>(j, "cluster_seed");
  if (j.contains("selection_metric")) {
    auto s = parse_selection_metric(config_get<std::string>(j, "selection_metric"));
    if (!s) throw ConfigError("selection_metric", "expected recall_weighted, recall_macro, recall_pos or recall_neg");
    c.selection = *s;
  }
  if (j.contains("seed")) c.seed = config_get<std::uint64_t>(j, "seed");
  if (j.contains("input")) c.input = config_get<std::string>(j, "input");
  if (j.contains("output")) c.output = config_get<std::string>(j, "output");
  if (j.contains("output_csv")) c.output_csv = config_get<std::string>(j, "output_csv");
  if (j.contains("split_policy")) c.split_policy = config_get<std::string>(j, "split_policy");
  if (j.contains("workers")) c.workers = config_get<std::size_t>(j, "workers");

  bool any_synth = false;
  SynthSpec s = SynthSpec::benchmark();
  if (j.contains("synth_n_total")) s.n_total = config_get<std::size_t>(j, "synth_n_total"), any_synth = true;
  if (j.contains("synth_malpractice_fraction"))
    s.malpractice_fraction = config_get<double>(j, "synth_malpractice_fraction"), any_synth = true;
  if (j.contains("synth_labeled_fraction"))
    s.labeled_fraction = config_get<double>(j, "synth_labeled_fraction"), any_synth = true;
  if (j.contains("synth_alpha_malpractice"))
    s.alpha_malpractice = detail::config_alpha(j, "synth_alpha_malpractice"), any_synth = true;
  if (j.contains("synth_alpha_normal")) s.alpha_normal = detail::config_alpha(j, "synth_alpha_normal"), any_synth = true;
  if (j.contains("synth_start_year")) s.start_year = config_get<int>(j, "synth_start_year"), any_synth = true;
  if (j.contains("synth_end_year")) s.end_year = config_get<int>(j, "synth_end_year"), any_synth = true;
  if (any_synth) c.synth = s;
  return c;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j{{"schema_version", kSchemaVersion},
                   {"transform", to_string(c.transform)},
                   {"feature_learning", c.use_rbm ? "rbm" : "none"},
                   {"rbm_epochs", c.rbm_epochs},
                   {"cluster_k", c.cluster_k},
                   {"selection_metric", to_string(c.selection)},
                   {"seed", c.seed},
                   {"split_policy", c.split_policy},
                   {"workers", c.workers}};
  if (c.rbm_fixed) {
    j["rbm_hidden_units"] = c.rbm_fixed->hidden_units;
    j["rbm_learning_rate"] = c.rbm_fixed->learning_rate;
    j["rbm_batch_size"] = c.rbm_fixed->batch_size;
  }
  if (c.grid) {
    j["grid_hidden_units"] = c.grid->hidden_units;
    j["grid_batch_sizes"] = c.grid->batch_sizes;
    if (c.grid->learning_rate_space)
      j["grid_logspace"] = {c.grid->learning_rate_space->lo_exp, c.grid->learning_rate_space->hi_exp,
                            c.grid->learning_rate_space->count};
    else
      j["grid_learning_rates"] = c.grid->learning_rates;
  }
  if (c.cluster_seed) j["cluster_seed"] = *c.cluster_seed;
  if (!c.input.empty()) j["input"] = c.input;
  if (!c.output.empty()) j["output"] = c.output;
  if (!c.output_csv.empty()) j["output_csv"] = c.output_csv;
  if (c.synth) {
    j["synth_n_total"] = c.synth->n_total;
    j["synth_malpractice_fraction"] = c.synth->malpractice_fraction;
    j["synth_labeled_fraction"] = c.synth->labeled_fraction;
    j["synth_alpha_malpractice"] = c.synth->alpha_malpractice;
    j["synth_alpha_normal"] = c.synth->alpha_normal;
    j["synth_start_year"] = c.synth->start_year;
    j["synth_end_year"] = c.synth->end_year;
  }
  return j;
}

inline PipelineConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline Dataset load_dataset(const PipelineConfig& c) {
  if (!c.input.empty()) return load_feature_csv_file(c.input);
  SynthSpec s = *c.synth;
  s.seed = synth_seed_for(c.seed);
  return synth_dataset(s);
}

// ---------------------------------------------------------------------------
// Fitted pipeline.

struct FittedPipeline {
  std::string model_name;
  TransformModel transform;
  std::optional<RbmPointFit> rbm;  // scaler + RBM + k-means when feature learning is on
  KMeansModel kmeans;              // used when rbm is empty
  std::optional<GridPoint> hyperparameters;
  int rbm_epochs = 0;

  std::vector<int> predict(const Matrix& raw) const {
    auto x = transform_apply(transform, raw);
    if (rbm) return predict_rbm_point(*rbm, x);
    return kmeans_classify(kmeans, x);
  }

  const KMeansModel& clusters() const { return rbm ? rbm->kmeans : kmeans; }
};

struct FitOutcome {
  FittedPipeline pipeline;
  std::optional<SearchReport> search;
};

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = {"pct_speech", "pct_music", "pct_noise", "pct_silence"};
  return names;
}

// Fits on the unlabeled split. The validation split is consulted only to
// select grid-search hyperparameters.
inline FitOutcome fit_pipeline(const PipelineConfig& cfg, const Split& split) {
  validate(cfg);
  FitOutcome out;
  auto& p = out.pipeline;
  p.model_name = arm_name(cfg.transform, cfg.use_rbm);
  p.transform = transform_fit(to_kind(cfg.transform), split.train, feature_names());
  auto train = transform_apply(p.transform, split.train);

  if (!cfg.use_rbm) {
    KMeansOptions km;
    km.seed = cfg.kmeans_seed();
    p.kmeans = kmeans_fit(train, km);
    p.kmeans = assign_classes_by_size(p.kmeans, kmeans_predict(p.kmeans, train));
    return out;
  }

  RbmPipelineOptions ropt;
  ropt.epochs = cfg.rbm_epochs;
  ropt.master_seed = cfg.seed;
  ropt.kmeans_seed = cfg.kmeans_seed();
  GridPoint point;
  std::size_t index = 0;
  if (cfg.grid) {
    auto val = transform_apply(p.transform, split.validation);
    SearchOptions sopt{ropt, cfg.selection, cfg.workers};
    out.search = grid_search(train, val, split.validation_labels, *cfg.grid, sopt);
    point = out.search->best().point;
    index = out.search->best_index;
  } else {
    point = *cfg.rbm_fixed;
  }
  // Refitting with the point's derived seeds reproduces the searched model exactly.
  p.rbm = fit_rbm_point(train, point, index, ropt);
  p.hyperparameters = point;
  p.rbm_epochs = cfg.rbm_epochs;
  return out;
}

inline nlohmann::json to_json(const FittedPipeline& p) {
  nlohmann::json j{{"schema_version", kSchemaVersion}, {"model", p.model_name}, {"transform", to_json(p.transform)}};
  if (p.rbm) {
    j["rbm"] = {{"scaler", to_json(p.rbm->scaler)}, {"model", to_json(p.rbm->rbm)}};
    j["kmeans"] = to_json(p.rbm->kmeans);
  } else {
    j["rbm"] = nullptr;
    j["kmeans"] = to_json(p.kmeans);
  }
  return j;
}

inline FittedPipeline fitted_pipeline_from_json(const nlohmann::json& j) {
  try {
    FittedPipeline p;
    p.model_name = j.at("model").get<std::string>();
    p.transform = transform_from_json(j.at("transform"));
    auto km = kmeans_from_json(j.at("kmeans"));
    if (!j.at("rbm").is_null()) {
      RbmPointFit fit;
      fit.scaler = scaler_from_json(j.at("rbm").at("scaler"));
      fit.rbm = rbm_from_json(j.at("rbm").at("model"));
      fit.kmeans = km;
      p.hyperparameters = GridPoint{fit.rbm.hyper.n_hidden, fit.rbm.hyper.learning_rate, fit.rbm.hyper.batch_size};
      p.rbm_epochs = fit.rbm.hyper.epochs;
      p.rbm = std::move(fit);
    } else {
      p.kmeans = km;
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Evaluation report.

struct DatasetSummary {
  std::size_t n_rows = 0;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  std::size_t n_validation_pos = 0;
  std::size_t n_validation_neg = 0;
};

struct EvaluationReport {
  std::string model_name;
  nlohmann::json config;
  DatasetSummary dataset;
  MetricsBlock metrics;
  std::optional<GridPoint> hyperparameters;
  int rbm_epochs = 0;
  std::optional<SearchReport> search;
  double elapsed_s = 0.0;
};

inline DatasetSummary summarize(const Split& s) {
  DatasetSummary d;
  d.n_train = s.train.rows();
  d.n_validation = s.validation.rows();
  d.n_rows = d.n_train + d.n_validation;
  for (int y : s.validation_labels) (y == 1 ? d.n_validation_pos : d.n_validation_neg)++;
  return d;
}

inline void require_both_classes(const Split& s) {
  auto d = summarize(s);
  if (d.n_validation_pos == 0 || d.n_validation_neg == 0)
    throw DataError("labeled validation rows must contain both classes");
}

inline EvaluationReport run_pipeline_on(const PipelineConfig& cfg, const Split& split) {
  auto t0 = std::chrono::steady_clock::now();
  require_both_classes(split);
  auto fit = fit_pipeline(cfg, split);
  EvaluationReport r;
  r.model_name = fit.pipeline.model_name;
  r.config = to_json(cfg);
  r.dataset = summarize(split);
  r.metrics = evaluate(split.validation_labels, fit.pipeline.predict(split.validation));
  r.hyperparameters = fit.pipeline.hyperparameters;
  r.rbm_epochs = fit.pipeline.rbm_epochs;
  r.search = std::move(fit.search);
  r.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json j{{"schema_version", kSchemaVersion},
                   {"model", r.model_name},
                   {"config", r.config},
                   {"dataset",
                    {{"n_rows", r.dataset.n_rows},
                     {"n_train", r.dataset.n_train},
                     {"n_validation", r.dataset.n_validation},
                     {"n_validation_pos", r.dataset.n_validation_pos},
                     {"n_validation_neg", r.dataset.n_validation_neg}}},
                   {"metrics", to_json(r.metrics)}};
  if (r.hyperparameters) {
    auto h = to_json(*r.hyperparameters);
    h["epochs"] = r.rbm_epochs;
    j["hyperparameters"] = h;
  } else {
    j["hyperparameters"] = nullptr;
  }
  if (r.search) {
    std::size_t failed = 0;
    for (const auto& rec : r.search->records) failed += rec.failed ? 1 : 0;
    j["search"] = {{"selection_metric", to_string(r.search->selection)},
                   {"n_points", r.search->records.size()},
                   {"n_failed", failed},
                   {"best_index", r.search->best_index},
                   {"best_selection_value", metric_json(r.search->best().selection_value)}};
  } else {
    j["search"] = nullptr;
  }
  j["timing"] = {{"elapsed_s", r.elapsed_s}};
  return j;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
}

// Loads, splits, fits, evaluates and writes cfg.output when set.
inline EvaluationReport run_pipeline(const PipelineConfig& cfg) {
  validate(cfg);
  auto split = split_dataset(load_dataset(cfg));
  auto report = run_pipeline_on(cfg, split);
  if (!cfg.output.empty()) write_json_file(cfg.output, to_json(report));
  return report;
}

// ---------------------------------------------------------------------------
// Five-arm comparison.

inline PipelineConfig arm_config(PipelineConfig base, std::size_t arm) {
  static const TransformChoice transforms[] = {TransformChoice::kNone, TransformChoice::kZScore,
                                               TransformChoice::kPower, TransformChoice::kZScore,
                                               TransformChoice::kPower};
  base.transform = transforms[arm];
  base.use_rbm = arm >= 3;
  base.output.clear();
  base.output_csv.clear();
  return base;
}

// Arms run concurrently; results come back in the fixed five-arm order.
inline std::vector<EvaluationReport> compare_arms(const PipelineConfig& cfg, const Split& split) {
  if (cfg.rbm_fixed.has_value() == cfg.grid.has_value())
    throw ConfigError("feature_learning", "compare needs exactly one of rbm_* fixed hyperparameters or grid_*");
  constexpr std::size_t kArms = 5;
  std::vector<EvaluationReport> reports(kArms);
  std::vector<std::exception_ptr> errors(kArms);
  auto run_arm = [&](std::size_t a) {
    try {
      reports[a] = run_pipeline_on(arm_config(cfg, a), split);
    } catch (...) {
      errors[a] = std::current_exception();
    }
  };
  if (cfg.workers > 1) {
    std::vector<std::thread> threads;
    for (std::size_t a = 0; a < kArms; ++a) threads.emplace_back(run_arm, a);
    for (auto& t : threads) t.join();
  } else {
    for (std::size_t a = 0; a < kArms; ++a) run_arm(a);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return reports;
}

inline constexpr std::string_view kCompareCsvHeader =
    "schema_version,model,recall,f1,mce,recall_pos,precision,batch_size,learning_rate,hidden_units,tp,fp,fn,tn";

// Recall, F1 and precision are the support-weighted averages over both classes.
inline void write_compare_csv(std::ostream& out, const std::vector<EvaluationReport>& reports) {
  out << kCompareCsvHeader << '\n';
  for (const auto& r : reports) {
    const auto& m = r.metrics;
    out << kSchemaVersion << ',' << r.model_name << ',' << format_optional(m.recall.weighted) << ','
        << format_optional(m.f1.weighted) << ',' << format_optional(m.mce) << ',' << format_optional(m.recall.pos)
        << ',' << format_optional(m.precision.weighted) << ',';
    if (r.hyperparameters)
      out << r.hyperparameters->batch_size << ',' << format_double(r.hyperparameters->learning_rate) << ','
          << r.hyperparameters->hidden_units;
    else
      out << "-,-,-";
    out << ',' << m.confusion.tp << ',' << m.confusion.fp << ',' << m.confusion.fn << ',' << m.confusion.tn << '\n';
  }
}

inline nlohmann::json compare_to_json(const std::vector<EvaluationReport>& reports) {
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& r : reports) arms.push_back(to_json(r));
  return {{"schema_version", kSchemaVersion}, {"arms", arms}};
}

}  // namespace callqa
