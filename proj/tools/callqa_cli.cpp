// callqa: command-line front end for the malpractice detection pipeline.
//
// Exit codes: 0 success, 2 config/validation error, 3 data error,
// 4 training divergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "callqa/callqa.hpp"

namespace {

using callqa::ConfigError;
using callqa::DataError;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;

// Writes to the file when a path is given, stdout otherwise.
template <class Fn>
void emit(const std::string& path, Fn write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write(out);
}

struct ConfigOverrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string input;
  std::string output;
  std::string output_csv;
  std::optional<std::size_t> workers;
  std::string transform;
  std::string feature_learning;
  std::string selection_metric;

  void attach(CLI::App* cmd, bool with_csv) {
    cmd->add_option("-c,--config", config_path, "Flat JSON pipeline config");
    cmd->add_option("--seed", seed, "Master seed (overrides config)");
    cmd->add_option("-i,--input", input, "Feature CSV (overrides config)");
    cmd->add_option("-o,--output", output, "Output JSON path (overrides config)");
    if (with_csv) cmd->add_option("--output-csv", output_csv, "Output CSV path (overrides config)");
    cmd->add_option("--workers", workers, "Concurrent workers (overrides config)");
    cmd->add_option("--transform", transform, "none | zscore | power");
    cmd->add_option("--feature-learning", feature_learning, "none | rbm");
    cmd->add_option("--selection-metric", selection_metric, "recall_weighted | recall_macro | recall_pos | recall_neg");
  }

  callqa::PipelineConfig load() const {
    json j = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("config", "cannot open " + config_path);
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
      }
    }
    if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    if (config_path.empty()) j["schema_version"] = callqa::kSchemaVersion;
    if (seed) j["seed"] = *seed;
    if (!input.empty()) j["input"] = input;
    if (!output.empty()) j["output"] = output;
    if (!output_csv.empty()) j["output_csv"] = output_csv;
    if (workers) j["workers"] = *workers;
    if (!transform.empty()) j["transform"] = transform;
    if (!feature_learning.empty()) j["feature_learning"] = feature_learning;
    if (!selection_metric.empty()) j["selection_metric"] = selection_metric;
    auto cfg = callqa::parse_config(j);
    callqa::validate(cfg);
    return cfg;
  }
};

callqa::SegmentTimeline segment_wav(const std::string& path, const std::string& call_id,
                                    const callqa::SilenceConfig& cfg) {
  auto audio = callqa::read_wav_file(path);
  auto id = call_id.empty() ? std::filesystem::path(path).stem().string() : call_id;
  try {
    return callqa::segment_silence(audio.samples, audio.sample_rate, cfg, id);
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Call-center malpractice detection: features, transforms, RBM feature learning, k-means"};
  app.require_subcommand(1);

  // segment
  auto* segment = app.add_subcommand("segment", "Energy-threshold silence segmentation of a 16-bit PCM mono WAV");
  std::string wav_path, call_id, seg_output;
  callqa::SilenceConfig silence;
  bool relative_only = false;
  segment->add_option("wav", wav_path, "Input WAV")->required();
  segment->add_option("--call-id", call_id, "Call id (defaults to the file stem)");
  segment->add_option("-o,--output", seg_output, "Timeline CSV path");
  segment->add_option("--rel-factor", silence.rel_factor, "Threshold factor on the median frame RMS");
  segment->add_option("--floor", silence.absolute_floor, "Absolute RMS floor (full-scale units)");
  segment->add_option("--min-segment", silence.min_segment_s, "Minimum segment duration in seconds");
  segment->add_flag("--relative-only", relative_only, "Use only the scale-free relative threshold");

  // features
  auto* features = app.add_subcommand("features", "Timeline CSV or WAV files to a feature CSV");
  std::string timelines_path, feat_output;
  std::vector<std::string> feat_wavs;
  features->add_option("--timelines", timelines_path, "Segment timeline CSV");
  features->add_option("--wav", feat_wavs, "WAV files to segment first");
  features->add_option("-o,--output", feat_output, "Feature CSV path");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the seeded synthetic benchmark dataset");
  ConfigOverrides synth_cfg;
  std::optional<std::size_t> synth_n;
  std::optional<double> synth_pos, synth_lab;
  synth->add_option("-c,--config", synth_cfg.config_path, "Config providing synth_* keys");
  synth->add_option("--seed", synth_cfg.seed, "Master seed");
  synth->add_option("-n,--n-total", synth_n, "Number of calls");
  synth->add_option("--malpractice-fraction", synth_pos, "Share of malpractice calls");
  synth->add_option("--labeled-fraction", synth_lab, "Share of labeled calls (stratified)");
  synth->add_option("-o,--output", synth_cfg.output, "Feature CSV path");

  // split
  auto* split = app.add_subcommand("split", "Split a feature CSV into unlabeled training and labeled validation sets");
  std::string split_input, train_out, val_out;
  split->add_option("-i,--input", split_input, "Feature CSV")->required();
  split->add_option("--train-out", train_out, "Training CSV path");
  split->add_option("--validation-out", val_out, "Validation CSV path");

  // fit / evaluate / search / compare
  auto* fit = app.add_subcommand("fit", "Fit transform, optional RBM and k-means; write the model JSON");
  ConfigOverrides fit_cfg;
  fit_cfg.attach(fit, false);

  auto* evaluate = app.add_subcommand("evaluate", "Run the full pipeline, or score a fitted model on labeled rows");
  ConfigOverrides eval_cfg;
  std::string model_path;
  eval_cfg.attach(evaluate, false);
  evaluate->add_option("-m,--model", model_path, "Fitted model JSON from `fit`");

  auto* search = app.add_subcommand("search", "RBM hyperparameter grid search");
  ConfigOverrides search_cfg;
  search_cfg.attach(search, true);

  auto* compare = app.add_subcommand("compare", "Run all five model arms and emit a comparison table");
  ConfigOverrides compare_cfg;
  compare_cfg.attach(compare, true);

  // kpi
  auto* kpi = app.add_subcommand("kpi", "Mean silence fraction per calendar period");
  std::string kpi_input, kpi_output, kpi_period = "year";
  kpi->add_option("-i,--input", kpi_input, "Feature CSV with dates")->required();
  kpi->add_option("--period", kpi_period, "year | month")->check(CLI::IsMember({"year", "month"}));
  kpi->add_option("-o,--output", kpi_output, "KPI CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*segment) {
      if (relative_only) silence.mode = callqa::ThresholdMode::kRelative;
      auto t = segment_wav(wav_path, call_id, silence);
      emit(seg_output, [&](std::ostream& out) { callqa::write_timeline_csv(out, {t}); });
    } else if (*features) {
      if (timelines_path.empty() == feat_wavs.empty())
        throw ConfigError("features", "give exactly one of --timelines or --wav");
      std::vector<callqa::SegmentTimeline> timelines;
      if (!timelines_path.empty()) {
        std::ifstream in(timelines_path);
        if (!in) throw DataError("cannot open " + timelines_path);
        timelines = callqa::load_timeline_csv(in);
      } else {
        for (const auto& w : feat_wavs) timelines.push_back(segment_wav(w, "", {}));
      }
      callqa::Dataset ds;
      for (const auto& t : timelines) ds.rows.push_back(callqa::compute_features(t));
      emit(feat_output, [&](std::ostream& out) { callqa::write_feature_csv(out, ds); });
    } else if (*synth) {
      callqa::SynthSpec spec = callqa::SynthSpec::benchmark();
      std::uint64_t seed = 1;
      if (!synth_cfg.config_path.empty()) {
        auto cfg = callqa::load_config_file(synth_cfg.config_path);
        if (cfg.synth) spec = *cfg.synth;
        seed = cfg.seed;
      }
      if (synth_cfg.seed) seed = *synth_cfg.seed;
      if (synth_n) spec.n_total = *synth_n;
      if (synth_pos) spec.malpractice_fraction = *synth_pos;
      if (synth_lab) spec.labeled_fraction = *synth_lab;
      spec.seed = callqa::synth_seed_for(seed);
      auto ds = callqa::synth_dataset(spec);
      emit(synth_cfg.output, [&](std::ostream& out) { callqa::write_feature_csv(out, ds); });
    } else if (*split) {
      auto ds = callqa::load_feature_csv_file(split_input);
      callqa::split_dataset(ds);  // validates the split
      callqa::Dataset train, val;
      for (const auto& r : ds.rows) (r.label ? val : train).rows.push_back(r);
      if (!train_out.empty()) emit(train_out, [&](std::ostream& out) { callqa::write_feature_csv(out, train); });
      if (!val_out.empty()) emit(val_out, [&](std::ostream& out) { callqa::write_feature_csv(out, val); });
      std::cout << "train " << train.size() << "\nvalidation " << val.size() << "\n";
    } else if (*fit) {
      auto cfg = fit_cfg.load();
      auto parts = callqa::split_dataset(callqa::load_dataset(cfg));
      if (cfg.use_rbm && cfg.grid) callqa::require_both_classes(parts);
      auto outcome = callqa::fit_pipeline(cfg, parts);
      emit(cfg.output, [&](std::ostream& out) { out << callqa::to_json(outcome.pipeline).dump(2) << '\n'; });
    } else if (*evaluate) {
      if (!model_path.empty()) {
        std::ifstream in(model_path);
        if (!in) throw DataError("cannot open " + model_path);
        json mj;
        try {
          mj = json::parse(in);
        } catch (const json::parse_error& e) {
          throw DataError(std::string("invalid model JSON: ") + e.what());
        }
        auto model = callqa::fitted_pipeline_from_json(mj);
        if (eval_cfg.input.empty()) throw ConfigError("input", "evaluate --model needs --input");
        auto ds = callqa::load_feature_csv_file(eval_cfg.input);
        callqa::Dataset labeled;
        for (const auto& r : ds.rows)
          if (r.label) labeled.rows.push_back(r);
        if (labeled.rows.empty()) throw DataError("no labeled rows to evaluate");
        auto metrics = callqa::evaluate(labeled.labels(), model.predict(labeled.feature_matrix()));
        json report{{"schema_version", callqa::kSchemaVersion},
                    {"model", model.model_name},
                    {"n_evaluated", labeled.size()},
                    {"metrics", callqa::to_json(metrics)}};
        emit(eval_cfg.output, [&](std::ostream& out) { out << report.dump(2) << '\n'; });
      } else {
        auto cfg = eval_cfg.load();
        auto out_path = cfg.output;
        cfg.output.clear();
        auto report = callqa::run_pipeline(cfg);
        emit(out_path, [&](std::ostream& out) { out << callqa::to_json(report).dump(2) << '\n'; });
      }
    } else if (*search) {
      auto cfg = search_cfg.load();
      if (!cfg.grid) throw ConfigError("grid_hidden_units", "search needs grid_* keys");
      auto parts = callqa::split_dataset(callqa::load_dataset(cfg));
      auto tm = callqa::transform_fit(callqa::to_kind(cfg.transform), parts.train, callqa::feature_names());
      callqa::SearchOptions opt;
      opt.pipeline.epochs = cfg.rbm_epochs;
      opt.pipeline.master_seed = cfg.seed;
      opt.pipeline.kmeans_seed = cfg.kmeans_seed();
      opt.selection = cfg.selection;
      opt.workers = cfg.workers;
      auto report = callqa::grid_search(callqa::transform_apply(tm, parts.train),
                                        callqa::transform_apply(tm, parts.validation), parts.validation_labels,
                                        *cfg.grid, opt);
      emit(cfg.output, [&](std::ostream& out) { out << callqa::to_json(report).dump(2) << '\n'; });
      if (!cfg.output_csv.empty())
        emit(cfg.output_csv, [&](std::ostream& out) { callqa::write_search_csv(out, report); });
    } else if (*compare) {
      auto cfg = compare_cfg.load();
      auto parts = callqa::split_dataset(callqa::load_dataset(cfg));
      auto reports = callqa::compare_arms(cfg, parts);
      emit(cfg.output_csv, [&](std::ostream& out) { callqa::write_compare_csv(out, reports); });
      if (!cfg.output.empty())
        emit(cfg.output, [&](std::ostream& out) { out << callqa::compare_to_json(reports).dump(2) << '\n'; });
    } else if (*kpi) {
      auto ds = callqa::load_feature_csv_file(kpi_input);
      auto rows = callqa::kpi_report(ds, kpi_period == "month" ? callqa::KpiPeriod::kMonth : callqa::KpiPeriod::kYear);
      emit(kpi_output, [&](std::ostream& out) { callqa::write_kpi_csv(out, rows); });
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const callqa::TrainingDivergedError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
