#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "callqa/callqa.hpp"

using namespace callqa;
using nlohmann::json;

namespace {

std::string csv_of(const Dataset& ds) {
  std::ostringstream out;
  write_feature_csv(out, ds);
  return out.str();
}

FeatureVector row(std::string id, double silence, std::optional<Date> date = {}, std::optional<int> label = {}) {
  return {std::move(id), 60.0, 1.0 - silence, 0.0, 0.0, silence, label, date};
}

json small_config() {
  return {{"schema_version", 1}, {"seed", 3},           {"transform", "zscore"},
          {"synth_n_total", 3000}, {"synth_labeled_fraction", 0.1}};
}

std::string without_timing(json j) {
  j.erase("timing");
  return j.dump();
}

}  // namespace

TEST(Synth, ExactClassCountsAndStratifiedLabels) {
  SynthSpec s;
  s.n_total = 1000;
  s.malpractice_fraction = 0.03;
  s.labeled_fraction = 0.2;
  auto r = synth_dataset_with_truth(s);
  ASSERT_EQ(r.dataset.size(), 1000u);
  EXPECT_EQ(std::count(r.truth.begin(), r.truth.end(), 1), 30);
  EXPECT_EQ(r.dataset.labeled_count(), 200u);
  std::size_t labeled_pos = 0;
  for (std::size_t i = 0; i < r.dataset.size(); ++i) {
    const auto& f = r.dataset.rows[i];
    if (f.label) {
      EXPECT_EQ(*f.label, r.truth[i]);
      labeled_pos += *f.label;
    }
    double sum = 0;
    for (double v : f.fractions()) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    ASSERT_TRUE(f.date);
    EXPECT_GE(f.date->year, 2016);
    EXPECT_LE(f.date->year, 2020);
  }
  EXPECT_EQ(labeled_pos, 6u);
}

TEST(Synth, EmptyAndDeterministic) {
  SynthSpec s;
  s.n_total = 0;
  EXPECT_EQ(synth_dataset(s).size(), 0u);
  s.n_total = 500;
  EXPECT_EQ(csv_of(synth_dataset(s)), csv_of(synth_dataset(s)));
  auto other = s;
  other.seed = 2;
  EXPECT_NE(csv_of(synth_dataset(s)), csv_of(synth_dataset(other)));
}

TEST(Synth, InvalidSpecNamesKey) {
  SynthSpec s;
  s.malpractice_fraction = 1.0;
  try {
    synth_dataset(s);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "synth_malpractice_fraction");
  }
  s = {};
  s.alpha_normal[2] = 0.0;
  EXPECT_THROW(synth_dataset(s), ConfigError);
  s = {};
  s.labeled_fraction = 0.0;
  EXPECT_THROW(synth_dataset(s), ConfigError);
}

TEST(Split, FullCorpusProportions) {
  SynthSpec s;
  s.n_total = 180000;
  s.labeled_fraction = 3885.0 / 180000.0;
  auto split = split_dataset(synth_dataset(s));
  EXPECT_EQ(split.train.rows(), 176115u);
  EXPECT_EQ(split.validation.rows(), 3885u);
  EXPECT_EQ(split.validation_labels.size(), 3885u);
}

TEST(Split, RequiresBothSides) {
  Dataset all_labeled{{row("a", 0.1, {}, 1), row("b", 0.2, {}, 0)}};
  EXPECT_THROW(split_dataset(all_labeled), DataError);
  Dataset none{{row("a", 0.1), row("b", 0.2)}};
  EXPECT_THROW(split_dataset(none), DataError);
  Dataset mixed{{row("a", 0.1), row("b", 0.2, {}, 1), row("c", 0.3)}};
  auto s = split_dataset(mixed);
  EXPECT_EQ(s.train_ids, (std::vector<std::string>{"a", "c"}));
  EXPECT_EQ(s.validation_ids, (std::vector<std::string>{"b"}));
}

TEST(Kpi, Examples) {
  Dataset two{{row("a", 0.2, Date{2019, 5, 1}), row("b", 0.4, Date{2019, 9, 9})}};
  auto t = kpi_report(two, KpiPeriod::kYear);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].period, "2019");
  EXPECT_NEAR(t[0].mean_pct_silence, 0.3, 1e-15);
  EXPECT_EQ(t[0].call_count, 2u);

  EXPECT_TRUE(kpi_report(Dataset{}, KpiPeriod::kYear).empty());

  Dataset years{{row("a", 0.5, Date{2020, 1, 1}), row("b", 0.1, Date{2017, 1, 1})}};
  auto y = kpi_report(years, KpiPeriod::kYear);
  ASSERT_EQ(y.size(), 2u);
  EXPECT_EQ(y[0].period, "2017");
  EXPECT_EQ(y[1].period, "2020");

  auto m = kpi_report(two, KpiPeriod::kMonth);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].period, "2019-05");
  EXPECT_EQ(m[1].period, "2019-09");
}

TEST(Kpi, MissingDatesListed) {
  Dataset ds{{row("a", 0.2, Date{2019, 1, 1}), row("b", 0.3), row("c", 0.1)}};
  try {
    kpi_report(ds, KpiPeriod::kYear);
    FAIL();
  } catch (const DataError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("b"), std::string::npos);
    EXPECT_NE(msg.find("c"), std::string::npos);
  }
}

TEST(Kpi, BruteForceOverCsvMatches) {
  SynthSpec s;
  s.n_total = 4000;
  std::istringstream in(csv_of(synth_dataset(s)));
  auto ds = load_feature_csv(in);
  for (auto period : {KpiPeriod::kYear, KpiPeriod::kMonth}) {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& r : ds.rows) {
      auto key = to_string(*r.date).substr(0, period == KpiPeriod::kYear ? 4 : 7);
      acc[key].first += r.pct_silence;
      acc[key].second++;
    }
    auto table = kpi_report(ds, period);
    ASSERT_EQ(table.size(), acc.size());
    std::size_t i = 0;
    for (const auto& [key, v] : acc) {
      EXPECT_EQ(table[i].period, key);
      EXPECT_EQ(table[i].mean_pct_silence, v.first / v.second);
      EXPECT_EQ(table[i].call_count, v.second);
      ++i;
    }
  }
}

TEST(Config, ErrorsNameTheKey) {
  auto key_of = [](json j) {
    try {
      validate(parse_config(j));
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("none");
  };
  auto base = small_config();
  EXPECT_EQ(key_of(base), "none");
  auto j = base;
  j.erase("schema_version");
  EXPECT_EQ(key_of(j), "schema_version");
  j = base;
  j["schema_version"] = 2;
  EXPECT_EQ(key_of(j), "schema_version");
  j = base;
  j["bogus"] = 1;
  EXPECT_EQ(key_of(j), "bogus");
  j = base;
  j["transform"] = "boxcox";
  EXPECT_EQ(key_of(j), "transform");
  j = base;
  j["cluster_k"] = 3;
  EXPECT_EQ(key_of(j), "cluster_k");
  j = base;
  j["seed"] = "one";
  EXPECT_EQ(key_of(j), "seed");
  j = base;
  j["feature_learning"] = "rbm";
  EXPECT_EQ(key_of(j), "feature_learning");  // neither fixed nor grid
  j["rbm_hidden_units"] = 4;
  EXPECT_EQ(key_of(j), "rbm_hidden_units");  // incomplete fixed triple
  j["rbm_learning_rate"] = 0.1;
  j["rbm_batch_size"] = 8;
  EXPECT_EQ(key_of(j), "none");
  j["transform"] = "none";
  EXPECT_EQ(key_of(j), "feature_learning");
  j = base;
  j["selection_metric"] = "accuracy";
  EXPECT_EQ(key_of(j), "selection_metric");
  j = base;
  j["input"] = "x.csv";
  j["output"] = "x.csv";
  EXPECT_EQ(key_of(j), "output");
  j = base;
  j["grid_hidden_units"] = json::array();
  j["grid_learning_rates"] = {0.1};
  j["grid_batch_sizes"] = {8};
  j["feature_learning"] = "rbm";
  EXPECT_EQ(key_of(j), "grid_hidden_units");
  j = base;
  j["synth_labeled_fraction"] = 1.5;
  EXPECT_EQ(key_of(j), "synth_labeled_fraction");
  j = base;
  j["split_policy"] = "random";
  EXPECT_EQ(key_of(j), "split_policy");
}

TEST(Config, JsonEchoRoundTrips) {
  auto j = small_config();
  j["feature_learning"] = "rbm";
  j["grid_hidden_units"] = {2, 20};
  j["grid_logspace"] = {-3, 0, 20};
  j["grid_batch_sizes"] = {8};
  auto cfg = parse_config(j);
  auto again = parse_config(to_json(cfg));
  EXPECT_EQ(to_json(again), to_json(cfg));
  EXPECT_EQ(build_grid(*again.grid).size(), 40u);
}

TEST(Pipeline, KMeansArmConfusionCoversValidation) {
  auto cfg = parse_config({{"schema_version", 1}, {"seed", 1}, {"synth_n_total", 20000}});
  auto r = run_pipeline(cfg);
  EXPECT_EQ(r.model_name, "k-means");
  EXPECT_EQ(r.metrics.confusion.total(), r.dataset.n_validation);
  EXPECT_EQ(r.dataset.n_validation, 440u);
  EXPECT_EQ(r.dataset.n_rows, 20000u);
}

TEST(Pipeline, ReportIsDeterministicApartFromTiming) {
  auto j = small_config();
  j["transform"] = "power";
  j["feature_learning"] = "rbm";
  j["grid_hidden_units"] = {2, 5};
  j["grid_learning_rates"] = {0.05};
  j["grid_batch_sizes"] = {16};
  j["rbm_epochs"] = 4;
  auto cfg = parse_config(j);
  auto a = to_json(run_pipeline(cfg)), b = to_json(run_pipeline(cfg));
  EXPECT_EQ(without_timing(a), without_timing(b));
  EXPECT_EQ(a["model"], "PT_RBM_k-means");
  EXPECT_EQ(a["search"]["n_points"], 2);
  EXPECT_FALSE(a["hyperparameters"].is_null());
  for (const char* key : {"schema_version", "config", "dataset", "metrics", "timing"}) EXPECT_TRUE(a.contains(key));
}

TEST(Pipeline, FittedModelRoundTripsThroughJson) {
  for (bool rbm : {false, true}) {
    auto j = small_config();
    if (rbm) {
      j["feature_learning"] = "rbm";
      j["rbm_hidden_units"] = 3;
      j["rbm_learning_rate"] = 0.05;
      j["rbm_batch_size"] = 16;
      j["rbm_epochs"] = 3;
    }
    auto cfg = parse_config(j);
    auto split = split_dataset(load_dataset(cfg));
    auto fit = fit_pipeline(cfg, split).pipeline;
    auto back = fitted_pipeline_from_json(json::parse(to_json(fit).dump()));
    EXPECT_EQ(back.model_name, fit.model_name);
    EXPECT_EQ(back.predict(split.validation), fit.predict(split.validation));
    EXPECT_EQ(back.predict(split.train), fit.predict(split.train));
  }
}

TEST(Pipeline, SearchedModelEqualsRefit) {
  auto j = small_config();
  j["feature_learning"] = "rbm";
  j["grid_hidden_units"] = {2, 4};
  j["grid_learning_rates"] = {0.05, 0.2};
  j["grid_batch_sizes"] = {16};
  j["rbm_epochs"] = 3;
  auto cfg = parse_config(j);
  auto split = split_dataset(load_dataset(cfg));
  auto out = fit_pipeline(cfg, split);
  ASSERT_TRUE(out.search);
  auto m = evaluate(split.validation_labels, out.pipeline.predict(split.validation));
  EXPECT_EQ(m.confusion, out.search->best().metrics->confusion);
}

TEST(Pipeline, OneClassValidationIsDataError) {
  Dataset ds;
  for (int i = 0; i < 40; ++i) ds.rows.push_back(row("r" + std::to_string(i), 0.01 * (i % 17) + 0.05, {}, i < 5 ? std::optional<int>(0) : std::nullopt));
  auto cfg = parse_config({{"schema_version", 1}, {"input", "unused.csv"}});
  EXPECT_THROW(run_pipeline_on(cfg, split_dataset(ds)), DataError);
}

TEST(Compare, FiveArmsInOrderAndWorkerInvariant) {
  auto j = small_config();
  j["rbm_hidden_units"] = 3;
  j["rbm_learning_rate"] = 0.05;
  j["rbm_batch_size"] = 16;
  j["rbm_epochs"] = 3;
  auto cfg = parse_config(j);
  auto split = split_dataset(load_dataset(cfg));
  auto serial = compare_arms(cfg, split);
  cfg.workers = 4;
  auto parallel = compare_arms(cfg, split);
  ASSERT_EQ(serial.size(), 5u);
  for (std::size_t a = 0; a < 5; ++a) {
    EXPECT_EQ(serial[a].model_name, arm_names()[a]);
    EXPECT_EQ(serial[a].metrics.confusion, parallel[a].metrics.confusion);
  }
  std::ostringstream x, y;
  write_compare_csv(x, serial);
  write_compare_csv(y, parallel);
  EXPECT_EQ(x.str(), y.str());
  EXPECT_EQ(x.str().substr(0, kCompareCsvHeader.size()), kCompareCsvHeader);

  cfg.rbm_fixed.reset();
  EXPECT_THROW(compare_arms(cfg, split), ConfigError);
}

TEST(Seeds, StreamsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s : {kStreamRbmInit, kStreamRbmShuffle, kStreamKMeans, kStreamSynth})
    for (std::uint64_t i = 0; i < 50; ++i) EXPECT_TRUE(seen.insert(derive_seed(1, s, i)).second);
  EXPECT_EQ(derive_seed(9, kStreamSynth), synth_seed_for(9));
}
