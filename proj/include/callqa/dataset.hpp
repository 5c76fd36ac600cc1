#pragma once
// Synthetic datasets, the labeled/unlabeled split and the silence KPI table.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "callqa/common.hpp"
#include "callqa/feature_io.hpp"
#include "callqa/features.hpp"

namespace callqa {

struct SynthSpec {
  std::size_t n_total = 20000;
  double malpractice_fraction = 0.03;
  // Dirichlet concentrations over (speech, music, noise, silence).
  std::array<double, 4> alpha_malpractice = {0.4, 0.9, 0.9, 10.5};
  std::array<double, 4> alpha_normal = {10.0, 0.3, 0.7, 1.5};
  double labeled_fraction = 0.022;
  std::uint64_t seed = 1;
  int start_year = 2016;
  int end_year = 2020;

  // Desk-scale stand-in for the production corpus.
  static SynthSpec benchmark() { return {}; }
};

inline void validate(const SynthSpec& s) {
  if (!(s.malpractice_fraction > 0.0 && s.malpractice_fraction < 1.0))
    throw ConfigError("synth_malpractice_fraction", "must lie in (0, 1)");
  if (!(s.labeled_fraction > 0.0 && s.labeled_fraction < 1.0))
    throw ConfigError("synth_labeled_fraction", "must lie in (0, 1)");
  for (double a : s.alpha_malpractice)
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("synth_alpha_malpractice", "must be positive");
  for (double a : s.alpha_normal)
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("synth_alpha_normal", "must be positive");
  if (s.end_year < s.start_year) throw ConfigError("synth_end_year", "must not precede synth_start_year");
}

// Hidden ground truth is kept only for the labeled rows; unlabeled rows carry
// no label, matching the semi-supervised protocol.
struct SynthResult {
  Dataset dataset;
  std::vector<int> truth;  // per row, for diagnostics
};

inline SynthResult synth_dataset_with_truth(const SynthSpec& spec) {
  validate(spec);
  SynthResult out;
  const std::size_t n = spec.n_total;
  if (n == 0) return out;
  std::mt19937_64 rng(spec.seed);

  const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.malpractice_fraction));
  std::vector<int> cls(n, kLabelNonMalpractice);
  std::fill(cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(n_pos), kLabelMalpractice);
  std::shuffle(cls.begin(), cls.end(), rng);

  const auto n_lab = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.labeled_fraction));
  const std::size_t n_neg = n - n_pos;
  std::size_t n_lab_pos = std::min(
      n_pos, static_cast<std::size_t>(std::llround(static_cast<double>(n_lab) * static_cast<double>(n_pos) / n)));
  std::size_t n_lab_neg = std::min(n_neg, n_lab - n_lab_pos);

  std::vector<std::size_t> pos_idx, neg_idx;
  for (std::size_t i = 0; i < n; ++i) (cls[i] == kLabelMalpractice ? pos_idx : neg_idx).push_back(i);
  std::shuffle(pos_idx.begin(), pos_idx.end(), rng);
  std::shuffle(neg_idx.begin(), neg_idx.end(), rng);
  std::vector<bool> labeled(n, false);
  for (std::size_t i = 0; i < n_lab_pos; ++i) labeled[pos_idx[i]] = true;
  for (std::size_t i = 0; i < n_lab_neg; ++i) labeled[neg_idx[i]] = true;

  using namespace std::chrono;
  const sys_days first{year{spec.start_year} / January / 1};
  const sys_days last{year{spec.end_year} / December / 31};
  const auto span_days = (last - first).count() + 1;

  std::array<std::gamma_distribution<double>, 4> pos_gamma, neg_gamma;
  for (int k = 0; k < 4; ++k) {
    pos_gamma[k] = std::gamma_distribution<double>(spec.alpha_malpractice[k], 1.0);
    neg_gamma[k] = std::gamma_distribution<double>(spec.alpha_normal[k], 1.0);
  }
  std::exponential_distribution<double> extra_duration(1.0 / 90.0);

  out.dataset.rows.reserve(n);
  out.truth = cls;
  std::array<char, 32> id{};
  for (std::size_t i = 0; i < n; ++i) {
    auto& gammas = cls[i] == kLabelMalpractice ? pos_gamma : neg_gamma;
    std::array<double, 4> g{};
    double sum = 0.0;
    while (!(sum > 0.0)) {
      sum = 0.0;
      for (int k = 0; k < 4; ++k) sum += g[k] = gammas[k](rng);
    }
    FeatureVector fv;
    std::snprintf(id.data(), id.size(), "call_%06zu", i + 1);
    fv.call_id = id.data();
    fv.duration = 30.0 + extra_duration(rng);
    fv.pct_speech = g[0] / sum;
    fv.pct_music = g[1] / sum;
    fv.pct_noise = g[2] / sum;
    fv.pct_silence = g[3] / sum;
    if (labeled[i]) fv.label = cls[i];
    auto offset = static_cast<int>(uniform01(rng) * static_cast<double>(span_days));
    year_month_day ymd{first + days{offset}};
    fv.date = Date{static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day())};
    out.dataset.rows.push_back(std::move(fv));
  }
  return out;
}

inline Dataset synth_dataset(const SynthSpec& spec) { return synth_dataset_with_truth(spec).dataset; }

// ---------------------------------------------------------------------------

struct Split {
  Matrix train;
  Matrix validation;
  std::vector<int> validation_labels;
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
};

// Labeled rows form the validation set, unlabeled rows the training set.
inline Split split_dataset(const Dataset& ds) {
  Split s;
  std::vector<const FeatureVector*> train, val;
  for (const auto& r : ds.rows) (r.label ? val : train).push_back(&r);
  if (val.empty()) throw DataError("no labeled rows: validation set is empty");
  if (train.empty()) throw DataError("no unlabeled rows: training set is empty");
  auto fill = [](const std::vector<const FeatureVector*>& rows, Matrix& m, std::vector<std::string>& ids) {
    m = Matrix(rows.size(), kNumFeatures);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto f = rows[i]->fractions();
      std::copy(f.begin(), f.end(), m.row(i).begin());
      ids.push_back(rows[i]->call_id);
    }
  };
  fill(train, s.train, s.train_ids);
  fill(val, s.validation, s.validation_ids);
  for (const auto* r : val) s.validation_labels.push_back(*r->label);
  return s;
}

// ---------------------------------------------------------------------------

enum class KpiPeriod { kYear, kMonth };

struct KpiRow {
  std::string period;
  double mean_pct_silence = 0.0;
  std::size_t call_count = 0;

  bool operator==(const KpiRow&) const = default;
};

// Mean silence fraction per calendar period, periods ascending.
inline std::vector<KpiRow> kpi_report(const Dataset& ds, KpiPeriod period) {
  std::vector<std::string> missing;
  for (const auto& r : ds.rows)
    if (!r.date) missing.push_back(r.call_id);
  if (!missing.empty()) {
    std::string msg = "rows without a date:";
    for (const auto& id : missing) msg += " " + id;
    throw DataError(msg);
  }
  std::map<std::pair<int, unsigned>, std::pair<double, std::size_t>> groups;
  for (const auto& r : ds.rows) {
    auto key = std::make_pair(r.date->year, period == KpiPeriod::kMonth ? r.date->month : 0u);
    auto& [sum, count] = groups[key];
    sum += r.pct_silence;
    ++count;
  }
  std::vector<KpiRow> out;
  std::array<char, 16> buf{};
  for (const auto& [key, acc] : groups) {
    if (period == KpiPeriod::kMonth)
      std::snprintf(buf.data(), buf.size(), "%04d-%02u", key.first, key.second);
    else
      std::snprintf(buf.data(), buf.size(), "%04d", key.first);
    out.push_back({buf.data(), acc.first / static_cast<double>(acc.second), acc.second});
  }
  return out;
}

inline void write_kpi_csv(std::ostream& out, const std::vector<KpiRow>& rows) {
  out << "period,mean_pct_silence,call_count\n";
  for (const auto& r : rows) out << r.period << ',' << format_double(r.mean_pct_silence) << ',' << r.call_count << '\n';
}

inline Dataset load_feature_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return load_feature_csv(in);
}

}  // namespace callqa
