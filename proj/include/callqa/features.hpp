#pragma once
// Per-call segment timelines, the energy-threshold silence segmenter and the
// four-fraction feature vector derived from a timeline.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "callqa/common.hpp"

namespace callqa {

enum class SegmentClass { kSpeech = 0, kMusic = 1, kNoise = 2, kSilence = 3 };

inline constexpr std::array<SegmentClass, 4> kAllSegmentClasses = {
    SegmentClass::kSpeech, SegmentClass::kMusic, SegmentClass::kNoise, SegmentClass::kSilence};

inline std::string to_string(SegmentClass c) {
  switch (c) {
    case SegmentClass::kSpeech: return "speech";
    case SegmentClass::kMusic: return "music";
    case SegmentClass::kNoise: return "noise";
    case SegmentClass::kSilence: return "silence";
  }
  return "unknown";
}

inline std::optional<SegmentClass> parse_segment_class(std::string_view s) {
  for (auto c : kAllSegmentClasses)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

struct Segment {
  double start = 0.0;
  double end = 0.0;
  SegmentClass cls = SegmentClass::kSpeech;

  bool operator==(const Segment&) const = default;
};

struct SegmentTimeline {
  std::string call_id;
  double duration = 0.0;
  std::vector<Segment> segments;
};

inline constexpr double kTimelineTolerance = 1e-6;

// Throws DataError describing the first violated invariant.
inline void validate_timeline(const SegmentTimeline& t) {
  auto fail = [&](const std::string& why) {
    throw DataError("invalid timeline '" + t.call_id + "': " + why);
  };
  if (!(t.duration > 0.0) || !std::isfinite(t.duration)) fail("duration must be positive");
  if (t.segments.empty()) fail("no segments");
  if (std::abs(t.segments.front().start) > kTimelineTolerance) fail("first segment must start at 0");
  if (std::abs(t.segments.back().end - t.duration) > kTimelineTolerance)
    fail("last segment must end at the call duration");
  for (std::size_t i = 0; i < t.segments.size(); ++i) {
    const auto& s = t.segments[i];
    if (!std::isfinite(s.start) || !std::isfinite(s.end) || !(s.start < s.end))
      fail("segment " + std::to_string(i) + " has start >= end");
    if (i > 0) {
      const auto& prev = t.segments[i - 1];
      if (std::abs(prev.end - s.start) > kTimelineTolerance)
        fail("segment " + std::to_string(i) + " does not start where the previous one ends");
      if (prev.cls == s.cls)
        fail("segments " + std::to_string(i - 1) + " and " + std::to_string(i) + " share a class");
    }
  }
}

struct Date {
  int year = 1970;
  unsigned month = 1;
  unsigned day = 1;

  auto operator<=>(const Date&) const = default;
};

inline std::optional<Date> parse_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto digits = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  auto y = digits(0, 4), m = digits(5, 2), d = digits(8, 2);
  if (!y || !m || !d) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                                  std::chrono::day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date{*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d)};
}

inline std::string to_string(const Date& d) {
  std::array<char, 16> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02u", d.year, d.month, d.day);
  return buf.data();
}

inline constexpr int kLabelNonMalpractice = 0;
inline constexpr int kLabelMalpractice = 1;

struct FeatureVector {
  std::string call_id;
  double duration = 0.0;
  double pct_speech = 0.0;
  double pct_music = 0.0;
  double pct_noise = 0.0;
  double pct_silence = 0.0;
  std::optional<int> label;
  std::optional<Date> date;

  std::array<double, 4> fractions() const { return {pct_speech, pct_music, pct_noise, pct_silence}; }
};

inline constexpr std::size_t kNumFeatures = 4;

struct Dataset {
  std::vector<FeatureVector> rows;

  std::size_t size() const noexcept { return rows.size(); }
  std::size_t labeled_count() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.label.has_value(); }));
  }

  // n x 4 matrix in (speech, music, noise, silence) column order.
  Matrix feature_matrix() const {
    Matrix m(rows.size(), kNumFeatures);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto f = rows[i].fractions();
      std::copy(f.begin(), f.end(), m.row(i).begin());
    }
    return m;
  }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
      if (!r.label) throw DataError("row '" + r.call_id + "' has no label");
      out.push_back(*r.label);
    }
    return out;
  }
};

inline FeatureVector compute_features(const SegmentTimeline& timeline) {
  validate_timeline(timeline);
  std::array<double, 4> per_class{};
  double covered = 0.0;
  for (const auto& s : timeline.segments) {
    per_class[static_cast<std::size_t>(s.cls)] += s.end - s.start;
    covered += s.end - s.start;
  }
  // Normalizing by the covered length rather than the nominal duration keeps
  // the fractions summing to one when boundaries carry sub-tolerance gaps.
  FeatureVector f;
  f.call_id = timeline.call_id;
  f.duration = timeline.duration;
  f.pct_speech = per_class[0] / covered;
  f.pct_music = per_class[1] / covered;
  f.pct_noise = per_class[2] / covered;
  f.pct_silence = per_class[3] / covered;
  return f;
}

// ---------------------------------------------------------------------------
// Energy-threshold silence segmenter.

enum class ThresholdMode {
  kFloorOrRelative,  // threshold = max(absolute_floor, rel_factor * median RMS)
  kRelative,         // threshold = rel_factor * median RMS (scale-free)
};

struct SilenceConfig {
  double frame_s = 0.025;
  double hop_s = 0.010;
  double absolute_floor = 1e-4;  // fraction of full scale
  double rel_factor = 0.1;
  double min_segment_s = 0.2;
  ThresholdMode mode = ThresholdMode::kFloorOrRelative;
};

namespace detail {

inline double median(std::vector<double> v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  double hi = *mid;
  if (n % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

struct Run {
  SegmentClass cls;
  std::size_t begin;  // sample offsets
  std::size_t end;
};

inline void coalesce(std::vector<Run>& runs) {
  std::vector<Run> out;
  for (const auto& r : runs) {
    if (!out.empty() && out.back().cls == r.cls)
      out.back().end = r.end;
    else
      out.push_back(r);
  }
  runs = std::move(out);
}

// Repeatedly absorbs the shortest run below min_len into whichever neighbour
// is longer (left on ties) until every run is long enough or one remains.
inline void smooth_runs(std::vector<Run>& runs, double min_len) {
  coalesce(runs);
  while (runs.size() > 1) {
    std::size_t victim = runs.size();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      double len = static_cast<double>(runs[i].end - runs[i].begin);
      if (len >= min_len) continue;
      if (victim == runs.size() || runs[i].end - runs[i].begin < runs[victim].end - runs[victim].begin)
        victim = i;
    }
    if (victim == runs.size()) break;
    bool has_left = victim > 0;
    bool has_right = victim + 1 < runs.size();
    bool to_left = has_left;
    if (has_left && has_right) {
      auto left_len = runs[victim - 1].end - runs[victim - 1].begin;
      auto right_len = runs[victim + 1].end - runs[victim + 1].begin;
      to_left = left_len >= right_len;
    }
    runs[victim].cls = to_left ? runs[victim - 1].cls : runs[victim + 1].cls;
    coalesce(runs);
  }
}

}  // namespace detail

// Two-class (silence / speech) segmentation of mono PCM samples in full-scale
// units ([-1, 1]). Frame decisions are mapped onto hop-sized chunks: a chunk
// is silent when any frame overlapping it is silent, which places the
// boundary of a clean silence/signal transition on the hop grid next to it.
inline SegmentTimeline segment_silence(std::span<const double> samples, double sample_rate,
                                       const SilenceConfig& cfg = {}, std::string call_id = {}) {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw std::invalid_argument("sample rate must be positive");
  if (samples.empty()) throw std::invalid_argument("no samples");
  if (!all_finite(samples)) throw std::invalid_argument("non-finite sample");
  const auto frame = static_cast<std::size_t>(std::llround(cfg.frame_s * sample_rate));
  const auto hop = static_cast<std::size_t>(std::llround(cfg.hop_s * sample_rate));
  if (frame == 0 || hop == 0) throw std::invalid_argument("frame and hop must span at least one sample");
  const std::size_t n = samples.size();
  if (n < frame) throw std::invalid_argument("fewer samples than one frame");

  const std::size_t n_frames = 1 + (n - frame) / hop;
  std::vector<double> rms(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    double acc = 0.0;
    for (std::size_t i = f * hop; i < f * hop + frame; ++i) acc += samples[i] * samples[i];
    rms[f] = std::sqrt(acc / static_cast<double>(frame));
  }
  double threshold = cfg.rel_factor * detail::median(rms);
  if (cfg.mode == ThresholdMode::kFloorOrRelative) threshold = std::max(cfg.absolute_floor, threshold);

  std::vector<bool> frame_silent(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) frame_silent[f] = rms[f] < threshold || rms[f] == 0.0;

  const std::size_t n_chunks = (n + hop - 1) / hop;
  std::vector<detail::Run> runs;
  runs.reserve(n_chunks);
  for (std::size_t k = 0; k < n_chunks; ++k) {
    const std::size_t c0 = k * hop;
    const std::size_t c1 = std::min(n, c0 + hop);
    // frames f with f*hop < c1 and f*hop + frame > c0
    std::size_t f_hi = std::min(n_frames - 1, (c1 - 1) / hop);
    std::size_t f_lo = c0 + 1 > frame ? (c0 + 1 - frame + hop - 1) / hop : 0;
    bool silent = false;
    if (f_lo > f_hi) {
      silent = frame_silent[n_frames - 1];
    } else {
      for (std::size_t f = f_lo; f <= f_hi; ++f) silent = silent || frame_silent[f];
    }
    runs.push_back({silent ? SegmentClass::kSilence : SegmentClass::kSpeech, c0, c1});
  }
  detail::smooth_runs(runs, cfg.min_segment_s * sample_rate);

  SegmentTimeline t;
  t.call_id = std::move(call_id);
  t.duration = static_cast<double>(n) / sample_rate;
  for (const auto& r : runs)
    t.segments.push_back({static_cast<double>(r.begin) / sample_rate, static_cast<double>(r.end) / sample_rate, r.cls});
  t.segments.back().end = t.duration;
  return t;
}

}  // namespace callqa
