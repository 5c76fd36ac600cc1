#pragma once
// CSV interchange for feature datasets and segment timelines.

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "callqa/common.hpp"
#include "callqa/features.hpp"

namespace callqa {

inline constexpr std::string_view kFeatureCsvHeader =
    "call_id,duration_s,pct_speech,pct_music,pct_noise,pct_silence,label,date";
inline constexpr std::string_view kTimelineCsvHeader = "call_id,start_s,end_s,class";
inline constexpr double kCsvSumTolerance = 1e-4;

namespace detail {

inline void check_call_id(const std::string& id, std::size_t line) {
  if (id.empty()) throw DataError("line " + std::to_string(line) + ": empty call_id");
}

inline double parse_field(const std::string& s, const char* name, std::size_t line) {
  auto v = parse_double(s);
  if (!v || !std::isfinite(*v))
    throw DataError("line " + std::to_string(line) + ": non-numeric " + name + " '" + s + "'");
  return *v;
}

}  // namespace detail

inline void write_feature_csv(std::ostream& out, const Dataset& dataset) {
  out << kFeatureCsvHeader << '\n';
  for (const auto& r : dataset.rows) {
    if (r.call_id.find(',') != std::string::npos) throw DataError("call_id contains a comma: " + r.call_id);
    out << r.call_id << ',' << format_fixed(r.duration, 6) << ',' << format_fixed(r.pct_speech, 6) << ','
        << format_fixed(r.pct_music, 6) << ',' << format_fixed(r.pct_noise, 6) << ','
        << format_fixed(r.pct_silence, 6) << ',';
    if (r.label) out << *r.label;
    out << ',';
    if (r.date) out << to_string(*r.date);
    out << '\n';
  }
}

// Rejects malformed rows with a DataError naming the 1-based file line.
inline Dataset load_feature_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kFeatureCsvHeader)
    throw DataError("line 1: malformed header, expected '" + std::string(kFeatureCsvHeader) + "'");
  Dataset ds;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = strip_cr(line);
    if (view.empty()) continue;
    auto fields = split_csv_line(view);
    if (fields.size() != 8)
      throw DataError("line " + std::to_string(line_no) + ": expected 8 fields, got " + std::to_string(fields.size()));
    FeatureVector fv;
    fv.call_id = fields[0];
    detail::check_call_id(fv.call_id, line_no);
    if (!seen.insert(fv.call_id).second)
      throw DataError("line " + std::to_string(line_no) + ": duplicate call_id '" + fv.call_id + "'");
    fv.duration = detail::parse_field(fields[1], "duration_s", line_no);
    if (fv.duration < 0.0) throw DataError("line " + std::to_string(line_no) + ": negative duration");
    static constexpr const char* kNames[] = {"pct_speech", "pct_music", "pct_noise", "pct_silence"};
    double* slots[] = {&fv.pct_speech, &fv.pct_music, &fv.pct_noise, &fv.pct_silence};
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
      double v = detail::parse_field(fields[2 + i], kNames[i], line_no);
      if (v < 0.0 || v > 1.0)
        throw DataError("line " + std::to_string(line_no) + ": " + kNames[i] + " outside [0,1]");
      *slots[i] = v;
      sum += v;
    }
    if (std::abs(sum - 1.0) > kCsvSumTolerance)
      throw DataError("line " + std::to_string(line_no) + ": fractions sum to " + format_double(sum) + ", not 1");
    if (fields[6] == "0")
      fv.label = kLabelNonMalpractice;
    else if (fields[6] == "1")
      fv.label = kLabelMalpractice;
    else if (!fields[6].empty())
      throw DataError("line " + std::to_string(line_no) + ": label must be empty, 0 or 1");
    if (!fields[7].empty()) {
      fv.date = parse_iso_date(fields[7]);
      if (!fv.date) throw DataError("line " + std::to_string(line_no) + ": invalid date '" + fields[7] + "'");
    }
    ds.rows.push_back(std::move(fv));
  }
  return ds;
}

inline void write_timeline_csv(std::ostream& out, const std::vector<SegmentTimeline>& timelines) {
  out << kTimelineCsvHeader << '\n';
  for (const auto& t : timelines)
    for (const auto& s : t.segments)
      out << t.call_id << ',' << format_fixed(s.start, 6) << ',' << format_fixed(s.end, 6) << ','
          << to_string(s.cls) << '\n';
}

// Rows are grouped by call_id in first-appearance order; each call's duration
// is the end of its last segment. Every timeline is validated.
inline std::vector<SegmentTimeline> load_timeline_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kTimelineCsvHeader)
    throw DataError("line 1: malformed header, expected '" + std::string(kTimelineCsvHeader) + "'");
  std::vector<SegmentTimeline> out;
  std::map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = strip_cr(line);
    if (view.empty()) continue;
    auto fields = split_csv_line(view);
    if (fields.size() != 4)
      throw DataError("line " + std::to_string(line_no) + ": expected 4 fields, got " + std::to_string(fields.size()));
    detail::check_call_id(fields[0], line_no);
    Segment s;
    s.start = detail::parse_field(fields[1], "start_s", line_no);
    s.end = detail::parse_field(fields[2], "end_s", line_no);
    auto cls = parse_segment_class(fields[3]);
    if (!cls) throw DataError("line " + std::to_string(line_no) + ": unknown class '" + fields[3] + "'");
    s.cls = *cls;
    auto [it, inserted] = index.try_emplace(fields[0], out.size());
    if (inserted) out.push_back(SegmentTimeline{fields[0], 0.0, {}});
    out[it->second].segments.push_back(s);
  }
  for (auto& t : out) {
    t.duration = t.segments.back().end;
    validate_timeline(t);
  }
  return out;
}

}  // namespace callqa
