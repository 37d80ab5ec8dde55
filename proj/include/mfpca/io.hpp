#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "mfpca/errors.hpp"
#include "mfpca/grid.hpp"
#include "mfpca/operators.hpp"
#include "mfpca/smoother.hpp"

namespace mfpca {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

inline double parse_double_field(const std::string& field, const char* name, long line_no) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw DataError("line " + std::to_string(line_no) + ": cannot parse " + name + " '" + field + "'");
  }
  return v;
}

}  // namespace detail

inline constexpr const char* kLongCsvHeader = "source_id,subject_id,time,value";

// Long-format observation table -> per-source samples. Sources and subjects
// keep their first-appearance order so ingestion is deterministic. Times
// must already live in [0,1] unless rescale_time is set, in which case the
// observed range is mapped onto [0,1] (never silently otherwise).
inline std::vector<SourceSample> read_long_csv(std::istream& in, bool rescale_time = false) {
  std::string line;
  long line_no = 0;

  if (!std::getline(in, line)) throw DataError("empty input: expected header '" + std::string(kLongCsvHeader) + "'");
  ++line_no;
  {
    const std::vector<std::string> h = detail::split_csv_line(line);
    const std::vector<std::string> want = {"source_id", "subject_id", "time", "value"};
    if (h.size() != want.size() || !std::equal(h.begin(), h.end(), want.begin())) {
      throw DataError("line 1: expected header '" + std::string(kLongCsvHeader) + "', got '" +
                      detail::trim(line) + "'");
    }
  }

  struct Row {
    std::string source;
    std::string subject;
    double time;
    double value;
    long line_no;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> f = detail::split_csv_line(line);
    if (f.size() != 4) {
      throw DataError("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                      std::to_string(f.size()));
    }
    if (f[0].empty() || f[1].empty()) {
      throw DataError("line " + std::to_string(line_no) + ": empty source or subject id");
    }
    Row r;
    r.source = f[0];
    r.subject = f[1];
    r.time = detail::parse_double_field(f[2], "time", line_no);
    r.value = detail::parse_double_field(f[3], "value", line_no);
    r.line_no = line_no;
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("no data rows after the header");

  if (rescale_time) {
    double lo = rows.front().time, hi = rows.front().time;
    for (const Row& r : rows) {
      lo = std::min(lo, r.time);
      hi = std::max(hi, r.time);
    }
    if (!(hi > lo)) throw DataError("cannot rescale: all observation times are identical");
    for (Row& r : rows) r.time = (r.time - lo) / (hi - lo);
  } else {
    for (const Row& r : rows) {
      if (r.time < 0.0 || r.time > 1.0) {
        throw DataError("line " + std::to_string(r.line_no) + ": time " + std::to_string(r.time) +
                        " outside [0,1] (use time rescaling to map the observed range)");
      }
    }
  }

  std::vector<SourceSample> sources;
  std::map<std::string, std::size_t> source_index;
  std::map<std::pair<std::string, std::string>, std::size_t> subject_index;
  for (const Row& r : rows) {
    auto si = source_index.find(r.source);
    if (si == source_index.end()) {
      si = source_index.emplace(r.source, sources.size()).first;
      sources.push_back(SourceSample{r.source, {}});
    }
    SourceSample& src = sources[si->second];
    const std::pair<std::string, std::string> key{r.source, r.subject};
    auto bi = subject_index.find(key);
    if (bi == subject_index.end()) {
      bi = subject_index.emplace(key, src.subjects.size()).first;
      src.subjects.push_back(SubjectRecord{r.subject, {}, {}});
    }
    SubjectRecord& subj = src.subjects[bi->second];
    subj.times.push_back(r.time);
    subj.values.push_back(r.value);
  }
  return sources;
}

inline std::vector<SourceSample> read_long_csv_file(const std::string& path, bool rescale_time = false) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_long_csv(in, rescale_time);
}

// Compact, locale-independent formatting for plot-grade CSV output.
inline std::string csv_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::string(buf);
}

// Full-precision formatting for data that is read back: 17 significant
// digits round-trip every double exactly.
inline std::string csv_double_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline std::string long_csv(const std::vector<SourceSample>& sources) {
  std::ostringstream os;
  os << kLongCsvHeader << '\n';
  for (const auto& src : sources) {
    for (const auto& subj : src.subjects) {
      for (std::size_t j = 0; j < subj.times.size(); ++j) {
        os << src.source_id << ',' << subj.subject_id << ',' << csv_double_exact(subj.times[j]) << ','
           << csv_double_exact(subj.values[j]) << '\n';
      }
    }
  }
  return os.str();
}

inline std::string scree_csv(const Eigen::VectorXd& eigenvalues) {
  std::ostringstream os;
  os << "index,eigenvalue\n";
  for (int i = 0; i < eigenvalues.size(); ++i) os << (i + 1) << ',' << csv_double(eigenvalues[i]) << '\n';
  return os.str();
}

inline std::string eigenvalues_csv(const Eigen::VectorXd& eigenvalues) {
  return scree_csv(eigenvalues);
}

// One column per function, sampled on the grid: t, f1, ..., fm.
inline std::string functions_csv(const GridPtr& grid, const std::vector<GridFunction>& fns,
                                 const std::string& stem) {
  std::ostringstream os;
  os << "t";
  for (std::size_t k = 0; k < fns.size(); ++k) os << ',' << stem << (k + 1);
  os << '\n';
  for (int i = 0; i < grid->size(); ++i) {
    os << csv_double(grid->points()[i]);
    for (const auto& f : fns) {
      require_same_grid(grid, f.grid, "functions_csv");
      os << ',' << csv_double(f.values[i]);
    }
    os << '\n';
  }
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace mfpca
