#include "hydroscen/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "hydroscen/errors.hpp"

namespace hydroscen {
namespace {

constexpr const char* kForcingHeader = "year,month,row,col,precip_mm,temp_c";
constexpr const char* kDischargeHeader = "year,month,plant_id,discharge_m3s";

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

// Line-oriented reader that strips '\r' and skips blank lines.
class CsvLines {
public:
  CsvLines(const std::string& text, std::string source) : in_(text), source_(std::move(source)) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  }

  std::size_t number() const { return number_; }
  const std::string& source() const { return source_; }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, number_, what); }

private:
  std::istringstream in_;
  std::string source_;
  std::size_t number_ = 0;
};

int parse_int(const std::string& s, const CsvLines& lines, const char* field) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    lines.fail(std::string("malformed row: bad integer in field '") + field + "'");
  return value;
}

double parse_double(const std::string& s, const CsvLines& lines, const char* field) {
  if (s.empty()) lines.fail(std::string("malformed row: empty field '") + field + "'");
  char* end = nullptr;
  double value = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(value))
    lines.fail(std::string("malformed row: bad number in field '") + field + "'");
  return value;
}

// Tracks month transitions in file order and rejects gaps and reversals.
class MonthTracker {
public:
  void observe(const YearMonth& ym, const CsvLines& lines) {
    if (!ym.valid()) lines.fail("malformed row: month out of range");
    if (!months_.empty()) {
      const YearMonth& last = months_.back();
      if (ym == last) return;
      if (ym < last) lines.fail("months not increasing: " + ym.str() + " after " + last.str());
      if (ym != last.next()) lines.fail("month gap: " + last.str() + " -> " + ym.str());
    }
    months_.push_back(ym);
  }
  const std::vector<YearMonth>& months() const { return months_; }

private:
  std::vector<YearMonth> months_;
};

void check_header(CsvLines& lines, const char* expected) {
  std::string line;
  if (!lines.next(line)) lines.fail("empty file");
  if (line != expected) lines.fail(std::string("unexpected header, want '") + expected + "'");
}

}  // namespace

std::string format_number(double value) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

std::vector<int> ForcingSeries::active_cells() const {
  std::vector<int> cells;
  for (int i = 0; i < static_cast<int>(mask.size()); ++i)
    if (mask[i]) cells.push_back(i);
  return cells;
}

ForcingSeries ForcingSeries::slice(IndexSpan span) const {
  ForcingSeries out;
  out.grid = grid;
  out.mask = mask;
  out.months.assign(months.begin() + span.begin, months.begin() + span.end);
  out.precip = precip.middleRows(span.begin, span.size());
  out.temp = temp.middleRows(span.begin, span.size());
  return out;
}

DischargeHistory DischargeHistory::slice(IndexSpan span) const {
  DischargeHistory out;
  out.plants = plants;
  out.months.assign(months.begin() + span.begin, months.begin() + span.end);
  out.values = values.middleRows(span.begin, span.size());
  return out;
}

void validate(const ForcingSeries& s) {
  const int n = s.n_months();
  const int cells = s.grid.cells();
  if (s.grid.rows <= 0 || s.grid.cols <= 0) throw DataError("forcing grid shape must be positive");
  if (static_cast<int>(s.mask.size()) != cells) throw DataError("forcing mask size does not match grid");
  if (s.precip.rows() != n || s.precip.cols() != cells || s.temp.rows() != n || s.temp.cols() != cells)
    throw DataError("forcing matrices do not match (months x grid cells)");
  for (int t = 1; t < n; ++t) {
    if (s.months[t] != s.months[t - 1].next())
      throw DataError("month gap: " + s.months[t - 1].str() + " -> " + s.months[t].str());
  }
  for (int t = 0; t < n; ++t) {
    for (int c = 0; c < cells; ++c) {
      if (!s.mask[c]) continue;
      if (!std::isfinite(s.precip(t, c)) || !std::isfinite(s.temp(t, c)))
        throw DataError("non-finite forcing at " + s.months[t].str());
      if (s.precip(t, c) < 0.0) throw DataError("negative precipitation at " + s.months[t].str());
    }
  }
}

void validate(const DischargeHistory& h) {
  if (h.values.rows() != h.n_months() || h.values.cols() != h.n_plants())
    throw DataError("discharge matrix does not match (months x plants)");
  for (int t = 1; t < h.n_months(); ++t) {
    if (h.months[t] != h.months[t - 1].next())
      throw DataError("month gap: " + h.months[t - 1].str() + " -> " + h.months[t].str());
  }
  for (int t = 0; t < h.n_months(); ++t)
    for (int p = 0; p < h.n_plants(); ++p)
      if (!(h.values(t, p) > 0.0) || !std::isfinite(h.values(t, p)))
        throw DataError("discharge must be positive and finite (" + h.plants[p] + ", " +
                        h.months[t].str() + ")");
}

void validate(const EnsembleSet& e) {
  if (e.trajectories.empty()) throw DataError("ensemble has no trajectories");
  if (e.ids.size() != e.trajectories.size()) throw DataError("ensemble ids do not match trajectories");
  const auto expected = month_sequence(e.start, e.horizon);
  const auto& first = e.trajectories.front();
  for (std::size_t i = 0; i < e.trajectories.size(); ++i) {
    const auto& tr = e.trajectories[i];
    validate(tr);
    if (!(tr.grid == first.grid) || tr.mask != first.mask)
      throw DataError("trajectory " + std::to_string(e.ids[i]) + " grid or mask differs from the first");
    if (tr.months != expected)
      throw DataError("trajectory " + std::to_string(e.ids[i]) + " months do not match start/horizon");
  }
}

void check_aligned(const ForcingSeries& forcing, const DischargeHistory& history) {
  if (forcing.months != history.months)
    throw DataError("forcing and discharge months are not aligned");
}

ForcingSeries forcing_from_csv(const std::string& text, const std::string& source) {
  CsvLines lines(text, source);
  check_header(lines, kForcingHeader);

  struct Row {
    int month_index;
    int row, col;
    double precip, temp;
    std::size_t line;
  };
  std::vector<Row> rows;
  MonthTracker tracker;
  int max_row = -1, max_col = -1;
  std::string line;
  while (lines.next(line)) {
    auto f = split_fields(line);
    if (f.size() != 6) lines.fail("malformed row: expected 6 fields, got " + std::to_string(f.size()));
    YearMonth ym{parse_int(f[0], lines, "year"), parse_int(f[1], lines, "month")};
    tracker.observe(ym, lines);
    Row r;
    r.month_index = static_cast<int>(tracker.months().size()) - 1;
    r.row = parse_int(f[2], lines, "row");
    r.col = parse_int(f[3], lines, "col");
    r.precip = parse_double(f[4], lines, "precip_mm");
    r.temp = parse_double(f[5], lines, "temp_c");
    r.line = lines.number();
    if (r.row < 0 || r.col < 0) lines.fail("malformed row: negative grid index");
    if (r.precip < 0.0) lines.fail("negative precipitation");
    max_row = std::max(max_row, r.row);
    max_col = std::max(max_col, r.col);
    rows.push_back(r);
  }
  if (rows.empty()) lines.fail("no data rows");

  ForcingSeries s;
  s.months = tracker.months();
  s.grid = GridShape{max_row + 1, max_col + 1};
  const int cells = s.grid.cells();
  const int n = s.n_months();
  s.precip = Eigen::MatrixXd::Zero(n, cells);
  s.temp = Eigen::MatrixXd::Zero(n, cells);
  s.mask.assign(cells, false);

  std::vector<std::vector<char>> seen(n, std::vector<char>(cells, 0));
  for (const auto& r : rows) {
    int c = r.row * s.grid.cols + r.col;
    if (seen[r.month_index][c]) throw ParseError(source, r.line, "duplicate cell for month");
    seen[r.month_index][c] = 1;
    s.mask[c] = true;
    s.precip(r.month_index, c) = r.precip;
    s.temp(r.month_index, c) = r.temp;
  }
  for (int t = 0; t < n; ++t)
    for (int c = 0; c < cells; ++c)
      if (s.mask[c] && !seen[t][c])
        throw DataError(source + ": cell (" + std::to_string(c / s.grid.cols) + "," +
                        std::to_string(c % s.grid.cols) + ") missing in " + s.months[t].str());
  return s;
}

std::string forcing_to_csv(const ForcingSeries& s) {
  std::string out = kForcingHeader;
  out += '\n';
  const auto cells = s.active_cells();
  for (int t = 0; t < s.n_months(); ++t) {
    for (int c : cells) {
      out += std::to_string(s.months[t].year) + ',' + std::to_string(s.months[t].month) + ',' +
             std::to_string(c / s.grid.cols) + ',' + std::to_string(c % s.grid.cols) + ',' +
             format_number(s.precip(t, c)) + ',' + format_number(s.temp(t, c)) + '\n';
    }
  }
  return out;
}

ForcingSeries load_forcing(const std::filesystem::path& path) {
  return forcing_from_csv(read_file(path), path.string());
}

void save_forcing(const ForcingSeries& series, const std::filesystem::path& path) {
  write_file(path, forcing_to_csv(series));
}

DischargeHistory discharge_from_csv(const std::string& text, const std::string& source) {
  CsvLines lines(text, source);
  check_header(lines, kDischargeHeader);

  MonthTracker tracker;
  std::vector<std::string> plants;
  std::map<std::string, int> plant_index;
  struct Cell {
    int month_index;
    int plant;
    double value;
    std::size_t line;
  };
  std::vector<Cell> cells;
  std::string line;
  while (lines.next(line)) {
    auto f = split_fields(line);
    if (f.size() != 4) lines.fail("malformed row: expected 4 fields, got " + std::to_string(f.size()));
    YearMonth ym{parse_int(f[0], lines, "year"), parse_int(f[1], lines, "month")};
    tracker.observe(ym, lines);
    if (f[2].empty()) lines.fail("malformed row: empty plant_id");
    double v = parse_double(f[3], lines, "discharge_m3s");
    if (!(v > 0.0)) lines.fail("discharge must be positive");
    auto [it, inserted] = plant_index.try_emplace(f[2], static_cast<int>(plants.size()));
    if (inserted) {
      if (tracker.months().size() > 1) lines.fail("plant '" + f[2] + "' first appears after the first month");
      plants.push_back(f[2]);
    }
    cells.push_back({static_cast<int>(tracker.months().size()) - 1, it->second, v, lines.number()});
  }
  if (cells.empty()) lines.fail("no data rows");

  DischargeHistory h;
  h.plants = plants;
  h.months = tracker.months();
  h.values = Eigen::MatrixXd::Constant(h.n_months(), h.n_plants(), std::nan(""));
  for (const auto& c : cells) {
    if (!std::isnan(h.values(c.month_index, c.plant)))
      throw ParseError(source, c.line, "duplicate plant for month");
    h.values(c.month_index, c.plant) = c.value;
  }
  for (int t = 0; t < h.n_months(); ++t)
    for (int p = 0; p < h.n_plants(); ++p)
      if (std::isnan(h.values(t, p)))
        throw DataError(source + ": plant '" + h.plants[p] + "' missing in " + h.months[t].str());
  return h;
}

std::string discharge_to_csv(const DischargeHistory& h) {
  std::string out = kDischargeHeader;
  out += '\n';
  for (int t = 0; t < h.n_months(); ++t)
    for (int p = 0; p < h.n_plants(); ++p)
      out += std::to_string(h.months[t].year) + ',' + std::to_string(h.months[t].month) + ',' + h.plants[p] +
             ',' + format_number(h.values(t, p)) + '\n';
  return out;
}

DischargeHistory load_discharge(const std::filesystem::path& path) {
  return discharge_from_csv(read_file(path), path.string());
}

void save_discharge(const DischargeHistory& history, const std::filesystem::path& path) {
  write_file(path, discharge_to_csv(history));
}

EnsembleSet load_ensemble(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  EnsembleSet e;
  try {
    e.start = YearMonth{manifest.at("start_year").get<int>(), manifest.at("start_month").get<int>()};
    e.horizon = manifest.at("horizon").get<int>();
    e.source_label = manifest.value("source_label", std::string{});
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(manifest_path.string() + ": " + ex.what());
  }
  if (!e.start.valid() || e.horizon <= 0) throw DataError(manifest_path.string() + ": invalid start or horizon");

  static const std::regex name_re(R"(traj_(\d+)\.csv)");
  std::vector<std::pair<int, std::filesystem::path>> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, name_re))
      files.emplace_back(std::stoi(m[1].str()), entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& [id, path] : files) {
    e.ids.push_back(id);
    e.trajectories.push_back(load_forcing(path));
  }
  validate(e);
  return e;
}

void save_ensemble(const EnsembleSet& e, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["start_year"] = e.start.year;
  manifest["start_month"] = e.start.month;
  manifest["horizon"] = e.horizon;
  manifest["source_label"] = e.source_label;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  for (std::size_t i = 0; i < e.trajectories.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "traj_%03d.csv", e.ids[i]);
    save_forcing(e.trajectories[i], dir / name);
  }
}

NormStats compute_norm_stats(const ForcingSeries& s, IndexSpan span) {
  if (span.empty()) throw DataError("normalization window is empty");
  const int cells = s.grid.cells();
  NormStats st;
  st.grid = s.grid;
  st.mask = s.mask;
  st.precip_mean = Eigen::VectorXd::Zero(cells);
  st.temp_mean = Eigen::VectorXd::Zero(cells);
  st.precip_std = Eigen::VectorXd::Ones(cells);
  st.temp_std = Eigen::VectorXd::Ones(cells);
  const double n = span.size();
  for (int c = 0; c < cells; ++c) {
    if (!s.mask[c]) continue;
    auto stats_of = [&](const Eigen::MatrixXd& m, double& mean, double& sd) {
      auto col = m.col(c).segment(span.begin, span.size());
      mean = col.mean();
      double var = (col.array() - mean).square().sum() / n;
      sd = std::max(std::sqrt(var), kStdFloor);
    };
    stats_of(s.precip, st.precip_mean[c], st.precip_std[c]);
    stats_of(s.temp, st.temp_mean[c], st.temp_std[c]);
  }
  return st;
}

NormStats compute_norm_stats(const ForcingSeries& s) { return compute_norm_stats(s, IndexSpan{0, s.n_months()}); }

namespace {
void check_stats(const ForcingSeries& s, const NormStats& st) {
  if (!(s.grid == st.grid) || s.mask != st.mask)
    throw DataError("normalization statistics do not match the forcing grid");
}
}  // namespace

ForcingSeries normalize(const ForcingSeries& s, const NormStats& st) {
  check_stats(s, st);
  ForcingSeries out = s;
  for (int c = 0; c < s.grid.cells(); ++c) {
    if (!s.mask[c]) continue;
    // ((x - m) / sd) - ((0 - m) / sd): raw zero lands on zero.
    out.precip.col(c) = ((s.precip.col(c).array() - st.precip_mean[c]) / st.precip_std[c]) +
                        st.precip_mean[c] / st.precip_std[c];
    out.temp.col(c) = (s.temp.col(c).array() - st.temp_mean[c]) / st.temp_std[c];
  }
  return out;
}

ForcingSeries denormalize(const ForcingSeries& s, const NormStats& st) {
  check_stats(s, st);
  ForcingSeries out = s;
  for (int c = 0; c < s.grid.cells(); ++c) {
    if (!s.mask[c]) continue;
    out.precip.col(c) = (s.precip.col(c).array() - st.precip_mean[c] / st.precip_std[c]) * st.precip_std[c] +
                        st.precip_mean[c];
    out.temp.col(c) = s.temp.col(c).array() * st.temp_std[c] + st.temp_mean[c];
  }
  return out;
}

}  // namespace hydroscen
