#include "hydroscen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hydroscen/errors.hpp"

namespace hydroscen {
namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

void check_curves(const std::vector<Eigen::MatrixXd>& curves, Eigen::Index months, Eigen::Index plants) {
  if (curves.size() != 4) throw DataError("band statistics need exactly four quantile curves");
  for (const auto& c : curves)
    if (c.rows() != months || c.cols() != plants) throw DataError("quantile curve shape mismatch");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

std::string sanitize(const std::string& id) {
  std::string s = id;
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) c = '_';
  return s;
}

}  // namespace

Band classify_band(double y, double q1, double q2, double q3, double q4) {
  if (y < q1) return Band::below_q1;
  if (y > q4) return Band::above_q4;
  if (y > q2 && y < q3) return Band::mid;
  return y <= q2 ? Band::lower_gap : Band::upper_gap;
}

const char* band_name(Band b) {
  switch (b) {
    case Band::below_q1: return "below_q1";
    case Band::lower_gap: return "q1_q2";
    case Band::mid: return "q2_q3";
    case Band::upper_gap: return "q3_q4";
    case Band::above_q4: return "above_q4";
  }
  return "?";
}

BandFrequencies band_frequencies(const BandCounts& c) {
  if (c.n <= 0) throw DataError("coverage window is empty");
  const double scale = 100.0 / c.n;
  return BandFrequencies{c.mid * scale, c.below_q1 * scale, c.above_q4 * scale};
}

BandFrequencies reference_frequencies(const QuantileSet& qs) {
  if (qs.size() != 4) throw ConfigError("coverage needs exactly four quantile levels");
  const auto& q = qs.levels();
  return BandFrequencies{(q[2] - q[1]) * 100.0, q[0] * 100.0, (1.0 - q[3]) * 100.0};
}

std::string CoverageReport::to_csv() const {
  std::string out = "plant_id,window,n,ref_mid,obs_mid,ref_below_q1,obs_below_q1,ref_above_q4,obs_above_q4\n";
  auto pct = [](double v) { return fmt("%.1f", v); };
  for (const auto& r : rows) {
    out += r.plant + ',' + window_label + ',' + std::to_string(r.counts.n) + ',' + pct(reference.mid) + ',' +
           pct(r.observed.mid) + ',' + pct(reference.below) + ',' + pct(r.observed.below) + ',' +
           pct(reference.above) + ',' + pct(r.observed.above) + '\n';
  }
  return out;
}

std::string CoverageReport::pairs_csv() const {
  std::string out = "plant_id,window,mean_discharge,band,ref_pct,obs_pct\n";
  for (const auto& r : rows) {
    const std::string head = r.plant + ',' + window_label + ',' + format_number(r.mean_discharge) + ',';
    out += head + "q2_q3," + fmt("%.1f", reference.mid) + ',' + fmt("%.1f", r.observed.mid) + '\n';
    out += head + "below_q1," + fmt("%.1f", reference.below) + ',' + fmt("%.1f", r.observed.below) + '\n';
    out += head + "above_q4," + fmt("%.1f", reference.above) + ',' + fmt("%.1f", r.observed.above) + '\n';
  }
  return out;
}

CoverageReport coverage_from_curves(const Eigen::MatrixXd& observed, const std::vector<Eigen::MatrixXd>& curves,
                                    const std::vector<std::string>& plants, const QuantileSet& qs,
                                    std::string window_label) {
  check_curves(curves, observed.rows(), observed.cols());
  if (static_cast<Eigen::Index>(plants.size()) != observed.cols()) throw DataError("coverage plant list mismatch");
  CoverageReport rep;
  rep.window_label = std::move(window_label);
  rep.reference = reference_frequencies(qs);
  for (Eigen::Index p = 0; p < observed.cols(); ++p) {
    CoverageRow row;
    row.plant = plants[p];
    for (Eigen::Index t = 0; t < observed.rows(); ++t) {
      const Band b = classify_band(observed(t, p), curves[0](t, p), curves[1](t, p), curves[2](t, p), curves[3](t, p));
      ++row.counts.n;
      row.counts.below_q1 += b == Band::below_q1;
      row.counts.mid += b == Band::mid;
      row.counts.above_q4 += b == Band::above_q4;
    }
    row.observed = band_frequencies(row.counts);
    row.mean_discharge = observed.rows() > 0 ? observed.col(p).mean() : 0.0;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

CoverageReport coverage_table(const ModelParams& model, const ForcingSeries& forcing, const DischargeHistory& history,
                              IndexSpan window, const QuantileSet& qs, std::string window_label) {
  check_aligned(forcing, history);
  if (window.empty()) throw DataError("coverage window is empty");
  if (window.begin < 0 || window.end > forcing.n_months()) throw DataError("coverage window outside the data");
  const auto pass = forward(model, make_model_input(forcing.slice(IndexSpan{0, window.end})));
  DistSeq d{pass.dist.mu.middleRows(window.begin, window.size()),
            pass.dist.sigma.middleRows(window.begin, window.size()),
            pass.dist.theta.middleRows(window.begin, window.size())};
  return coverage_from_curves(history.values.middleRows(window.begin, window.size()), quantile_curves(d, qs),
                              history.plants, qs, std::move(window_label));
}

Eigen::VectorXd ProductivityTable::for_plants(const std::vector<std::string>& plants) const {
  Eigen::VectorXd rho(plants.size());
  for (std::size_t p = 0; p < plants.size(); ++p) {
    auto it = factors.find(plants[p]);
    if (it == factors.end()) throw DataError("missing productivity for plant '" + plants[p] + "'");
    rho[p] = it->second;
  }
  return rho;
}

ProductivityTable productivity_from_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  ProductivityTable table;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "plant_id,productivity") throw ParseError(source, number, "expected header 'plant_id,productivity'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || comma == 0) throw ParseError(source, number, "malformed row");
    char* end = nullptr;
    const std::string value = line.substr(comma + 1);
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || *end != '\0' || !(v > 0.0) || !std::isfinite(v))
      throw ParseError(source, number, "productivity must be a positive number");
    if (!table.factors.emplace(line.substr(0, comma), v).second) throw ParseError(source, number, "duplicate plant");
  }
  if (!header) throw ParseError(source, number, "empty file");
  return table;
}

ProductivityTable load_productivity(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return productivity_from_csv(ss.str(), path.string());
}

ProductivityTable unit_productivity(const std::vector<std::string>& plants) {
  ProductivityTable t;
  for (const auto& p : plants) t.factors[p] = 1.0;
  return t;
}

Eigen::VectorXd monthly_energy(const Eigen::MatrixXd& values, const std::vector<std::string>& plants,
                               const ProductivityTable& productivity) {
  if (static_cast<Eigen::Index>(plants.size()) != values.cols()) throw DataError("energy: plant list mismatch");
  return values * productivity.for_plants(plants);
}

std::vector<AnnualEnergy> inflow_energy(const Eigen::MatrixXd& values, const std::vector<YearMonth>& months,
                                        const std::vector<std::string>& plants,
                                        const ProductivityTable& productivity, double baseline) {
  if (static_cast<Eigen::Index>(months.size()) != values.rows()) throw DataError("energy: month list mismatch");
  if (!(baseline > 0.0)) throw DataError("energy: baseline must be positive");
  const Eigen::VectorXd energy = monthly_energy(values, plants, productivity);
  std::vector<AnnualEnergy> out;
  for (std::size_t t = 0; t < months.size(); ++t) {
    if (out.empty() || out.back().year != months[t].year) out.push_back(AnnualEnergy{months[t].year, 0, 0.0, 0.0});
    out.back().months += 1;
    out.back().mean_energy += energy[t];
  }
  for (auto& a : out) {
    a.mean_energy /= a.months;
    a.percent_of_baseline = 100.0 * a.mean_energy / baseline;
  }
  return out;
}

double baseline_energy(const DischargeHistory& history, const ProductivityTable& productivity) {
  if (history.n_months() == 0) throw DataError("energy baseline needs a non-empty history");
  return monthly_energy(history.values, history.plants, productivity).mean();
}

double ScenarioAnnualEnergy::median() const { return empirical_quantile(percent, 0.5); }

std::vector<ScenarioAnnualEnergy> scenario_inflow_energy(const ScenarioSet& s, const ProductivityTable& productivity,
                                                         double baseline) {
  if (!(baseline > 0.0)) throw DataError("energy: baseline must be positive");
  const Eigen::VectorXd rho = productivity.for_plants(s.plants());
  std::vector<ScenarioAnnualEnergy> out;
  std::vector<std::pair<int, int>> year_spans;  // (year, first month index)
  for (int t = 0; t < s.horizon(); ++t)
    if (year_spans.empty() || year_spans.back().first != s.months()[t].year)
      year_spans.emplace_back(s.months()[t].year, t);
  for (std::size_t y = 0; y < year_spans.size(); ++y) {
    const int begin = year_spans[y].second;
    const int end = y + 1 < year_spans.size() ? year_spans[y + 1].second : s.horizon();
    ScenarioAnnualEnergy ae;
    ae.year = year_spans[y].first;
    for (int k = 0; k < s.n_traj(); ++k) {
      for (int sc = 0; sc < s.n_scen(); ++sc) {
        double sum = 0.0;
        for (int t = begin; t < end; ++t)
          for (int p = 0; p < s.n_plants(); ++p) sum += rho[p] * s.at(k, sc, t, p);
        ae.percent.push_back(100.0 * sum / (end - begin) / baseline);
      }
    }
    std::sort(ae.percent.begin(), ae.percent.end());
    out.push_back(std::move(ae));
  }
  return out;
}

double empirical_quantile(std::vector<double> v, double q) {
  if (v.empty()) throw DataError("empirical_quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DataError("empirical_quantile level outside [0, 1]");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<Eigen::MatrixXd> scenario_quantile_curves(const ScenarioSet& s, const QuantileSet& qs) {
  std::vector<Eigen::MatrixXd> curves(qs.size(), Eigen::MatrixXd(s.horizon(), s.n_plants()));
  std::vector<double> sample;
  for (int t = 0; t < s.horizon(); ++t) {
    for (int p = 0; p < s.n_plants(); ++p) {
      sample.clear();
      for (int k = 0; k < s.n_traj(); ++k)
        for (int sc = 0; sc < s.n_scen(); ++sc) sample.push_back(s.at(k, sc, t, p));
      std::sort(sample.begin(), sample.end());
      for (int l = 0; l < qs.size(); ++l) curves[l](t, p) = empirical_quantile(sample, qs.levels()[l]);
    }
  }
  return curves;
}

std::vector<Eigen::MatrixXd> climatology_curves(const DischargeHistory& history, IndexSpan window,
                                                const std::vector<YearMonth>& months, const QuantileSet& qs) {
  if (window.empty()) throw DataError("climatology window is empty");
  std::vector<Eigen::MatrixXd> curves(qs.size(), Eigen::MatrixXd(months.size(), history.n_plants()));
  for (int p = 0; p < history.n_plants(); ++p) {
    std::array<std::vector<double>, 12> by_month;
    for (int t = window.begin; t < window.end; ++t) by_month[history.months[t].month - 1].push_back(history.values(t, p));
    for (std::size_t t = 0; t < months.size(); ++t) {
      const auto& sample = by_month[months[t].month - 1];
      if (sample.empty()) throw DataError("climatology has no data for month " + std::to_string(months[t].month));
      for (int l = 0; l < qs.size(); ++l) curves[l](t, p) = empirical_quantile(sample, qs.levels()[l]);
    }
  }
  return curves;
}

std::string band_csv(const BandExportInput& in, int p) {
  const auto T = static_cast<Eigen::Index>(in.months.size());
  check_curves(in.curves, T, static_cast<Eigen::Index>(in.plants.size()));
  std::string out = "year,month,q1,q2,q3,q4,observed,band";
  if (in.climatology) out += ",clim_low,clim_high,clim_band";
  out += '\n';
  for (Eigen::Index t = 0; t < T; ++t) {
    const double q1 = in.curves[0](t, p), q2 = in.curves[1](t, p), q3 = in.curves[2](t, p), q4 = in.curves[3](t, p);
    out += std::to_string(in.months[t].year) + ',' + std::to_string(in.months[t].month) + ',' + format_number(q1) +
           ',' + format_number(q2) + ',' + format_number(q3) + ',' + format_number(q4) + ',';
    const bool has_obs = in.observed && !std::isnan((*in.observed)(t, p));
    if (has_obs) {
      const double y = (*in.observed)(t, p);
      out += format_number(y) + ',' + band_name(classify_band(y, q1, q2, q3, q4));
    } else {
      out += ",";
    }
    if (in.climatology) {
      const double lo = in.climatology->first(t, p), hi = in.climatology->second(t, p);
      out += ',' + format_number(lo) + ',' + format_number(hi) + ',';
      if (has_obs) {
        const double y = (*in.observed)(t, p);
        out += y < lo ? "below" : (y > hi ? "above" : "inside");
      }
    }
    out += '\n';
  }
  return out;
}

std::string band_svg(const BandExportInput& in, int p) {
  const auto T = static_cast<int>(in.months.size());
  check_curves(in.curves, T, static_cast<Eigen::Index>(in.plants.size()));
  const double width = 800.0, height = 320.0, left = 60.0, right = 20.0, top = 30.0, bottom = 40.0;
  double lo = in.curves[0].col(p).minCoeff(), hi = in.curves[3].col(p).maxCoeff();
  if (in.observed) {
    for (int t = 0; t < T; ++t) {
      const double y = (*in.observed)(t, p);
      if (!std::isnan(y)) {
        lo = std::min(lo, y);
        hi = std::max(hi, y);
      }
    }
  }
  if (in.climatology) {
    lo = std::min(lo, in.climatology->first.col(p).minCoeff());
    hi = std::max(hi, in.climatology->second.col(p).maxCoeff());
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto xs = [&](int t) { return left + (T > 1 ? (width - left - right) * t / (T - 1) : 0.0); };
  auto ys = [&](double v) { return top + (height - top - bottom) * (hi - v) / (hi - lo); };
  auto point = [&](int t, double v) { return fmt("%.2f", xs(t)) + "," + fmt("%.2f", ys(v)); };
  auto band = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* fill) {
    std::string pts;
    for (int t = 0; t < T; ++t) pts += point(t, a(t, p)) + " ";
    for (int t = T - 1; t >= 0; --t) pts += point(t, b(t, p)) + (t > 0 ? " " : "");
    return std::string("  <polygon points=\"") + pts + "\" fill=\"" + fill + "\" stroke=\"none\"/>\n";
  };
  auto line = [&](const Eigen::MatrixXd& a, const char* stroke, const char* extra) {
    std::string pts;
    for (int t = 0; t < T; ++t) pts += point(t, a(t, p)) + (t + 1 < T ? " " : "");
    return std::string("  <polyline points=\"") + pts + "\" fill=\"none\" stroke=\"" + stroke + "\"" + extra + "/>\n";
  };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", width) + "\" height=\"" +
                    fmt("%.0f", height) + "\" viewBox=\"0 0 " + fmt("%.0f", width) + " " + fmt("%.0f", height) +
                    "\">\n";
  svg += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "  <text x=\"" + fmt("%.0f", left) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" +
         in.plants[p] + " discharge (m3/s)</text>\n";
  svg += band(in.curves[0], in.curves[3], "#f4b6b6");
  svg += band(in.curves[1], in.curves[2], "#e06666");
  if (in.climatology) {
    svg += line(in.climatology->first, "#3c78d8", " stroke-dasharray=\"6,4\"");
    svg += line(in.climatology->second, "#3c78d8", " stroke-dasharray=\"6,4\"");
  }
  if (in.observed) {
    std::string pts;
    for (int t = 0; t < T; ++t) {
      const double y = (*in.observed)(t, p);
      if (std::isnan(y)) continue;
      if (!pts.empty()) pts += " ";
      pts += point(t, y);
    }
    if (!pts.empty())
      svg += "  <polyline points=\"" + pts + "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  }
  svg += "  <line x1=\"" + fmt("%.2f", left) + "\" y1=\"" + fmt("%.2f", height - bottom) + "\" x2=\"" +
         fmt("%.2f", width - right) + "\" y2=\"" + fmt("%.2f", height - bottom) + "\" stroke=\"#444\"/>\n";
  svg += "  <line x1=\"" + fmt("%.2f", left) + "\" y1=\"" + fmt("%.2f", top) + "\" x2=\"" + fmt("%.2f", left) +
         "\" y2=\"" + fmt("%.2f", height - bottom) + "\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    svg += "  <text x=\"" + fmt("%.2f", left - 6) + "\" y=\"" + fmt("%.2f", ys(v) + 4) +
           "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" + fmt("%.0f", v) + "</text>\n";
  }
  if (T > 0) {
    svg += "  <text x=\"" + fmt("%.2f", xs(0)) + "\" y=\"" + fmt("%.2f", height - bottom + 16) +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + in.months.front().str() + "</text>\n";
    svg += "  <text x=\"" + fmt("%.2f", xs(T - 1)) + "\" y=\"" + fmt("%.2f", height - bottom + 16) +
           "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" + in.months.back().str() +
           "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::vector<std::filesystem::path> band_export(const BandExportInput& in, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
  std::vector<std::filesystem::path> written;
  for (int p = 0; p < static_cast<int>(in.plants.size()); ++p) {
    const std::string stem = "band_" + sanitize(in.plants[p]);
    write_text(dir / (stem + ".csv"), band_csv(in, p));
    write_text(dir / (stem + ".svg"), band_svg(in, p));
    written.push_back(dir / (stem + ".csv"));
    written.push_back(dir / (stem + ".svg"));
  }
  return written;
}

}  // namespace hydroscen
