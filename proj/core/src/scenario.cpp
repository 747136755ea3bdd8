#include "hydroscen/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <json.hpp>

#include "hydroscen/errors.hpp"
#include "hydroscen/probloss.hpp"
#include "hydroscen/random.hpp"

namespace hydroscen {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Static round-robin split of [0, n) over `threads` workers. Each index is
// handled by exactly one worker and writes only its own slot.
template <typename F>
void parallel_for(int n, int threads, F&& fn) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int i = w; i < n; i += threads) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<double> to_vec(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

ordered_json matrix_json(const Eigen::MatrixXd& m) {
  return ordered_json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", to_vec(m)}};
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw DataError("serial model: bad matrix length");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data[i * cols + k];
  return m;
}

// Least squares with an unpenalized first (intercept) column. Falls back to a
// small ridge when the design is rank deficient.
Eigen::MatrixXd solve_regression(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                 std::vector<std::string>& warnings) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() == X.cols()) return qr.solve(Y);
  Eigen::MatrixXd gram = X.transpose() * X;
  const double kappa = 1e-8 * std::max(gram.diagonal().mean(), 1e-300);
  for (Eigen::Index k = 1; k < gram.rows(); ++k) gram(k, k) += kappa;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "serial regression design is rank deficient (rank %ld of %ld); ridge %.3g applied",
                static_cast<long>(qr.rank()), static_cast<long>(X.cols()), kappa);
  warnings.emplace_back(buf);
  return gram.ldlt().solve(X.transpose() * Y);
}

void finish_covariance(SerialModel& sm, const Eigen::MatrixXd& residuals) {
  const double n = static_cast<double>(residuals.rows());
  const Eigen::RowVectorXd mean = residuals.colwise().mean();
  const Eigen::MatrixXd centered = residuals.rowwise() - mean;
  const Eigen::MatrixXd sample = centered.transpose() * centered / n;
  const double floor = 1e-8 * std::max(sample.diagonal().mean(), 1e-300);

  double lambda = sm.shrinkage;
  while (true) {
    Eigen::MatrixXd theta = (1.0 - lambda) * sample;
    theta.diagonal() += lambda * sample.diagonal();
    for (Eigen::Index i = 0; i < theta.rows(); ++i) theta(i, i) = std::max(theta(i, i), floor);
    Eigen::LLT<Eigen::MatrixXd> llt(theta);
    if (llt.info() == Eigen::Success) {
      sm.theta = theta;
      sm.theta_inv = llt.solve(Eigen::MatrixXd::Identity(theta.rows(), theta.cols()));
      sm.theta_inv = 0.5 * (sm.theta_inv + sm.theta_inv.transpose());
      if (lambda != sm.shrinkage)
        sm.warnings.push_back("residual covariance not positive definite; shrinkage raised to " +
                              std::to_string(lambda));
      sm.shrinkage = lambda;
      return;
    }
    if (lambda >= 1.0) throw NumericFault("residual covariance cannot be made positive definite");
    lambda = std::min(1.0, lambda * 2.0);
  }
}

}  // namespace

ScenarioSet::ScenarioSet(std::vector<int> traj_ids, int n_scen, std::vector<YearMonth> months,
                         std::vector<std::string> plants)
    : traj_ids_(std::move(traj_ids)), n_scen_(n_scen), months_(std::move(months)), plants_(std::move(plants)) {
  values_.assign(traj_ids_.size() * n_scen_ * months_.size() * plants_.size(), 0.0);
}

Eigen::MatrixXd ScenarioSet::month_slice(int traj, int month) const {
  Eigen::MatrixXd m(n_scen_, n_plants());
  for (int s = 0; s < n_scen_; ++s)
    for (int p = 0; p < n_plants(); ++p) m(s, p) = at(traj, s, month, p);
  return m;
}

void ScenarioSet::set_month_slice(int traj, int month, const Eigen::MatrixXd& m) {
  if (m.rows() != n_scen_ || m.cols() != n_plants()) throw DataError("scenario slice has the wrong shape");
  for (int s = 0; s < n_scen_; ++s)
    for (int p = 0; p < n_plants(); ++p) at(traj, s, month, p) = m(s, p);
}

bool ScenarioSet::operator==(const ScenarioSet& o) const {
  return traj_ids_ == o.traj_ids_ && n_scen_ == o.n_scen_ && months_ == o.months_ && plants_ == o.plants_ &&
         values_ == o.values_;
}

Eigen::VectorXd warmup_state(const Checkpoint& model, const ForcingSeries& history_forcing, YearMonth start) {
  const int H = model.params.config.hidden_dim;
  int n = 0;
  while (n < history_forcing.n_months() && history_forcing.months[n] < start) ++n;
  if (n == 0) return Eigen::VectorXd::Zero(H);
  const ForcingSeries warm = normalize(history_forcing.slice(IndexSpan{0, n}), model.norm);
  const auto pass = forward(model.params, make_model_input(warm));
  return pass.h.col(n);
}

GenerateResult generate(const Checkpoint& model, const EnsembleSet& ensemble, int n_scen, std::uint64_t seed,
                        const GenerateOptions& options) {
  if (n_scen < 1) throw ConfigError("generate: n_scen must be at least 1");
  validate(ensemble);
  const auto& first = ensemble.trajectories.front();
  if (!(first.grid == model.norm.grid) || first.mask != model.norm.mask)
    throw DataError("ensemble grid does not match the checkpoint");

  const int n_traj = static_cast<int>(ensemble.trajectories.size());
  const int P = model.params.config.n_plants;
  GenerateResult out;
  out.scenarios = ScenarioSet(ensemble.ids, n_scen, first.months, model.plants);
  out.hidden.resize(n_traj);
  out.dist.resize(n_traj);
  std::vector<long> clipped(n_traj, 0);

  parallel_for(n_traj, options.threads, [&](int k) {
    const ForcingSeries normalized = normalize(ensemble.trajectories[k], model.norm);
    ForwardOptions fo;
    fo.h0 = options.h0;
    const auto pass = forward(model.params, make_model_input(normalized), fo);
    out.hidden[k] = pass.hidden;
    out.dist[k] = pass.dist;
    const DistSeq& d = pass.dist;
    for (int s = 0; s < n_scen; ++s) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(ensemble.ids[k]), static_cast<std::uint64_t>(s)));
      for (int t = 0; t < d.n_months(); ++t) {
        for (int p = 0; p < P; ++p) {
          double y = ln3_sample(d.mu(t, p), d.sigma(t, p), d.theta(t, p), rng);
          if (!(y >= kScenarioFloor)) {
            y = kScenarioFloor;
            ++clipped[k];
          }
          out.scenarios.at(k, s, t, p) = y;
        }
      }
    }
  });

  out.scenarios.provenance.checkpoint_id = content_id(checkpoint_to_json(model));
  out.scenarios.provenance.ensemble_id = ensemble_id(ensemble);
  out.scenarios.provenance.seed = seed;
  for (long c : clipped) out.scenarios.provenance.clipped += c;
  return out;
}

Eigen::VectorXd SerialModel::predict(const Eigen::VectorXd& y_prev, const Eigen::VectorXd& h_prev) const {
  return intercept + phi_y * y_prev + phi_h * h_prev;
}

SerialModel fit_serial_regression(const Eigen::MatrixXd& y, const Eigen::MatrixXd& h, const SerialFitOptions& opt) {
  if (y.rows() != h.rows()) throw DataError("serial fit: discharge and hidden states are not aligned");
  if (y.rows() < kMinSerialMonths)
    throw DataError("serial fit needs at least " + std::to_string(kMinSerialMonths) + " months");
  if (opt.shrinkage < 0.0 || opt.shrinkage > 1.0) throw ConfigError("serial fit: shrinkage must lie in [0, 1]");
  const int T = static_cast<int>(y.rows());
  const int P = static_cast<int>(y.cols());
  const int H = static_cast<int>(h.cols());
  const int N = T - 1;

  SerialModel sm;
  sm.shrinkage = opt.shrinkage;
  sm.intercept = Eigen::VectorXd::Zero(P);
  sm.phi_y = Eigen::MatrixXd::Zero(P, P);
  sm.phi_h = Eigen::MatrixXd::Zero(P, H);
  const Eigen::MatrixXd target = y.bottomRows(N);
  Eigen::MatrixXd residuals(N, P);

  if (!opt.diagonal_phi) {
    Eigen::MatrixXd X(N, 1 + P + H);
    X.col(0).setOnes();
    X.middleCols(1, P) = y.topRows(N);
    X.rightCols(H) = h.topRows(N);
    const Eigen::MatrixXd B = solve_regression(X, target, sm.warnings);
    sm.intercept = B.row(0).transpose();
    sm.phi_y = B.middleRows(1, P).transpose();
    sm.phi_h = B.bottomRows(H).transpose();
    residuals = target - X * B;
  } else {
    for (int p = 0; p < P; ++p) {
      Eigen::MatrixXd X(N, 2 + H);
      X.col(0).setOnes();
      X.col(1) = y.col(p).head(N);
      X.rightCols(H) = h.topRows(N);
      const Eigen::VectorXd b = solve_regression(X, target.col(p), sm.warnings);
      sm.intercept[p] = b[0];
      sm.phi_y(p, p) = b[1];
      sm.phi_h.row(p) = b.tail(H).transpose();
      residuals.col(p) = target.col(p) - X * b;
    }
  }
  if (!residuals.allFinite()) throw NumericFault("serial fit produced non-finite residuals");
  finish_covariance(sm, residuals);
  return sm;
}

SerialModel fit_serial_model(const ModelParams& model, const ForcingSeries& forcing, const DischargeHistory& history,
                             IndexSpan window, const SerialFitOptions& options) {
  check_aligned(forcing, history);
  if (window.empty() || window.begin < 0 || window.end > forcing.n_months())
    throw DataError("serial fit window outside the data");
  const ModelInput full = make_model_input(forcing.slice(IndexSpan{0, window.end}));
  const auto pass = forward(model, full);
  return fit_serial_regression(history.values.middleRows(window.begin, window.size()),
                               pass.hidden.h.middleRows(window.begin, window.size()), options);
}

Eigen::MatrixXd mahalanobis_cost(const Eigen::MatrixXd& y_prev, const Eigen::VectorXd& h_prev,
                                 const Eigen::MatrixXd& y_curr, const SerialModel& sm) {
  const Eigen::Index P = sm.phi_y.rows();
  if (y_prev.cols() != P || y_curr.cols() != P || y_prev.rows() != y_curr.rows() || h_prev.size() != sm.phi_h.cols())
    throw DataError("mahalanobis_cost: dimension mismatch");
  const Eigen::Index S = y_prev.rows();
  // Row i of `pred` is the regression prediction continuing scenario i.
  const Eigen::MatrixXd pred =
      (y_prev * sm.phi_y.transpose()).rowwise() + (sm.intercept + sm.phi_h * h_prev).transpose();
  Eigen::MatrixXd cost(S, S);
  for (Eigen::Index i = 0; i < S; ++i) {
    for (Eigen::Index j = 0; j < S; ++j) {
      const Eigen::VectorXd d = (y_curr.row(j) - pred.row(i)).transpose();
      cost(i, j) = d.dot(sm.theta_inv * d);
    }
  }
  if (!cost.allFinite()) throw NumericFault("mahalanobis_cost: non-finite cost");
  return cost;
}

ScenarioSet reorder(const ScenarioSet& in, const std::vector<HiddenSeq>& hidden, const SerialModel& sm, int threads) {
  if (static_cast<int>(hidden.size()) != in.n_traj()) throw DataError("reorder: one hidden sequence per trajectory");
  if (sm.phi_y.rows() != in.n_plants()) throw DataError("reorder: serial model plant count mismatch");
  for (const auto& h : hidden)
    if (h.h.rows() != in.horizon() || h.h.cols() != sm.phi_h.cols())
      throw DataError("reorder: hidden sequence does not match the scenarios");

  ScenarioSet out = in;
  out.provenance.reordered = true;
  parallel_for(in.n_traj(), threads, [&](int k) {
    Eigen::MatrixXd prev = out.month_slice(k, 0);
    for (int t = 1; t < in.horizon(); ++t) {
      const Eigen::MatrixXd curr = out.month_slice(k, t);
      const Eigen::VectorXd h_prev = hidden[k].h.row(t - 1).transpose();
      const Assignment a = assignment_solve(mahalanobis_cost(prev, h_prev, curr, sm));
      Eigen::MatrixXd relabeled(curr.rows(), curr.cols());
      for (int i = 0; i < static_cast<int>(a.perm.size()); ++i) relabeled.row(i) = curr.row(a.perm[i]);
      out.set_month_slice(k, t, relabeled);
      prev = std::move(relabeled);
    }
  });
  return out;
}

double mean_lag1_correlation(const ScenarioSet& s) {
  double sum = 0.0;
  long count = 0;
  for (int k = 0; k < s.n_traj(); ++k) {
    for (int t = 1; t < s.horizon(); ++t) {
      const Eigen::MatrixXd a = s.month_slice(k, t - 1);
      const Eigen::MatrixXd b = s.month_slice(k, t);
      for (int p = 0; p < s.n_plants(); ++p) {
        const Eigen::ArrayXd x = a.col(p).array() - a.col(p).mean();
        const Eigen::ArrayXd y = b.col(p).array() - b.col(p).mean();
        const double denom = std::sqrt((x * x).sum() * (y * y).sum());
        if (denom <= 0.0) continue;
        sum += (x * y).sum() / denom;
        ++count;
      }
    }
  }
  return count > 0 ? sum / count : 0.0;
}

std::string serial_model_to_json(const SerialModel& sm) {
  ordered_json j;
  j["format"] = "hydroscen-serial-model";
  j["shrinkage"] = sm.shrinkage;
  j["intercept"] = to_vec(sm.intercept);
  j["phi_y"] = matrix_json(sm.phi_y);
  j["phi_h"] = matrix_json(sm.phi_h);
  j["theta"] = matrix_json(sm.theta);
  j["warnings"] = sm.warnings;
  return j.dump(1) + "\n";
}

SerialModel serial_model_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "hydroscen-serial-model") throw DataError("not a serial model file");
    SerialModel sm;
    sm.shrinkage = j.at("shrinkage").get<double>();
    const auto icpt = j.at("intercept").get<std::vector<double>>();
    sm.intercept = Eigen::Map<const Eigen::VectorXd>(icpt.data(), static_cast<Eigen::Index>(icpt.size()));
    sm.phi_y = matrix_from(j.at("phi_y"));
    sm.phi_h = matrix_from(j.at("phi_h"));
    sm.theta = matrix_from(j.at("theta"));
    const Eigen::Index P = sm.intercept.size();
    if (sm.phi_y.rows() != P || sm.phi_y.cols() != P || sm.phi_h.rows() != P || sm.theta.rows() != P ||
        sm.theta.cols() != P)
      throw DataError("serial model: inconsistent shapes");
    Eigen::LLT<Eigen::MatrixXd> llt(sm.theta);
    if (llt.info() != Eigen::Success) throw DataError("serial model: theta is not positive definite");
    sm.theta_inv = llt.solve(Eigen::MatrixXd::Identity(P, P));
    sm.theta_inv = 0.5 * (sm.theta_inv + sm.theta_inv.transpose());
    sm.warnings = j.value("warnings", std::vector<std::string>{});
    return sm;
  } catch (const json::exception& e) {
    throw DataError(std::string("serial model: ") + e.what());
  }
}

std::string scenarios_to_csv(const ScenarioSet& s) {
  std::string out = "trajectory,scenario,year,month,plant_id,discharge_m3s\n";
  for (int k = 0; k < s.n_traj(); ++k)
    for (int sc = 0; sc < s.n_scen(); ++sc)
      for (int t = 0; t < s.horizon(); ++t)
        for (int p = 0; p < s.n_plants(); ++p)
          out += std::to_string(s.traj_ids()[k]) + ',' + std::to_string(sc) + ',' + std::to_string(s.months()[t].year) +
                 ',' + std::to_string(s.months()[t].month) + ',' + s.plants()[p] + ',' +
                 format_number(s.at(k, sc, t, p)) + '\n';
  return out;
}

std::string provenance_to_json(const ScenarioSet& s) {
  ordered_json j;
  j["checkpoint_id"] = s.provenance.checkpoint_id;
  j["ensemble_id"] = s.provenance.ensemble_id;
  j["seed"] = s.provenance.seed;
  j["reordered"] = s.provenance.reordered;
  j["clipped_draws"] = s.provenance.clipped;
  j["n_traj"] = s.n_traj();
  j["n_scen"] = s.n_scen();
  j["horizon"] = s.horizon();
  j["start"] = s.horizon() > 0 ? s.months().front().str() : std::string{};
  j["plants"] = s.plants();
  j["trajectory_ids"] = s.traj_ids();
  return j.dump(2) + "\n";
}

void save_scenarios(const ScenarioSet& s, const std::filesystem::path& csv_path) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
  };
  write(csv_path, scenarios_to_csv(s));
  auto sidecar = csv_path;
  sidecar.replace_extension(".json");
  write(sidecar, provenance_to_json(s));
}

ScenarioSet scenarios_from_csv(const std::string& text, const std::string& source) {
  struct Row {
    int traj, scen;
    YearMonth ym;
    std::string plant;
    double value;
  };
  std::vector<Row> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "trajectory,scenario,year,month,plant_id,discharge_m3s")
        throw ParseError(source, number, "unexpected scenario header");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw ParseError(source, number, "malformed row: " + line);
    try {
      std::size_t used = 0;
      Row r{std::stoi(f[0]), std::stoi(f[1]), YearMonth{std::stoi(f[2]), std::stoi(f[3])}, f[4], std::stod(f[5], &used)};
      if (used != f[5].size() || !r.ym.valid() || r.scen < 0 || !std::isfinite(r.value))
        throw ParseError(source, number, "malformed row: " + line);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ParseError(source, number, "malformed row: " + line);
    }
  }
  if (rows.empty()) throw DataError(source + ": no scenario rows");

  std::vector<int> ids;
  std::vector<std::string> plants;
  std::vector<YearMonth> months;
  int n_scen = 0;
  for (const auto& r : rows) {
    if (std::find(ids.begin(), ids.end(), r.traj) == ids.end()) ids.push_back(r.traj);
    if (std::find(plants.begin(), plants.end(), r.plant) == plants.end()) plants.push_back(r.plant);
    if (std::find(months.begin(), months.end(), r.ym) == months.end()) months.push_back(r.ym);
    n_scen = std::max(n_scen, r.scen + 1);
  }
  std::sort(months.begin(), months.end());
  for (std::size_t t = 1; t < months.size(); ++t)
    if (months[t] != months[t - 1].next()) throw DataError(source + ": scenario months are not contiguous");

  ScenarioSet s(ids, n_scen, months, plants);
  std::vector<char> seen(s.values().size(), 0);
  for (const auto& r : rows) {
    const int k = static_cast<int>(std::find(ids.begin(), ids.end(), r.traj) - ids.begin());
    const int t = months.front() <= r.ym ? r.ym.ordinal() - months.front().ordinal() : 0;
    const int p = static_cast<int>(std::find(plants.begin(), plants.end(), r.plant) - plants.begin());
    const std::size_t flat = ((static_cast<std::size_t>(k) * n_scen + r.scen) * months.size() + t) * plants.size() + p;
    if (seen[flat]) throw DataError(source + ": duplicate scenario entry");
    seen[flat] = 1;
    s.at(k, r.scen, t, p) = r.value;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw DataError(source + ": incomplete scenario set");
  return s;
}

ScenarioSet load_scenarios(const std::filesystem::path& csv_path) {
  auto read = [](const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  ScenarioSet s = scenarios_from_csv(read(csv_path), csv_path.string());
  auto sidecar = csv_path;
  sidecar.replace_extension(".json");
  if (std::filesystem::exists(sidecar)) {
    try {
      const json j = json::parse(read(sidecar));
      s.provenance.checkpoint_id = j.value("checkpoint_id", std::string{});
      s.provenance.ensemble_id = j.value("ensemble_id", std::string{});
      s.provenance.seed = j.value("seed", std::uint64_t{0});
      s.provenance.reordered = j.value("reordered", false);
      s.provenance.clipped = j.value("clipped_draws", 0L);
    } catch (const json::exception& e) {
      throw DataError(sidecar.string() + ": " + e.what());
    }
  }
  return s;
}

std::string ensemble_id(const EnsembleSet& e) {
  std::string blob = e.source_label + "|" + e.start.str() + "|" + std::to_string(e.horizon);
  for (std::size_t i = 0; i < e.trajectories.size(); ++i)
    blob += "|" + std::to_string(e.ids[i]) + "|" + content_id(forcing_to_csv(e.trajectories[i]));
  return content_id(blob);
}

}  // namespace hydroscen
