#include "hydroscen/netcore.hpp"

#include <cmath>

#include "hydroscen/errors.hpp"
#include "hydroscen/random.hpp"

namespace hydroscen {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& v) { return v.unaryExpr([](double x) { return hydroscen::sigmoid(x); }); }

void check_dims(bool ok, const char* what) {
  if (!ok) throw DataError(std::string("dimension mismatch: ") + what);
}

}  // namespace

void ModelConfig::validate() const {
  if (n_precip_cells <= 0 || n_temp_cells <= 0) throw ConfigError("model: grid cell counts must be positive");
  if (embedding_dim <= 0) throw ConfigError("model: embedding_dim must be positive");
  if (hidden_dim <= 0) throw ConfigError("model: hidden_dim must be positive");
  if (n_plants <= 0) throw ConfigError("model: n_plants must be positive");
}

ModelParams ModelParams::zeros(const ModelConfig& c) {
  ModelParams p;
  p.config = c;
  const int e = c.embedding_dim, h = c.hidden_dim, n = c.n_plants;
  p.w_in_p = Eigen::MatrixXd::Zero(e, c.n_precip_cells);
  p.w_in_t = Eigen::MatrixXd::Zero(e, c.n_temp_cells);
  for (auto* m : {&p.w_z, &p.w_r, &p.w_h}) *m = Eigen::MatrixXd::Zero(h, e);
  for (auto* m : {&p.u_z, &p.u_r, &p.u_h}) *m = Eigen::MatrixXd::Zero(h, h);
  for (auto* m : {&p.w_mu, &p.w_sigma, &p.w_theta}) *m = Eigen::MatrixXd::Zero(n, h);
  for (auto* v : {&p.b_mu, &p.b_sigma, &p.b_theta}) *v = Eigen::VectorXd::Zero(n);
  return p;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each_tensor([&](const char*, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

bool ModelParams::operator==(const ModelParams& o) const {
  auto same = [](const auto& a, const auto& b) { return a.rows() == b.rows() && a.cols() == b.cols() && a == b; };
  return config == o.config && same(w_in_p, o.w_in_p) && same(w_in_t, o.w_in_t) && same(w_z, o.w_z) &&
         same(u_z, o.u_z) && same(w_r, o.w_r) && same(u_r, o.u_r) && same(w_h, o.w_h) && same(u_h, o.u_h) &&
         same(w_mu, o.w_mu) && same(w_sigma, o.w_sigma) && same(w_theta, o.w_theta) && same(b_mu, o.b_mu) &&
         same(b_sigma, o.b_sigma) && same(b_theta, o.b_theta);
}

ModelInput make_model_input(const ForcingSeries& s) {
  const auto cells = s.active_cells();
  ModelInput in;
  in.months = s.months;
  in.precip = Eigen::MatrixXd(s.n_months(), cells.size());
  in.temp = Eigen::MatrixXd(s.n_months(), cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    in.precip.col(k) = s.precip.col(cells[k]);
    in.temp.col(k) = s.temp.col(cells[k]);
  }
  return in;
}

ModelParams init_model(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  ModelParams p = ModelParams::zeros(c);
  Rng rng(seed);
  auto fill = [&](Eigen::MatrixXd& m, double lo, double hi) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = lo + (hi - lo) * rng.uniform();
  };
  const double in_bound = std::sqrt(1.0 / (c.n_precip_cells + c.n_temp_cells));
  const double emb_bound = std::sqrt(1.0 / c.embedding_dim);
  const double hid_bound = std::sqrt(1.0 / c.hidden_dim);
  fill(p.w_in_p, 0.0, in_bound);
  fill(p.w_in_t, -in_bound, in_bound);
  for (auto* m : {&p.w_z, &p.w_r, &p.w_h}) fill(*m, -emb_bound, emb_bound);
  for (auto* m : {&p.u_z, &p.u_r, &p.u_h}) fill(*m, -hid_bound, hid_bound);
  for (auto* m : {&p.w_mu, &p.w_sigma, &p.w_theta}) fill(*m, -hid_bound, hid_bound);
  // softplus(b) = 0.5
  p.b_sigma.setConstant(std::log(std::expm1(0.5)));
  return p;
}

Eigen::VectorXd embed(const ModelParams& p, const Eigen::VectorXd& precip, const Eigen::VectorXd& temp) {
  check_dims(precip.size() == p.w_in_p.cols() && temp.size() == p.w_in_t.cols(), "embed input cells");
  return p.w_in_p * precip + p.w_in_t * temp;
}

Eigen::VectorXd gru_cell(const ModelParams& p, const Eigen::VectorXd& e, const Eigen::VectorXd& h) {
  check_dims(e.size() == p.w_z.cols() && h.size() == p.u_z.cols(), "gru_cell");
  const Eigen::VectorXd z = sigmoid(p.w_z * e + p.u_z * h);
  const Eigen::VectorXd r = sigmoid(p.w_r * e + p.u_r * h);
  const Eigen::VectorXd c = (p.w_h * e + p.u_h * r.cwiseProduct(h)).array().tanh().matrix();
  return (1.0 - z.array()) * h.array() + z.array() * c.array();
}

ForwardPass forward(const ModelParams& p, const ModelInput& in, const ForwardOptions& opt) {
  const ModelConfig& c = p.config;
  check_dims(in.precip.cols() == c.n_precip_cells && in.temp.cols() == c.n_temp_cells &&
                 in.precip.rows() == in.temp.rows(),
             "forward input cells");
  if (opt.dropout_rate < 0.0 || opt.dropout_rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
  const int T = in.n_months();
  const int E = c.embedding_dim, H = c.hidden_dim;

  ForwardPass f;
  f.config = c;
  f.options = opt;
  f.x_p = in.precip.transpose();
  f.x_t = in.temp.transpose();

  f.keep = Eigen::MatrixXd::Ones(E, T);
  if (opt.mode == Mode::train && opt.dropout_rate > 0.0) {
    Rng rng(opt.dropout_seed);
    const double scale = 1.0 / (1.0 - opt.dropout_rate);
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < E; ++k) f.keep(k, t) = rng.bernoulli(opt.dropout_rate) ? 0.0 : scale;
  }
  f.emb = ((p.w_in_p * f.x_p + p.w_in_t * f.x_t).array() * f.keep.array()).matrix();

  // Input projections do not depend on the recurrence; batch them.
  const Eigen::MatrixXd in_z = p.w_z * f.emb;
  const Eigen::MatrixXd in_r = p.w_r * f.emb;
  const Eigen::MatrixXd in_h = p.w_h * f.emb;

  f.z.resize(H, T);
  f.r.resize(H, T);
  f.cand.resize(H, T);
  f.h.resize(H, T + 1);
  if (opt.h0) {
    check_dims(opt.h0->size() == H, "initial hidden state");
    f.h.col(0) = *opt.h0;
  } else {
    f.h.col(0).setZero();
  }
  for (int t = 0; t < T; ++t) {
    const auto hp = f.h.col(t);
    f.z.col(t) = sigmoid(in_z.col(t) + p.u_z * hp);
    f.r.col(t) = sigmoid(in_r.col(t) + p.u_r * hp);
    f.cand.col(t) = (in_h.col(t) + p.u_h * f.r.col(t).cwiseProduct(hp)).array().tanh().matrix();
    f.h.col(t + 1) = (1.0 - f.z.col(t).array()) * hp.array() + f.z.col(t).array() * f.cand.col(t).array();
    if (!f.h.col(t + 1).allFinite()) {
      const std::string when = t < static_cast<int>(in.months.size()) ? in.months[t].str() : std::to_string(t);
      throw NumericFault("non-finite hidden state at month " + when);
    }
  }

  const auto hs = f.h.rightCols(T);
  Eigen::MatrixXd mu = (p.w_mu * hs).colwise() + p.b_mu;
  f.sigma_pre = (p.w_sigma * hs).colwise() + p.b_sigma;
  Eigen::MatrixXd theta = (p.w_theta * hs).colwise() + p.b_theta;
  Eigen::MatrixXd sigma = f.sigma_pre.unaryExpr([](double x) { return softplus(x) + kSigmaFloor; });

  for (int t = 0; t < T; ++t) {
    if (!mu.col(t).allFinite() || !sigma.col(t).allFinite() || !theta.col(t).allFinite()) {
      const std::string when = t < static_cast<int>(in.months.size()) ? in.months[t].str() : std::to_string(t);
      throw NumericFault("non-finite distribution parameters at month " + when);
    }
  }
  f.dist.mu = mu.transpose();
  f.dist.sigma = sigma.transpose();
  f.dist.theta = theta.transpose();
  f.hidden.h = hs.transpose();
  return f;
}

Gradients backward(const ModelParams& p, const ForwardPass& f, const DistSeq& up) {
  if (!(p.config == f.config)) throw ConfigError("backward: parameters do not match the forward pass configuration");
  const int T = f.dist.n_months();
  const int P = p.config.n_plants;
  const int H = p.config.hidden_dim;
  auto shaped = [&](const Eigen::MatrixXd& m) { return m.rows() == T && m.cols() == P; };
  if (!shaped(up.mu) || !shaped(up.sigma) || !shaped(up.theta))
    throw ConfigError("backward: upstream gradient does not match the forward pass");

  Gradients g = Gradients::zeros(p.config);
  const auto hs = f.h.rightCols(T);

  const Eigen::MatrixXd g_mu = up.mu.transpose();
  const Eigen::MatrixXd g_theta = up.theta.transpose();
  const Eigen::MatrixXd g_spre =
      (up.sigma.transpose().array() * f.sigma_pre.unaryExpr([](double x) { return sigmoid(x); }).array()).matrix();

  g.w_mu = g_mu * hs.transpose();
  g.w_sigma = g_spre * hs.transpose();
  g.w_theta = g_theta * hs.transpose();
  g.b_mu = g_mu.rowwise().sum();
  g.b_sigma = g_spre.rowwise().sum();
  g.b_theta = g_theta.rowwise().sum();

  // dL/dh_t from the heads, for every month at once.
  const Eigen::MatrixXd g_h_heads =
      p.w_mu.transpose() * g_mu + p.w_sigma.transpose() * g_spre + p.w_theta.transpose() * g_theta;

  Eigen::MatrixXd da_z(H, T), da_r(H, T), da_h(H, T), rh(H, T);
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(H);
  for (int t = T - 1; t >= 0; --t) {
    const auto hp = f.h.col(t);
    const auto z = f.z.col(t).array();
    const auto r = f.r.col(t).array();
    const auto c = f.cand.col(t).array();
    const Eigen::VectorXd dh = g_h_heads.col(t) + carry;

    Eigen::VectorXd dh_prev = (dh.array() * (1.0 - z)).matrix();
    da_z.col(t) = (dh.array() * (c - hp.array()) * z * (1.0 - z)).matrix();
    da_h.col(t) = (dh.array() * z * (1.0 - c * c)).matrix();
    rh.col(t) = (r * hp.array()).matrix();

    const Eigen::VectorXd d_rh = p.u_h.transpose() * da_h.col(t);
    dh_prev.array() += d_rh.array() * r;
    da_r.col(t) = (d_rh.array() * hp.array() * r * (1.0 - r)).matrix();

    dh_prev += p.u_z.transpose() * da_z.col(t) + p.u_r.transpose() * da_r.col(t);
    carry = dh_prev;
  }

  const auto h_prev = f.h.leftCols(T);
  g.w_z = da_z * f.emb.transpose();
  g.w_r = da_r * f.emb.transpose();
  g.w_h = da_h * f.emb.transpose();
  g.u_z = da_z * h_prev.transpose();
  g.u_r = da_r * h_prev.transpose();
  g.u_h = da_h * rh.transpose();

  const Eigen::MatrixXd d_emb = p.w_z.transpose() * da_z + p.w_r.transpose() * da_r + p.w_h.transpose() * da_h;
  const Eigen::MatrixXd d_pre = (d_emb.array() * f.keep.array()).matrix();
  g.w_in_p = d_pre * f.x_p.transpose();
  g.w_in_t = d_pre * f.x_t.transpose();
  return g;
}

Gradients backward(const ModelParams& p, const ModelInput& in, const ForwardOptions& opt, const DistSeq& up) {
  return backward(p, forward(p, in, opt), up);
}

void project_nonneg(ModelParams& p) { p.w_in_p = p.w_in_p.cwiseMax(0.0); }

ModelParams project_nonneg(const ModelParams& p) {
  ModelParams out = p;
  project_nonneg(out);
  return out;
}

}  // namespace hydroscen
