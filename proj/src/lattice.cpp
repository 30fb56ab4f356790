#include "fermik/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fermik {

json ModelConfig::to_json() const {
  json j;
  j["dim"] = dim;
  j["L"] = side;
  j["T"] = temperature;
  j["lambda"] = lambda;
  j["c"] = c;
  j["c_tilde"] = c_tilde;
  j["v_scale"] = v_scale;
  j["alpha"] = alpha;
  j["delta"] = delta;
  j["gamma"] = gamma_cr;
  return j;
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.dim = j.value("dim", 2);
  c.side = j.value("L", 32);
  c.temperature = j.value("T", 1.0);
  c.lambda = j.value("lambda", 0.0);
  c.c = j.value("c", 0.0);
  c.c_tilde = j.value("c_tilde", 0.0);
  c.v_scale = j.value("v_scale", 1.0);
  if (j.contains("alpha")) c.alpha = j["alpha"].get<std::vector<double>>();
  c.delta = j.value("delta", 5.0 / 7.0);
  c.gamma_cr = j.value("gamma", 1.0 / 7.0);
  return c;
}

TorusGrid::TorusGrid(int dim, int side) : dim_(dim), side_(side) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("TorusGrid: dim out of range");
  if (side < 2) throw std::invalid_argument("TorusGrid: side must be >= 2");
  size_ = 1;
  for (int j = 0; j < dim; ++j) size_ *= std::size_t(side);
}

std::size_t TorusGrid::add_index(std::size_t a, std::size_t b) const {
  std::size_t out = 0, mul = 1;
  const std::size_t L = std::size_t(side_);
  for (int j = 0; j < dim_; ++j) {
    out += ((a % L) + (b % L)) % L * mul;
    a /= L;
    b /= L;
    mul *= L;
  }
  return out;
}

std::size_t TorusGrid::sub_index(std::size_t a, std::size_t b) const {
  std::size_t out = 0, mul = 1;
  const std::size_t L = std::size_t(side_);
  for (int j = 0; j < dim_; ++j) {
    out += ((a % L) + L - (b % L)) % L * mul;
    a /= L;
    b /= L;
    mul *= L;
  }
  return out;
}

std::size_t TorusGrid::negate_index(std::size_t a) const {
  std::size_t out = 0, mul = 1;
  const std::size_t L = std::size_t(side_);
  for (int j = 0; j < dim_; ++j) {
    out += (L - (a % L)) % L * mul;
    a /= L;
    mul *= L;
  }
  return out;
}

std::size_t TorusGrid::cell_index(const double* k) const {
  int x[kMaxDim];
  for (int j = 0; j < dim_; ++j) {
    double f = k[j] - std::floor(k[j]);          // k mod 1 in [0,1)
    int xi = int(std::floor(f * side_));
    if (xi == side_) xi = 0;                      // guard rounding at 1.0-
    x[j] = xi;
  }
  return encode(x);
}


ModifiedDispersion::ModifiedDispersion(const TorusGrid& grid, const DispersionModel& disp,
                                       const InteractionModel& inter, const Equilibrium& eq,
                                       double lambda)
    : dim_(grid.dim()), lambda_(lambda), vscale_(inter.scale) {
  const std::size_t n = grid.size();
  const double inv_n = 1.0 / double(n);
  double k[kMaxDim];
  std::vector<double> w0(n);
  wbar_ = 0.0;
  std::fill(cmom_.begin(), cmom_.end(), 0.0);
  std::fill(smom_.begin(), smom_.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    grid.coords(i, k);
    const double w = eq.w0(k);
    w0[i] = w;
    wbar_ += w;
    for (int j = 0; j < dim_; ++j) {
      cmom_[j] += w * std::cos(kTwoPi * k[j]);
      smom_[j] += w * std::sin(kTwoPi * k[j]);
    }
  }
  wbar_ *= inv_n;
  for (int j = 0; j < dim_; ++j) {
    cmom_[j] *= inv_n;
    smom_[j] *= inv_n;
    alpha_[j] = inter.alpha[j];
  }
  r_const_ = wbar_ * (inter.v0() - inter.c_tilde);
  const_term_ = disp.c + lambda_ * r_const_;

  // per-coordinate coefficient of e^{i 2 pi k_j}: -1 from the band plus the
  // lambda-correction modes; omega^lambda_j(theta) = Re[z_j e^{i theta}]
  for (int j = 0; j < dim_; ++j) {
    cdouble z = cdouble(-1.0, 0.0);
    cdouble ea(std::cos(alpha_[j]), -std::sin(alpha_[j]));  // e^{-i alpha_j}
    z += lambda_ * vscale_ * cmom_[j] * ea;
    z += lambda_ * vscale_ * smom_[j] * cdouble(0.0, -1.0) * ea;
    amp_[j] = std::abs(z);
    phase_[j] = std::arg(z);
  }

  r_table_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid.coords(i, k);
    r_table_[i] = r_lambda(k);
  }
  // the closed form must reproduce the grid definition; spot-checked in tests
  (void)w0;
}

double ModifiedDispersion::r_lambda(const double* k) const {
  // R(k) = Wbar (V^(0) - c~) + sum_j [C_j cos(2 pi k_j - a_j) + S_j sin(2 pi k_j - a_j)]
  double s = r_const_;
  for (int j = 0; j < dim_; ++j) {
    const double th = kTwoPi * k[j] - alpha_[j];
    s += vscale_ * (cmom_[j] * std::cos(th) + smom_[j] * std::sin(th));
  }
  return s;
}

double ModifiedDispersion::omega_lambda(const double* k) const {
  double s = const_term_;
  for (int j = 0; j < dim_; ++j) s += amp_[j] * std::cos(kTwoPi * k[j] + phase_[j]);
  return s;
}

double CutoffConfig::dist_msing(const double* k, int dim) {
  if (dim <= 1) return 0.0;
  double dh[kMaxDim];
  double total = 0.0;
  for (int j = 0; j < dim; ++j) {
    double u = 2.0 * k[j];
    double r = u - std::round(u);
    dh[j] = 0.5 * std::abs(r);  // torus distance to {0, 1/2}
    total += dh[j] * dh[j];
  }
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < dim; ++j) best = std::min(best, total - dh[j] * dh[j]);
  return std::sqrt(std::max(0.0, best));
}

double CutoffConfig::f1(const double* k) const {
  const double d = dist_msing(k, dim);
  const double w = width();
  if (w <= 0.0) return d > 0.0 ? 1.0 : 0.0;
  double u = d / w;
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * (3.0 - 2.0 * u);
}

double CutoffConfig::phi(int j, const double* k1, const double* k2, const double* k3) const {
  double s12[kMaxDim], s23[kMaxDim], s31[kMaxDim];
  for (int i = 0; i < dim; ++i) {
    s12[i] = k1[i] + k2[i];
    s23[i] = k2[i] + k3[i];
    s31[i] = k3[i] + k1[i];
  }
  const double p1 = f1(s12) * f1(s23) * f1(s31);
  return j == 1 ? p1 : 1.0 - p1;
}

json KineticParams::to_json() const {
  json j;
  j["lambda"] = lambda;
  j["epsilon"] = epsilon;
  j["delta"] = delta;
  j["gamma"] = gamma;
  j["b"] = b;
  j["gamma_prime"] = gamma_prime;
  j["a0"] = a0;
  j["b0"] = b0;
  j["N0"] = n0;
  j["kappa_prime"] = kappa_prime;
  j["kappa"] = kappa;
  return j;
}

KineticParams param_schedule(double lambda, double delta, double gamma) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw std::invalid_argument("param_schedule: lambda must lie in (0,1)");
  if (!(delta > 0.0)) throw std::invalid_argument("param_schedule: delta must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("param_schedule: gamma must lie in (0,1]");
  KineticParams p;
  p.lambda = lambda;
  p.epsilon = lambda * lambda;
  p.delta = delta;
  p.gamma = gamma;
  p.b = 0.75;
  p.gamma_prime = std::min({0.25, 2.0 * gamma, 2.0 * delta});
  p.a0 = p.gamma_prime / 24.0;
  p.b0 = 16.0 * (3.0 + 1.0 / p.a0);
  const double abslog = std::abs(std::log(lambda));
  const double bracket = std::sqrt(1.0 + std::log(lambda) * std::log(lambda));
  p.n0 = std::max(1, int(std::floor(p.a0 * abslog / std::log(bracket))));
  p.kappa_prime = p.epsilon * std::pow(double(p.n0), p.b0);
  p.kappa.assign(std::size_t(p.n0) + 1, 0.0);
  for (int n = 0; n <= p.n0; ++n)
    p.kappa[std::size_t(n)] = (2 * n < p.n0) ? 0.0 : p.kappa_prime;
  return p;
}

LatticeModel::LatticeModel(const ModelConfig& c)
    : cfg(c), grid(c.dim, c.side) {
  disp.dim = c.dim;
  disp.c = c.c;
  inter.dim = c.dim;
  inter.c_tilde = c.c_tilde;
  inter.scale = c.v_scale;
  inter.alpha.fill(0.0);
  for (std::size_t j = 0; j < c.alpha.size() && j < std::size_t(kMaxDim); ++j)
    inter.alpha[j] = c.alpha[j];
  equil.temperature = c.temperature;
  equil.disp = disp;
  mod = ModifiedDispersion(grid, disp, inter, equil, c.lambda);
  cutoff.dim = c.dim;
  cutoff.lambda = c.lambda;

  const std::size_t n = grid.size();
  omega_tab.resize(n);
  omega_lambda_tab.resize(n);
  w0_tab.resize(n);
  vhat_tab.resize(n);
  double k[kMaxDim];
  for (std::size_t i = 0; i < n; ++i) {
    grid.coords(i, k);
    omega_tab[i] = disp.omega(k);
    omega_lambda_tab[i] = omega_tab[i] + c.lambda * mod.r_table(i);
    w0_tab[i] = equil.w0(k);
    vhat_tab[i] = inter.v_hat(k);
  }
}

LatticeModel make_model(const ModelConfig& cfg) { return LatticeModel(cfg); }

}  // namespace fermik
