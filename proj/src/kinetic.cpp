#include "fermik/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fermik/fft.hpp"

namespace fermik {

namespace {

double lorentzian(double x, double eta) { return eta / (x * x + eta * eta) / std::numbers::pi; }

}  // namespace

double collision_operator(const LatticeModel& m, const WField& W, std::size_t k1, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("collision_operator: eta must be positive");
  const auto& g = m.grid;
  const std::size_t n = g.size();
  const double cell = 1.0 / (double(n) * double(n));
  const double w1 = W.w[k1];
  const double om1 = m.omega_tab[k1];
  double acc = 0.0;
  for (std::size_t k2 = 0; k2 < n; ++k2) {
    const double w2 = W.w[k2];
    const double om12 = om1 + m.omega_tab[k2];
    const std::size_t s12 = g.add_index(k1, k2);
    for (std::size_t k3 = 0; k3 < n; ++k3) {
      const std::size_t k4 = g.sub_index(s12, k3);
      const double w3 = W.w[k3], w4 = W.w[k4];
      const double dv = m.vhat_tab[g.sub_index(k2, k3)] - m.vhat_tab[g.sub_index(k2, k4)];
      const double bracket = (1 - w1) * (1 - w2) * w3 * w4 - w1 * w2 * (1 - w3) * (1 - w4);
      acc += lorentzian(om12 - m.omega_tab[k3] - m.omega_tab[k4], eta) * dv * dv * bracket;
    }
  }
  return acc * cell;
}

double collisional_frequency_mu(const LatticeModel& m, std::size_t k1, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("collisional_frequency_mu: eta > 0 required");
  const auto& g = m.grid;
  const std::size_t n = g.size();
  const double cell = 1.0 / (double(n) * double(n));
  const double om1 = m.omega_tab[k1];
  double acc = 0.0;
  for (std::size_t k2 = 0; k2 < n; ++k2) {
    const double w2 = m.w0_tab[k2];
    const double om12 = om1 + m.omega_tab[k2];
    const std::size_t s12 = g.add_index(k1, k2);
    for (std::size_t k3 = 0; k3 < n; ++k3) {
      const std::size_t k4 = g.sub_index(s12, k3);
      const double w3 = m.w0_tab[k3], w4 = m.w0_tab[k4];
      const double v23 = m.vhat_tab[g.sub_index(k2, k3)];
      const double dv = v23 - m.vhat_tab[g.sub_index(k2, k4)];
      const double bracket = w3 * w4 - w2 * w4 + w2 * (1 - w3);
      acc += lorentzian(om12 - m.omega_tab[k3] - m.omega_tab[k4], eta) * v23 * dv * bracket;
    }
  }
  return acc * cell;
}

json NuValue::to_json() const {
  json j;
  std::vector<int> kk(k.begin(), k.begin() + dim);
  j["k"] = kk;
  j["eta"] = eta;
  j["re"] = value.real();
  j["im"] = value.imag();
  j["L"] = side;
  return j;
}

NuValue nu(const LatticeModel& m, std::size_t k1, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("nu: eta must be positive");
  const auto& g = m.grid;
  const std::size_t n = g.size();
  const double cell = 1.0 / (double(n) * double(n));
  const double om1 = m.omega_tab[k1];
  cdouble acc(0.0);
  for (std::size_t k2 = 0; k2 < n; ++k2) {
    const double w2 = m.w0_tab[k2];
    const double om12 = om1 + m.omega_tab[k2];
    const std::size_t s12 = g.add_index(k1, k2);
    for (std::size_t k3 = 0; k3 < n; ++k3) {
      const std::size_t k4 = g.sub_index(s12, k3);
      const double w3 = m.w0_tab[k3], w4 = m.w0_tab[k4];
      const double v23 = m.vhat_tab[g.sub_index(k2, k3)];
      const double dv = v23 - m.vhat_tab[g.sub_index(k2, k4)];
      const double bracket = w3 * w4 - w2 * w4 + w2 * (1 - w3);
      const double dw = om12 - m.omega_tab[k3] - m.omega_tab[k4];
      // int_0^inf e^{-eta t} e^{i t dw} dt = i / (dw + i eta)
      acc += v23 * dv * bracket * (cdouble(0.0, 1.0) / cdouble(dw, eta));
    }
  }
  NuValue out;
  out.dim = m.cfg.dim;
  out.side = m.cfg.side;
  g.decode(k1, out.k.data());
  out.eta = eta;
  out.value = acc * cell;
  return out;
}

double re_nu_onshell(const LatticeModel& m, std::size_t k1, double eta) {
  const auto& g = m.grid;
  const std::size_t n = g.size();
  const double cell = 1.0 / (double(n) * double(n));
  const double om1 = m.omega_tab[k1];
  double acc = 0.0;
  for (std::size_t k2 = 0; k2 < n; ++k2) {
    const double w2 = m.w0_tab[k2];
    const double om12 = om1 + m.omega_tab[k2];
    const std::size_t s12 = g.add_index(k1, k2);
    for (std::size_t k3 = 0; k3 < n; ++k3) {
      const std::size_t k4 = g.sub_index(s12, k3);
      const double w3 = m.w0_tab[k3], w4 = m.w0_tab[k4];
      const double dv = m.vhat_tab[g.sub_index(k2, k3)] - m.vhat_tab[g.sub_index(k2, k4)];
      const double bracket = w3 * w4 - w2 * w4 + w2 * (1 - w3);
      const double dw = om12 - m.omega_tab[k3] - m.omega_tab[k4];
      acc += 0.5 * dv * dv * bracket * eta / (dw * dw + eta * eta);
    }
  }
  return acc * cell;
}

// ---------------------------------------------------------------------------
// motive table

MotiveKernelRow motive_kernel(MotiveId id, int sigma) {
  if (sigma != 1 && sigma != -1) throw std::invalid_argument("motive_kernel: sigma must be +-1");
  using M = MotiveId;
  MotiveKernelRow r;
  r.id = id;
  r.sigma = sigma;
  if (is_loss(id)) {
    const int tau = int(id) < int(M::L1m) ? +1 : -1;
    const int base = int(id) < int(M::L1m) ? int(id) - int(M::L1) : int(id) - int(M::L1m);
    r.tau = tau;
    switch (base) {
      case 0: r.sign = +1; r.u = UKind::V12Sq;  r.w = {WKind::WSigma, WKind::One, WKind::W, WKind::W}; break;
      case 1: r.sign = +1; r.u = UKind::V12V13; r.w = {WKind::WSigma, WKind::W, WKind::One, WKind::W}; break;
      case 2: r.sign = +1; r.u = UKind::V12Sq;  r.w = {WKind::WSigma, WKind::W, WKind::Wt, WKind::One}; break;
      case 3: r.sign = -1; r.u = UKind::V12V13; r.w = {WKind::WSigma, WKind::One, WKind::W, WKind::W}; break;
      case 4: r.sign = -1; r.u = UKind::V12Sq;  r.w = {WKind::WSigma, WKind::W, WKind::One, WKind::W}; break;
      case 5: r.sign = -1; r.u = UKind::V12V13; r.w = {WKind::WSigma, WKind::W, WKind::Wt, WKind::One}; break;
      default: throw std::logic_error("motive_kernel: bad loss id");
    }
    return r;
  }
  // gains: the minus family only replaces pairings with left parity -1 and the
  // plus family with +1
  const bool minus_family = int(id) >= int(M::G1m);
  if ((minus_family && sigma != -1) || (!minus_family && sigma != +1))
    throw std::invalid_argument("motive_kernel: inadmissible pairing parity for gain motive");
  const int base = minus_family ? int(id) - int(M::G1m) : int(id) - int(M::G1);
  r.w = {WKind::One, WKind::WMinusSigma, WKind::WSigma, WKind::WSigma};
  switch (base) {
    case 0: r.sign = +1; r.u = UKind::V12V13; r.tau = sigma; break;
    case 1: r.sign = +1; r.u = UKind::V12V13; r.tau = -sigma; break;
    case 2: r.sign = -1; r.u = UKind::V12Sq;  r.tau = sigma; break;
    case 3: r.sign = -1; r.u = UKind::V12Sq;  r.tau = -sigma; break;
    default: throw std::logic_error("motive_kernel: bad gain id");
  }
  return r;
}

namespace {

double w_kind_value(const LatticeModel& m, WKind kind, int sigma, const double* k) {
  switch (kind) {
    case WKind::One: return 1.0;
    case WKind::W: return m.equil.w0(k);
    case WKind::Wt: return 1.0 - m.equil.w0(k);
    case WKind::WSigma: return m.equil.w_sigma(k, sigma);
    case WKind::WMinusSigma: return m.equil.w_sigma(k, -sigma);
  }
  return 0.0;
}

double u_kind_value(const LatticeModel& m, UKind u, const double* k1, const double* k2,
                    const double* k3) {
  double s12[kMaxDim], s13[kMaxDim];
  for (int j = 0; j < m.cfg.dim; ++j) {
    s12[j] = k1[j] + k2[j];
    s13[j] = k1[j] + k3[j];
  }
  const double v12 = m.inter.v_hat(s12);
  const double v13 = m.inter.v_hat(s13);
  switch (u) {
    case UKind::V12Sq: return v12 * v12;
    case UKind::V13Sq: return v13 * v13;
    case UKind::V12V13: return v12 * v13;
  }
  return 0.0;
}

}  // namespace

double motive_row_value(const LatticeModel& m, const MotiveKernelRow& row, const double* k0,
                        const double* k1, const double* k2, const double* k3) {
  const double* ks[4] = {k0, k1, k2, k3};
  double v = row.sign * u_kind_value(m, row.u, k1, k2, k3);
  for (int i = 0; i < 4; ++i) v *= w_kind_value(m, row.w[std::size_t(i)], row.sigma, ks[i]);
  return v;
}

double motive_sum_special_lhs(const LatticeModel& m, int sigma, const double* k1,
                              const double* k2, const double* k3) {
  double k0[kMaxDim];
  for (int j = 0; j < m.cfg.dim; ++j) k0[j] = k1[j] + k2[j] + k3[j];
  double acc = 0.0;
  for (MotiveId id : {MotiveId::L1, MotiveId::L2, MotiveId::L3, MotiveId::L4, MotiveId::L5,
                      MotiveId::L6})
    acc += motive_row_value(m, motive_kernel(id, sigma), k0, k1, k2, k3);
  return acc;
}

double motive_sum_special_rhs(const LatticeModel& m, int sigma, const double* k1,
                              const double* k2, const double* k3) {
  double k0[kMaxDim], s12[kMaxDim], s13[kMaxDim];
  for (int j = 0; j < m.cfg.dim; ++j) {
    k0[j] = k1[j] + k2[j] + k3[j];
    s12[j] = k1[j] + k2[j];
    s13[j] = k1[j] + k3[j];
  }
  const double w0 = m.equil.w_sigma(k0, sigma);
  const double w1 = m.equil.w0(k1), w2 = m.equil.w0(k2), w3 = m.equil.w0(k3);
  const double v12 = m.inter.v_hat(s12), v13 = m.inter.v_hat(s13);
  return w0 * v12 * (v12 - v13) * (w2 * w3 - w1 * w3 + w1 * (1.0 - w2));
}

double motive_sum_generic(const LatticeModel& m, std::size_t k0, int sigma, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("motive_sum_generic: eta must be positive");
  const auto& g = m.grid;
  const std::size_t n = g.size();
  const double cell = 1.0 / (double(n) * double(n));
  const double w0 = m.w_sigma_idx(k0, sigma);
  const double w0t = 1.0 - w0;
  const double om0 = m.omega_tab[k0];
  double acc = 0.0;
  for (std::size_t i2 = 0; i2 < n; ++i2) {
    const std::size_t part = g.sub_index(k0, i2);
    const double w2 = m.w0_tab[i2];
    for (std::size_t i3 = 0; i3 < n; ++i3) {
      const std::size_t i1 = g.sub_index(part, i3);
      const double w1 = m.w0_tab[i1], w3 = m.w0_tab[i3];
      const double v12 = m.vhat_tab[g.add_index(i1, i2)];
      const double v13 = m.vhat_tab[g.add_index(i1, i3)];
      const double theta = m.omega_tab[i3] - m.omega_tab[i1] + m.omega_tab[i2] - om0;
      // (1/2) int_0^inf e^{-eta t}(e^{-i t Th} + e^{+i t Th}) dt = eta/(Th^2+eta^2)
      const double bracket =
          w0t * (1 - w1) * w2 * w3 - w0 * w1 * (1 - w2) * (1 - w3);
      acc += (v12 - v13) * (v12 - v13) * bracket * eta / (theta * theta + eta * eta);
    }
  }
  return acc * cell;
}

// ---------------------------------------------------------------------------
// G factors

GridTable grid_table_one(const LatticeModel& m) {
  return GridTable(m.grid.size(), cdouble(1.0, 0.0));
}

GridTable grid_table_w(const LatticeModel& m, WKind kind, int sigma) {
  GridTable t(m.grid.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double w = m.w0_tab[i];
    switch (kind) {
      case WKind::One: t[i] = 1.0; break;
      case WKind::W: t[i] = w; break;
      case WKind::Wt: t[i] = 1.0 - w; break;
      case WKind::WSigma: t[i] = sigma < 0 ? w : 1.0 - w; break;
      case WKind::WMinusSigma: t[i] = sigma < 0 ? 1.0 - w : w; break;
    }
  }
  return t;
}

namespace {

std::vector<int> grid_dims(const LatticeModel& m) {
  return std::vector<int>(std::size_t(m.cfg.dim), m.cfg.side);
}

GridTable phase_mul(const LatticeModel& m, const GridTable& f, double s, int tau) {
  GridTable out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    out[i] = f[i] * std::polar(1.0, -s * tau * m.omega_lambda_tab[i]);
  return out;
}

// circular convolution with the normalised dk = L^{-d} sum convention
GridTable conv_dk(const LatticeModel& m, const GridTable& a, const GridTable& b) {
  auto dims = grid_dims(m);
  GridTable fa = a, fb = b;
  fft_nd(fa, dims, false);
  fft_nd(fb, dims, false);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  fft_nd(fa, dims, true);
  const double cell = 1.0 / double(m.grid.size());
  for (auto& v : fa) v *= cell;
  return fa;
}

// modes of V^: pairs (grid shift in Z^d as lattice vector, coefficient)
struct VMode {
  std::array<int, kMaxDim> shift{};
  cdouble coeff;
};

std::vector<VMode> v_modes(const LatticeModel& m) {
  std::vector<VMode> out;
  VMode zero;
  zero.coeff = m.cfg.c_tilde;
  out.push_back(zero);
  for (int j = 0; j < m.cfg.dim; ++j) {
    VMode p, q;
    p.shift[std::size_t(j)] = +1;
    p.coeff = -0.5 * m.inter.scale * std::polar(1.0, -m.inter.alpha[std::size_t(j)]);
    q.shift[std::size_t(j)] = -1;
    q.coeff = -0.5 * m.inter.scale * std::polar(1.0, +m.inter.alpha[std::size_t(j)]);
    out.push_back(p);
    out.push_back(q);
  }
  return out;
}

GridTable mode_twist(const LatticeModel& m, const GridTable& f, const std::array<int, kMaxDim>& sh,
                     int dir) {
  // multiply by e^{dir * 2 pi i (sh . k)}
  GridTable out(f.size());
  double k[kMaxDim];
  for (std::size_t i = 0; i < f.size(); ++i) {
    m.grid.coords(i, k);
    double ph = 0.0;
    for (int j = 0; j < m.cfg.dim; ++j) ph += sh[std::size_t(j)] * k[j];
    out[i] = f[i] * std::polar(1.0, dir * kTwoPi * ph);
  }
  return out;
}

}  // namespace

GridTable g_factor(const LatticeModel& m, double s, const std::array<int, 4>& tau, UKind u,
                   const GridTable& f0, const GridTable& f1, const GridTable& f2,
                   const GridTable& f3) {
  const std::size_t n = m.grid.size();
  if (f0.size() != n || f1.size() != n || f2.size() != n || f3.size() != n)
    throw std::invalid_argument("g_factor: table size mismatch");
  GridTable a = phase_mul(m, f1, s, tau[1]);
  GridTable b = phase_mul(m, f2, s, tau[2]);
  GridTable c = phase_mul(m, f3, s, tau[3]);
  GridTable inner;
  if (u == UKind::V12Sq || u == UKind::V13Sq) {
    // V(k1+k2)^2: convolve (a, b) first and weight by V^2; V(k1+k3)^2 swaps b, c
    const GridTable& x = u == UKind::V12Sq ? b : c;
    const GridTable& y = u == UKind::V12Sq ? c : b;
    GridTable ab = conv_dk(m, a, x);
    for (std::size_t i = 0; i < n; ++i) ab[i] *= m.vhat_tab[i] * m.vhat_tab[i];
    inner = conv_dk(m, ab, y);
  } else {
    // V(k1+k2) V(k1+k3) = V(k0-k3) V(k0-k2): expand both factors in modes
    inner.assign(n, cdouble(0.0));
    const auto modes = v_modes(m);
    for (const auto& mb : modes) {
      GridTable bb = mode_twist(m, b, mb.shift, -1);
      for (const auto& mc : modes) {
        GridTable cc = mode_twist(m, c, mc.shift, -1);
        GridTable conv = conv_dk(m, conv_dk(m, a, bb), cc);
        std::array<int, kMaxDim> tot{};
        for (int j = 0; j < m.cfg.dim; ++j)
          tot[std::size_t(j)] = mb.shift[std::size_t(j)] + mc.shift[std::size_t(j)];
        GridTable tw = mode_twist(m, conv, tot, +1);
        const cdouble cc2 = mb.coeff * mc.coeff;
        for (std::size_t i = 0; i < n; ++i) inner[i] += cc2 * tw[i];
      }
    }
  }
  GridTable out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = f0[i] * std::polar(1.0, -s * tau[0] * m.omega_lambda_tab[i]) * inner[i];
  return out;
}

json SeriesResult::to_json() const {
  json j;
  json ps = json::array();
  for (const auto& p : partial) ps.push_back(json{{"re", p.real()}, {"im", p.imag()}});
  j["partial"] = ps;
  j["closed_re"] = closed.real();
  j["closed_im"] = closed.imag();
  j["remainder"] = remainder;
  j["nu_re"] = nu_value.real();
  j["nu_im"] = nu_value.imag();
  return j;
}

SeriesResult leading_series(const LatticeModel& m, std::size_t k, double t, double eta, int M) {
  if (t < 0) throw std::invalid_argument("leading_series: t must be nonnegative");
  SeriesResult out;
  out.nu_value = nu(m, k, eta).value;
  const double w0 = m.w0_tab[k];
  cdouble term(w0, 0.0);
  cdouble sum = term;
  out.partial.push_back(sum);
  for (int mm = 1; mm <= M; ++mm) {
    term *= out.nu_value * (-t) / double(mm);
    sum += term;
    out.partial.push_back(sum);
  }
  out.closed = w0 * std::exp(-out.nu_value * t);
  double fact = 1.0;
  for (int i = 1; i <= M + 1; ++i) fact *= i;
  out.remainder = w0 * std::pow(std::abs(out.nu_value) * t, M + 1) / fact;
  return out;
}

json AmplitudeResult::to_json() const {
  json j;
  j["re"] = value.real();
  j["im"] = value.imag();
  j["tail_estimate"] = tail_estimate;
  return j;
}

namespace {

// time integral T(z) = int_0^{T0} e^{-z s} (t - l^2 s) ds with T0 = t / l^2
cdouble simplex_time_integral(cdouble z, double t, double lambda) {
  if (lambda == 0.0) return t / z;
  const double T0 = t / (lambda * lambda);
  const cdouble ez = std::exp(-z * T0);
  const double l2 = lambda * lambda;
  return t * (1.0 - ez) / z - l2 * (1.0 - ez * (1.0 + z * T0)) / (z * z);
}

struct EvalTree {
  // children[node] = list of (child, slot)
  std::vector<std::vector<std::array<int, 2>>> children;
  std::vector<MotiveKernelRow> rows;
  int root = -1;  // node attached at the external pairing (slot 0 chain)
};

EvalTree build_eval_tree(const LeadingItem& item) {
  EvalTree t;
  const int m = int(item.motives.size());
  t.children.resize(std::size_t(m));
  for (int i = 0; i < m; ++i)
    t.rows.push_back(motive_kernel(item.motives[std::size_t(i)].id,
                                   item.motives[std::size_t(i)].sigma));
  for (int i = 0; i < m; ++i) {
    const auto [parent, slot] = item.attach_at[std::size_t(i)];
    if (parent < 0) {
      if (t.root >= 0) throw std::logic_error("amplitude: multiple root attachments");
      t.root = i;
    } else {
      t.children[std::size_t(parent)].push_back({i, slot});
    }
  }
  if (m > 0 && t.root < 0) throw std::logic_error("amplitude: no root motive");
  return t;
}

std::array<int, 4> tau_vec(const MotiveKernelRow& row) {
  return {-row.tau, -row.tau, row.tau, row.tau};
}

// recursive G evaluation; s[i] is node i's time variable
GridTable eval_node(const LatticeModel& m, const EvalTree& t, int node,
                    const std::vector<double>& s) {
  const auto& row = t.rows[std::size_t(node)];
  std::array<GridTable, 4> f;
  for (int slot = 0; slot < 4; ++slot)
    f[std::size_t(slot)] = grid_table_w(m, row.w[std::size_t(slot)], row.sigma);
  for (const auto& [child, slot] : t.children[std::size_t(node)])
    f[std::size_t(slot)] = eval_node(m, t, child, s);
  GridTable g = g_factor(m, s[std::size_t(node)], tau_vec(row), row.u, f[0], f[1], f[2], f[3]);
  const double sgn = -double(row.sign);  // one (-1) per motive, table sign explicit
  for (auto& v : g) v *= sgn;
  return g;
}

}  // namespace

AmplitudeResult amplitude_main_pair(const LatticeModel& m, const LeadingItem& item,
                                    const std::vector<double>& weight, double t,
                                    const AmplitudeOptions& opt) {
  const int mm = int(item.motives.size());
  if (mm > 2) throw std::invalid_argument("amplitude_main_pair: m <= 2 supported");
  if (weight.size() != m.grid.size())
    throw std::invalid_argument("amplitude_main_pair: weight table size mismatch");
  const double lambda = m.cfg.lambda;
  const std::size_t n = m.grid.size();
  const double cell = 1.0 / double(n);
  AmplitudeResult out;
  out.tail_estimate = 0.0;

  if (mm == 0) {
    cdouble acc(0.0);
    for (std::size_t i = 0; i < n; ++i) acc += weight[i] * m.w0_tab[i];
    out.value = acc * cell;
    return out;
  }

  EvalTree tree = build_eval_tree(item);

  if (mm == 1 && !opt.force_quadrature) {
    // analytic in the single time variable: per momentum cell the damped
    // integral of e^{-i tau Theta s} (t - l^2 s) has a closed form
    const auto& row = tree.rows[0];
    const auto& g = m.grid;
    std::array<GridTable, 4> f;
    for (int slot = 0; slot < 4; ++slot)
      f[std::size_t(slot)] = grid_table_w(m, row.w[std::size_t(slot)], row.sigma);
    const double cell3 = cell * cell * cell;
    std::vector<cdouble> per_k0(n, cdouble(0.0));
    parallel_for(n, [&](std::size_t k0, int) {
      if (weight[k0] == 0.0) return;
      const double om0 = m.omega_lambda_tab[k0];
      cdouble inner(0.0);
      for (std::size_t i1 = 0; i1 < n; ++i1) {
        const std::size_t rest = g.sub_index(k0, i1);
        const double om1 = m.omega_lambda_tab[i1];
        const cdouble f1v = f[1][i1];
        for (std::size_t i2 = 0; i2 < n; ++i2) {
          const std::size_t i3 = g.sub_index(rest, i2);
          double uval;
          switch (row.u) {
            case UKind::V12Sq: {
              const double v = m.vhat_tab[g.add_index(i1, i2)];
              uval = v * v;
              break;
            }
            case UKind::V13Sq: {
              const double v = m.vhat_tab[g.add_index(i1, i3)];
              uval = v * v;
              break;
            }
            default:
              uval = m.vhat_tab[g.add_index(i1, i2)] * m.vhat_tab[g.add_index(i1, i3)];
          }
          const double theta = m.omega_lambda_tab[i3] - om1 + m.omega_lambda_tab[i2] - om0;
          const cdouble z(opt.eta, row.tau * theta);
          inner += uval * f1v * f[2][i2] * f[3][i3] * simplex_time_integral(z, t, lambda);
        }
      }
      per_k0[k0] = weight[k0] * f[0][k0] * inner * cell3;
    });
    cdouble acc(0.0);
    for (std::size_t i = 0; i < n; ++i) acc += per_k0[i];  // deterministic reduction
    out.value = -double(row.sign) * acc;  // one (-1) per motive, table sign explicit
    out.tail_estimate = lambda > 0 ? std::exp(-opt.eta * t / (lambda * lambda)) : 0.0;
    return out;
  }

  // quadrature path: Gauss-Legendre panels against e^{-eta s} damping
  const double smax = lambda > 0 ? std::min(t / (lambda * lambda), 14.0 / opt.eta)
                                 : 14.0 / opt.eta;
  const int nodes = std::max(8, opt.s_nodes);
  std::vector<double> xs(static_cast<std::size_t>(nodes));
  std::vector<double> ws(static_cast<std::size_t>(nodes));
  // composite midpoint on graded panels (denser near 0)
  for (int i = 0; i < nodes; ++i) {
    const double u0 = double(i) / nodes, u1 = double(i + 1) / nodes;
    const double a = smax * u0 * u0, b = smax * u1 * u1;
    xs[std::size_t(i)] = 0.5 * (a + b);
    ws[std::size_t(i)] = b - a;
  }
  cdouble acc(0.0);
  std::vector<double> s(static_cast<std::size_t>(mm), 0.0);
  std::vector<int> idx(static_cast<std::size_t>(mm), 0);
  for (;;) {
    double wprod = 1.0, ssum = 0.0;
    for (int i = 0; i < mm; ++i) {
      s[std::size_t(i)] = xs[std::size_t(idx[std::size_t(i)])];
      wprod *= ws[std::size_t(idx[std::size_t(i)])] * std::exp(-opt.eta * s[std::size_t(i)]);
      ssum += s[std::size_t(i)];
    }
    double simplex;
    const double rem = t - lambda * lambda * ssum;
    if (rem <= 0.0) {
      simplex = 0.0;
    } else {
      simplex = 1.0;
      for (int i = 1; i <= mm; ++i) simplex *= rem / i;
    }
    if (simplex != 0.0) {
      GridTable g = eval_node(m, tree, tree.root, s);
      cdouble dot(0.0);
      for (std::size_t i = 0; i < n; ++i) dot += weight[i] * g[i];
      acc += wprod * simplex * dot * cell;
    }
    int carry = mm - 1;
    while (carry >= 0 && ++idx[std::size_t(carry)] == nodes) {
      idx[std::size_t(carry)] = 0;
      --carry;
    }
    if (carry < 0) break;
  }
  out.value = acc;
  out.tail_estimate = std::exp(-opt.eta * smax);
  return out;
}

}  // namespace fermik
