#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "fermik/util.hpp"

namespace fermik {

using cdouble = std::complex<double>;

inline constexpr int kMaxDim = 4;
inline constexpr double kTwoPi = 6.28318530717958647692528676655900577;

/// Run-time model description; serialisable as the JSON config
/// {dim, L, T, lambda, c, c_tilde, alpha[], delta, gamma}.
struct ModelConfig {
  int dim = 2;
  int side = 32;
  double temperature = 1.0;
  double lambda = 0.0;
  double c = 0.0;
  double c_tilde = 0.0;
  double v_scale = 1.0;       // amplitude of the interaction cosine part (0 = constant V^)
  std::vector<double> alpha;  // per-coordinate interaction phases; empty = all zero
  double delta = 5.0 / 7.0;   // dispersive-decay exponent input
  double gamma_cr = 1.0 / 7.0;  // crossing-bound exponent input

  json to_json() const;
  static ModelConfig from_json(const json& j);
};

/// Discretized momentum torus {0, 1/L, ..., (L-1)/L}^d addressed by integer
/// vectors mod L, with flat row-major indices.
class TorusGrid {
 public:
  TorusGrid(int dim, int side);

  int dim() const { return dim_; }
  int side() const { return side_; }
  std::size_t size() const { return size_; }

  int wrap(int v) const {
    v %= side_;
    return v < 0 ? v + side_ : v;
  }
  void decode(std::size_t idx, int* x) const {
    for (int j = dim_ - 1; j >= 0; --j) {
      x[j] = int(idx % std::size_t(side_));
      idx /= std::size_t(side_);
    }
  }
  std::size_t encode(const int* x) const {
    std::size_t idx = 0;
    for (int j = 0; j < dim_; ++j) idx = idx * std::size_t(side_) + std::size_t(wrap(x[j]));
    return idx;
  }
  // componentwise (a+b) mod L and (a-b) mod L on flat indices
  std::size_t add_index(std::size_t a, std::size_t b) const;
  std::size_t sub_index(std::size_t a, std::size_t b) const;
  std::size_t negate_index(std::size_t a) const;

  void coords(std::size_t idx, double* k) const {
    int x[kMaxDim];
    decode(idx, x);
    for (int j = 0; j < dim_; ++j) k[j] = double(x[j]) / side_;
  }
  /// Cell map [k]: any real torus point to the grid point of its cell.
  std::size_t cell_index(const double* k) const;

 private:
  int dim_, side_;
  std::size_t size_;
};

/// Nearest-neighbour band: omega(k) = c - sum_j cos(2 pi k_j).
struct DispersionModel {
  int dim = 1;
  double c = 0.0;
  double omega(const double* k) const {
    double s = c;
    for (int j = 0; j < dim; ++j) s -= std::cos(kTwoPi * k[j]);
    return s;
  }
};

/// Interaction V^(k) = c_tilde - sum_j cos(2 pi k_j - alpha_j).
struct InteractionModel {
  int dim = 1;
  double c_tilde = 0.0;
  double scale = 1.0;  // cosine amplitude; 0 gives a constant potential
  std::array<double, kMaxDim> alpha{};
  double v_hat(const double* k) const {
    double s = c_tilde;
    for (int j = 0; j < dim; ++j) s -= scale * std::cos(kTwoPi * k[j] - alpha[j]);
    return s;
  }
  double v0() const {
    double s = c_tilde;
    for (int j = 0; j < dim; ++j) s -= scale * std::cos(alpha[j]);
    return s;
  }
  double norm_inf() const {
    return std::max(std::abs(c_tilde + scale * dim), std::abs(c_tilde - scale * dim));
  }
  double norm_l2_sq() const { return c_tilde * c_tilde + 0.5 * scale * scale * dim; }
  double norm_l1_position() const { return std::abs(c_tilde) + std::abs(scale) * dim; }
  bool is_constant() const { return scale == 0.0; }
};

/// Fermi-Dirac occupation of the free band.
struct Equilibrium {
  double temperature = 1.0;
  DispersionModel disp;
  double w0_of_energy(double om) const { return 1.0 / (std::exp(om / temperature) + 1.0); }
  double w0(const double* k) const { return w0_of_energy(disp.omega(k)); }
  /// sigma = -1 gives W, sigma = +1 gives 1 - W.
  double w_sigma(const double* k, int sigma) const {
    double w = w0(k);
    return sigma < 0 ? w : 1.0 - w;
  }
};

/// omegaized^lambda = omega + lambda R with R the equilibrium first-order shift.
/// For the cosine band both the grid table and a closed form (per-coordinate
/// amplitude/phase) are exact and agree.
class ModifiedDispersion {
 public:
  ModifiedDispersion() = default;
  ModifiedDispersion(const TorusGrid& grid, const DispersionModel& disp,
                     const InteractionModel& inter, const Equilibrium& eq, double lambda);

  double lambda() const { return lambda_; }
  double r_lambda(const double* k) const;
  double omega_lambda(const double* k) const;
  double r_table(std::size_t idx) const { return r_table_[idx]; }

  // omega^lambda(k) = const_term + sum_j amp_j cos(2 pi k_j + phase_j)
  double const_term() const { return const_term_; }
  double amp(int j) const { return amp_[j]; }
  double phase(int j) const { return phase_[j]; }
  int dim() const { return dim_; }

 private:
  int dim_ = 1;
  double lambda_ = 0.0;
  double wbar_ = 0.0;
  double const_term_ = 0.0;
  double r_const_ = 0.0;
  double vscale_ = 1.0;
  std::array<double, kMaxDim> cmom_{}, smom_{};  // first cosine/sine moments of W0
  std::array<double, kMaxDim> amp_{}, phase_{};
  std::array<double, kMaxDim> alpha_{};
  std::vector<double> r_table_;
};

/// Momentum cutoff F1/F0 and the triple-product Phi1/Phi0.
/// F1 ramps from 0 on M^sing to 1 at distance lambda^b with a C^2 profile.
struct CutoffConfig {
  int dim = 2;
  double lambda = 0.0;
  double b = 0.75;

  double width() const { return lambda > 0.0 ? std::pow(lambda, b) : 0.0; }
  /// Distance to the singular set: points with all but one coordinate in {0, 1/2}.
  static double dist_msing(const double* k, int dim);
  double f1(const double* k) const;
  double f0(const double* k) const { return 1.0 - f1(k); }
  /// Phi_j(k1,k2,k3); j = 1 is the product F1 F1 F1 over pairwise sums, Phi_0 = 1 - Phi_1.
  double phi(int j, const double* k1, const double* k2, const double* k3) const;
};

/// Derived expansion parameters and the kappa damping sequence.
struct KineticParams {
  double lambda = 0.0;
  double epsilon = 0.0;   // lambda^2
  double delta = 0.0;
  double gamma = 0.0;
  double b = 0.75;
  double gamma_prime = 0.0;  // min(1/4, 2 gamma, 2 delta)
  double a0 = 0.0;           // gamma'/24
  double b0 = 0.0;           // 16 (3 + 1/a0)
  int n0 = 1;
  double kappa_prime = 0.0;  // lambda^2 N0^{b0}
  std::vector<double> kappa;  // indices 0..N0
  json to_json() const;
};

KineticParams param_schedule(double lambda, double delta, double gamma);

/// Bundle of everything derived from one ModelConfig, with cached grid tables.
struct LatticeModel {
  ModelConfig cfg;
  TorusGrid grid;
  DispersionModel disp;
  InteractionModel inter;
  Equilibrium equil;
  ModifiedDispersion mod;
  CutoffConfig cutoff;

  std::vector<double> omega_tab;         // bare omega on the grid
  std::vector<double> omega_lambda_tab;  // modified omega on the grid
  std::vector<double> w0_tab;            // Fermi-Dirac on the grid
  std::vector<double> vhat_tab;          // V^ on the grid (argument = grid point)

  double w_sigma_idx(std::size_t i, int sigma) const {
    return sigma < 0 ? w0_tab[i] : 1.0 - w0_tab[i];
  }
  LatticeModel(const ModelConfig& c);
};

LatticeModel make_model(const ModelConfig& cfg);

}  // namespace fermik
