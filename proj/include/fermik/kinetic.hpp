#pragma once

#include <array>
#include <complex>
#include <vector>

#include "fermik/classifier.hpp"
#include "fermik/kernels.hpp"
#include "fermik/lattice.hpp"

namespace fermik {

/// Occupation field on the grid, clamped to [0,1].
struct WField {
  std::vector<double> w;
  static WField equilibrium(const LatticeModel& m) {
    WField f;
    f.w = m.w0_tab;
    return f;
  }
  void clamp() {
    for (auto& v : w) v = std::min(1.0, std::max(0.0, v));
  }
};

/// Collision operator C(W)(k1) with the energy delta replaced by the
/// Lorentzian (1/pi) eta / (E^2 + eta^2); momentum delta resolved exactly on
/// the grid.
double collision_operator(const LatticeModel& m, const WField& W, std::size_t k1, double eta);

/// Collisional frequency mu(k1) at equilibrium, same regularization.
double collisional_frequency_mu(const LatticeModel& m, std::size_t k1, double eta);

struct NuValue {
  int dim = 0;
  int side = 0;
  std::array<int, kMaxDim> k{};
  double eta = 0.0;
  cdouble value;
  json to_json() const;
};

/// Complex collisional frequency nu(k1); the time integral is done
/// analytically per cell as i/(dw + i eta).
NuValue nu(const LatticeModel& m, std::size_t k1, double eta);

/// Re nu via the on-shell (Lorentzian) formula; identical to Re nu(k1,eta)
/// as the same finite sum rearranged.
double re_nu_onshell(const LatticeModel& m, std::size_t k1, double eta);

enum class UKind : std::uint8_t { V12Sq, V13Sq, V12V13 };
enum class WKind : std::uint8_t { One, W, Wt, WSigma, WMinusSigma };

/// One row of the leading-motive amplitude table.
struct MotiveKernelRow {
  MotiveId id{};
  int sigma = -1;
  int sign = +1;      // overall sign of the interaction product
  UKind u = UKind::V12Sq;
  int tau = +1;       // phase e^{-i r tau Theta(k,1)}
  std::array<WKind, 4> w{};  // slots k0..k3
};

/// Table row for (id, sigma); throws for a gain motive with the wrong parity.
MotiveKernelRow motive_kernel(MotiveId id, int sigma);

/// Numeric value of a row with phases stripped, at real momenta k0..k3
/// (k0 = k1+k2+k3 expected).
double motive_row_value(const LatticeModel& m, const MotiveKernelRow& row, const double* k0,
                        const double* k1, const double* k2, const double* k3);

/// Sum of the six loss rows (tau=+1) with phases stripped; pointwise equal to
/// W(k0,sigma) V(k1+k2) (V(k1+k2)-V(k1+k3)) (W2 W3 - W1 W3 + W1 Wt2).
double motive_sum_special_lhs(const LatticeModel& m, int sigma, const double* k1,
                              const double* k2, const double* k3);
double motive_sum_special_rhs(const LatticeModel& m, int sigma, const double* k1,
                              const double* k2, const double* k3);

/// The 16-motive total at a non-special pairing, as a Lorentzian sum; vanishes
/// as eta -> 0 by detailed balance.
double motive_sum_generic(const LatticeModel& m, std::size_t k0, int sigma, double eta);

using GridTable = std::vector<cdouble>;
GridTable grid_table_one(const LatticeModel& m);
GridTable grid_table_w(const LatticeModel& m, WKind kind, int sigma);

/// G_{s,tau}[f0..f3](k0) by exact grid convolution (FFT); uses the modified
/// dispersion.
GridTable g_factor(const LatticeModel& m, double s, const std::array<int, 4>& tau, UKind u,
                   const GridTable& f0, const GridTable& f1, const GridTable& f2,
                   const GridTable& f3);

struct SeriesResult {
  std::vector<cdouble> partial;  // partial sums m = 0..M
  cdouble closed;                // W0 e^{-nu1 t - i nu2 t}
  double remainder;              // |nu t|^{M+1} / (M+1)!
  cdouble nu_value;
  json to_json() const;
};
SeriesResult leading_series(const LatticeModel& m, std::size_t k, double t, double eta, int M);

struct AmplitudeOptions {
  double eta = 0.05;        // time damping (regularization)
  int s_nodes = 96;         // quadrature nodes per time variable
  bool force_quadrature = false;
};

struct AmplitudeResult {
  cdouble value;
  double tail_estimate;  // size of the neglected damped tail
  json to_json() const;
};

/// F^{main,pair} of a leading graph with m <= 2 motives, evaluated through the
/// nested G-factor recursion with the simplex weight (t - l^2 sum s)^m / m!.
/// `weight` is the table g^* f^ on the grid. m = 1 uses an analytic-in-s fast
/// path unless force_quadrature is set.
AmplitudeResult amplitude_main_pair(const LatticeModel& m, const LeadingItem& item,
                                    const std::vector<double>& weight, double t,
                                    const AmplitudeOptions& opt);

}  // namespace fermik
