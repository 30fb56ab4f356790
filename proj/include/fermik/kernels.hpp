#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "fermik/lattice.hpp"

namespace fermik {

/// Free propagator values p_t(x) on the box {-X..X}^d.
struct PropagatorTable {
  int dim = 1;
  double t = 0.0;
  double lambda = 0.0;
  int box = 1;  // radius X
  std::vector<cdouble> values;  // row-major over (2X+1)^d, coordinates offset by +X
  bool warn = false;            // refinement heuristic tripped
  std::string note;

  int span() const { return 2 * box + 1; }
  cdouble value(const int* x) const;
  double l2_sq() const;
  double l2_deficit() const { return 1.0 - l2_sq(); }
};

/// Crossing kernel K(x; t0,t1,t2,u1,u2) on the same kind of box.
struct CrossingKernelTable {
  int dim = 1;
  double t0 = 0, t1 = 0, t2 = 0;
  std::array<double, kMaxDim> u1{}, u2{};
  int box = 1;
  std::vector<cdouble> values;
  bool warn = false;

  int span() const { return 2 * box + 1; }
  cdouble value(const int* x) const;
  double l2_sq() const;
};

/// Sweep result compared against a target bound. pass means measured <=
/// fitted_constant * target everywhere with a finite constant, plus whatever
/// extra condition the producing check imposes (recorded in note).
struct BoundReport {
  std::string name;
  std::vector<json> sweep;
  std::vector<double> measured;
  std::vector<double> target;
  double fitted_constant = 0.0;
  bool pass = false;
  bool inconclusive = false;
  std::string note;
  json to_json() const;
};

/// Band-limited test function on (T^d)^3 as a trigonometric polynomial,
/// f(k,k',k'') = sum_m coeff_m e^{2 pi i (n1.k + n2.k' + n3.k'')}.
struct TrigPoly {
  struct Term {
    cdouble coeff;
    std::array<int, kMaxDim> n1{}, n2{}, n3{};
  };
  std::vector<Term> terms;
  static TrigPoly one() {
    TrigPoly p;
    p.terms.push_back({cdouble(1.0, 0.0), {}, {}, {}});
    return p;
  }
  double l1() const {
    double s = 0;
    for (const auto& t : terms) s += std::abs(t.coeff);
    return s;
  }
};

// --- kernels ---------------------------------------------------------------

/// Refinement rule for oscillatory k-integrals.
int refinement_points(double t, int dim);

PropagatorTable propagator(const LatticeModel& m, double t, int box, bool force_dft = false);

CrossingKernelTable kernel_K(const LatticeModel& m, double t0, double t1, double t2,
                             const double* u1, const double* u2, int box,
                             bool force_dft = false);

/// l^p norm of a table over its box; sets *truncated if the box misses mass.
double lp_norm(const std::vector<cdouble>& values, double p, double l2_deficit,
               bool* truncated = nullptr);
double lp_norm(const PropagatorTable& t, double p, bool* truncated = nullptr);
double lp_norm(const CrossingKernelTable& t, double p, bool* truncated = nullptr);

/// ||p_t||_3 over Z^d computed from the factorized Bessel form (exact for the
/// cosine band at any lambda).
double propagator_l3(const LatticeModel& m, double t);
/// ||K(.; t0,t1,t2,u1,u2)||_3 via the per-coordinate amplitudes r_j.
double kernel_l3(const LatticeModel& m, double t0, double t1, double t2,
                 const double* u1, const double* u2);

/// |int e^{-i t (w^l(k) + sigma w^l(k-k0))} dk| by per-coordinate quadrature.
double interference_value(const LatticeModel& m, double t, const double* k0, int sigma);
BoundReport interference_report(const LatticeModel& m, const double* k0, int sigma,
                                const std::vector<double>& ts);

/// F^cr(u) = C prod_j |sin(2 pi u_j)|^{-1/7}; +inf on singular coordinates.
double fcr(const double* u, int dim, double zeta, double constant = 1.0);

/// Crossing-bound check: kind 1 uses three kernels K(t, sigma_m s, 0, u_m, 0);
/// kind 2 uses ||p_t||_3^2 K(t, s1 s, s2 s, u1, u2). Compares the damped double
/// time integral against zeta^{gamma-1} F^cr.
BoundReport crossing_check(const LatticeModel& m, int kind, const std::array<int, 3>& sigma,
                           const std::array<std::array<double, kMaxDim>, 3>& u, double zeta,
                           double step = 0.25, double window_factor = 20.0);

/// Resolvent loop integrals; deg 1 carries the cutoff F1(sigma' k) in the
/// numerator, deg 2 integrates over two momenta. Grid quadrature with
/// refinement points per dimension.
double resolvent_loop(const LatticeModel& m, int deg, const double* k0, double alpha,
                      double beta, int sigma, int sigma_prime, int refine = 0);

/// Double torus integral of e^{i s (w + s' w + s w)} f^ via the lattice-sum
/// factorization; exact for band-limited f^.
cdouble osc_delta(const LatticeModel& m, const TrigPoly& f, const double* k0, int sigma,
                  int sigma_prime, double s);

}  // namespace fermik
