#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fermik/lattice.hpp"

using namespace fermik;

namespace {
ModelConfig cfg2d(int L = 16) {
  ModelConfig c;
  c.dim = 2;
  c.side = L;
  return c;
}
}  // namespace

TEST_CASE("dispersion values") {
  DispersionModel d2{2, 0.0};
  double k00[2] = {0.0, 0.0};
  CHECK(d2.omega(k00) == doctest::Approx(-2.0));
  double kq[2] = {0.25, 0.25};
  CHECK(d2.omega(kq) == doctest::Approx(0.0).epsilon(1e-14));
  DispersionModel d3{3, 3.0};
  double kh[3] = {0.5, 0.5, 0.5};
  CHECK(d3.omega(kh) == doctest::Approx(6.0));
}

TEST_CASE("dispersion and interaction evenness on the grid") {
  auto m = make_model(cfg2d());
  for (std::size_t i = 0; i < m.grid.size(); ++i) {
    const std::size_t ni = m.grid.negate_index(i);
    CHECK(m.omega_tab[i] == doctest::Approx(m.omega_tab[ni]).epsilon(1e-15));
    CHECK(m.vhat_tab[i] == doctest::Approx(m.vhat_tab[ni]).epsilon(1e-15));  // alpha = 0
    CHECK(m.omega_lambda_tab[i] == doctest::Approx(m.omega_lambda_tab[ni]).epsilon(1e-15));
  }
}

TEST_CASE("fermi function") {
  Equilibrium eq{1.0, {1, 0.0}};
  CHECK(eq.w0_of_energy(0.0) == doctest::Approx(0.5));
  double kh[1] = {0.5};  // omega = 1 at c = 0
  CHECK(eq.w0(kh) == doctest::Approx(1.0 / (std::exp(1.0) + 1.0)));
  CHECK(eq.w0(kh) == doctest::Approx(0.2689414).epsilon(1e-6));
  // particle-hole symmetry
  for (double om : {-1.7, -0.3, 0.9, 2.4})
    CHECK(eq.w0_of_energy(om) + eq.w0_of_energy(-om) == doctest::Approx(1.0));
  // bounds and monotonicity in the energy
  double prev = 1.0;
  for (double om = -3.0; om <= 3.0; om += 0.1) {
    const double w = eq.w0_of_energy(om);
    CHECK(w > 0.0);
    CHECK(w < 1.0);
    CHECK(w < prev);
    prev = w;
  }
}

TEST_CASE("equilibrium shift r_lambda") {
  SUBCASE("constant potential gives zero shift") {
    ModelConfig c = cfg2d();
    c.v_scale = 0.0;
    c.c_tilde = 3.0;
    c.lambda = 0.2;
    auto m = make_model(c);
    for (std::size_t i = 0; i < m.grid.size(); i += 7)
      CHECK(m.mod.r_table(i) == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("infinite-temperature limit") {
    ModelConfig c = cfg2d();
    c.temperature = 1e9;
    c.c_tilde = 1.5;
    c.lambda = 0.1;
    auto m = make_model(c);
    // W0 -> 1/2 and the cosine integrates to zero on the grid, so
    // R = (V^(0) - c~)/2 everywhere
    const double expect = 0.5 * (m.inter.v0() - c.c_tilde);
    for (std::size_t i = 0; i < m.grid.size(); i += 5)
      CHECK(m.mod.r_table(i) == doctest::Approx(expect).epsilon(1e-8));
  }
  SUBCASE("even at alpha = 0 and matches closed form off the grid") {
    auto m = make_model(cfg2d());
    for (std::size_t i = 0; i < m.grid.size(); i += 3)
      CHECK(m.mod.r_table(i) ==
            doctest::Approx(m.mod.r_table(m.grid.negate_index(i))).epsilon(1e-14));
    double k[2] = {0.137, 0.78};
    double k2[2] = {0.137 + 1.0, 0.78 - 2.0};  // periodicity
    CHECK(m.mod.r_lambda(k) == doctest::Approx(m.mod.r_lambda(k2)).epsilon(1e-12));
  }
  SUBCASE("grid table equals the band-limited closed form exactly") {
    ModelConfig c = cfg2d();
    c.lambda = 0.3;
    c.alpha = {0.4, -0.9};
    auto m = make_model(c);
    double k[2];
    std::vector<double> ref(m.grid.size());
    // independent route: direct double grid sum of W0 [V(0) - V(k - k2)]
    for (std::size_t i = 0; i < m.grid.size(); ++i) {
      m.grid.coords(i, k);
      double acc = 0.0, kk2[2], dk[2];
      for (std::size_t j = 0; j < m.grid.size(); ++j) {
        m.grid.coords(j, kk2);
        dk[0] = k[0] - kk2[0];
        dk[1] = k[1] - kk2[1];
        acc += m.w0_tab[j] * (m.inter.v0() - m.inter.v_hat(dk));
      }
      ref[i] = acc / double(m.grid.size());
    }
    for (std::size_t i = 0; i < m.grid.size(); ++i)
      CHECK(m.mod.r_table(i) == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("cutoff functions") {
  CutoffConfig cut;
  cut.dim = 2;
  cut.lambda = 0.01;  // width lambda^{3/4} ~ 0.0316
  SUBCASE("vanishing pair sum forces Phi1 = 0") {
    double k1[2] = {0.3, 0.4}, k2[2] = {-0.3, -0.4}, k3[2] = {0.11, 0.22};
    CHECK(cut.phi(1, k1, k2, k3) == doctest::Approx(0.0));
    CHECK(cut.phi(0, k1, k2, k3) == doctest::Approx(1.0));
  }
  SUBCASE("far from the singular set Phi1 = 1") {
    double k1[2] = {0.1, 0.12}, k2[2] = {0.1, 0.13}, k3[2] = {0.05, 0.11};
    // all pair sums have both coordinates near 0.2, far from {0, 1/2}
    CHECK(cut.phi(1, k1, k2, k3) == doctest::Approx(1.0));
  }
  SUBCASE("partition of unity and symmetry at sampled triples") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int it = 0; it < 200; ++it) {
      double k1[2] = {uni(rng), uni(rng)};
      double k2[2] = {uni(rng), uni(rng)};
      double k3[2] = {uni(rng), uni(rng)};
      const double p0 = cut.phi(0, k1, k2, k3), p1 = cut.phi(1, k1, k2, k3);
      CHECK(p0 + p1 == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(p1 >= 0.0);
      CHECK(p1 <= 1.0);
      CHECK(cut.phi(1, k3, k2, k1) == doctest::Approx(p1).epsilon(1e-15));
    }
  }
  SUBCASE("F1 ramp bounds") {
    // F1 <= C lambda^{-b} dist with the C of the cubic ramp (3/2)
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double w = cut.width();
    for (int it = 0; it < 500; ++it) {
      double k[2] = {uni(rng), uni(rng)};
      const double d = CutoffConfig::dist_msing(k, 2);
      const double f = cut.f1(k);
      CHECK(f <= 1.5 * d / w + 1e-12);
      if (d >= w) CHECK(f == doctest::Approx(1.0));
      if (d == 0.0) CHECK(f == doctest::Approx(0.0));
    }
  }
  SUBCASE("small F0 mass, measured constant reported") {
    // integral of F0 <= C' lambda^{b(d-1)}; measure C' on a fine grid
    const int M = 400;
    double mass = 0.0;
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < M; ++j) {
        double k[2] = {double(i) / M, double(j) / M};
        mass += cut.f0(k);
      }
    mass /= double(M) * double(M);
    const double measured_c = mass / std::pow(cut.lambda, 0.75 * (2 - 1));
    MESSAGE("measured C'_F = ", measured_c);
    CHECK(measured_c < 20.0);
  }
}

TEST_CASE("cell map and grid sums") {
  TorusGrid g(2, 8);
  double k[2] = {0.1307, 0.99};
  int x[2];
  g.decode(g.cell_index(k), x);
  CHECK(x[0] == 1);
  CHECK(x[1] == 7);
  double kneg[2] = {-0.01, 2.03};
  g.decode(g.cell_index(kneg), x);
  CHECK(x[0] == 7);
  CHECK(x[1] == 0);

  // band-limited grid-sum exactness: integral of V^2 has a closed form
  ModelConfig c = cfg2d(8);
  c.c_tilde = 0.7;
  c.alpha = {0.3, 1.1};
  auto m = make_model(c);
  double acc = 0.0;
  for (std::size_t i = 0; i < m.grid.size(); ++i) acc += m.vhat_tab[i] * m.vhat_tab[i];
  acc /= double(m.grid.size());
  CHECK(acc == doctest::Approx(m.inter.norm_l2_sq()).epsilon(1e-13));
}

TEST_CASE("parameter schedule") {
  auto p = param_schedule(1e-3, 5.0 / 7.0, 1.0 / 7.0);
  CHECK(p.gamma_prime == doctest::Approx(0.25));
  CHECK(p.a0 == doctest::Approx(1.0 / 96.0));
  CHECK(p.b0 == doctest::Approx(1584.0));
  CHECK(p.n0 == 1);
  CHECK(p.kappa.size() == 2);
  CHECK(p.kappa[0] == 0.0);
  CHECK(p.kappa[1] == p.kappa_prime);
  CHECK(p.kappa_prime == doctest::Approx(1e-6 * std::pow(1.0, p.b0)));

  CHECK_THROWS_AS(param_schedule(1.0, 0.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(param_schedule(0.5, -0.1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(param_schedule(0.5, 0.5, 1.5), std::invalid_argument);

  auto q = param_schedule(1e-40, 5.0 / 7.0, 1.0 / 7.0);
  CHECK(q.n0 >= 1);
  for (int n = 0; n <= q.n0; ++n) {
    const double expect = 2 * n < q.n0 ? 0.0 : q.kappa_prime;
    CHECK(q.kappa[std::size_t(n)] == expect);
  }
}

TEST_CASE("modified dispersion separable form") {
  ModelConfig c = cfg2d();
  c.lambda = 0.25;
  c.alpha = {0.2, -0.5};
  auto m = make_model(c);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int it = 0; it < 100; ++it) {
    double k[2] = {uni(rng), uni(rng)};
    const double direct = m.disp.omega(k) + c.lambda * m.mod.r_lambda(k);
    CHECK(m.mod.omega_lambda(k) == doctest::Approx(direct).epsilon(1e-12));
  }
}
