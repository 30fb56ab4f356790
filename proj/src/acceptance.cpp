#include "fermik/acceptance.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <random>

#include "fermik/classifier.hpp"
#include "fermik/kernels.hpp"
#include "fermik/kinetic.hpp"

namespace fermik {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ModelConfig model_2d(int side = 32, double lambda = 0.0) {
  ModelConfig c;
  c.dim = 2;
  c.side = side;
  c.temperature = 1.0;
  c.lambda = lambda;
  return c;
}

// --- criterion 1: combinatorial exactness ----------------------------------

struct SweepTally {
  std::atomic<std::uint64_t> graphs{0};
  std::atomic<std::uint64_t> failures{0};
  std::mutex mu;
  json first_failure;

  void fail(const GraphSpec& spec, const char* what) {
    failures.fetch_add(1);
    std::lock_guard<std::mutex> lock(mu);
    if (first_failure.is_null()) {
      first_failure = spec.to_json();
      first_failure["check"] = what;
    }
  }
};

void check_graph(const GraphSpec& spec, MomentumGraph& g, SweepTally& tally,
                 std::uint64_t seed, bool run_random_oracle) {
  build_graph_into(spec, g);
  resolve_momenta(g);
  tally.graphs.fetch_add(1, std::memory_order_relaxed);
  const int N = g.n_total;
  if (g.num_free != 2 * N + 2 - int(g.internal_blocks.blocks.size()))
    return tally.fail(spec, "free_count");
  int n0 = 0, n2 = 0;
  for (int j = 0; j < N; ++j) {
    const int d = g.degree[std::size_t(j)];
    if (d < 0 || d > 2) return tally.fail(spec, "degree_range");
    n0 += d == 0;
    n2 += d == 2;
  }
  const int r = N + 1 - int(g.internal_blocks.blocks.size());
  if (n2 - n0 != r) return tally.fail(spec, "n2_minus_n0");
  if (!exact_delta_check(g)) return tally.fail(spec, "delta_exact");
  if (run_random_oracle && !delta_oracle(g, seed, 2))
    return tally.fail(spec, "delta_oracle");
}

CriterionResult criterion1(std::uint64_t seed) {
  CriterionResult out;
  out.id = 1;
  out.name = "combinatorial exactness";
  const auto t0 = Clock::now();
  SweepTally tally;
  EnumCaps caps;

  struct Task {
    GraphSpec proto;  // histories filled, clusters empty
    EnumMode mode;
  };
  std::vector<Task> tasks;
  auto add_layer = [&](int n, int np, Shape shape, EnumMode mode) {
    for (const auto& hc : history_combos(n, np, shape)) {
      Task t;
      t.proto.shape = shape;
      t.proto.n = n;
      t.proto.n_prime = np;
      t.proto.ell = hc.ell;
      t.proto.ell_prime = hc.ell_prime;
      t.proto.interlace = hc.interlace;
      t.mode = mode;
      tasks.push_back(std::move(t));
    }
  };
  // n+n' <= 4: full pipeline (explicit cluster vertices, random oracle per
  // graph) over every even clustering and every pairing, both shapes
  for (int N = 0; N <= 4; ++N)
    for (int n = 0; n <= N; ++n)
      for (Shape shape : {Shape::Error, Shape::Main}) {
        if (shape == Shape::Main && n != N) continue;
        add_layer(n, N - n, shape, EnumMode::FullEven);
        add_layer(n, N - n, shape, EnumMode::PairingsAll);
      }
  const std::size_t small_tasks = tasks.size();
  // n+n' in {5,6}: parity-admissible error-shape pairings through the flat
  // sweep kernel (resolution + exact lanewise delta check per graph), probing
  // the full pipeline with the random oracle on a 1/127 subsample
  for (int N = 5; N <= 6; ++N)
    for (int n = 0; n <= N; ++n) add_layer(n, N - n, Shape::Error, EnumMode::PairingsParityValid);

  // big sweep tasks first so the parallel tail stays balanced
  std::vector<std::size_t> order(tasks.size());
  std::iota(order.begin(), order.end(), 0);
  auto cost = [&](const Task& t) {
    const int N = t.proto.total();
    double c = t.mode == EnumMode::PairingsParityValid ? 1.0 : 8.0;
    for (int k = 2; k <= N + 1; ++k) c *= k;
    return c;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cost(tasks[a]) > cost(tasks[b]);
  });

  std::atomic<std::uint64_t> small_graphs{0};
  parallel_for(tasks.size(), [&](std::size_t oi, int) {
    const std::size_t ti = order[oi];
    thread_local MomentumGraph g;
    const Task& task = tasks[ti];
    GraphSpec spec = task.proto;
    std::uint64_t local_seed = seed ^ (0x9e37ull * (ti + 1));
    if (task.mode == EnumMode::PairingsParityValid) {
      const int base = spec.leg_base();
      auto probe = [&](const int* partner) {
        spec.clusters.blocks.clear();
        std::vector<char> seen(std::size_t(spec.num_legs()), 0);
        for (int a = 0; a < spec.num_legs(); ++a) {
          if (seen[std::size_t(a)]) continue;
          seen[std::size_t(a)] = seen[std::size_t(partner[a])] = 1;
          spec.clusters.blocks.push_back({a + base, partner[a] + base});
        }
        check_graph(spec, g, tally, splitmix64(local_seed), true);
        // the kernel counts this graph; undo the double count
        tally.graphs.fetch_sub(1, std::memory_order_relaxed);
      };
      auto st = sweep_pairings_fast(task.proto, true, probe, 127);
      tally.graphs.fetch_add(st.graphs, std::memory_order_relaxed);
      if (st.failures) {
        spec.clusters.blocks.clear();
        tally.fail(spec, "sweep kernel check");
        tally.failures.fetch_add(st.failures - 1);
      }
      return;
    }
    std::uint64_t local_graphs = 0;
    enumerate_clusterings(
        spec.num_legs(), task.mode, {},
        [&](Clustering& c) {
          spec.clusters.blocks.swap(c.blocks);
          check_graph(spec, g, tally, splitmix64(local_seed), true);
          ++local_graphs;
          spec.clusters.blocks.swap(c.blocks);
        },
        spec.leg_base());
    small_graphs.fetch_add(local_graphs, std::memory_order_relaxed);
  });
  (void)small_tasks;

  const double dt = seconds_since(t0);
  out.details["graphs_total"] = tally.graphs.load();
  out.details["graphs_n_le_4"] = small_graphs.load();
  out.details["failures"] = tally.failures.load();
  out.details["runtime_seconds"] = dt;
  out.details["budget_seconds"] = 120.0;
  if (!tally.first_failure.is_null()) out.details["first_failure"] = tally.first_failure;
  out.details["note"] =
      "n+n'<=4: every even clustering and every pairing (both shapes) through the full "
      "pipeline with the d-dim random oracle per graph; n+n' in {5,6}: error-shape "
      "parity-admissible pairings through the flat sweep kernel (spanning-tree "
      "resolution, free count, degrees, n2-n0, exact lanewise delta check) with the "
      "full pipeline probed on a 1/127 subsample";
  out.pass = tally.failures.load() == 0 && dt < 120.0;
  return out;
}

// --- criterion 2: cluster signs ---------------------------------------------

Clustering random_even_clustering(std::mt19937_64& rng, const std::vector<int>& elems) {
  Clustering c;
  std::vector<int> pool = elems;
  std::shuffle(pool.begin(), pool.end(), rng);
  std::size_t pos = 0;
  while (pos < pool.size()) {
    const std::size_t remaining = pool.size() - pos;
    std::size_t take = 2 * (1 + rng() % (remaining / 2));
    if (remaining - take == 2 && take == remaining - 2) {
      // fine: a final pair remains
    }
    if (take > remaining) take = remaining;
    if ((remaining - take) % 2 != 0) take = remaining;
    std::vector<int> blk(pool.begin() + long(pos), pool.begin() + long(pos + take));
    std::sort(blk.begin(), blk.end());
    c.blocks.push_back(std::move(blk));
    pos += take;
  }
  return c;
}

CriterionResult criterion2(std::uint64_t seed) {
  CriterionResult out;
  out.id = 2;
  out.name = "cluster sign";
  std::mt19937_64 rng(seed ^ 0xc2u);
  int failures = 0;

  Clustering fig_c1;
  fig_c1.blocks = {{1, 4}, {2, 5, 6, 7}, {3, 8}};
  if (cluster_sign(fig_c1) != -1) ++failures;
  out.details["fig_c1_sign"] = cluster_sign(fig_c1);

  // order independence over random even clusterings
  for (int it = 0; it < 1000; ++it) {
    const int half = 2 + int(rng() % 5);
    std::vector<int> elems(std::size_t(2 * half));
    std::iota(elems.begin(), elems.end(), 1);
    Clustering c = random_even_clustering(rng, elems);
    const int s0 = cluster_sign(c);
    Clustering shuffled = c;
    std::shuffle(shuffled.blocks.begin(), shuffled.blocks.end(), rng);
    if (cluster_sign(shuffled) != s0) ++failures;
  }

  // sign multiplicativity over random clustering-level compositions
  for (int it = 0; it < 100; ++it) {
    const int hb = 2 + int(rng() % 3);
    std::vector<int> elems(std::size_t(2 * hb));
    std::iota(elems.begin(), elems.end(), 0);
    std::shuffle(elems.begin(), elems.end(), rng);
    Clustering host;
    for (int b = 0; b < hb; ++b) {
      std::vector<int> blk = {elems[std::size_t(2 * b)], elems[std::size_t(2 * b + 1)]};
      std::sort(blk.begin(), blk.end());
      host.blocks.push_back(blk);
    }
    const int which = int(rng() % std::size_t(hb));
    std::vector<int> groups = {1 + 2 * int(rng() % 3), 1 + 2 * int(rng() % 3)};
    std::vector<int> aelems(std::size_t(groups[0] + groups[1]));
    std::iota(aelems.begin(), aelems.end(), 0);
    Clustering att = random_even_clustering(rng, aelems);
    Clustering comp = splice_clustering(host, which, groups, att);
    if (cluster_sign(comp) != cluster_sign(host) * cluster_sign(att)) ++failures;
  }

  // graph-level composition: the loss-motive diagram attached to the trivial
  // loop (compose itself asserts sign multiplicativity)
  try {
    LeadingItem trivial = trivial_leading(Shape::Main);
    GraphSpec composite = compose(trivial.spec, 0, motive_template(MotiveId::L1).spec, false);
    if (cluster_sign(composite.clusters) != -1) ++failures;
  } catch (const std::exception&) {
    ++failures;
  }

  out.details["failures"] = failures;
  out.pass = failures == 0;
  return out;
}

// --- criterion 3: classification trichotomy ---------------------------------

CriterionResult criterion3(std::uint64_t) {
  CriterionResult out;
  out.id = 3;
  out.name = "classification trichotomy";
  EnumCaps caps;
  int failures = 0;
  long fully_paired = 0, leading = 0, nested = 0, crossing = 0;
  MomentumGraph g;
  for (int N = 0; N <= 4; ++N)
    for (int n = 0; n <= N; ++n)
      for (Shape shape : {Shape::Error, Shape::Main}) {
        if (shape == Shape::Main && n != N) continue;
        enumerate_specs(n, N - n, shape, EnumMode::PairingsAll, caps,
                        [&](const GraphSpec& spec) {
                          build_graph_into(spec, g);
                          resolve_momenta(g);
                          auto c = classify(g);
                          if (c.tag == Tag::Irrelevant || c.tag == Tag::NotFullyPaired) return;
                          ++fully_paired;
                          leading += c.tag == Tag::Leading;
                          nested += c.tag == Tag::Nested;
                          crossing += c.tag == Tag::Crossing;
                        });
      }
  if (leading + nested + crossing != fully_paired) ++failures;
  out.details["fully_paired"] = fully_paired;
  out.details["leading"] = leading;
  out.details["nested"] = nested;
  out.details["crossing"] = crossing;

  // Fig8 pattern: nested, Theta_1 = -Theta_4 and Theta_2 = -Theta_3
  GraphSpec f8;
  f8.shape = Shape::Main;
  f8.n = 4;
  f8.ell = {4, 2, 2, 1};
  f8.clusters.blocks = {{0, 5}, {1, 6}, {2, 7}, {3, 8}, {4, 9}};
  auto g8 = build_graph(f8);
  resolve_momenta(g8);
  auto c8 = classify(g8);
  const bool fig8_ok = c8.tag == Tag::Nested && theta(g8, 1) == -theta(g8, 4) &&
                       theta(g8, 2) == -theta(g8, 3) && x_vertex(g8, c8.i2) == c8.j0;
  if (!fig8_ok) ++failures;
  out.details["fig8"] = c8.to_json();

  // Fig7 pattern: crossing, re_gamma(1) = -Theta_1 nonempty and != +-Theta_3
  GraphSpec f7;
  f7.shape = Shape::Main;
  f7.n = 4;
  f7.ell = {1, 1, 1, 1};
  f7.clusters.blocks = {{0, 3}, {1, 7}, {2, 9}, {4, 8}, {5, 6}};
  auto g7 = build_graph(f7);
  resolve_momenta(g7);
  auto c7 = classify(g7);
  auto rg1 = re_gamma(g7, 1);
  const bool fig7_ok = c7.tag == Tag::Crossing && !rg1.empty() && rg1 == -theta(g7, 1) &&
                       !(rg1 == theta(g7, 3)) && !(rg1 == -theta(g7, 3));
  if (!fig7_ok) ++failures;
  out.details["fig7"] = c7.to_json();

  // enumerate_leading counts match classify-filtered counts for m <= 2 and
  // respect the 4^{n+n'} (n+n'-1)!! bound
  for (int m = 1; m <= 2; ++m) {
    long via_attach_main = 0, via_attach_err = 0;
    enumerate_leading(m, Shape::Main, [&](const LeadingItem&) { ++via_attach_main; });
    enumerate_leading(m, Shape::Error, [&](const LeadingItem&) { ++via_attach_err; });
    long via_classify_main = 0, via_classify_err = 0;
    enumerate_specs(2 * m, 0, Shape::Main, EnumMode::PairingsAll, caps,
                    [&](const GraphSpec& spec) {
                      build_graph_into(spec, g);
                      resolve_momenta(g);
                      if (classify(g).tag == Tag::Leading) ++via_classify_main;
                    });
    for (int n = 0; n <= 2 * m; ++n)
      enumerate_specs(n, 2 * m - n, Shape::Error, EnumMode::PairingsAll, caps,
                      [&](const GraphSpec& spec) {
                        build_graph_into(spec, g);
                        resolve_momenta(g);
                        if (classify(g).tag == Tag::Leading) ++via_classify_err;
                      });
    double bound = std::pow(4.0, 2 * m);
    for (int k = 2 * m - 1; k > 1; k -= 2) bound *= k;
    if (via_attach_main != via_classify_main || via_attach_err != via_classify_err) ++failures;
    if (double(via_attach_main) > bound || double(via_attach_err) > bound) ++failures;
    out.details["m" + std::to_string(m)] =
        json{{"attach_main", via_attach_main},
             {"classify_main", via_classify_main},
             {"attach_error", via_attach_err},
             {"classify_error", via_classify_err},
             {"bound", bound}};
  }
  out.details["failures"] = failures;
  out.pass = failures == 0;
  return out;
}

// --- criterion 4: motive algebra ---------------------------------------------

CriterionResult criterion4(std::uint64_t seed) {
  CriterionResult out;
  out.id = 4;
  out.name = "motive algebra";
  LatticeModel m = make_model(model_2d(16));
  std::mt19937_64 rng(seed ^ 0xc4u);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  int failures = 0;
  double worst_identity = 0.0, worst_db = 0.0;
  for (int it = 0; it < 1000; ++it) {
    double k1[kMaxDim] = {}, k2[kMaxDim] = {}, k3[kMaxDim] = {};
    for (int j = 0; j < 2; ++j) {
      k1[j] = uni(rng);
      k2[j] = uni(rng);
      k3[j] = uni(rng);
    }
    for (int sigma : {-1, +1}) {
      const double lhs = motive_sum_special_lhs(m, sigma, k1, k2, k3);
      const double rhs = motive_sum_special_rhs(m, sigma, k1, k2, k3);
      const double err = std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs));
      worst_identity = std::max(worst_identity, err);
      if (err > 1e-12) ++failures;
    }
    double k0[kMaxDim] = {};
    for (int j = 0; j < 2; ++j) k0[j] = k1[j] + k2[j] + k3[j];
    const double beta = 1.0 / m.cfg.temperature;
    const double w0 = m.equil.w0(k0), w1 = m.equil.w0(k1), w2 = m.equil.w0(k2),
                 w3 = m.equil.w0(k3);
    const double om0 = m.disp.omega(k0), om1 = m.disp.omega(k1), om2 = m.disp.omega(k2),
                 om3 = m.disp.omega(k3);
    const double lhs = (1 - w0) * (1 - w1) * w2 * w3 - w0 * w1 * (1 - w2) * (1 - w3);
    const double th = om3 - om1 + om2 - om0;
    const double rhs =
        w0 * w1 * w2 * w3 * std::exp(beta * (om0 + om1)) * (1.0 - std::exp(beta * th));
    const double err = std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs));
    worst_db = std::max(worst_db, err);
    if (err > 1e-12) ++failures;
  }
  out.details["worst_identity_error"] = worst_identity;
  out.details["worst_detailed_balance_error"] = worst_db;
  out.details["failures"] = failures;
  out.pass = failures == 0;
  return out;
}

// --- criterion 5: kernel numerics --------------------------------------------

CriterionResult criterion5(std::uint64_t) {
  CriterionResult out;
  out.id = 5;
  out.name = "kernel numerics";
  const auto t0 = Clock::now();
  int failures = 0;

  double worst_parseval = 0.0;
  for (int d : {1, 2, 3}) {
    ModelConfig cfg = model_2d(16);
    cfg.dim = d;
    for (double lambda : {0.0, 0.1}) {
      cfg.lambda = lambda;
      LatticeModel m = make_model(cfg);
      const double t = 4.0;
      const int box = d == 3 ? 24 : 48;
      auto p = propagator(m, t, box);
      worst_parseval = std::max(worst_parseval, std::abs(p.l2_deficit()));
    }
  }
  if (worst_parseval > 1e-6) ++failures;
  out.details["worst_parseval_deficit"] = worst_parseval;

  {
    ModelConfig cfg = model_2d(16);
    cfg.dim = 1;
    LatticeModel m = make_model(cfg);
    double worst = 0.0;
    for (double t : {1.0, 5.0, 10.0}) {
      auto p = propagator(m, t, 24);
      for (int x = 0; x <= 8; ++x) {
        const double ref = std::abs(std::cyl_bessel_j(double(x), t));
        const double got = std::abs(p.value(&x));
        worst = std::max(worst, std::abs(got - ref));
      }
    }
    out.details["bessel_worst_error"] = worst;
    if (worst > 1e-8) ++failures;
  }

  for (int d : {2, 3}) {
    ModelConfig cfg = model_2d(16);
    cfg.dim = d;
    LatticeModel m = make_model(cfg);
    double early = 0.0, late = 0.0;
    for (double t = 0.0; t <= 50.0; t += 0.5) {
      const double l3 = propagator_l3(m, t);
      const double q = std::pow(1.0 + t * t, 1.5 * d / 7.0) * l3 * l3 * l3;
      double& slot = t <= 25.0 ? early : late;
      slot = std::max(slot, q);
    }
    out.details["l3_fitted_constant_d" + std::to_string(d)] = std::max(early, late);
    if (!(std::isfinite(early) && std::isfinite(late) && late <= 1.15 * early)) ++failures;
  }

  {
    LatticeModel m = make_model(model_2d(16));
    double fit_early = 0.0, fit_late = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        double k0[kMaxDim] = {0.06 + 0.08 * i, 0.10 + 0.07 * j, 0, 0};
        const double dist = CutoffConfig::dist_msing(k0, 2);
        if (dist <= 0.0) continue;
        for (double t = 0.0; t <= 40.0; t += 1.0) {
          const double v = interference_value(m, t, k0, +1);
          const double ratio = v * std::sqrt(1.0 + t * t) * dist;
          double& slot = t <= 20.0 ? fit_early : fit_late;
          slot = std::max(slot, ratio);
        }
      }
    out.details["interference_fitted_constant"] = std::max(fit_early, fit_late);
    if (!(std::isfinite(fit_early) && fit_late <= 1.2 * fit_early)) ++failures;
  }

  const double dt = seconds_since(t0);
  out.details["runtime_seconds"] = dt;
  out.details["budget_seconds"] = 600.0;
  out.details["failures"] = failures;
  out.pass = failures == 0 && dt < 600.0;
  return out;
}

// --- criterion 6: equilibrium stationarity -----------------------------------

CriterionResult criterion6(std::uint64_t seed) {
  CriterionResult out;
  out.id = 6;
  out.name = "equilibrium stationarity";
  LatticeModel m = make_model(model_2d(32));
  WField w0 = WField::equilibrium(m);
  WField wp = w0;
  {
    double k[kMaxDim];
    for (std::size_t i = 0; i < m.grid.size(); ++i) {
      m.grid.coords(i, k);
      wp.w[i] += 0.1 * std::cos(kTwoPi * k[0]);
    }
    wp.clamp();
  }
  std::mt19937_64 rng(seed ^ 0xc6u);
  int decreasing_failures = 0, ratio_failures = 0;
  json points = json::array();
  for (int it = 0; it < 3; ++it) {
    const std::size_t k1 = rng() % m.grid.size();
    const double c20 = std::abs(collision_operator(m, w0, k1, 0.2));
    const double c10 = std::abs(collision_operator(m, w0, k1, 0.1));
    const double c05 = std::abs(collision_operator(m, w0, k1, 0.05));
    const double p05 = std::abs(collision_operator(m, wp, k1, 0.05));
    const bool decreasing = c20 > c10 && c10 > c05;
    const bool small = c05 < 0.05 * p05;
    decreasing_failures += !decreasing;
    ratio_failures += !small;
    points.push_back(json{{"k_index", k1},
                          {"c_eta_0.2", c20},
                          {"c_eta_0.1", c10},
                          {"c_eta_0.05", c05},
                          {"c_perturbed_0.05", p05},
                          {"ratio", c05 / p05},
                          {"decreasing", decreasing},
                          {"below_5_percent", small}});
  }
  out.details["points"] = points;
  out.details["decreasing_failures"] = decreasing_failures;
  out.details["ratio_failures"] = ratio_failures;
  if (ratio_failures > 0)
    out.details["note"] =
        "the Lorentzian energy window keeps an O(eta) off-shell residual at equilibrium "
        "(fat tails), while the convolution part of the linearized operator cancels a "
        "sizable fraction of the perturbed response; at L=32, T=1, eta=0.05 the residual "
        "sits at 5-30 percent of the perturbed magnitude at most momenta, so the 5 "
        "percent clause is not attainable at these parameters";
  out.pass = decreasing_failures == 0 && ratio_failures == 0;
  return out;
}

// --- criterion 7: nu consistency and positivity ------------------------------

CriterionResult criterion7(std::uint64_t seed) {
  CriterionResult out;
  out.id = 7;
  out.name = "nu consistency and positivity";
  LatticeModel m32 = make_model(model_2d(32));
  std::mt19937_64 rng(seed ^ 0xc7u);
  int failures = 0;
  double worst_identity = 0.0;
  json points = json::array();
  std::vector<std::array<int, 2>> ks;
  for (int it = 0; it < 5; ++it)
    ks.push_back({1 + int(rng() % 14), 1 + int(rng() % 14)});
  for (auto [i, j] : ks) {
    int x32[kMaxDim] = {i, j, 0, 0};
    const std::size_t k32 = m32.grid.encode(x32);
    auto v = nu(m32, k32, 0.05);
    const double onshell = re_nu_onshell(m32, k32, 0.05);
    const double err =
        std::abs(v.value.real() - onshell) / std::max(1e-30, std::abs(onshell));
    worst_identity = std::max(worst_identity, err);
    if (err > 1e-8) ++failures;
    if (!(v.value.real() > 0.0)) ++failures;
    points.push_back(v.to_json());
  }
  out.details["worst_identity_rel_error"] = worst_identity;

  LatticeModel m64 = make_model(model_2d(64));
  double worst_refine = 0.0;
  for (int it = 0; it < 2; ++it) {
    auto [i, j] = ks[std::size_t(it)];
    int x32[kMaxDim] = {i, j, 0, 0};
    int x64[kMaxDim] = {2 * i, 2 * j, 0, 0};
    auto v32 = nu(m32, m32.grid.encode(x32), 0.05);
    auto v64 = nu(m64, m64.grid.encode(x64), 0.05);
    worst_refine = std::max(worst_refine, std::abs(v64.value - v32.value) / std::abs(v64.value));
  }
  out.details["worst_refinement_change"] = worst_refine;
  if (worst_refine >= 0.02) ++failures;
  out.details["points"] = points;
  out.details["failures"] = failures;
  out.pass = failures == 0;
  return out;
}

// --- criterion 8: series / amplitude agreement -------------------------------

CriterionResult criterion8(std::uint64_t) {
  CriterionResult out;
  out.id = 8;
  out.name = "series/amplitude agreement";
  const int side = 16;
  const double eta = 0.2;

  LatticeModel m0 = make_model(model_2d(side, 0.0));
  std::vector<double> weight(m0.grid.size());
  {
    double k[kMaxDim];
    for (std::size_t i = 0; i < weight.size(); ++i) {
      m0.grid.coords(i, k);
      const double f = 1.0 + 0.5 * (std::cos(kTwoPi * k[0]) + std::cos(kTwoPi * k[1]));
      weight[i] = f * f;  // g^ = f^, so the weight is f^2
    }
  }
  double numax = 0.0;
  std::vector<cdouble> nu_tab(m0.grid.size());
  for (std::size_t i = 0; i < m0.grid.size(); ++i) {
    nu_tab[i] = nu(m0, i, eta).value;
    numax = std::max(numax, std::abs(nu_tab[i]));
  }
  const double t = 0.5 / numax;
  cdouble target(0.0);
  for (std::size_t i = 0; i < m0.grid.size(); ++i)
    target += weight[i] * m0.w0_tab[i] * nu_tab[i];
  target *= -t / double(m0.grid.size());

  AmplitudeOptions opt;
  opt.eta = eta;
  const std::vector<double> lambdas = {0.1, 0.05, 0.025};
  std::vector<cdouble> sums;
  for (double lambda : lambdas) {
    LatticeModel ml = make_model(model_2d(side, lambda));
    cdouble sum(0.0);
    enumerate_leading(1, Shape::Main, [&](const LeadingItem& item) {
      sum += amplitude_main_pair(ml, item, weight, t, opt).value;
    });
    sums.push_back(sum);
  }
  const double l0 = lambdas[0], l1 = lambdas[1], l2 = lambdas[2];
  const cdouble extrap = sums[0] * (l1 * l2) / ((l0 - l1) * (l0 - l2)) +
                         sums[1] * (l0 * l2) / ((l1 - l0) * (l1 - l2)) +
                         sums[2] * (l0 * l1) / ((l2 - l0) * (l2 - l1));
  const double rel = std::abs(extrap - target) / std::abs(target);
  out.details["t"] = t;
  out.details["eta"] = eta;
  out.details["L"] = side;
  out.details["target_re"] = target.real();
  out.details["target_im"] = target.imag();
  out.details["extrapolated_re"] = extrap.real();
  out.details["extrapolated_im"] = extrap.imag();
  json raw = json::array();
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    raw.push_back(
        json{{"lambda", lambdas[i]}, {"re", sums[i].real()}, {"im", sums[i].imag()}});
  out.details["amplitude_sums"] = raw;
  out.details["rel_error"] = rel;
  out.pass = rel < 0.05;
  return out;
}

// --- criterion 9: parameter schedule -----------------------------------------

CriterionResult criterion9(std::uint64_t) {
  CriterionResult out;
  out.id = 9;
  out.name = "parameter schedule";
  int failures = 0;
  auto p = param_schedule(1e-3, 5.0 / 7.0, 1.0 / 7.0);
  if (p.gamma_prime != 0.25) ++failures;
  if (std::abs(p.a0 - 1.0 / 96.0) > 1e-18) ++failures;
  if (std::abs(p.b0 - 1584.0) > 1e-12) ++failures;
  if (p.n0 != 1) ++failures;
  // kappa split across the whole admissible range of N0
  auto p2 = param_schedule(1e-40, 5.0 / 7.0, 1.0 / 7.0);
  for (auto* q : {&p, &p2}) {
    for (int n = 0; n <= q->n0; ++n) {
      const bool zero = 2 * n < q->n0;
      const double expect = zero ? 0.0 : q->kappa_prime;
      if (q->kappa[std::size_t(n)] != expect) ++failures;
    }
  }
  out.details["schedule_1e-3"] = p.to_json();
  out.details["N0_1e-40"] = p2.n0;
  bool rejected = false;
  try {
    param_schedule(1.0, 0.5, 0.5);
  } catch (const std::invalid_argument&) {
    rejected = true;
  }
  if (!rejected) ++failures;
  out.details["lambda_ge_1_rejected"] = rejected;
  out.details["failures"] = failures;
  out.pass = failures == 0;
  return out;
}

}  // namespace

CriterionResult run_criterion(int id, std::uint64_t seed) {
  switch (id) {
    case 1: return criterion1(seed);
    case 2: return criterion2(seed);
    case 3: return criterion3(seed);
    case 4: return criterion4(seed);
    case 5: return criterion5(seed);
    case 6: return criterion6(seed);
    case 7: return criterion7(seed);
    case 8: return criterion8(seed);
    case 9: return criterion9(seed);
    default: throw std::invalid_argument("run_criterion: id must be 1..9");
  }
}

std::vector<CriterionResult> run_acceptance(const std::vector<int>& ids, std::uint64_t seed,
                                            bool verbose) {
  std::vector<int> list = ids;
  if (list.empty())
    for (int i = 1; i <= 9; ++i) list.push_back(i);
  std::vector<CriterionResult> out;
  for (int id : list) {
    auto r = run_criterion(id, seed);
    if (verbose)
      std::printf("criterion %d [%s]: %s\n", r.id, r.name.c_str(), r.pass ? "PASS" : "FAIL");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace fermik
