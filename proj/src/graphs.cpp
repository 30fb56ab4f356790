#include "fermik/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace fermik {

namespace {

// even-block set-partition counts a(2), a(4), ..., a(16)
const double kEvenPartitionCount[] = {1, 1, 4, 31, 379, 6556, 150349, 4373461, 156297964};

double double_factorial_odd(int n) {  // (2n-1)!!
  double v = 1;
  for (int k = 2 * n - 1; k > 1; k -= 2) v *= k;
  return v;
}

double binom(int n, int k) {
  double v = 1;
  for (int i = 0; i < k; ++i) v = v * (n - i) / (i + 1);
  return v;
}

int first_free(const std::vector<char>& used, int from) {
  for (int i = from; i < int(used.size()); ++i)
    if (!used[std::size_t(i)]) return i;
  return -1;
}

}  // namespace

int cluster_sign(const Clustering& s) {
  std::vector<int> flat;
  for (const auto& b : s.blocks) {
    if (b.size() % 2 != 0)
      throw std::invalid_argument("cluster_sign: sign defined only for even clusters");
    if (!std::is_sorted(b.begin(), b.end()))
      throw std::invalid_argument("cluster_sign: block elements must be ascending");
    flat.insert(flat.end(), b.begin(), b.end());
  }
  int inversions = 0;
  for (std::size_t i = 0; i < flat.size(); ++i)
    for (std::size_t j = i + 1; j < flat.size(); ++j)
      if (flat[i] > flat[j]) ++inversions;
  return inversions % 2 == 0 ? 1 : -1;
}

json GraphSpec::to_json() const {
  json j;
  j["shape"] = shape == Shape::Main ? "main" : "error";
  j["n"] = n;
  j["n_prime"] = n_prime;
  j["ell"] = ell;
  j["ell_prime"] = ell_prime;
  j["J"] = interlace;
  j["clusters"] = clusters.blocks;
  return j;
}

GraphSpec GraphSpec::from_json(const json& j) {
  GraphSpec s;
  s.shape = j.value("shape", std::string("main")) == "main" ? Shape::Main : Shape::Error;
  s.n = j.value("n", 0);
  s.n_prime = j.value("n_prime", 0);
  if (j.contains("ell")) s.ell = j["ell"].get<std::vector<int>>();
  if (j.contains("ell_prime")) s.ell_prime = j["ell_prime"].get<std::vector<int>>();
  if (j.contains("J")) s.interlace = j["J"].get<std::vector<int>>();
  if (j.contains("clusters")) s.clusters.blocks = j["clusters"].get<std::vector<std::vector<int>>>();
  return s;
}

GraphSpec normalized(const GraphSpec& s) {
  GraphSpec out = s;
  for (auto& b : out.clusters.blocks) std::sort(b.begin(), b.end());
  std::sort(out.clusters.blocks.begin(), out.clusters.blocks.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

void simulate_spec_into(const GraphSpec& spec, TreeSim& sim) {
  const int N = spec.total();
  if (spec.shape == Shape::Main && spec.n_prime != 0)
    throw std::invalid_argument("main shape requires n_prime = 0");
  if (int(spec.ell.size()) != spec.n || int(spec.ell_prime.size()) != spec.n_prime)
    throw std::invalid_argument("history length mismatch");
  sim.n_total = N;
  sim.num_seg_edges = 3 + 3 * N;
  sim.tree_of_vertex.assign(std::size_t(N), +1);
  if (spec.shape == Shape::Error) {
    if (spec.n > 0 && spec.n_prime > 0) {
      if (int(spec.interlace.size()) != N)
        throw std::invalid_argument("interlace length mismatch");
      int plus = 0;
      for (int g = 0; g < N; ++g) {
        if (spec.interlace[std::size_t(g)] != 1 && spec.interlace[std::size_t(g)] != -1)
          throw std::invalid_argument("interlace entries must be +-1");
        sim.tree_of_vertex[std::size_t(g)] = std::int8_t(spec.interlace[std::size_t(g)]);
        plus += spec.interlace[std::size_t(g)] == 1;
      }
      if (plus != spec.n) throw std::invalid_argument("interlace does not match (n, n')");
    } else {
      for (int g = 0; g < N; ++g)
        sim.tree_of_vertex[std::size_t(g)] = std::int8_t(spec.n_prime > 0 ? -1 : +1);
    }
  }
  for (int j = 1; j <= spec.n; ++j) {
    const int cap = 1 + 2 * (spec.n - j);
    const int v = spec.ell[std::size_t(j - 1)];
    if (v < 1 || v > cap) throw std::invalid_argument("ell entry out of range");
  }
  for (int j = 1; j <= spec.n_prime; ++j) {
    const int cap = 1 + 2 * (spec.n_prime - j);
    const int v = spec.ell_prime[std::size_t(j - 1)];
    if (v < 1 || v > cap) throw std::invalid_argument("ell' entry out of range");
  }

  sim.upper_edge.assign(std::size_t(N) + 1, -1);
  sim.lower3.assign(std::size_t(N), {-1, -1, -1});
  sim.parity.assign(std::size_t(sim.num_seg_edges), 0);
  sim.parity[1] = -1;  // minus-tree top
  sim.parity[2] = +1;  // plus-tree top
  sim.upper_edge[std::size_t(N)] = 0;  // v_{N+1} holds the root edge above it

  auto& slice_minus = sim.ws_slice_minus;
  auto& slice_plus = sim.ws_slice_plus;
  slice_minus.assign(1, 1);
  slice_plus.assign(1, 2);
  int jm = spec.n_prime, jp = spec.n;
  int next_id = 3;
  for (int g = N; g >= 1; --g) {
    const bool plus_tree = sim.tree_of_vertex[std::size_t(g - 1)] > 0;
    std::vector<int>& slice = plus_tree ? slice_plus : slice_minus;
    int pos;
    if (plus_tree) {
      pos = spec.ell[std::size_t(jp - 1)];
      --jp;
    } else {
      pos = spec.ell_prime[std::size_t(jm - 1)];
      --jm;
    }
    if (pos < 1 || pos > int(slice.size()))
      throw std::invalid_argument("fusion position exceeds slice width");
    const int host = slice[std::size_t(pos - 1)];
    sim.upper_edge[std::size_t(g - 1)] = host;
    // creation order right, mid, left; ids grow in that order
    const int right = next_id++, mid = next_id++, left = next_id++;
    sim.lower3[std::size_t(g - 1)] = {left, mid, right};
    sim.parity[std::size_t(left)] = -1;
    sim.parity[std::size_t(mid)] = sim.parity[std::size_t(host)];
    sim.parity[std::size_t(right)] = +1;
    slice[std::size_t(pos - 1)] = left;
    slice.insert(slice.begin() + pos, {mid, right});
  }
  sim.legs_edge.clear();
  sim.legs_edge.insert(sim.legs_edge.end(), slice_minus.begin(), slice_minus.end());
  sim.legs_edge.insert(sim.legs_edge.end(), slice_plus.begin(), slice_plus.end());
}

TreeSim simulate_spec(const GraphSpec& spec) {
  TreeSim sim;
  simulate_spec_into(spec, sim);
  return sim;
}

std::vector<std::int8_t> leg_parities(const GraphSpec& spec) {
  TreeSim sim = simulate_spec(spec);
  std::vector<std::int8_t> out(sim.legs_edge.size());
  for (std::size_t i = 0; i < sim.legs_edge.size(); ++i)
    out[i] = sim.parity[std::size_t(sim.legs_edge[i])];
  return out;
}

const char* to_string(RelevanceReason r) {
  switch (r) {
    case RelevanceReason::Relevant: return "relevant";
    case RelevanceReason::OddCluster: return "odd_cluster";
    case RelevanceReason::Parity: return "parity";
    case RelevanceReason::Phi1Zero: return "phi1_zero";
  }
  return "?";
}

void build_graph_into(const GraphSpec& spec, MomentumGraph& g) {
  TreeSim& sim = g.ws_sim;
  const int N = spec.total();
  const int num_legs = 2 * N + 2;
  const int base = spec.leg_base();
  // the segment-edge skeleton depends only on the histories; reuse it when
  // only the cluster decomposition changed
  const bool same_tree = g.ws_tree_valid && g.spec.shape == spec.shape &&
                         g.spec.n == spec.n && g.spec.n_prime == spec.n_prime &&
                         g.spec.ell == spec.ell && g.spec.ell_prime == spec.ell_prime &&
                         g.spec.interlace == spec.interlace;
  if (!same_tree) simulate_spec_into(spec, sim);

  g.spec.shape = spec.shape;
  g.spec.n = spec.n;
  g.spec.n_prime = spec.n_prime;
  g.spec.ell.assign(spec.ell.begin(), spec.ell.end());
  g.spec.ell_prime.assign(spec.ell_prime.begin(), spec.ell_prime.end());
  g.spec.interlace.assign(spec.interlace.begin(), spec.interlace.end());
  if (g.spec.clusters.blocks.size() != spec.clusters.blocks.size())
    g.spec.clusters.blocks.resize(spec.clusters.blocks.size());
  for (std::size_t b = 0; b < spec.clusters.blocks.size(); ++b)
    g.spec.clusters.blocks[b].assign(spec.clusters.blocks[b].begin(),
                                     spec.clusters.blocks[b].end());
  g.n_total = N;
  g.resolved = false;

  // clusters to internal leg labels
  if (g.internal_blocks.blocks.size() != spec.clusters.blocks.size())
    g.internal_blocks.blocks.resize(spec.clusters.blocks.size());
  g.block_of_leg.assign(std::size_t(num_legs), -1);
  for (std::size_t b = 0; b < spec.clusters.blocks.size(); ++b) {
    auto& dst = g.internal_blocks.blocks[b];
    dst.clear();
    for (int v : spec.clusters.blocks[b]) {
      const int leg = v - base;
      if (leg < 0 || leg >= num_legs) throw std::invalid_argument("cluster leg out of range");
      if (g.block_of_leg[std::size_t(leg)] != -1)
        throw std::invalid_argument("cluster decomposition not disjoint");
      g.block_of_leg[std::size_t(leg)] = int(b);
      dst.push_back(leg);
    }
    std::sort(dst.begin(), dst.end());
  }
  for (int leg = 0; leg < num_legs; ++leg)
    if (g.block_of_leg[std::size_t(leg)] == -1)
      throw std::invalid_argument("cluster decomposition does not cover all legs");

  const int num_blocks = int(g.internal_blocks.blocks.size());
  g.first_initial = N + 2;
  g.first_cluster = g.first_initial + num_legs;
  g.num_vertices = g.first_cluster + num_blocks;
  g.num_edges = sim.num_seg_edges + num_legs;

  if (!same_tree) {
    g.edge_upper.assign(std::size_t(g.num_edges), -1);
    g.edge_lower.assign(std::size_t(g.num_edges), -1);
    g.edge_parity.assign(std::size_t(g.num_edges), 0);
    g.edge_leg.assign(std::size_t(g.num_edges), -1);
    g.upper_edge.assign(std::size_t(N) + 1, -1);
    g.lower3.assign(sim.lower3.begin(), sim.lower3.end());
    g.legs_edge.assign(sim.legs_edge.begin(), sim.legs_edge.end());

    // root edge
    g.edge_upper[0] = 0;
    g.edge_lower[0] = N + 1;
    // tree tops hang from v_{N+1}
    g.edge_upper[1] = N + 1;
    g.edge_upper[2] = N + 1;
    for (int e = 0; e < sim.num_seg_edges; ++e)
      g.edge_parity[std::size_t(e)] = sim.parity[std::size_t(e)];
    for (int gv = 1; gv <= N; ++gv) {
      const int up = sim.upper_edge[std::size_t(gv - 1)];
      g.upper_edge[std::size_t(gv - 1)] = up;
      g.edge_lower[std::size_t(up)] = gv;
      for (int e : sim.lower3[std::size_t(gv - 1)]) g.edge_upper[std::size_t(e)] = gv;
    }
    g.upper_edge[std::size_t(N)] = 0;
    for (int leg = 0; leg < num_legs; ++leg) {
      const int e = sim.legs_edge[std::size_t(leg)];
      g.edge_lower[std::size_t(e)] = g.initial_vertex(leg);
      g.edge_leg[std::size_t(e)] = std::int16_t(leg);
      const int ce = sim.num_seg_edges + leg;
      g.edge_upper[std::size_t(ce)] = g.initial_vertex(leg);
      g.edge_parity[std::size_t(ce)] = 0;
    }
    g.ws_tree_valid = true;
  }
  // cluster edges, one per leg in leg order; only their lower ends depend on S
  for (int leg = 0; leg < num_legs; ++leg) {
    const int ce = sim.num_seg_edges + leg;
    g.edge_lower[std::size_t(ce)] = g.first_cluster + g.block_of_leg[std::size_t(leg)];
  }
}

MomentumGraph build_graph(const GraphSpec& spec) {
  MomentumGraph g;
  build_graph_into(spec, g);
  return g;
}

namespace {

int dsu_find(std::vector<int>& p, int v) {
  while (p[std::size_t(v)] != v) {
    p[std::size_t(v)] = p[std::size_t(p[std::size_t(v)])];
    v = p[std::size_t(v)];
  }
  return v;
}

// delta-sign of edge e at vertex v: +1 on E_+(v), -1 on E_-(v)
inline int sv_sign(const MomentumGraph& g, int v, int e) {
  if (v >= g.first_cluster) return +1;                        // cluster vertex
  if (v >= g.first_initial)                                   // initial vertex
    return e < int(g.num_edges) - int(g.legs_edge.size()) ? +1 : -1;
  return e == g.upper_edge[std::size_t(v - 1)] ? +1 : -1;     // fusion vertex
}

}  // namespace

namespace {

// contracted resolution for all-pairing decompositions: vertices are the
// fusion vertices plus one bond node per pair; only segment edges remain
void resolve_momenta_collapsed(MomentumGraph& g) {
  const int N = g.n_total;
  const int num_legs = int(g.legs_edge.size());
  const int nseg = g.num_edges - num_legs;
  const int nb = int(g.internal_blocks.blocks.size());
  const int Vc = N + 2 + nb;
  const int bond_base = N + 2;
  auto bond_of = [&](int v) {
    return v < g.first_initial ? v
                               : bond_base + g.block_of_leg[std::size_t(v - g.first_initial)];
  };

  auto& par = g.ws_int_a;
  par.resize(std::size_t(Vc));
  for (int v = 0; v < Vc; ++v) par[std::size_t(v)] = v;
  g.edge_free.assign(std::size_t(g.num_edges), 0);
  g.free_ids.clear();
  for (int e = nseg - 1; e >= 0; --e) {
    const int a = dsu_find(par, bond_of(g.edge_upper[std::size_t(e)]));
    const int b = dsu_find(par, bond_of(g.edge_lower[std::size_t(e)]));
    if (a == b)
      g.edge_free[std::size_t(e)] = 1;
    else
      par[std::size_t(a)] = b;
  }
  for (int e = 0; e < nseg; ++e)
    if (g.edge_free[std::size_t(e)]) g.free_ids.push_back(e);
  g.num_free = int(g.free_ids.size());

  auto for_each_edge_at = [&](int v, auto&& fn) {
    if (v == 0) {
      fn(0);
    } else if (v <= N) {
      fn(g.upper_edge[std::size_t(v - 1)]);
      const auto& lo = g.lower3[std::size_t(v - 1)];
      fn(lo[0]);
      fn(lo[1]);
      fn(lo[2]);
    } else if (v == N + 1) {
      fn(0);
      fn(1);
      fn(2);
    } else {
      for (int leg : g.internal_blocks.blocks[std::size_t(v - bond_base)])
        fn(g.legs_edge[std::size_t(leg)]);
    }
  };
  // delta-sign: +1 on the fused/upper side; at a bond the pair momenta sum to
  // zero, so both legs count +1
  auto sv = [&](int v, int e) {
    if (v >= bond_base) return +1;
    if (v <= N) return e == g.upper_edge[std::size_t(v - 1)] ? +1 : -1;
    return e == 0 ? +1 : -1;  // top fusion vertex
  };

  g.parent_edge.assign(std::size_t(Vc), -1);
  g.parent_vertex.assign(std::size_t(Vc), -1);
  g.bfs_order.clear();
  g.bfs_order.push_back(0);
  for (std::size_t qi = 0; qi < g.bfs_order.size(); ++qi) {
    const int v = g.bfs_order[qi];
    for_each_edge_at(v, [&](int e) {
      if (g.edge_free[std::size_t(e)] || e == g.parent_edge[std::size_t(v)]) return;
      const int up = bond_of(g.edge_upper[std::size_t(e)]);
      const int lo = bond_of(g.edge_lower[std::size_t(e)]);
      const int w = up == v ? lo : up;
      if (w == 0 || g.parent_edge[std::size_t(w)] != -1) return;
      g.parent_edge[std::size_t(w)] = e;
      g.parent_vertex[std::size_t(w)] = v;
      g.bfs_order.push_back(w);
    });
  }
  if (int(g.bfs_order.size()) != Vc)
    throw std::runtime_error("resolve_momenta: graph not connected");

  constexpr std::size_t S = std::size_t(MomentumGraph::kDepStride);
  g.dep.assign(std::size_t(g.num_edges) * S, 0);
  for (int f = 0; f < g.num_free; ++f)
    g.dep[std::size_t(g.free_ids[std::size_t(f)]) * S + std::size_t(f)] = 1;
  typedef std::int8_t v16 __attribute__((vector_size(16)));
  v16* rows = reinterpret_cast<v16*>(g.dep.data());
  for (std::size_t qi = g.bfs_order.size(); qi-- > 1;) {
    const int v = g.bfs_order[qi];
    const int out = g.parent_edge[std::size_t(v)];
    const int s_out = sv(v, out);
    v16 row = {};
    for_each_edge_at(v, [&](int e) {
      if (e == out) return;
      if (sv(v, e) == 1)
        row += rows[e];
      else
        row -= rows[e];
    });
    rows[out] = s_out == 1 ? -row : row;
  }
  for (int f = 0; f < g.num_free; ++f)
    if (g.dep[std::size_t(f)] != 0)
      throw std::runtime_error("resolve_momenta: root edge depends on free momenta");
  // cluster edges inherit the leg-edge dependencies (initial-vertex deltas)
  for (int leg = 0; leg < num_legs; ++leg)
    rows[nseg + leg] = rows[g.legs_edge[std::size_t(leg)]];

  g.degree.assign(std::size_t(N), 0);
  for (int gv = 1; gv <= N; ++gv) {
    int d = 0;
    for (int e : g.lower3[std::size_t(gv - 1)]) d += g.edge_free[std::size_t(e)];
    g.degree[std::size_t(gv - 1)] = std::int8_t(d);
  }
  auto& bpar = g.ws_int_b;
  bpar.resize(std::size_t(nb));
  for (int b = 0; b < nb; ++b) bpar[std::size_t(b)] = b;
  auto& cl = g.ws_int_c;
  cl.assign(std::size_t(nseg), -1);
  for (std::size_t leg = 0; leg < g.legs_edge.size(); ++leg)
    cl[std::size_t(g.legs_edge[leg])] = g.block_of_leg[leg];
  for (int gv = 1; gv <= N; ++gv) {
    int roots[3];
    for (int i = 0; i < 3; ++i)
      roots[i] = dsu_find(bpar, cl[std::size_t(g.lower3[std::size_t(gv - 1)][std::size_t(i)])]);
    const int distinct =
        1 + (roots[1] != roots[0]) + (roots[2] != roots[0] && roots[2] != roots[1]);
    if (3 - distinct != g.degree[std::size_t(gv - 1)])
      throw std::runtime_error("vertex degree mismatch between spanning tree and cluster scheme");
    bpar[std::size_t(roots[1])] = roots[0];
    bpar[std::size_t(dsu_find(bpar, roots[2]))] = dsu_find(bpar, roots[0]);
    cl[std::size_t(g.upper_edge[std::size_t(gv - 1)])] = dsu_find(bpar, roots[0]);
  }
  g.resolved = true;
  g.collapsed = true;
}

}  // namespace

void resolve_momenta(MomentumGraph& g, bool collapse_pairings) {
  if (collapse_pairings) {
    bool all_pairs = true;
    for (const auto& b : g.internal_blocks.blocks) all_pairs &= b.size() == 2;
    if (all_pairs) return resolve_momenta_collapsed(g);
  }
  g.collapsed = false;
  {
  const int V = g.num_vertices, E = g.num_edges;
  const int N = g.n_total;
  const int num_legs = int(g.legs_edge.size());
  const int first_cluster_edge = E - num_legs;
  auto& par = g.ws_int_a;
  par.resize(std::size_t(V));
  for (int v = 0; v < V; ++v) par[std::size_t(v)] = v;
  g.edge_free.assign(std::size_t(E), 0);
  g.free_ids.clear();
  // cluster edges come last in creation order, so the reverse pass sees them
  // first; each joins an untouched initial vertex to its cluster vertex
  for (int leg = 0; leg < num_legs; ++leg)
    par[std::size_t(g.first_initial + leg)] =
        g.first_cluster + g.block_of_leg[std::size_t(leg)];
  for (int e = first_cluster_edge - 1; e >= 0; --e) {
    const int a = dsu_find(par, g.edge_upper[std::size_t(e)]);
    const int b = dsu_find(par, g.edge_lower[std::size_t(e)]);
    if (a == b) {
      g.edge_free[std::size_t(e)] = 1;
    } else {
      par[std::size_t(a)] = b;
    }
  }
  for (int e = 0; e < E; ++e)
    if (g.edge_free[std::size_t(e)]) g.free_ids.push_back(e);
  g.num_free = int(g.free_ids.size());

  // structural edge iteration: every vertex touches at most |block| + 1 edges
  auto for_each_edge_at = [&](int v, auto&& fn) {
    if (v == 0) {
      fn(0);
    } else if (v <= N) {
      fn(g.upper_edge[std::size_t(v - 1)]);
      const auto& lo = g.lower3[std::size_t(v - 1)];
      fn(lo[0]);
      fn(lo[1]);
      fn(lo[2]);
    } else if (v == N + 1) {
      fn(0);
      fn(1);
      fn(2);
    } else if (v < g.first_cluster) {
      const int leg = v - g.first_initial;
      fn(g.legs_edge[std::size_t(leg)]);
      fn(first_cluster_edge + leg);
    } else {
      for (int leg : g.internal_blocks.blocks[std::size_t(v - g.first_cluster)])
        fn(first_cluster_edge + leg);
    }
  };

  // orient the spanning tree toward the root (BFS over non-free edges)
  g.parent_edge.assign(std::size_t(V), -1);
  g.parent_vertex.assign(std::size_t(V), -1);
  g.bfs_order.clear();
  g.bfs_order.push_back(0);
  for (std::size_t qi = 0; qi < g.bfs_order.size(); ++qi) {
    const int v = g.bfs_order[qi];
    for_each_edge_at(v, [&](int e) {
      if (g.edge_free[std::size_t(e)] || e == g.parent_edge[std::size_t(v)]) return;
      const int up = g.edge_upper[std::size_t(e)];
      const int w = up == v ? g.edge_lower[std::size_t(e)] : up;
      if (w == 0 || g.parent_edge[std::size_t(w)] != -1) return;
      g.parent_edge[std::size_t(w)] = e;
      g.parent_vertex[std::size_t(w)] = v;
      g.bfs_order.push_back(w);
    });
  }
  if (int(g.bfs_order.size()) != V)
    throw std::runtime_error("resolve_momenta: graph not connected");

  const int F = g.num_free;
  if (F > MomentumGraph::kDepStride)
    throw std::runtime_error("resolve_momenta: more free edges than supported");
  constexpr std::size_t S = std::size_t(MomentumGraph::kDepStride);
  g.dep.assign(std::size_t(E) * S, 0);
  for (int f = 0; f < F; ++f)
    g.dep[std::size_t(g.free_ids[std::size_t(f)]) * S + std::size_t(f)] = 1;
  // children before parents: reverse BFS order; rows combined lanewise
  typedef std::int8_t v16 __attribute__((vector_size(16)));
  v16* rows = reinterpret_cast<v16*>(g.dep.data());
  for (std::size_t qi = g.bfs_order.size(); qi-- > 1;) {
    const int v = g.bfs_order[qi];
    const int out = g.parent_edge[std::size_t(v)];
    const int s_out = sv_sign(g, v, out);
    v16 row = {};
    for_each_edge_at(v, [&](int e) {
      if (e == out) return;
      if (sv_sign(g, v, e) == 1)
        row += rows[e];
      else
        row -= rows[e];
    });
    rows[out] = s_out == 1 ? -row : row;
  }
  for (int f = 0; f < F; ++f)
    if (g.dep[std::size_t(f)] != 0)
      throw std::runtime_error("resolve_momenta: root edge depends on free momenta");

  // degrees and the iterative-cluster-scheme cross-check
  g.degree.assign(std::size_t(N), 0);
  for (int gv = 1; gv <= N; ++gv) {
    int d = 0;
    for (int e : g.lower3[std::size_t(gv - 1)]) d += g.edge_free[std::size_t(e)];
    g.degree[std::size_t(gv - 1)] = std::int8_t(d);
  }
  auto& bpar = g.ws_int_b;  // block DSU
  const int nb = int(g.internal_blocks.blocks.size());
  bpar.resize(std::size_t(nb));
  for (int b = 0; b < nb; ++b) bpar[std::size_t(b)] = b;
  auto& cl_of_edge = g.ws_int_c;
  cl_of_edge.assign(std::size_t(first_cluster_edge), -1);
  for (std::size_t leg = 0; leg < g.legs_edge.size(); ++leg)
    cl_of_edge[std::size_t(g.legs_edge[leg])] = g.block_of_leg[leg];
  for (int gv = 1; gv <= N; ++gv) {
    int roots[3];
    for (int i = 0; i < 3; ++i)
      roots[i] = dsu_find(bpar, cl_of_edge[std::size_t(g.lower3[std::size_t(gv - 1)][std::size_t(i)])]);
    int distinct = 1 + (roots[1] != roots[0]) +
                   (roots[2] != roots[0] && roots[2] != roots[1]);
    const int scheme_deg = 3 - distinct;
    if (scheme_deg != g.degree[std::size_t(gv - 1)])
      throw std::runtime_error("vertex degree mismatch between spanning tree and cluster scheme");
    bpar[std::size_t(roots[1])] = roots[0];
    bpar[std::size_t(dsu_find(bpar, roots[2]))] = dsu_find(bpar, roots[0]);
    cl_of_edge[std::size_t(g.upper_edge[std::size_t(gv - 1)])] = dsu_find(bpar, roots[0]);
  }
  g.resolved = true;
  }
}

bool delta_oracle(const MomentumGraph& g, std::uint64_t seed, int dims) {
  const int E = g.num_edges, F = g.num_free, V = g.num_vertices;
  std::uint64_t state = seed ^ 0xabcdef1234567890ull;
  auto& scratch = const_cast<MomentumGraph&>(g).ws_u64;
  scratch.resize(std::size_t(F) + std::size_t(E));
  std::uint64_t* r = scratch.data();
  std::uint64_t* val = scratch.data() + F;
  for (int d = 0; d < dims; ++d) {
    for (int f = 0; f < F; ++f) r[std::size_t(f)] = splitmix64(state);
    for (int e = 0; e < E; ++e) {
      std::uint64_t acc = 0;
      const std::int8_t* row = g.dep_of(e);
      for (int f = 0; f < F; ++f)
        acc += std::uint64_t(std::int64_t(row[f])) * r[std::size_t(f)];
      val[std::size_t(e)] = acc;
    }
    if (val[0] != 0) return false;  // root edge must carry zero
    // every delta-constraint must hold exactly
    for (int v = 1; v < V; ++v) {
      std::uint64_t acc = 0;
      auto touch = [&](int e) {
        if (sv_sign(g, v, e) > 0) acc += val[std::size_t(e)];
        else acc -= val[std::size_t(e)];
      };
      if (g.is_interaction(v)) {
        touch(g.upper_edge[std::size_t(v - 1)]);
        for (int e : g.lower3[std::size_t(v - 1)]) touch(e);
      } else if (v == g.n_total + 1) {
        touch(0);
        touch(1);
        touch(2);
      } else if (v < g.first_cluster) {
        const int leg = v - g.first_initial;
        touch(g.legs_edge[std::size_t(leg)]);
        touch(E - int(g.legs_edge.size()) + leg);
      } else {
        const int b = v - g.first_cluster;
        for (int leg : g.internal_blocks.blocks[std::size_t(b)])
          touch(E - int(g.legs_edge.size()) + leg);
      }
      if (acc != 0) return false;
    }
  }
  return true;
}

bool exact_delta_check(const MomentumGraph& g) {
  // verifies every vertex delta-constraint lanewise on the dependency matrix;
  // subsumes any random-momentum assignment
  typedef std::int8_t v16 __attribute__((vector_size(16)));
  const v16* rows = reinterpret_cast<const v16*>(g.dep.data());
  const int E = g.num_edges, V = g.num_vertices, N = g.n_total;
  const int num_legs = int(g.legs_edge.size());
  const int fce = E - num_legs;
  for (int f = 0; f < MomentumGraph::kDepStride; ++f)
    if (g.dep[std::size_t(f)] != 0) return false;  // root edge
  auto check_zero = [](v16 x) {
    std::uint64_t a, b;
    std::memcpy(&a, &x, 8);
    std::memcpy(&b, reinterpret_cast<const char*>(&x) + 8, 8);
    return (a | b) == 0;
  };
  if (g.collapsed) {
    // fusion deltas plus one pair-sum delta per bond
    for (int v = 1; v <= N; ++v) {
      v16 acc = rows[g.upper_edge[std::size_t(v - 1)]];
      for (int e : g.lower3[std::size_t(v - 1)]) acc -= rows[e];
      if (!check_zero(acc)) return false;
    }
    v16 top = rows[0] - rows[1] - rows[2];
    if (!check_zero(top)) return false;
    for (const auto& b : g.internal_blocks.blocks) {
      v16 acc = {};
      for (int leg : b) acc += rows[g.legs_edge[std::size_t(leg)]];
      if (!check_zero(acc)) return false;
    }
    return true;
  }
  for (int v = 1; v < V; ++v) {
    v16 acc = {};
    if (v <= N) {
      acc = rows[g.upper_edge[std::size_t(v - 1)]];
      for (int e : g.lower3[std::size_t(v - 1)]) acc -= rows[e];
    } else if (v == N + 1) {
      acc = rows[0] - rows[1] - rows[2];
    } else if (v < g.first_cluster) {
      const int leg = v - g.first_initial;
      acc = rows[g.legs_edge[std::size_t(leg)]] - rows[fce + leg];
    } else {
      for (int leg : g.internal_blocks.blocks[std::size_t(v - g.first_cluster)])
        acc += rows[fce + leg];
    }
    if (!check_zero(acc)) return false;
  }
  return true;
}

ClusterCounts vertex_degrees(const MomentumGraph& g) {
  if (!g.resolved) throw std::logic_error("vertex_degrees: resolve first");
  ClusterCounts c;
  const int N = g.n_total;
  c.prefix0.resize(std::size_t(N));
  c.prefix1.resize(std::size_t(N));
  c.prefix2.resize(std::size_t(N));
  for (int j = 0; j < N; ++j) {
    const int d = g.degree[std::size_t(j)];
    c.n0 += d == 0;
    c.n1 += d == 1;
    c.n2 += d == 2;
    c.prefix0[std::size_t(j)] = c.n0;
    c.prefix1[std::size_t(j)] = c.n1;
    c.prefix2[std::size_t(j)] = c.n2;
  }
  c.r = N + 1 - int(g.internal_blocks.blocks.size());
  for (const auto& b : g.internal_blocks.blocks) c.n_np += b.size() > 2;
  return c;
}

RelevanceReason relevance(const MomentumGraph& g) {
  if (!g.resolved) throw std::logic_error("relevance: resolve first");
  for (const auto& b : g.internal_blocks.blocks)
    if (b.size() % 2 != 0) return RelevanceReason::OddCluster;
  for (const auto& b : g.internal_blocks.blocks) {
    if (b.size() != 2) continue;
    const int pa = g.edge_parity[std::size_t(g.legs_edge[std::size_t(b[0])])];
    const int pb = g.edge_parity[std::size_t(g.legs_edge[std::size_t(b[1])])];
    if (pa != -pb) return RelevanceReason::Parity;
  }
  const int F = g.num_free;
  for (int gv = 1; gv <= g.n_total; ++gv) {
    const auto& lo = g.lower3[std::size_t(gv - 1)];
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) {
        const std::int8_t* a = g.dep_of(lo[std::size_t(i)]);
        const std::int8_t* b = g.dep_of(lo[std::size_t(j)]);
        bool zero = true;
        for (int f = 0; f < F && zero; ++f) zero = (a[f] + b[f]) == 0;
        if (zero) return RelevanceReason::Phi1Zero;
      }
  }
  return RelevanceReason::Relevant;
}

// ---------------------------------------------------------------------------
// compose

namespace {

struct Token {
  std::int8_t src;  // 0 host, 1 attachment
  int edge;
  bool operator==(const Token&) const = default;
};

}  // namespace

GraphSpec compose(const GraphSpec& host, int cluster_index, const GraphSpec& att,
                  bool swap_trees, ComposeMap* map) {
  if (cluster_index < 0 || cluster_index >= int(host.clusters.blocks.size()))
    throw std::invalid_argument("compose: cluster index out of range");
  const auto& blk = host.clusters.blocks[std::size_t(cluster_index)];
  if (blk.size() != 2)
    throw std::invalid_argument("compose: graph-level attachment supported at pairings only");

  TreeSim hs = simulate_spec(host);
  TreeSim as = simulate_spec(att);
  const int bh = host.leg_base();
  const int q = std::min(blk[0], blk[1]) - bh;
  const int p = std::max(blk[0], blk[1]) - bh;
  auto par_h = leg_parities(host);
  const int want_q = swap_trees ? +1 : -1;
  if (par_h[std::size_t(q)] != want_q || par_h[std::size_t(p)] != -want_q)
    throw std::invalid_argument("compose: attachment/host parity mismatch");

  const int Nh = host.total(), Na = att.total(), Nc = Nh + Na;
  const int minus_legs_h = 2 * host.n_prime + 1;
  auto host_leg_tree = [&](int leg) { return leg < minus_legs_h ? -1 : +1; };
  const int tree_q = host_leg_tree(q), tree_p = host_leg_tree(p);

  // attachment top aliases: its minus top continues the host leg carrying
  // parity -1 (q unless swapped)
  const int eq = hs.legs_edge[std::size_t(q)], ep = hs.legs_edge[std::size_t(p)];
  auto tok_att = [&](int edge) -> Token {
    if (edge == 1) return Token{0, swap_trees ? ep : eq};
    if (edge == 2) return Token{0, swap_trees ? eq : ep};
    return Token{1, edge};
  };
  auto att_vertex_tree = [&](int ag) {
    const int ta = as.tree_of_vertex[std::size_t(ag - 1)];
    const bool to_q = (ta == -1) != swap_trees;
    return to_q ? tree_q : tree_p;
  };

  std::vector<Token> slice_minus = {Token{0, 1}}, slice_plus = {Token{0, 2}};
  std::vector<int> pos_minus, pos_plus;  // fusion positions, recorded top-down
  std::vector<std::int8_t> tree_of(std::size_t(Nc), 0);
  for (int gc = Nc; gc >= 1; --gc) {
    Token up{};
    int tree;
    std::array<int, 3> lo{};
    if (gc > Na) {
      const int hg = gc - Na;
      tree = hs.tree_of_vertex[std::size_t(hg - 1)];
      up = Token{0, hs.upper_edge[std::size_t(hg - 1)]};
      for (int i = 0; i < 3; ++i) lo[std::size_t(i)] = hs.lower3[std::size_t(hg - 1)][std::size_t(i)];
      auto& slice = tree > 0 ? slice_plus : slice_minus;
      auto it = std::find(slice.begin(), slice.end(), up);
      if (it == slice.end()) throw std::logic_error("compose: host up-edge not found");
      const int pos = int(it - slice.begin()) + 1;
      (tree > 0 ? pos_plus : pos_minus).push_back(pos);
      slice[std::size_t(pos - 1)] = Token{0, lo[0]};
      slice.insert(slice.begin() + pos, {Token{0, lo[1]}, Token{0, lo[2]}});
    } else {
      const int ag = gc;
      tree = att_vertex_tree(ag);
      up = tok_att(as.upper_edge[std::size_t(ag - 1)]);
      auto& slice = tree > 0 ? slice_plus : slice_minus;
      auto it = std::find(slice.begin(), slice.end(), up);
      if (it == slice.end()) throw std::logic_error("compose: attachment up-edge not found");
      const int pos = int(it - slice.begin()) + 1;
      (tree > 0 ? pos_plus : pos_minus).push_back(pos);
      const auto& alo = as.lower3[std::size_t(ag - 1)];
      slice[std::size_t(pos - 1)] = tok_att(alo[0]);
      slice.insert(slice.begin() + pos, {tok_att(alo[1]), tok_att(alo[2])});
    }
    tree_of[std::size_t(gc - 1)] = std::int8_t(tree);
  }

  GraphSpec out;
  out.n = 0;
  out.n_prime = 0;
  for (int gc = 1; gc <= Nc; ++gc) (tree_of[std::size_t(gc - 1)] > 0 ? out.n : out.n_prime)++;
  out.shape = (host.shape == Shape::Main && out.n_prime == 0) ? Shape::Main : Shape::Error;
  out.ell.assign(pos_plus.rbegin(), pos_plus.rend());
  out.ell_prime.assign(pos_minus.rbegin(), pos_minus.rend());
  if (out.shape == Shape::Error && out.n > 0 && out.n_prime > 0) {
    out.interlace.resize(std::size_t(Nc));
    for (int gc = 1; gc <= Nc; ++gc) out.interlace[std::size_t(gc - 1)] = tree_of[std::size_t(gc - 1)];
  }

  // final legs and the token -> composite leg map
  std::vector<Token> legs;
  legs.insert(legs.end(), slice_minus.begin(), slice_minus.end());
  legs.insert(legs.end(), slice_plus.begin(), slice_plus.end());
  auto leg_of = [&](Token t) {
    auto it = std::find(legs.begin(), legs.end(), t);
    if (it == legs.end()) throw std::logic_error("compose: token is not a leg");
    return int(it - legs.begin());
  };
  const int bc = out.leg_base();
  const int ba = att.leg_base();
  // provenance: (0, host block index) or (1, attachment block index)
  std::vector<std::pair<std::vector<int>, std::pair<int, int>>> tagged;
  for (std::size_t b = 0; b < host.clusters.blocks.size(); ++b) {
    if (int(b) == cluster_index) continue;
    std::vector<int> nb;
    for (int v : host.clusters.blocks[b])
      nb.push_back(leg_of(Token{0, hs.legs_edge[std::size_t(v - bh)]}) + bc);
    std::sort(nb.begin(), nb.end());
    tagged.push_back({std::move(nb), {0, int(b)}});
  }
  for (std::size_t b = 0; b < att.clusters.blocks.size(); ++b) {
    std::vector<int> nb;
    for (int v : att.clusters.blocks[b])
      nb.push_back(leg_of(tok_att(as.legs_edge[std::size_t(v - ba)])) + bc);
    std::sort(nb.begin(), nb.end());
    tagged.push_back({std::move(nb), {1, int(b)}});
  }
  std::sort(tagged.begin(), tagged.end(),
            [](const auto& a, const auto& b) { return a.first.front() < b.first.front(); });
  out.clusters.blocks.clear();
  if (map) {
    map->host_block_to_new.assign(host.clusters.blocks.size(), -1);
    map->att_block_to_new.assign(att.clusters.blocks.size(), -1);
  }
  for (std::size_t i = 0; i < tagged.size(); ++i) {
    if (map) {
      auto [src, idx] = tagged[i].second;
      (src == 0 ? map->host_block_to_new : map->att_block_to_new)[std::size_t(idx)] = int(i);
    }
    out.clusters.blocks.push_back(std::move(tagged[i].first));
  }

  // sign multiplicativity (all-even decompositions only)
  auto all_even = [](const Clustering& c) {
    for (const auto& b : c.blocks)
      if (b.size() % 2) return false;
    return true;
  };
  if (all_even(host.clusters) && all_even(att.clusters)) {
    const int sc = cluster_sign(out.clusters);
    const int sh = cluster_sign(host.clusters);
    const int sa = cluster_sign(att.clusters);
    if (sc != sh * sa)
      throw std::logic_error("compose: cluster sign is not multiplicative (internal error)");
  }
  return out;
}

Clustering splice_clustering(const Clustering& host, int which,
                             const std::vector<int>& group_sizes, const Clustering& attachment) {
  const auto& blk = host.blocks.at(std::size_t(which));
  if (blk.size() != group_sizes.size())
    throw std::invalid_argument("splice_clustering: arity mismatch");
  // relabel: each element of blk becomes a run of group_sizes[i] fresh labels;
  // all other host labels stay ordered around them.
  int total_att = 0;
  for (int s : group_sizes) total_att += s;
  std::vector<int> all_host;
  for (const auto& b : host.blocks) all_host.insert(all_host.end(), b.begin(), b.end());
  std::sort(all_host.begin(), all_host.end());
  // new labels: position-based
  std::vector<int> new_of_old(all_host.size());
  std::vector<std::vector<int>> att_slots(blk.size());
  int cursor = 0;
  for (std::size_t i = 0; i < all_host.size(); ++i) {
    const int v = all_host[i];
    auto it = std::find(blk.begin(), blk.end(), v);
    if (it != blk.end()) {
      const std::size_t gi = std::size_t(it - blk.begin());
      for (int s = 0; s < group_sizes[gi]; ++s) att_slots[gi].push_back(cursor++);
      new_of_old[i] = -1;
    } else {
      new_of_old[i] = cursor++;
    }
  }
  auto new_label = [&](int old) {
    const auto it = std::lower_bound(all_host.begin(), all_host.end(), old);
    return new_of_old[std::size_t(it - all_host.begin())];
  };
  Clustering out;
  for (std::size_t b = 0; b < host.blocks.size(); ++b) {
    if (int(b) == which) continue;
    std::vector<int> nb;
    for (int v : host.blocks[b]) nb.push_back(new_label(v));
    std::sort(nb.begin(), nb.end());
    out.blocks.push_back(std::move(nb));
  }
  // attachment labels: tree i occupies att_slots[i] in order
  std::vector<int> att_map;
  for (const auto& slot : att_slots) att_map.insert(att_map.end(), slot.begin(), slot.end());
  for (const auto& ab : attachment.blocks) {
    std::vector<int> nb;
    for (int v : ab) nb.push_back(att_map.at(std::size_t(v)));
    std::sort(nb.begin(), nb.end());
    out.blocks.push_back(std::move(nb));
  }
  return out;
}

// ---------------------------------------------------------------------------
// enumeration

std::vector<HistoryCombo> history_combos(int n, int n_prime, Shape shape) {
  std::vector<std::vector<int>> ells, ellps;
  auto gen_ell = [](int nn) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(std::size_t(nn), 1);
    for (;;) {
      out.push_back(cur);
      int j = nn - 1;
      for (; j >= 0; --j) {
        const int cap = 1 + 2 * (nn - (j + 1));
        if (cur[std::size_t(j)] < cap) {
          ++cur[std::size_t(j)];
          for (int i = j + 1; i < nn; ++i) cur[std::size_t(i)] = 1;
          break;
        }
      }
      if (j < 0) break;
      if (nn == 0) break;
    }
    if (nn == 0) out.assign(1, {});
    return out;
  };
  ells = gen_ell(n);
  ellps = gen_ell(n_prime);

  std::vector<std::vector<int>> js;
  const int N = n + n_prime;
  if (shape == Shape::Main || n == 0 || n_prime == 0) {
    js.push_back({});
  } else {
    std::vector<int> cur(std::size_t(N), -1);
    std::function<void(int, int)> rec = [&](int pos, int plus_left) {
      const int minus_left = (N - pos) - plus_left;
      if (pos == N) {
        js.push_back(cur);
        return;
      }
      if (minus_left > 0) {
        cur[std::size_t(pos)] = -1;
        rec(pos + 1, plus_left);
      }
      if (plus_left > 0) {
        cur[std::size_t(pos)] = +1;
        rec(pos + 1, plus_left - 1);
      }
    };
    rec(0, n);
  }

  std::vector<HistoryCombo> out;
  out.reserve(ells.size() * ellps.size() * js.size());
  for (const auto& e : ells)
    for (const auto& ep : ellps)
      for (const auto& J : js) out.push_back(HistoryCombo{e, ep, J});
  return out;
}

void enumerate_clusterings(int num_legs, EnumMode mode, const std::vector<std::int8_t>& parities,
                           const std::function<void(Clustering&)>& fn, int label_offset) {
  Clustering work;
  std::vector<std::vector<int>> spare(static_cast<std::size_t>(num_legs));
  std::vector<char> used(std::size_t(num_legs), 0);
  std::function<void(int)> rec = [&](int assigned) {
    if (assigned == num_legs) {
      fn(work);
      return;
    }
    const int a = first_free(used, 0);
    used[std::size_t(a)] = 1;
    if (mode == EnumMode::FullEven) {
      std::vector<int> pool;
      for (int i = a + 1; i < num_legs; ++i)
        if (!used[std::size_t(i)]) pool.push_back(i);
      std::vector<int> comb;
      std::function<void(int, int)> pick = [&](int from, int need) {
        if (need == 0) {
          const std::size_t depth = work.blocks.size();
          auto& blk = spare[depth];
          blk.clear();
          blk.push_back(a + label_offset);
          for (int v : comb) blk.push_back(v + label_offset);
          work.blocks.push_back(std::move(blk));
          for (int v : comb) used[std::size_t(v)] = 1;
          rec(assigned + 1 + int(comb.size()));
          for (int v : comb) used[std::size_t(v)] = 0;
          spare[depth] = std::move(work.blocks.back());
          work.blocks.pop_back();
          return;
        }
        for (int i = from; i <= int(pool.size()) - need; ++i) {
          comb.push_back(pool[std::size_t(i)]);
          pick(i + 1, need - 1);
          comb.pop_back();
        }
      };
      for (int sz = 1; sz <= int(pool.size()); sz += 2) pick(0, sz);
    } else {
      const std::size_t depth = work.blocks.size();
      for (int b = a + 1; b < num_legs; ++b) {
        if (used[std::size_t(b)]) continue;
        if (mode == EnumMode::PairingsParityValid &&
            parities[std::size_t(b)] != -parities[std::size_t(a)])
          continue;
        used[std::size_t(b)] = 1;
        auto& blk = spare[depth];
        blk.clear();
        blk.push_back(a + label_offset);
        blk.push_back(b + label_offset);
        work.blocks.push_back(std::move(blk));
        rec(assigned + 2);
        spare[depth] = std::move(work.blocks.back());
        work.blocks.pop_back();
        used[std::size_t(b)] = 0;
      }
    }
    used[std::size_t(a)] = 0;
  };
  rec(0);
}

double estimate_spec_count(int n, int n_prime, Shape shape, EnumMode mode) {
  const int N = n + n_prime;
  const int legs = 2 * N + 2;
  double hist = double_factorial_odd(n) * double_factorial_odd(n_prime);
  if (shape == Shape::Error && n > 0 && n_prime > 0) hist *= binom(N, n);
  double parts = 0;
  switch (mode) {
    case EnumMode::FullEven:
      parts = legs / 2 <= 8 ? kEvenPartitionCount[legs / 2] : 1e18;
      break;
    case EnumMode::PairingsAll:
      parts = double_factorial_odd(legs / 2);
      break;
    case EnumMode::PairingsParityValid: {
      parts = 1;
      for (int k = 2; k <= N + 1; ++k) parts *= k;  // (N+1)!
      break;
    }
  }
  return hist * parts;
}

void enumerate_specs(int n, int n_prime, Shape shape, EnumMode mode, const EnumCaps& caps,
                     const std::function<void(const GraphSpec&)>& fn) {
  const int N = n + n_prime;
  const int cap = (mode == EnumMode::FullEven) ? caps.full : caps.pairings;
  if (N > cap) {
    throw std::runtime_error(
        "enumerate_specs: cap exceeded (n+n' = " + std::to_string(N) + " > " +
        std::to_string(cap) + "); estimated count " +
        std::to_string(estimate_spec_count(n, n_prime, shape, mode)));
  }
  if (shape == Shape::Main && n_prime != 0)
    throw std::invalid_argument("enumerate_specs: main shape requires n' = 0");

  auto combos = history_combos(n, n_prime, shape);
  GraphSpec spec;
  spec.shape = shape;
  spec.n = n;
  spec.n_prime = n_prime;
  const int base = spec.leg_base();
  for (const auto& hc : combos) {
    spec.ell = hc.ell;
    spec.ell_prime = hc.ell_prime;
    spec.interlace = hc.interlace;
    std::vector<std::int8_t> par;
    if (mode == EnumMode::PairingsParityValid) par = leg_parities(spec);
    enumerate_clusterings(
        spec.num_legs(), mode, par,
        [&](Clustering& c) {
          spec.clusters.blocks.swap(c.blocks);
          fn(spec);
          spec.clusters.blocks.swap(c.blocks);
        },
        base);
  }
}

bool splits_on_removal(const MomentumGraph& g, int e1, int e2) {
  const int V = g.num_vertices;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(V));
  for (int e = 0; e < g.num_edges; ++e) {
    if (e == e1 || e == e2) continue;
    adj[std::size_t(g.edge_upper[std::size_t(e)])].push_back(g.edge_lower[std::size_t(e)]);
    adj[std::size_t(g.edge_lower[std::size_t(e)])].push_back(g.edge_upper[std::size_t(e)]);
  }
  std::vector<char> seen(std::size_t(V), 0);
  std::vector<int> stack = {0};
  seen[0] = 1;
  int count = 0;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    ++count;
    for (int w : adj[std::size_t(v)])
      if (!seen[std::size_t(w)]) {
        seen[std::size_t(w)] = 1;
        stack.push_back(w);
      }
  }
  return count != V;
}

json MomentumGraph::to_json() const {
  json j;
  j["n"] = spec.n;
  j["n_prime"] = spec.n_prime;
  j["shape"] = spec.shape == Shape::Main ? "main" : "error";
  j["ell"] = spec.ell;
  j["ell_prime"] = spec.ell_prime;
  j["J"] = spec.interlace;
  j["clusters"] = spec.clusters.blocks;
  json verts = json::array();
  for (int v = 0; v < num_vertices; ++v) {
    const char* kind = v == 0                ? "root"
                       : v <= n_total        ? "interaction"
                       : v == n_total + 1    ? "top_fusion"
                       : v < first_cluster   ? "initial"
                                             : "cluster";
    int time = v == 0 ? n_total + 2 : (v <= n_total + 1 ? v : 0);
    verts.push_back(json{{"id", v}, {"kind", kind}, {"time", time}});
  }
  j["vertices"] = verts;
  json edges = json::array();
  for (int e = 0; e < num_edges; ++e) {
    json je{{"id", e},
            {"from", edge_upper[std::size_t(e)]},
            {"to", edge_lower[std::size_t(e)]},
            {"parity", int(edge_parity[std::size_t(e)])}};
    if (resolved) {
      je["free"] = bool(edge_free[std::size_t(e)]);
      std::vector<int> dv(dep_of(e), dep_of(e) + num_free);
      je["depvec"] = dv;
    }
    edges.push_back(je);
  }
  j["edges"] = edges;
  return j;
}


namespace {

// flat scratch for the pairing sweep; sizes bounded by n+n' <= 12
struct SweepScratch {
  static constexpr int kMaxN = 12;
  static constexpr int kMaxLegs = 2 * kMaxN + 2;
  static constexpr int kMaxSeg = 3 * kMaxN + 3;
  static constexpr int kMaxNodes = kMaxN + 2 + kMaxN + 1;
  typedef std::int8_t v16 __attribute__((vector_size(16)));

  // per-history constants
  int N = 0, num_legs = 0, nseg = 0, nodes = 0, bond_base = 0;
  int upper_edge[kMaxN + 1];
  int lower3[kMaxN][3];
  int legs_edge[kMaxLegs];
  int edge_leg[kMaxSeg];          // -1 for internal segment edges
  int fixed_lower[kMaxSeg];       // fusion node or -1 when it ends at a leg
  std::int8_t leg_parity[kMaxLegs];

  // per-leaf state
  int partner[kMaxLegs];
  int bond_of_leg[kMaxLegs];
  int bond_legs[kMaxN + 1][2];

  // kernel scratch
  int par[kMaxNodes];
  int parent_edge[kMaxNodes], parent_vertex[kMaxNodes], order[kMaxNodes];
  int lower_node_arr[kMaxSeg];
  v16 rows[kMaxSeg];

  int find(int v) {
    while (par[v] != v) {
      par[v] = par[par[v]];
      v = par[v];
    }
    return v;
  }

  // full resolution + checks on the contracted graph; true when all pass
  bool check_leaf() {
    const int nb = (num_legs) / 2;
    for (int v = 0; v < nodes; ++v) par[v] = v;
    std::uint32_t free_mask = 0;
    int nfree = 0;
    for (int e = 0; e < nseg; ++e) {
      const int leg = edge_leg[e];
      lower_node_arr[e] = leg >= 0 ? bond_base + bond_of_leg[leg] : fixed_lower[e];
    }
    auto lower_node = [&](int e) { return lower_node_arr[e]; };
    for (int e = nseg - 1; e >= 0; --e) {
      const int a = find(e == 0 ? 0 : upper_edge_of(e));
      const int b = find(lower_node(e));
      if (a == b) {
        free_mask |= 1u << e;
        ++nfree;
      } else {
        par[a] = b;
      }
    }
    if (nfree != num_legs - nb) return false;  // 2N + 2 - |S| free momenta
    int n0 = 0, n2 = 0;
    for (int g = 1; g <= N; ++g) {
      int d = 0;
      for (int i = 0; i < 3; ++i) d += (free_mask >> lower3[g - 1][i]) & 1u;
      if (d > 2) return false;
      n0 += d == 0;
      n2 += d == 2;
    }
    if (n2 != n0) return false;  // r = 0 for pairings

    // orient toward the root
    for (int v = 0; v < nodes; ++v) parent_edge[v] = -1;
    int qh = 0, qt = 0;
    order[qt++] = 0;
    parent_vertex[0] = -1;
    auto try_edge = [&](int v, int e) {
      if ((free_mask >> e) & 1u) return;
      if (e == parent_edge[v]) return;
      const int up = e == 0 ? 0 : upper_edge_of(e);
      const int lo = lower_node(e);
      const int w = up == v ? lo : up;
      if (w == 0 || parent_edge[w] != -1) return;
      parent_edge[w] = e;
      parent_vertex[w] = v;
      order[qt++] = w;
    };
    while (qh < qt) {
      const int v = order[qh++];
      if (v == 0) {
        try_edge(v, 0);
      } else if (v <= N) {
        try_edge(v, upper_edge[v - 1]);
        for (int i = 0; i < 3; ++i) try_edge(v, lower3[v - 1][i]);
      } else if (v == N + 1) {
        try_edge(v, 0);
        try_edge(v, 1);
        try_edge(v, 2);
      } else {
        const int b = v - bond_base;
        try_edge(v, legs_edge[bond_legs[b][0]]);
        try_edge(v, legs_edge[bond_legs[b][1]]);
      }
    }
    if (qt != nodes) return false;

    // dependency rows over the free edges, children before parents; every
    // tree-edge row is written before it is read, so only free rows need
    // clearing
    int col = 0;
    for (int e = 0; e < nseg; ++e)
      if ((free_mask >> e) & 1u) {
        rows[e] = v16{};
        rows[e][col++] = 1;
      }
    auto sv = [&](int v, int e) {
      if (v >= bond_base) return +1;
      if (v <= N) return e == upper_edge[v - 1] ? +1 : -1;
      return e == 0 ? +1 : -1;
    };
    for (int qi = qt - 1; qi >= 1; --qi) {
      const int v = order[qi];
      const int out = parent_edge[v];
      v16 acc = {};
      if (v <= N) {
        if (upper_edge[v - 1] != out) acc += rows[upper_edge[v - 1]];
        for (int i = 0; i < 3; ++i) {
          const int e = lower3[v - 1][i];
          if (e != out) acc -= rows[e];
        }
      } else if (v == N + 1) {
        if (out != 0) acc += rows[0];
        if (1 != out) acc -= rows[1];
        if (2 != out) acc -= rows[2];
      } else {
        const int b = v - bond_base;
        for (int i = 0; i < 2; ++i) {
          const int e = legs_edge[bond_legs[b][i]];
          if (e != out) acc += rows[e];
        }
      }
      rows[out] = sv(v, out) == 1 ? -acc : acc;
    }
    auto is_zero = [](v16 x) {
      std::uint64_t a, b;
      std::memcpy(&a, &x, 8);
      std::memcpy(&b, reinterpret_cast<const char*>(&x) + 8, 8);
      return (a | b) == 0;
    };
    if (!is_zero(rows[0])) return false;
    // every contracted delta-constraint, lanewise
    for (int g = 1; g <= N; ++g) {
      v16 acc = rows[upper_edge[g - 1]];
      for (int i = 0; i < 3; ++i) acc -= rows[lower3[g - 1][i]];
      if (!is_zero(acc)) return false;
    }
    {
      v16 acc = rows[0] - rows[1] - rows[2];
      if (!is_zero(acc)) return false;
    }
    for (int b = 0; b < nb; ++b) {
      v16 acc = rows[legs_edge[bond_legs[b][0]]] + rows[legs_edge[bond_legs[b][1]]];
      if (!is_zero(acc)) return false;
    }
    return true;
  }

  int upper_edge_of(int e) const { return edge_upper_node[e]; }
  int edge_upper_node[kMaxSeg];
};

}  // namespace

PairingSweepStats sweep_pairings_fast(const GraphSpec& history_proto, bool parity_valid_only,
                                      const std::function<void(const int*)>& probe,
                                      std::uint64_t probe_every) {
  PairingSweepStats stats;
  SweepScratch s;
  TreeSim sim = simulate_spec(history_proto);
  s.N = sim.n_total;
  s.num_legs = 2 * s.N + 2;
  s.nseg = sim.num_seg_edges;
  s.bond_base = s.N + 2;
  s.nodes = s.bond_base + s.num_legs / 2;
  for (int g = 1; g <= s.N; ++g) {
    s.upper_edge[g - 1] = sim.upper_edge[std::size_t(g - 1)];
    for (int i = 0; i < 3; ++i) s.lower3[g - 1][i] = sim.lower3[std::size_t(g - 1)][std::size_t(i)];
  }
  for (int e = 0; e < s.nseg; ++e) {
    s.edge_leg[e] = -1;
    s.fixed_lower[e] = -1;
    s.edge_upper_node[e] = -1;
  }
  // upper nodes: root edge 0 handled separately; tops hang from N+1
  s.edge_upper_node[0] = 0;
  s.edge_upper_node[1] = s.N + 1;
  s.edge_upper_node[2] = s.N + 1;
  s.fixed_lower[0] = s.N + 1;
  for (int g = 1; g <= s.N; ++g) {
    s.fixed_lower[s.upper_edge[g - 1]] = g;
    for (int i = 0; i < 3; ++i) s.edge_upper_node[s.lower3[g - 1][i]] = g;
  }
  for (int leg = 0; leg < s.num_legs; ++leg) {
    const int e = sim.legs_edge[std::size_t(leg)];
    s.legs_edge[leg] = e;
    s.edge_leg[e] = leg;
    s.leg_parity[leg] = sim.parity[std::size_t(e)];
  }

  // recursive pairing enumeration on flat arrays, same order as
  // enumerate_clusterings
  std::uint64_t probe_ctr = 1;
  bool used[SweepScratch::kMaxLegs] = {};
  const int nb = s.num_legs / 2;
  auto rec = [&](auto&& self, int depth) -> void {
    if (depth == nb) {
      const bool ok = s.check_leaf();
      ++stats.graphs;
      if (!ok) {
        ++stats.failures;
        if (stats.failing_partner.empty())
          stats.failing_partner.assign(s.partner, s.partner + s.num_legs);
      }
      if (probe_every && --probe_ctr == 0) {
        probe_ctr = probe_every;
        if (probe) probe(s.partner);
      }
      return;
    }
    int a = 0;
    while (used[a]) ++a;
    used[a] = true;
    for (int b = a + 1; b < s.num_legs; ++b) {
      if (used[b]) continue;
      if (parity_valid_only && s.leg_parity[b] != -s.leg_parity[a]) continue;
      used[b] = true;
      s.partner[a] = b;
      s.partner[b] = a;
      s.bond_of_leg[a] = depth;
      s.bond_of_leg[b] = depth;
      s.bond_legs[depth][0] = a;
      s.bond_legs[depth][1] = b;
      self(self, depth + 1);
      used[b] = false;
    }
    used[a] = false;
  };
  rec(rec, 0);
  return stats;
}

}  // namespace fermik
