#include "fermik/classifier.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <stdexcept>

namespace fermik {

namespace {

std::vector<std::int8_t> normalized_arg(const std::int8_t* arg, int nf, bool* flipped) {
  std::vector<std::int8_t> v(arg, arg + nf);
  *flipped = false;
  for (int f = 0; f < nf; ++f) {
    if (v[std::size_t(f)] > 0) break;
    if (v[std::size_t(f)] < 0) {
      *flipped = true;
      for (auto& x : v) x = std::int8_t(-x);
      break;
    }
  }
  return v;
}

void add_term(PhaseExpr& e, std::vector<std::int8_t> arg, int coeff) {
  auto it = std::lower_bound(e.terms.begin(), e.terms.end(), arg,
                             [](const auto& t, const auto& a) { return t.first < a; });
  if (it != e.terms.end() && it->first == arg) {
    it->second += coeff;
    if (it->second == 0) e.terms.erase(it);
  } else if (coeff != 0) {
    e.terms.insert(it, {std::move(arg), coeff});
  }
}

}  // namespace

bool PhaseExpr::depends_on(int f) const {
  for (const auto& [arg, c] : terms)
    if (c != 0 && arg[std::size_t(f)] != 0) return true;
  return false;
}

PhaseExpr PhaseExpr::operator-() const {
  PhaseExpr out = *this;
  for (auto& [a, c] : out.terms) c = -c;
  return out;
}

PhaseExpr PhaseExpr::operator+(const PhaseExpr& o) const {
  PhaseExpr out = *this;
  for (const auto& [a, c] : o.terms) add_term(out, a, c);
  return out;
}

PhaseExpr PhaseExpr::operator-(const PhaseExpr& o) const {
  PhaseExpr out = *this;
  for (const auto& [a, c] : o.terms) add_term(out, a, -c);
  return out;
}

PhaseExpr PhaseExpr::omega_term(int sign, const std::int8_t* arg, int nf) {
  PhaseExpr e;
  bool flipped;
  add_term(e, normalized_arg(arg, nf, &flipped), sign);
  return e;
}

std::string PhaseExpr::str() const {
  std::string s;
  for (const auto& [a, c] : terms) {
    s += (c >= 0 ? "+" : "-") + std::to_string(std::abs(c)) + "w(";
    for (auto v : a) s += std::to_string(int(v)) + ",";
    s += ") ";
  }
  return s.empty() ? "0" : s;
}

PhaseExpr theta(const MomentumGraph& g, int j) {
  if (!g.resolved) throw std::logic_error("theta: resolve first");
  if (j < 1 || j > g.n_total) throw std::out_of_range("theta: vertex index");
  const auto& lo = g.lower3[std::size_t(j - 1)];
  const int up = g.upper_edge[std::size_t(j - 1)];
  const int sigma = g.edge_parity[std::size_t(up)];
  const int nf = g.num_free;
  PhaseExpr e;
  bool fl;
  add_term(e, normalized_arg(g.dep_of(lo[2]), nf, &fl), +1);   // right
  add_term(e, normalized_arg(g.dep_of(lo[0]), nf, &fl), -1);   // left
  add_term(e, normalized_arg(g.dep_of(lo[1]), nf, &fl), sigma);  // mid
  add_term(e, normalized_arg(g.dep_of(up), nf, &fl), -sigma);    // fused sum
  return e;
}

PhaseExpr re_gamma(const MomentumGraph& g, int j) {
  PhaseExpr acc;
  for (int l = 1; l <= j; ++l) acc = acc - theta(g, l);
  return acc;
}

const char* to_string(Tag t) {
  switch (t) {
    case Tag::Leading: return "leading";
    case Tag::Nested: return "nested";
    case Tag::Crossing: return "crossing";
    case Tag::NotFullyPaired: return "not_fully_paired";
    case Tag::Irrelevant: return "irrelevant";
  }
  return "?";
}

const char* to_string(MotiveId m) {
  switch (m) {
    case MotiveId::L1: return "L1";
    case MotiveId::L2: return "L2";
    case MotiveId::L3: return "L3";
    case MotiveId::L4: return "L4";
    case MotiveId::L5: return "L5";
    case MotiveId::L6: return "L6";
    case MotiveId::L1m: return "L1-";
    case MotiveId::L2m: return "L2-";
    case MotiveId::L3m: return "L3-";
    case MotiveId::L4m: return "L4-";
    case MotiveId::L5m: return "L5-";
    case MotiveId::L6m: return "L6-";
    case MotiveId::G1: return "G1";
    case MotiveId::G2: return "G2";
    case MotiveId::G3: return "G3";
    case MotiveId::G4: return "G4";
    case MotiveId::G1m: return "G1-";
    case MotiveId::G2m: return "G2-";
    case MotiveId::G3m: return "G3-";
    case MotiveId::G4m: return "G4-";
  }
  return "?";
}

bool is_loss(MotiveId m) { return int(m) < int(MotiveId::G1); }

json Classification::to_json() const {
  json j;
  j["tag"] = to_string(tag);
  j["reason"] = to_string(reason);
  j["i2"] = i2;
  j["j0"] = j0;
  j["i0"] = i0;
  j["m_prime_0"] = m_prime_0;
  json ms = json::array();
  for (const auto& m : recollisions)
    ms.push_back(json{{"id", to_string(m.id)}, {"sigma", m.sigma}, {"site", m.site}});
  j["motives"] = ms;
  return j;
}

int x_vertex(const MomentumGraph& g, int j2) {
  const auto& lo = g.lower3[std::size_t(j2 - 1)];
  std::vector<int> free_children;
  for (int e : lo)
    if (g.edge_free[std::size_t(e)]) free_children.push_back(e);
  if (free_children.size() != 2) throw std::logic_error("x_vertex: vertex is not degree two");
  // spanning-tree path a -> b, as the vertex sequence starting at a
  auto tree_path = [&](int a, int b) {
    std::vector<int> pa, pb;
    for (int v = a; v != -1; v = g.parent_vertex[std::size_t(v)]) pa.push_back(v);
    for (int v = b; v != -1; v = g.parent_vertex[std::size_t(v)]) pb.push_back(v);
    std::size_t ia = 0, ib = 0;
    for (; ia < pa.size(); ++ia) {
      auto it = std::find(pb.begin(), pb.end(), pa[ia]);
      if (it != pb.end()) {
        ib = std::size_t(it - pb.begin());
        break;
      }
    }
    std::vector<int> path(pa.begin(), pa.begin() + long(ia) + 1);
    for (std::size_t i = ib; i-- > 0;) path.push_back(pb[i]);
    return path;
  };
  auto p1 = tree_path(g.edge_lower[std::size_t(free_children[0])], j2);
  auto p2 = tree_path(g.edge_lower[std::size_t(free_children[1])], j2);
  for (int v : p1) {
    if (v == j2) continue;
    if (std::find(p2.begin(), p2.end(), v) != p2.end()) return v;
  }
  return j2;
}

// ---------------------------------------------------------------------------
// motive templates

namespace {

GraphSpec make_spec(Shape shape, int n, int np, std::vector<int> ell, std::vector<int> ellp,
                    std::vector<int> J, std::vector<std::vector<int>> blocks) {
  GraphSpec s;
  s.shape = shape;
  s.n = n;
  s.n_prime = np;
  s.ell = std::move(ell);
  s.ell_prime = std::move(ellp);
  s.interlace = std::move(J);
  s.clusters.blocks = std::move(blocks);
  return s;
}

std::vector<MotiveTemplate> build_templates() {
  using M = MotiveId;
  std::vector<MotiveTemplate> t;
  auto loss = [&](M id, std::vector<int> ell, std::vector<std::vector<int>> blocks,
                  std::vector<int> slots) {
    t.push_back({id, id,
                 make_spec(Shape::Error, 2, 0, std::move(ell), {}, {}, std::move(blocks)),
                 std::move(slots)});
  };
  auto loss_m = [&](M id, std::vector<int> ellp, std::vector<std::vector<int>> blocks,
                    std::vector<int> slots) {
    t.push_back({id, id,
                 make_spec(Shape::Error, 0, 2, {}, std::move(ellp), {}, std::move(blocks)),
                 std::move(slots)});
  };
  // plus-tree loss motives; blocks sorted by first leg, slots aligned
  loss(M::L1, {1, 1}, {{1, 4}, {2, 5}, {3, 6}}, {0, 2, 3});
  loss(M::L2, {2, 1}, {{1, 5}, {2, 4}, {3, 6}}, {0, 1, 3});
  loss(M::L3, {3, 1}, {{1, 6}, {2, 5}, {3, 4}}, {0, 1, 2});
  loss(M::L4, {1, 1}, {{1, 4}, {2, 6}, {3, 5}}, {0, 3, 2});
  loss(M::L5, {2, 1}, {{1, 4}, {2, 5}, {3, 6}}, {0, 1, 3});
  loss(M::L6, {3, 1}, {{1, 5}, {2, 6}, {3, 4}}, {0, 1, 2});
  // conjugate (minus-tree) loss motives
  loss_m(M::L1m, {3, 1}, {{1, 4}, {2, 5}, {3, 6}}, {3, 2, 0});
  loss_m(M::L2m, {2, 1}, {{1, 4}, {2, 6}, {3, 5}}, {3, 0, 1});
  loss_m(M::L3m, {1, 1}, {{1, 6}, {2, 5}, {3, 4}}, {0, 1, 2});
  loss_m(M::L4m, {3, 1}, {{1, 5}, {2, 4}, {3, 6}}, {3, 2, 0});
  loss_m(M::L5m, {2, 1}, {{1, 4}, {2, 5}, {3, 6}}, {3, 1, 0});
  loss_m(M::L6m, {1, 1}, {{1, 5}, {2, 6}, {3, 4}}, {1, 0, 2});
  // gain motives: two-tree templates; vertical order via J
  t.push_back({M::G1m, M::G2,
               make_spec(Shape::Error, 1, 1, {1}, {1}, {+1, -1}, {{1, 5}, {2, 6}, {3, 4}}),
               {3, 2, 1}});
  t.push_back({M::G2m, M::G1,
               make_spec(Shape::Error, 1, 1, {1}, {1}, {-1, +1}, {{1, 5}, {2, 6}, {3, 4}}),
               {3, 2, 1}});
  t.push_back({M::G3m, M::G4,
               make_spec(Shape::Error, 1, 1, {1}, {1}, {+1, -1}, {{1, 6}, {2, 5}, {3, 4}}),
               {3, 2, 1}});
  t.push_back({M::G4m, M::G3,
               make_spec(Shape::Error, 1, 1, {1}, {1}, {-1, +1}, {{1, 6}, {2, 5}, {3, 4}}),
               {3, 2, 1}});
  return t;
}

}  // namespace

const std::vector<MotiveTemplate>& motive_templates() {
  static const std::vector<MotiveTemplate> t = build_templates();
  return t;
}

const MotiveTemplate& motive_template(MotiveId id) {
  for (const auto& t : motive_templates())
    if (t.id_minus == id || t.id_plus == id) return t;
  throw std::logic_error("motive_template: unknown id");
}

bool motive_swapped(MotiveId id) {
  const auto& t = motive_template(id);
  return t.id_plus == id && t.id_minus != id;
}

// ---------------------------------------------------------------------------
// recollision recovery

namespace {

bool dep_eq(const MomentumGraph& g, int e1, int e2, int sign) {
  const std::int8_t* a = g.dep_of(e1);
  const std::int8_t* b = g.dep_of(e2);
  for (int f = 0; f < g.num_free; ++f)
    if (a[f] != sign * b[f]) return false;
  return true;
}

bool dep_zero(const MomentumGraph& g, int e) {
  const std::int8_t* a = g.dep_of(e);
  for (int f = 0; f < g.num_free; ++f)
    if (a[f] != 0) return false;
  return true;
}

// structural signature of the two-vertex subgraph (v_{j2-1}, v_{j2})
long motive_signature(const MomentumGraph& g, int j2) {
  const int w = j2 - 1;
  const auto& lo2 = g.lower3[std::size_t(j2 - 1)];
  const auto& lo1 = g.lower3[std::size_t(w - 1)];
  const int up2 = g.upper_edge[std::size_t(j2 - 1)];
  const int up1 = g.upper_edge[std::size_t(w - 1)];
  int int_pos = -1;
  for (int i = 0; i < 3; ++i)
    if (lo2[std::size_t(i)] == up1) int_pos = i;
  if (int_pos >= 0) {
    // loss: the host continuation is the child of w carrying the fused-top
    // momentum of v_{j2}
    int host_pos = -1;
    for (int i = 0; i < 3; ++i)
      if (dep_eq(g, lo1[std::size_t(i)], up2, +1)) host_pos = i;
    if (host_pos < 0) return -1;
    int xs[2], ys[2], nx = 0, ny = 0;
    for (int i = 0; i < 3; ++i) {
      if (i != int_pos) xs[nx++] = lo2[std::size_t(i)];
      if (i != host_pos) ys[ny++] = lo1[std::size_t(i)];
    }
    int crossed;
    if (dep_eq(g, xs[0], ys[0], -1) && dep_eq(g, xs[1], ys[1], -1))
      crossed = 0;
    else if (dep_eq(g, xs[0], ys[1], -1) && dep_eq(g, xs[1], ys[0], -1))
      crossed = 1;
    else
      return -1;
    const int hp = g.edge_parity[std::size_t(up2)] > 0 ? 1 : 0;
    return 1000000 + int_pos * 100 + host_pos * 10 + crossed * 2 + hp;
  }
  // gain: every child of v_{j2} pairs against a child of w
  if (!dep_eq(g, up2, up1, -1)) return -1;
  int pi[3];
  for (int i = 0; i < 3; ++i) {
    pi[i] = -1;
    for (int j = 0; j < 3; ++j)
      if (dep_eq(g, lo2[std::size_t(i)], lo1[std::size_t(j)], -1)) pi[i] = j;
    if (pi[i] < 0) return -1;
  }
  const int up_par = g.edge_parity[std::size_t(up2)] > 0 ? 1 : 0;
  return 2000000 + (pi[0] * 9 + pi[1] * 3 + pi[2]) * 10 + up_par;
}

struct Registry {
  std::map<long, MotiveId> by_sig;
};

const Registry& registry() {
  static Registry reg = [] {
    Registry r;
    GraphSpec trivial = make_spec(Shape::Error, 0, 0, {}, {}, {}, {{1, 2}});
    for (const auto& t : motive_templates()) {
      GraphSpec comp = compose(trivial, 0, t.spec, false);
      MomentumGraph g = build_graph(comp);
      resolve_momenta(g);
      const long sig = motive_signature(g, 2);
      if (sig < 0) throw std::logic_error("motive registry: template signature failed");
      auto [it, fresh] = r.by_sig.insert({sig, t.id_minus});
      if (!fresh) throw std::logic_error("motive registry: ambiguous signature");
    }
    return r;
  }();
  return reg;
}

// recover the motive reference for an immediate recollision at v_{j2}
MotiveRef recover_motive(const MomentumGraph& g, int j2) {
  const long sig = motive_signature(g, j2);
  const auto& reg = registry().by_sig;
  auto it = reg.find(sig);
  if (it == reg.end()) throw std::logic_error("recollision does not match any motive template");
  MotiveRef out;
  out.id = it->second;
  out.sigma = -1;
  out.site = -1;
  if (is_loss(out.id)) {
    // the host pairing: the cluster whose legs carry +-(the preserved momentum)
    const int up2 = g.upper_edge[std::size_t(j2 - 1)];
    for (const auto& b : g.internal_blocks.blocks) {
      if (b.size() != 2) continue;
      const int ea = g.legs_edge[std::size_t(b[0])];
      const int eb = g.legs_edge[std::size_t(b[1])];
      const bool hit = (dep_eq(g, ea, up2, +1) && dep_eq(g, eb, up2, -1)) ||
                       (dep_eq(g, ea, up2, -1) && dep_eq(g, eb, up2, +1));
      if (hit && !dep_zero(g, up2)) {
        out.sigma = g.edge_parity[std::size_t(ea)];
        out.site = b[0] + g.spec.leg_base();
        break;
      }
    }
  } else {
    // gains: conjugate pairs share the local structure; report the canonical
    // minus-family name with sigma = -1 and the smallest matched leg
    const auto& lo2 = g.lower3[std::size_t(j2 - 1)];
    int best = -1;
    for (const auto& b : g.internal_blocks.blocks) {
      if (b.size() != 2) continue;
      for (int leg : b) {
        const int e = g.legs_edge[std::size_t(leg)];
        for (int c : lo2)
          if (dep_eq(g, e, c, -1) || dep_eq(g, e, c, +1))
            best = best < 0 ? leg : std::min(best, leg);
      }
    }
    out.site = best < 0 ? -1 : best + g.spec.leg_base();
  }
  return out;
}

}  // namespace

Classification classify(const MomentumGraph& g) {
  if (!g.resolved) throw std::logic_error("classify: resolve first");
  Classification out;
  out.reason = relevance(g);
  if (out.reason != RelevanceReason::Relevant) {
    out.tag = Tag::Irrelevant;
    return out;
  }
  for (const auto& b : g.internal_blocks.blocks)
    if (b.size() != 2) {
      out.tag = Tag::NotFullyPaired;
      return out;
    }
  const int N = g.n_total;
  for (int j = 1; j <= N; ++j)
    if (g.degree[std::size_t(j - 1)] == 1) {
      out.tag = Tag::NotFullyPaired;
      return out;
    }

  std::vector<PhaseExpr> th(std::size_t(N) + 1);
  std::vector<PhaseExpr> gam(std::size_t(N) + 1);  // gam[j] = -(th_1+..+th_j)
  for (int j = 1; j <= N; ++j) {
    th[std::size_t(j)] = theta(g, j);
    gam[std::size_t(j)] = gam[std::size_t(j - 1)] - th[std::size_t(j)];
  }
  if (!gam[std::size_t(N)].empty())
    throw std::logic_error("classify: total phase of a fully paired graph must vanish");

  auto is_long = [&](int m) { return m >= 0 && m < N && g.degree[std::size_t(m)] == 0; };
  // last trivial long slice of the initial run
  out.m_prime_0 = 0;
  for (int m = 0; m <= N; ++m) {
    bool ok = true;
    for (int j = 0; j <= m && ok; ++j)
      if (is_long(j) && !gam[std::size_t(j)].empty()) ok = false;
    if (ok) out.m_prime_0 = m;
  }

  for (int j2 = 1; j2 <= N; ++j2) {
    if (g.degree[std::size_t(j2 - 1)] != 2) continue;
    int fa = -1, fb = -1;
    for (int e : g.lower3[std::size_t(j2 - 1)]) {
      if (!g.edge_free[std::size_t(e)]) continue;
      const int col = int(std::lower_bound(g.free_ids.begin(), g.free_ids.end(), e) -
                          g.free_ids.begin());
      (fa < 0 ? fa : fb) = col;
    }
    auto dep_loop = [&](const PhaseExpr& e) { return e.depends_on(fa) || e.depends_on(fb); };
    std::vector<int> dep_slices;
    for (int m = 0; m < N; ++m)
      if (is_long(m) && dep_loop(gam[std::size_t(m)])) dep_slices.push_back(m);
    if (dep_slices.empty()) {
      out.recollisions.push_back(recover_motive(g, j2));
      continue;
    }
    std::vector<int> propagating;
    for (int m : dep_slices)
      if (dep_loop(gam[std::size_t(m)] - th[std::size_t(j2)])) propagating.push_back(m);
    out.i2 = j2;
    if (propagating.empty()) {
      out.tag = Tag::Nested;
      out.j0 = dep_slices.front();
    } else {
      out.tag = Tag::Crossing;
      out.i0 = propagating.back() + 1;
    }
    return out;
  }
  out.tag = Tag::Leading;
  return out;
}

bool motive_sequence_phase_check(const MomentumGraph& g) {
  const int N = g.n_total;
  if (N % 2 != 0) return false;
  for (int i = 1; 2 * i <= N; ++i) {
    const int a = 2 * i - 1, b = 2 * i;
    if (g.degree[std::size_t(a - 1)] != 0 || g.degree[std::size_t(b - 1)] != 2) return false;
    // phase preservation
    PhaseExpr s = theta(g, a) + theta(g, b);
    if (!s.empty()) return false;
    // incoming-momentum preservation: edges of the two vertices match up to
    // sign as dependency vectors (bipartite perfect matching on 4 edges)
    int ea[4] = {g.upper_edge[std::size_t(a - 1)], g.lower3[std::size_t(a - 1)][0],
                 g.lower3[std::size_t(a - 1)][1], g.lower3[std::size_t(a - 1)][2]};
    int eb[4] = {g.upper_edge[std::size_t(b - 1)], g.lower3[std::size_t(b - 1)][0],
                 g.lower3[std::size_t(b - 1)][1], g.lower3[std::size_t(b - 1)][2]};
    bool used[4] = {false, false, false, false};
    for (int x = 0; x < 4; ++x) {
      bool matched = false;
      for (int y = 0; y < 4 && !matched; ++y) {
        if (used[y]) continue;
        if (dep_eq(g, ea[x], eb[y], +1) || dep_eq(g, ea[x], eb[y], -1)) {
          used[y] = true;
          matched = true;
        }
      }
      if (!matched) return false;
    }
  }
  return true;
}

LeadingItem trivial_leading(Shape shape) {
  LeadingItem item;
  if (shape == Shape::Main)
    item.spec = make_spec(Shape::Main, 0, 0, {}, {}, {}, {{0, 1}});
  else
    item.spec = make_spec(Shape::Error, 0, 0, {}, {}, {}, {{1, 2}});
  item.pairing_owner.push_back({-1, 0});
  return item;
}

void enumerate_leading(int m, Shape shape, const std::function<void(const LeadingItem&)>& fn,
                       int cap) {
  if (m < 0) throw std::invalid_argument("enumerate_leading: m must be >= 0");
  if (m > cap)
    throw std::runtime_error("enumerate_leading: cap exceeded (m = " + std::to_string(m) + ")");
  std::vector<LeadingItem> level = {trivial_leading(shape)};
  if (m == 0) {
    fn(level[0]);
    return;
  }
  for (int step = 1; step <= m; ++step) {
    std::vector<LeadingItem> next;
    for (const auto& item : level) {
      const auto parities = leg_parities(item.spec);
      const int base = item.spec.leg_base();
      for (std::size_t pi = 0; pi < item.spec.clusters.blocks.size(); ++pi) {
        const auto& blk = item.spec.clusters.blocks[pi];
        const int left_leg = std::min(blk[0], blk[1]) - base;
        const int sigma_left = parities[std::size_t(left_leg)];
        const bool swap = sigma_left > 0;
        for (const auto& tmpl : motive_templates()) {
          ComposeMap map;
          GraphSpec comp;
          try {
            comp = compose(item.spec, int(pi), tmpl.spec, swap, &map);
          } catch (const std::invalid_argument&) {
            continue;  // parity mismatch: template not admissible here
          }
          if (item.spec.shape == Shape::Main && comp.shape != Shape::Main)
            continue;  // main-shape graphs must not grow minus-tree vertices
          LeadingItem ni;
          ni.spec = std::move(comp);
          ni.motives = item.motives;
          MotiveRef ref;
          ref.id = swap ? tmpl.id_plus : tmpl.id_minus;
          ref.sigma = sigma_left;
          ref.site = blk[0];
          ni.motives.push_back(ref);
          ni.attach_at = item.attach_at;
          ni.attach_at.push_back(item.pairing_owner[pi]);
          const int node = int(ni.motives.size()) - 1;
          ni.pairing_owner.assign(ni.spec.clusters.blocks.size(), {-2, -2});
          for (std::size_t b = 0; b < item.pairing_owner.size(); ++b) {
            if (map.host_block_to_new[b] >= 0)
              ni.pairing_owner[std::size_t(map.host_block_to_new[b])] = item.pairing_owner[b];
          }
          for (std::size_t b = 0; b < map.att_block_to_new.size(); ++b)
            ni.pairing_owner[std::size_t(map.att_block_to_new[b])] = {
                node, tmpl.block_slot[b]};
          next.push_back(std::move(ni));
        }
      }
    }
    level = std::move(next);
  }
  for (const auto& item : level) fn(item);
}

}  // namespace fermik
