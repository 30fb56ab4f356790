#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fermik/graphs.hpp"

namespace fermik {

/// Reduced symbolic sum of +-omega(arg) terms; each argument is an exact
/// integer vector over the free edges, normalised up to global sign (omega is
/// even). Two terms cancel only when their arguments coincide up to sign.
struct PhaseExpr {
  // sorted by argument; coefficient is a (small) integer
  std::vector<std::pair<std::vector<std::int8_t>, int>> terms;

  bool empty() const { return terms.empty(); }
  bool depends_on(int f) const;
  PhaseExpr operator-() const;
  PhaseExpr operator+(const PhaseExpr& o) const;
  PhaseExpr operator-(const PhaseExpr& o) const;
  bool operator==(const PhaseExpr&) const = default;

  static PhaseExpr omega_term(int sign, const std::int8_t* arg, int nf);
  std::string str() const;
};

/// Theta_j of interaction vertex v_j: omega(right) - omega(left)
/// + sigma_up (omega(mid) - omega(up)), as dependency vectors.
PhaseExpr theta(const MomentumGraph& g, int j);

/// Re gamma(j) = -(Theta_1 + ... + Theta_j); empty for j = 0.
PhaseExpr re_gamma(const MomentumGraph& g, int j);

enum class Tag : std::uint8_t { Leading, Nested, Crossing, NotFullyPaired, Irrelevant };
const char* to_string(Tag t);

enum class MotiveId : std::uint8_t {
  L1, L2, L3, L4, L5, L6,
  L1m, L2m, L3m, L4m, L5m, L6m,  // conjugate loss motives
  G1, G2, G3, G4,
  G1m, G2m, G3m, G4m,            // gain motives for a -1 left leg
};
const char* to_string(MotiveId m);
bool is_loss(MotiveId m);

struct MotiveRef {
  MotiveId id{};
  int sigma = -1;   // left-leg parity of the pairing the motive attached at
  int site = -1;    // smallest initial-leg label involved (external indexing)
  bool operator==(const MotiveRef&) const = default;
};

struct Classification {
  Tag tag = Tag::Irrelevant;
  RelevanceReason reason = RelevanceReason::Relevant;
  int i2 = -1;        // first non-recollision degree-2 vertex
  int j0 = -1;        // first nested slice (Nested)
  int i0 = -1;        // i0 - 1 is the last propagated crossing slice (Crossing)
  int m_prime_0 = -1; // last trivial long slice of the initial run
  std::vector<MotiveRef> recollisions;
  json to_json() const;
};

Classification classify(const MomentumGraph& g);

/// X-vertex of the double loop of a degree-2 vertex: where the two free-edge
/// loops meet.
int x_vertex(const MomentumGraph& g, int j2);

/// Momentum- and phase-preservation of every consecutive slice pair
/// (v_{2i-1}, v_{2i}); vacuously true for the trivial loop.
bool motive_sequence_phase_check(const MomentumGraph& g);

/// Attachment template: a two-tree diagram replacing one pairing. block_slot
/// maps each of its cluster blocks to the W-slot (0..3) it feeds in the
/// amplitude factor of the attached motive.
struct MotiveTemplate {
  MotiveId id_minus;  // name when attached at a pairing with left parity -1
  MotiveId id_plus;   // name for the swapped attachment (left parity +1)
  GraphSpec spec;
  std::vector<int> block_slot;
};

const std::vector<MotiveTemplate>& motive_templates();
const MotiveTemplate& motive_template(MotiveId id);
/// Attachment orientation for a given motive id: true when the template is
/// applied with swapped trees (left-leg parity +1 family).
bool motive_swapped(MotiveId id);

struct LeadingItem {
  GraphSpec spec;
  std::vector<MotiveRef> motives;          // attachment order
  std::vector<std::array<int, 2>> attach_at;  // per motive: {parent node or -1, slot}
  std::vector<std::array<int, 2>> pairing_owner;  // per cluster block: {node or -1, slot}
};

/// All leading graphs with m motives, each exactly once, by iterated
/// attachment of admissible motives to pairings (bottom insertion).
void enumerate_leading(int m, Shape shape, const std::function<void(const LeadingItem&)>& fn,
                       int cap = 3);

/// The 0-motive seed: trivial loop of the given shape.
LeadingItem trivial_leading(Shape shape);

}  // namespace fermik
