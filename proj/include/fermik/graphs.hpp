#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fermik/util.hpp"

namespace fermik {

enum class Shape : std::uint8_t { Main, Error };

/// Ordered cluster decomposition; blocks keep their given order, elements
/// ascending within a block.
struct Clustering {
  std::vector<std::vector<int>> blocks;
  bool operator==(const Clustering&) const = default;
};

/// Sign of the permutation flattening the decomposition; requires even blocks.
int cluster_sign(const Clustering& s);

/// Everything needed to reconstruct a momentum graph.
///  - ell[j-1] is the fusion position at tree slice j (1-based, bottom-up),
///    valid range 1..1+2(n-j).
///  - interlace[g-1] = +1/-1 puts global vertex v_g (bottom-up) in the
///    plus/minus tree (Error shape only).
///  - clusters use external leg labels: Main 0..2n+1 with 0 the auxiliary
///    left leg, Error 1..2(n+n')+2 with minus-tree legs first.
struct GraphSpec {
  Shape shape = Shape::Main;
  int n = 0, n_prime = 0;
  std::vector<int> ell, ell_prime;
  std::vector<int> interlace;
  Clustering clusters;

  int total() const { return n + n_prime; }
  int num_legs() const { return 2 * total() + 2; }
  int leg_base() const { return shape == Shape::Main ? 0 : 1; }
  bool operator==(const GraphSpec&) const = default;

  json to_json() const;
  static GraphSpec from_json(const json& j);
};

/// Sorts blocks by first element and elements within blocks; used for
/// canonical comparisons.
GraphSpec normalized(const GraphSpec& s);

/// Feynman-diagram skeleton shared by the builder and by compose: per global
/// vertex its tree, upper edge and lower edge triple, plus the leg -> edge map
/// and edge parities. Edge ids follow creation order (root edge 0, tree tops
/// 1 and 2, then per vertex top-down the lower edges right-mid-left, then one
/// cluster edge per leg).
struct TreeSim {
  int n_total = 0;
  int num_seg_edges = 0;                    // 3 + 3N
  std::vector<std::int8_t> tree_of_vertex;  // per v_1..v_N: +1 plus, -1 minus
  std::vector<int> upper_edge;              // per v_1..v_{N+1}
  std::vector<std::array<int, 3>> lower3;   // per v_1..v_N: {left, mid, right}
  std::vector<int> legs_edge;               // internal leg -> edge id
  std::vector<std::int8_t> parity;          // per segment edge; 0 for the root edge
  std::vector<int> ws_slice_minus, ws_slice_plus;  // simulation scratch
};
TreeSim simulate_spec(const GraphSpec& spec);
void simulate_spec_into(const GraphSpec& spec, TreeSim& sim);

/// Parities of the initial legs in internal order (minus legs then plus legs).
std::vector<std::int8_t> leg_parities(const GraphSpec& spec);

enum class RelevanceReason : std::uint8_t { Relevant, OddCluster, Parity, Phi1Zero };
const char* to_string(RelevanceReason r);

/// A built momentum graph. Vertex ids: 0 root, 1..N+1 fusion vertices in time
/// order (N+1 topmost), then initial vertices in internal leg order, then one
/// vertex per cluster block. All scratch vectors are reused across builds.
struct MomentumGraph {
  GraphSpec spec;
  int n_total = 0;
  int num_edges = 0;
  int num_vertices = 0;
  int first_initial = 0, first_cluster = 0;

  std::vector<int> edge_upper, edge_lower;
  std::vector<std::int8_t> edge_parity;
  std::vector<std::int16_t> edge_leg;  // internal leg index or -1
  std::vector<std::array<int, 3>> lower3;
  std::vector<int> upper_edge;
  std::vector<int> legs_edge;
  std::vector<int> block_of_leg;
  Clustering internal_blocks;

  // resolution
  bool resolved = false;
  bool collapsed = false;  // pairing-contracted resolution (see resolve_momenta)
  int num_free = 0;
  std::vector<int> free_ids;            // ascending creation order
  std::vector<std::int8_t> edge_free;
  std::vector<std::int8_t> dep;         // num_edges x num_free
  std::vector<std::int8_t> degree;      // per interaction vertex v_1..v_N
  std::vector<int> parent_edge;         // orientation toward the root
  std::vector<int> parent_vertex;
  std::vector<int> bfs_order;

  static constexpr int kDepStride = 16;  // padded row width (free count <= 16)
  const std::int8_t* dep_of(int e) const { return dep.data() + std::size_t(e) * kDepStride; }
  int initial_vertex(int leg) const { return first_initial + leg; }
  bool is_interaction(int v) const { return v >= 1 && v <= n_total; }

  json to_json() const;

  // scratch (kept to avoid reallocation in enumeration loops)
  std::vector<int> ws_int_a, ws_int_b, ws_int_c;
  std::vector<std::uint64_t> ws_u64;
  TreeSim ws_sim;
  bool ws_tree_valid = false;
};

/// Construct the graph (momentum stage unresolved).
void build_graph_into(const GraphSpec& spec, MomentumGraph& g);
MomentumGraph build_graph(const GraphSpec& spec);

/// Spanning-tree resolution: marks free edges, orients toward the root and
/// fills the exact dependency matrix over the free edges. For all-pairing
/// decompositions, collapse_pairings contracts each leg pair (initial
/// vertices, cluster vertex and cluster edges) into one bond node: the same
/// reverse-creation-order procedure on the contracted graph, with identical
/// free edges and dependency vectors (orientation arrays then use bond ids).
void resolve_momenta(MomentumGraph& g, bool collapse_pairings = false);

/// Spanning-tree resolution: marks free edges, orients toward the root and
/// fills the exact dependency matrix over the free edges. For all-pairing
/// decompositions, collapse_pairings contracts each leg pair (initial
/// vertices, cluster vertex and cluster edges) into one bond node: the same
/// reverse-creation-order procedure on the contracted graph, with identical
/// free edges and dependency vectors (orientation arrays then use bond ids).

/// Random-momentum consistency check: k_e = sum_f D(e,f) r_f for random r,;
/// verifies every vertex delta-constraint. Exact in Z/2^64 (coefficients are
/// all +-1); `dims` independent draws emulate d-dimensional rational momenta.
bool delta_oracle(const MomentumGraph& g, std::uint64_t seed, int dims = 1);

/// Exact lanewise verification of all delta-constraints on the dependency
/// matrix (implies the random oracle for every assignment).
bool exact_delta_check(const MomentumGraph& g);

struct ClusterCounts {
  int n0 = 0, n1 = 0, n2 = 0;
  int r = 0, n_np = 0;
  std::vector<int> prefix0, prefix1, prefix2;  // counts up to and including v_j
};
/// Per-vertex degrees with the iterative-cluster-scheme cross-check; throws on
/// internal inconsistency.
ClusterCounts vertex_degrees(const MomentumGraph& g);

RelevanceReason relevance(const MomentumGraph& g);

/// Block provenance of a composite decomposition.
struct ComposeMap {
  std::vector<int> host_block_to_new;  // -1 for the replaced pairing
  std::vector<int> att_block_to_new;
};

/// Replace pairing `cluster_index` of the host by a two-tree attachment. The
/// attachment's minus tree takes the left leg and its plus tree the right leg
/// (swapped when swap_trees). Asserts sign multiplicativity of the composite.
GraphSpec compose(const GraphSpec& host, int cluster_index, const GraphSpec& attachment,
                  bool swap_trees = false, ComposeMap* map = nullptr);

/// Clustering-level splice used by the sign-multiplicativity property: cluster
/// `which` of host (even size 2b) is replaced by an attachment clustering over
/// 2b groups of odd sizes `group_sizes`.
Clustering splice_clustering(const Clustering& host, int which,
                             const std::vector<int>& group_sizes, const Clustering& attachment);

enum class EnumMode : std::uint8_t { FullEven, PairingsAll, PairingsParityValid };

struct EnumCaps {
  int full = 4;
  int pairings = 6;
};

double estimate_spec_count(int n, int n_prime, Shape shape, EnumMode mode);

/// Streams every admissible (ell, ell', J, S) exactly once in lexicographic
/// order. The spec reference passed to the callback is reused storage.
void enumerate_specs(int n, int n_prime, Shape shape, EnumMode mode, const EnumCaps& caps,
                     const std::function<void(const GraphSpec&)>& fn);

/// Enumeration helpers exposed for the parallel acceptance sweep: all
/// (ell, ell', J) combos for given (n, n'), and the S-stream for one combo.
struct HistoryCombo {
  std::vector<int> ell, ell_prime, interlace;
};
std::vector<HistoryCombo> history_combos(int n, int n_prime, Shape shape);
/// The callback may inspect and temporarily modify the clustering but must
/// leave it unchanged on return.
void enumerate_clusterings(int num_legs, EnumMode mode, const std::vector<std::int8_t>& parities,
                           const std::function<void(Clustering&)>& fn, int label_offset = 0);

/// Flat validation kernel for pairing sweeps: enumerates pairings of the
/// given history (optionally parity-admissible only) and re-derives, per
/// graph, the spanning-tree resolution on the pair-contracted graph with the
/// free-momentum count, degree, n2 - n0 and exact delta checks. `probe`, when
/// set, is invoked with the partner map every `probe_every` leaves so a caller
/// can cross-run the full pipeline.
struct PairingSweepStats {
  std::uint64_t graphs = 0;
  std::uint64_t failures = 0;
  std::vector<int> failing_partner;  // first failing pairing, empty if none
};
PairingSweepStats sweep_pairings_fast(
    const GraphSpec& history_proto, bool parity_valid_only,
    const std::function<void(const int* partner_of)>& probe = nullptr,
    std::uint64_t probe_every = 0);

/// True if removing both edges disconnects the graph (connectivity query).
bool splits_on_removal(const MomentumGraph& g, int e1, int e2);

}  // namespace fermik
