#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace robustgcn {

using NodeId = std::uint32_t;
using EdgePair = std::pair<NodeId, NodeId>;  // non-self edges normalized u < v

/// Undirected graph in CSR form. Adjacency is stored symmetrically (both
/// directions), targets sorted ascending per node. Self-loops are modeled as
/// a single CSR entry (u,u) per node and are only ever introduced by
/// with_self_loops(); input edge lists must not contain them.
///
/// Immutable after construction; safe to share across threads.
class Graph {
 public:
  Graph() = default;

  /// Build from an undirected edge list. Throws std::invalid_argument on
  /// out-of-range ids, self-loops, or duplicate (unordered) pairs.
  static Graph from_edges(NodeId num_nodes, std::span<const EdgePair> edges);

  NodeId num_nodes() const { return num_nodes_; }

  /// Number of undirected non-self edges.
  std::size_t num_edges() const { return num_edges_; }

  bool self_loops_included() const { return self_loops_; }

  /// Sorted adjacency of u; contains u itself iff self loops are included.
  std::span<const NodeId> neighbors(NodeId u) const {
    return {targets_.data() + offsets_[u], targets_.data() + offsets_[u + 1]};
  }

  /// |N_u|: row length in CSR (counts the self entry when present).
  NodeId degree(NodeId u) const {
    return static_cast<NodeId>(offsets_[u + 1] - offsets_[u]);
  }

  bool has_edge(NodeId u, NodeId v) const;

  /// Copy with one self-edge added per node. Throws if already present.
  Graph with_self_loops() const;

  /// Non-self undirected edges, normalized u < v, sorted.
  std::vector<EdgePair> edge_list() const;

  const std::vector<std::uint64_t>& offsets() const { return offsets_; }
  const std::vector<NodeId>& targets() const { return targets_; }

 private:
  NodeId num_nodes_ = 0;
  std::size_t num_edges_ = 0;
  bool self_loops_ = false;
  std::vector<std::uint64_t> offsets_;  // size num_nodes + 1
  std::vector<NodeId> targets_;

  static Graph from_adjacency(NodeId n, std::vector<std::uint64_t> offsets,
                              std::vector<NodeId> targets, std::size_t num_edges,
                              bool self_loops);
};

/// w_uv = 1 / sqrt(|N_u| |N_v|) for every directed CSR entry, aligned with
/// Graph::targets(). Requires self loops (degrees >= 1 guaranteed).
std::vector<double> gcn_edge_weights(const Graph& g);

/// Nodes at hop distance <= 2 from v, v included. Self-loops are ignored,
/// results sorted ascending.
std::vector<NodeId> two_hop_ball(const Graph& g, NodeId v);

/// BFS from node 0 reaches everything (false for the empty graph).
bool is_connected(const Graph& g);

}  // namespace robustgcn
