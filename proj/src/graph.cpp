#include "robustgcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace robustgcn {

Graph Graph::from_edges(NodeId num_nodes, std::span<const EdgePair> edges) {
  std::vector<EdgePair> norm;
  norm.reserve(edges.size());
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes)
      throw std::invalid_argument("edge endpoint out of range: (" + std::to_string(u) +
                                  "," + std::to_string(v) + ")");
    if (u == v)
      throw std::invalid_argument("self-loop not allowed in edge list: node " +
                                  std::to_string(u));
    norm.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(norm.begin(), norm.end());
  if (std::adjacent_find(norm.begin(), norm.end()) != norm.end()) {
    auto it = std::adjacent_find(norm.begin(), norm.end());
    throw std::invalid_argument("duplicate edge: (" + std::to_string(it->first) + "," +
                                std::to_string(it->second) + ")");
  }

  std::vector<std::uint64_t> offsets(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (const auto& [u, v] : norm) {
    ++offsets[u + 1];
    ++offsets[v + 1];
  }
  for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];

  std::vector<NodeId> targets(norm.size() * 2);
  std::vector<std::uint64_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& [u, v] : norm) {
    targets[cursor[u]++] = v;
    targets[cursor[v]++] = u;
  }
  for (NodeId u = 0; u < num_nodes; ++u)
    std::sort(targets.begin() + static_cast<std::ptrdiff_t>(offsets[u]),
              targets.begin() + static_cast<std::ptrdiff_t>(offsets[u + 1]));

  return from_adjacency(num_nodes, std::move(offsets), std::move(targets), norm.size(),
                        false);
}

Graph Graph::from_adjacency(NodeId n, std::vector<std::uint64_t> offsets,
                            std::vector<NodeId> targets, std::size_t num_edges,
                            bool self_loops) {
  Graph g;
  g.num_nodes_ = n;
  g.num_edges_ = num_edges;
  g.self_loops_ = self_loops;
  g.offsets_ = std::move(offsets);
  g.targets_ = std::move(targets);
  return g;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

Graph Graph::with_self_loops() const {
  if (self_loops_) throw std::invalid_argument("graph already has self-loops");
  std::vector<std::uint64_t> offsets(offsets_.size(), 0);
  std::vector<NodeId> targets(targets_.size() + num_nodes_);
  std::uint64_t pos = 0;
  for (NodeId u = 0; u < num_nodes_; ++u) {
    offsets[u] = pos;
    bool placed = false;
    for (NodeId v : neighbors(u)) {
      if (!placed && v > u) {
        targets[pos++] = u;
        placed = true;
      }
      targets[pos++] = v;
    }
    if (!placed) targets[pos++] = u;
  }
  offsets[num_nodes_] = pos;
  return from_adjacency(num_nodes_, std::move(offsets), std::move(targets), num_edges_,
                        true);
}

std::vector<EdgePair> Graph::edge_list() const {
  std::vector<EdgePair> out;
  out.reserve(num_edges_);
  for (NodeId u = 0; u < num_nodes_; ++u)
    for (NodeId v : neighbors(u))
      if (u < v) out.emplace_back(u, v);
  return out;
}

std::vector<double> gcn_edge_weights(const Graph& g) {
  if (!g.self_loops_included())
    throw std::invalid_argument("gcn_edge_weights requires self-loops");
  std::vector<double> w(g.targets().size());
  std::size_t k = 0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    const double du = static_cast<double>(g.degree(u));
    for (NodeId v : g.neighbors(u))
      w[k++] = 1.0 / std::sqrt(du * static_cast<double>(g.degree(v)));
  }
  return w;
}

std::vector<NodeId> two_hop_ball(const Graph& g, NodeId v) {
  if (v >= g.num_nodes()) throw std::invalid_argument("two_hop_ball: node out of range");
  std::vector<NodeId> ball{v};
  std::vector<NodeId> frontier{v};
  std::vector<char> seen(g.num_nodes(), 0);
  seen[v] = 1;
  for (int hop = 0; hop < 2; ++hop) {
    std::vector<NodeId> next;
    for (NodeId u : frontier) {
      for (NodeId w : g.neighbors(u)) {
        if (w == u) continue;  // self entry
        if (!seen[w]) {
          seen[w] = 1;
          ball.push_back(w);
          next.push_back(w);
        }
      }
    }
    frontier = std::move(next);
  }
  std::sort(ball.begin(), ball.end());
  return ball;
}

bool is_connected(const Graph& g) {
  if (g.num_nodes() == 0) return false;
  std::vector<char> seen(g.num_nodes(), 0);
  std::vector<NodeId> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    for (NodeId v : g.neighbors(u)) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == g.num_nodes();
}

}  // namespace robustgcn
