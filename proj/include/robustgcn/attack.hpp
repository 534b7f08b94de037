#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "robustgcn/dataset.hpp"
#include "robustgcn/graph.hpp"
#include "robustgcn/model.hpp"

namespace robustgcn {

enum class EditKind { Inject, Delete };

/// One structural perturbation. Endpoints are stored normalized (u < v);
/// self-loop edges are never editable.
struct EdgeEdit {
  EditKind kind = EditKind::Inject;
  NodeId u = 0, v = 0;

  static EdgeEdit inject(NodeId a, NodeId b);
  static EdgeEdit del(NodeId a, NodeId b);
  bool operator==(const EdgeEdit&) const = default;
};

/// Cheap edited view of a base graph: a small set of toggled non-self edges.
/// Behaves exactly like the materialized edited graph (degrees include the
/// self entry of the base graph).
class GraphOverlay {
 public:
  explicit GraphOverlay(const Graph& base) : base_(&base) {}

  /// Apply one edit; throws std::invalid_argument when the precondition
  /// (Inject: absent; Delete: present) fails against the current view.
  void apply(const EdgeEdit& e);

  /// Undo the most recent edit.
  void pop();

  void clear() { toggles_.clear(); }

  bool has_edge(NodeId u, NodeId v) const;
  NodeId degree(NodeId u) const;

  /// Neighbors of u in the view, ascending (self entry included when the
  /// base graph has self-loops).
  void neighbor_list(NodeId u, std::vector<NodeId>& out) const;

  bool touches(NodeId u) const;

  const Graph& base() const { return *base_; }
  std::span<const EdgeEdit> edits() const { return toggles_; }

  Graph materialize() const;

 private:
  const Graph* base_;
  std::vector<EdgeEdit> toggles_;  // applied in order; kind records the action
};

/// New graph with the edit sequence applied; the original is untouched.
Graph apply_edits(const Graph& g, std::span<const EdgeEdit> edits);

/// Frozen-model caches shared by every attack on one (model, graph, x):
/// reference predictions plus whatever makes 2-hop local re-evaluation cheap
/// for the model's aggregation scheme.
struct AttackContext {
  const GcnModel* model = nullptr;
  const Graph* graph = nullptr;  // clean graph, self-loops included
  const FeatureMatrix* x = nullptr;
  Matrix xw1;        // X * W1 (weighted-mean shortcut)
  Matrix h1_clean;   // clean layer-1 hidden rows (order-stat reuse)
  std::vector<std::uint32_t> reference_class;  // clean predictions

  static AttackContext build(const GcnModel& m, const Graph& g, const FeatureMatrix& x);
};

/// Logits row of `target` on the overlay graph, recomputed exactly from the
/// target's 2-hop receptive field. Matches a full forward pass on the
/// materialized graph.
std::vector<double> local_logits(const AttackContext& ctx, const GraphOverlay& view,
                                 NodeId target);

double margin_from_logits(std::span<const double> logits, std::uint32_t reference);

/// logit[reference] - max other logit. Without an explicit reference the
/// model's prediction on the given graph is used (margin then >= 0); pass
/// the clean-graph prediction to measure attack progress (negative =
/// misclassified relative to it).
double margin(const GcnModel& m, const Graph& g, const FeatureMatrix& x, NodeId target,
              std::optional<std::uint32_t> reference = {});

/// Budget-1 exact worst case: every deletion of an incident edge and every
/// injection to a non-neighbor, success = prediction changes from the clean
/// reference.
struct SingleEdgeResult {
  NodeId target = 0;
  std::uint32_t reference_class = 0;
  bool injection_success = false;
  bool deletion_success = false;
  bool both_success = false;
  NodeId degree = 0;  // |N_v| on the clean graph (self entry included)
  std::optional<EdgeEdit> first_success;
  std::uint32_t new_class = 0;  // class reached by first_success (else reference)
};

SingleEdgeResult enumerate_single_edge(const AttackContext& ctx, NodeId target,
                                       std::span<const NodeId> injection_candidates = {});

struct AttackOutcome {
  NodeId target = 0;
  std::uint32_t reference_class = 0;
  std::uint32_t budget = 0;
  std::vector<EdgeEdit> edits;
  bool success = false;
  std::uint32_t new_class = 0;
  std::vector<double> margin_trace;        // margin after each applied edit
  std::vector<std::uint32_t> class_trace;  // prediction after each applied edit
  std::uint32_t success_step = 0;          // 1-based; 0 = never flipped
};

/// Greedy margin-minimizing attack with edits incident to the target.
/// Cumulative edits, early stop on success; ties prefer Inject, then the
/// lowest non-target endpoint.
AttackOutcome greedy_direct_attack(const AttackContext& ctx, NodeId target,
                                   std::uint32_t budget);

/// Greedy attack over edits incident to the target's 1-hop neighbors but
/// never incident to the target itself.
AttackOutcome greedy_indirect_attack(const AttackContext& ctx, NodeId target,
                                     std::uint32_t budget);

/// Convenience wrappers matching the frozen-model signature.
AttackOutcome greedy_direct_attack(const GcnModel& m, const Graph& g,
                                   const FeatureMatrix& x, NodeId target,
                                   std::uint32_t budget);
AttackOutcome greedy_indirect_attack(const GcnModel& m, const Graph& g,
                                     const FeatureMatrix& x, NodeId target,
                                     std::uint32_t budget);
SingleEdgeResult enumerate_single_edge(const GcnModel& m, const Graph& g,
                                       const FeatureMatrix& x, NodeId target);

/// The k non-neighbors with most-distant features from each target may be
/// used to restrict injection candidates on large graphs (exact = all).
std::vector<NodeId> most_distant_feature_nodes(const FeatureMatrix& x, NodeId target,
                                               std::size_t k);

}  // namespace robustgcn
