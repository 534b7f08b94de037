#include "robustgcn/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "robustgcn/errors.hpp"

namespace robustgcn {

EdgeEdit EdgeEdit::inject(NodeId a, NodeId b) {
  if (a == b) throw std::invalid_argument("self-loop edges are not editable");
  return {EditKind::Inject, std::min(a, b), std::max(a, b)};
}

EdgeEdit EdgeEdit::del(NodeId a, NodeId b) {
  if (a == b) throw std::invalid_argument("self-loop edges are not editable");
  return {EditKind::Delete, std::min(a, b), std::max(a, b)};
}

void GraphOverlay::apply(const EdgeEdit& e) {
  if (e.u == e.v) throw std::invalid_argument("self-loop edges are not editable");
  if (e.u >= base_->num_nodes() || e.v >= base_->num_nodes())
    throw std::invalid_argument("edit endpoint out of range");
  const bool present = has_edge(e.u, e.v);
  if (e.kind == EditKind::Inject && present)
    throw std::invalid_argument("inject: edge already present");
  if (e.kind == EditKind::Delete && !present)
    throw std::invalid_argument("delete: edge not present");
  toggles_.push_back(e);
}

void GraphOverlay::pop() {
  if (toggles_.empty()) throw std::logic_error("GraphOverlay::pop on empty overlay");
  toggles_.pop_back();
}

bool GraphOverlay::has_edge(NodeId u, NodeId v) const {
  bool present = base_->has_edge(u, v);
  const NodeId a = std::min(u, v), b = std::max(u, v);
  for (const auto& t : toggles_)
    if (t.u == a && t.v == b) present = !present;
  return present;
}

NodeId GraphOverlay::degree(NodeId u) const {
  std::int64_t d = base_->degree(u);
  for (const auto& t : toggles_)
    if (t.u == u || t.v == u) d += (t.kind == EditKind::Inject) ? 1 : -1;
  return static_cast<NodeId>(d);
}

void GraphOverlay::neighbor_list(NodeId u, std::vector<NodeId>& out) const {
  auto nb = base_->neighbors(u);
  out.assign(nb.begin(), nb.end());
  for (const auto& t : toggles_) {
    if (t.u != u && t.v != u) continue;
    const NodeId other = (t.u == u) ? t.v : t.u;
    auto it = std::lower_bound(out.begin(), out.end(), other);
    if (t.kind == EditKind::Inject) {
      out.insert(it, other);
    } else {
      out.erase(it);
    }
  }
}

bool GraphOverlay::touches(NodeId u) const {
  for (const auto& t : toggles_)
    if (t.u == u || t.v == u) return true;
  return false;
}

Graph GraphOverlay::materialize() const {
  auto edges = base_->edge_list();
  for (const auto& t : toggles_) {
    if (t.kind == EditKind::Inject) {
      edges.emplace_back(t.u, t.v);
    } else {
      auto it = std::find(edges.begin(), edges.end(), EdgePair{t.u, t.v});
      edges.erase(it);
    }
  }
  Graph g = Graph::from_edges(base_->num_nodes(), edges);
  return base_->self_loops_included() ? g.with_self_loops() : std::move(g);
}

Graph apply_edits(const Graph& g, std::span<const EdgeEdit> edits) {
  GraphOverlay view(g);
  for (const auto& e : edits) view.apply(e);
  return view.materialize();
}

AttackContext AttackContext::build(const GcnModel& m, const Graph& g,
                                   const FeatureMatrix& x) {
  if (!g.self_loops_included())
    throw std::invalid_argument("attack context requires self-loops");
  AttackContext ctx;
  ctx.model = &m;
  ctx.graph = &g;
  ctx.x = &x;
  ctx.xw1 = spmm(x, m.w1);
  ctx.h1_clean = layer1_hidden(m, g, x);
  Matrix a2 = layer2_aggregate(g, ctx.h1_clean, m.aggregation);
  Matrix logits = matmul(a2, m.w2);
  ctx.reference_class.resize(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    ctx.reference_class[v] = pick_class(logits.row_span(v));
  return ctx;
}

namespace {

/// Hidden row of node u on the overlay view, written into `out` (length H).
void local_hidden_row(const AttackContext& ctx, const GraphOverlay& view, NodeId u,
                      std::vector<NodeId>& nb_scratch, double* out) {
  const GcnModel& m = *ctx.model;
  const std::size_t h = m.hidden_units();

  if (m.aggregation.kind == AggKind::WeightedMean) {
    view.neighbor_list(u, nb_scratch);
    const double du = static_cast<double>(view.degree(u));
    std::fill(out, out + h, 0.0);
    for (NodeId w : nb_scratch) {
      const double wt = 1.0 / std::sqrt(du * static_cast<double>(view.degree(w)));
      const double* zw = ctx.xw1.row(w);
      for (std::size_t j = 0; j < h; ++j) out[j] += wt * zw[j];
    }
    for (std::size_t j = 0; j < h; ++j) out[j] = std::max(0.0, out[j]);
    return;
  }

  // Order statistics ignore weights, so only toggle endpoints changed.
  if (!view.touches(u)) {
    const double* row = ctx.h1_clean.row(u);
    std::copy(row, row + h, out);
    return;
  }
  view.neighbor_list(u, nb_scratch);
  std::vector<std::span<const std::uint32_t>> ridx;
  std::vector<std::span<const double>> rval;
  ridx.reserve(nb_scratch.size());
  rval.reserve(nb_scratch.size());
  for (NodeId w : nb_scratch) {
    ridx.push_back(ctx.x->row_indices(w));
    rval.push_back(ctx.x->row_values(w));
  }
  std::vector<std::uint32_t> ai;
  std::vector<double> av;
  kernels::order_stat_sparse(ridx, rval, ridx.size(), m.aggregation.kind,
                             m.aggregation.alpha, ai, av);
  std::fill(out, out + h, 0.0);
  for (std::size_t k = 0; k < ai.size(); ++k) {
    const double* w1row = m.w1.row(ai[k]);
    for (std::size_t j = 0; j < h; ++j) out[j] += av[k] * w1row[j];
  }
  for (std::size_t j = 0; j < h; ++j) out[j] = std::max(0.0, out[j]);
}

}  // namespace

std::vector<double> local_logits(const AttackContext& ctx, const GraphOverlay& view,
                                 NodeId target) {
  const GcnModel& m = *ctx.model;
  const std::size_t h = m.hidden_units();
  const std::size_t c = m.num_classes();

  std::vector<NodeId> nb_target;
  view.neighbor_list(target, nb_target);

  Matrix hidden(nb_target.size(), h);
  std::vector<NodeId> scratch;
  for (std::size_t i = 0; i < nb_target.size(); ++i)
    local_hidden_row(ctx, view, nb_target[i], scratch, hidden.row(i));

  std::vector<double> a2(h);
  std::vector<const double*> rows(hidden.rows);
  for (std::size_t i = 0; i < hidden.rows; ++i) rows[i] = hidden.row(i);
  if (m.aggregation.kind == AggKind::WeightedMean) {
    std::vector<double> w(nb_target.size());
    const double dt = static_cast<double>(view.degree(target));
    for (std::size_t i = 0; i < nb_target.size(); ++i)
      w[i] = 1.0 / std::sqrt(dt * static_cast<double>(view.degree(nb_target[i])));
    kernels::weighted_mean(rows, w, h, a2.data());
  } else {
    kernels::order_stat(rows, h, m.aggregation.kind, m.aggregation.alpha, a2.data());
  }

  std::vector<double> logits(c, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    const double aj = a2[j];
    if (aj == 0.0) continue;
    const double* w2row = m.w2.row(j);
    for (std::size_t k = 0; k < c; ++k) logits[k] += aj * w2row[k];
  }
  return logits;
}

double margin_from_logits(std::span<const double> logits, std::uint32_t reference) {
  double other = -std::numeric_limits<double>::infinity();
  for (std::uint32_t j = 0; j < logits.size(); ++j)
    if (j != reference) other = std::max(other, logits[j]);
  return logits[reference] - other;
}

double margin(const GcnModel& m, const Graph& g, const FeatureMatrix& x, NodeId target,
              std::optional<std::uint32_t> reference) {
  Matrix logits = forward(m, g, x);
  const std::uint32_t ref = reference.value_or(pick_class(logits.row_span(target)));
  return margin_from_logits(logits.row_span(target), ref);
}

SingleEdgeResult enumerate_single_edge(const AttackContext& ctx, NodeId target,
                                       std::span<const NodeId> injection_candidates) {
  const Graph& g = *ctx.graph;
  if (target >= g.num_nodes()) throw std::invalid_argument("target out of range");

  SingleEdgeResult r;
  r.target = target;
  r.reference_class = ctx.reference_class[target];
  r.new_class = r.reference_class;
  r.degree = g.degree(target);

  GraphOverlay view(g);
  auto try_edit = [&](const EdgeEdit& e) {
    view.apply(e);
    const auto logits = local_logits(ctx, view, target);
    const std::uint32_t cls = pick_class(logits);
    view.pop();
    if (cls != r.reference_class) {
      if (!r.first_success) {
        r.first_success = e;
        r.new_class = cls;
      }
      return true;
    }
    return false;
  };

  for (NodeId u : g.neighbors(target)) {
    if (u == target) continue;
    if (try_edit(EdgeEdit::del(target, u))) {
      r.deletion_success = true;
      break;
    }
  }

  if (injection_candidates.empty()) {
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      if (u == target || g.has_edge(target, u)) continue;
      if (try_edit(EdgeEdit::inject(target, u))) {
        r.injection_success = true;
        break;
      }
    }
  } else {
    for (NodeId u : injection_candidates) {
      if (u == target || g.has_edge(target, u)) continue;
      if (try_edit(EdgeEdit::inject(target, u))) {
        r.injection_success = true;
        break;
      }
    }
  }

  r.both_success = r.injection_success || r.deletion_success;
  return r;
}

namespace {

struct Candidate {
  double margin = std::numeric_limits<double>::infinity();
  bool valid = false;
  EdgeEdit edit;
  std::uint32_t cls = 0;

  /// Strictly better: lower margin; ties prefer Inject, then lower endpoints.
  bool beats(const Candidate& o) const {
    if (!o.valid) return true;
    if (margin != o.margin) return margin < o.margin;
    const int ka = edit.kind == EditKind::Inject ? 0 : 1;
    const int kb = o.edit.kind == EditKind::Inject ? 0 : 1;
    if (ka != kb) return ka < kb;
    if (edit.u != o.edit.u) return edit.u < o.edit.u;
    return edit.v < o.edit.v;
  }
};

AttackOutcome greedy_attack(const AttackContext& ctx, NodeId target, std::uint32_t budget,
                            bool direct) {
  const Graph& g = *ctx.graph;
  if (target >= g.num_nodes()) throw std::invalid_argument("target out of range");
  if (budget < 1) throw std::invalid_argument("budget must be >= 1");

  AttackOutcome out;
  out.target = target;
  out.reference_class = ctx.reference_class[target];
  out.new_class = out.reference_class;
  out.budget = budget;

  // Indirect candidates hang off the target's 1-hop neighbors, which no edit
  // may change, so the anchor set is fixed up front.
  std::vector<NodeId> anchors;
  std::vector<char> is_anchor;
  if (!direct) {
    for (NodeId u : g.neighbors(target))
      if (u != target) anchors.push_back(u);
    if (anchors.empty())
      throw DataError("indirect attack: target has no non-self neighbors");
    is_anchor.assign(g.num_nodes(), 0);
    for (NodeId u : anchors) is_anchor[u] = 1;
  }

  GraphOverlay view(g);
  for (std::uint32_t step = 1; step <= budget; ++step) {
    Candidate best;
    auto consider = [&](NodeId a, NodeId b) {
      const EdgeEdit e = view.has_edge(a, b) ? EdgeEdit::del(a, b) : EdgeEdit::inject(a, b);
      view.apply(e);
      const auto logits = local_logits(ctx, view, target);
      view.pop();
      Candidate c;
      c.valid = true;
      c.margin = margin_from_logits(logits, out.reference_class);
      c.cls = pick_class(logits);
      c.edit = e;
      if (c.beats(best)) best = c;
    };

    if (direct) {
      for (NodeId w = 0; w < g.num_nodes(); ++w) {
        if (w == target) continue;
        consider(target, w);
      }
    } else {
      for (NodeId u : anchors) {
        for (NodeId w = 0; w < g.num_nodes(); ++w) {
          if (w == u || w == target) continue;
          if (is_anchor[w] && w < u) continue;  // both ends anchored: visit once
          consider(u, w);
        }
      }
    }

    if (!best.valid) throw DataError("greedy attack: no candidate edits");

    view.apply(best.edit);
    out.edits.push_back(best.edit);
    out.margin_trace.push_back(best.margin);
    out.class_trace.push_back(best.cls);
    if (best.cls != out.reference_class) {
      out.success = true;
      out.success_step = step;
      out.new_class = best.cls;
      break;
    }
  }
  return out;
}

}  // namespace

AttackOutcome greedy_direct_attack(const AttackContext& ctx, NodeId target,
                                   std::uint32_t budget) {
  return greedy_attack(ctx, target, budget, true);
}

AttackOutcome greedy_indirect_attack(const AttackContext& ctx, NodeId target,
                                     std::uint32_t budget) {
  return greedy_attack(ctx, target, budget, false);
}

AttackOutcome greedy_direct_attack(const GcnModel& m, const Graph& g,
                                   const FeatureMatrix& x, NodeId target,
                                   std::uint32_t budget) {
  return greedy_direct_attack(AttackContext::build(m, g, x), target, budget);
}

AttackOutcome greedy_indirect_attack(const GcnModel& m, const Graph& g,
                                     const FeatureMatrix& x, NodeId target,
                                     std::uint32_t budget) {
  return greedy_indirect_attack(AttackContext::build(m, g, x), target, budget);
}

SingleEdgeResult enumerate_single_edge(const GcnModel& m, const Graph& g,
                                       const FeatureMatrix& x, NodeId target) {
  return enumerate_single_edge(AttackContext::build(m, g, x), target);
}

std::vector<NodeId> most_distant_feature_nodes(const FeatureMatrix& x, NodeId target,
                                               std::size_t k) {
  auto ti = x.row_indices(target);
  auto tv = x.row_values(target);
  double t_norm = 0.0;
  for (double v : tv) t_norm += v * v;

  std::vector<std::pair<double, NodeId>> scored;  // (-dist^2, id) for ascending sort
  scored.reserve(x.num_nodes);
  for (NodeId u = 0; u < x.num_nodes; ++u) {
    if (u == target) continue;
    auto ui = x.row_indices(u);
    auto uv = x.row_values(u);
    double u_norm = 0.0, dot = 0.0;
    std::size_t a = 0, b = 0;
    for (double v : uv) u_norm += v * v;
    while (a < ti.size() && b < ui.size()) {
      if (ti[a] == ui[b]) dot += tv[a++] * uv[b++];
      else if (ti[a] < ui[b]) ++a;
      else ++b;
    }
    scored.emplace_back(-(t_norm + u_norm - 2.0 * dot), u);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<NodeId> out;
  out.reserve(std::min(k, scored.size()));
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i)
    out.push_back(scored[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace robustgcn
