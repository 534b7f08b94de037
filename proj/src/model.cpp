#include "robustgcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "robustgcn/errors.hpp"

namespace robustgcn {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kDropoutSalt = 0x6f727064ULL;  // decorrelate from init stream

void glorot_fill(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
  for (double& x : w.data) x = rng.uniform(-limit, limit);
}

}  // namespace

void GcnConfig::validate() const {
  if (hidden_units < 1) throw ConfigError("hidden_units must be >= 1");
  if (num_layers != 2) throw ConfigError("only 2-layer models are supported");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  try {
    aggregation.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

GcnModel init_model(const GcnConfig& cfg, std::uint32_t num_features,
                    std::uint32_t num_classes) {
  cfg.validate();
  if (num_features == 0 || num_classes == 0)
    throw ConfigError("init_model: feature and class counts must be positive");
  GcnModel m;
  m.aggregation = cfg.aggregation;
  m.config = cfg;
  m.w1 = Matrix(num_features, cfg.hidden_units);
  m.w2 = Matrix(cfg.hidden_units, num_classes);
  Rng rng(cfg.seed);
  glorot_fill(m.w1, rng);
  glorot_fill(m.w2, rng);
  return m;
}

Matrix spmm(const FeatureMatrix& a, const Matrix& b) {
  if (a.num_features != b.rows) throw std::invalid_argument("spmm: shape mismatch");
  Matrix c(a.num_nodes, b.cols);
  for (NodeId i = 0; i < a.num_nodes; ++i) {
    auto idx = a.row_indices(i);
    auto val = a.row_values(i);
    double* ci = c.row(i);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double v = val[k];
      const double* bj = b.row(idx[k]);
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += v * bj[j];
    }
  }
  return c;
}

FeatureMatrix layer1_aggregate(const Graph& g, const FeatureMatrix& x,
                               const Aggregation& agg) {
  if (!g.self_loops_included())
    throw std::invalid_argument("layer1_aggregate requires self-loops");
  if (g.num_nodes() != x.num_nodes)
    throw std::invalid_argument("layer1_aggregate: node count mismatch");

  FeatureMatrix out;
  out.num_nodes = g.num_nodes();
  out.num_features = x.num_features;
  out.offsets.assign(static_cast<std::size_t>(g.num_nodes()) + 1, 0);

  if (agg.kind == AggKind::WeightedMean) {
    const std::vector<double> w = gcn_edge_weights(g);
    std::vector<std::pair<std::uint32_t, double>> acc;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      acc.clear();
      auto nb = g.neighbors(v);
      const std::uint64_t base = g.offsets()[v];
      for (std::size_t k = 0; k < nb.size(); ++k) {
        const NodeId u = nb[k];
        const double wu = w[base + k];
        auto idx = x.row_indices(u);
        auto val = x.row_values(u);
        for (std::size_t t = 0; t < idx.size(); ++t)
          acc.emplace_back(idx[t], wu * val[t]);
      }
      std::sort(acc.begin(), acc.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::size_t i = 0;
      while (i < acc.size()) {
        const std::uint32_t d = acc[i].first;
        double s = 0.0;
        while (i < acc.size() && acc[i].first == d) s += acc[i++].second;
        out.index.push_back(d);
        out.value.push_back(s);
        ++out.offsets[v + 1];
      }
    }
  } else {
    std::vector<std::span<const std::uint32_t>> ridx;
    std::vector<std::span<const double>> rval;
    std::vector<std::uint32_t> oi;
    std::vector<double> ov;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      ridx.clear();
      rval.clear();
      for (NodeId u : g.neighbors(v)) {
        ridx.push_back(x.row_indices(u));
        rval.push_back(x.row_values(u));
      }
      kernels::order_stat_sparse(ridx, rval, ridx.size(), agg.kind, agg.alpha, oi, ov);
      out.index.insert(out.index.end(), oi.begin(), oi.end());
      out.value.insert(out.value.end(), ov.begin(), ov.end());
      out.offsets[v + 1] = oi.size();
    }
  }

  for (std::size_t i = 1; i < out.offsets.size(); ++i) out.offsets[i] += out.offsets[i - 1];
  return out;
}

Matrix layer1_hidden(const GcnModel& m, const Graph& g, const FeatureMatrix& x) {
  Matrix h = spmm(layer1_aggregate(g, x, m.aggregation), m.w1);
  for (double& v : h.data) v = std::max(0.0, v);
  return h;
}

Matrix layer2_aggregate(const Graph& g, const Matrix& h, const Aggregation& agg) {
  if (!g.self_loops_included())
    throw std::invalid_argument("layer2_aggregate requires self-loops");
  Matrix out(h.rows, h.cols);
  std::vector<const double*> rows;
  if (agg.kind == AggKind::WeightedMean) {
    const std::vector<double> w = gcn_edge_weights(g);
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      auto nb = g.neighbors(v);
      rows.clear();
      for (NodeId u : nb) rows.push_back(h.row(u));
      kernels::weighted_mean(rows, {w.data() + g.offsets()[v], nb.size()}, h.cols,
                             out.row(v));
    }
  } else {
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      rows.clear();
      for (NodeId u : g.neighbors(v)) rows.push_back(h.row(u));
      kernels::order_stat(rows, h.cols, agg.kind, agg.alpha, out.row(v));
    }
  }
  return out;
}

namespace {

struct ForwardPass {
  FeatureMatrix a1;  // layer-1 aggregated features (sparse)
  Matrix pre1;       // a1 * W1
  Matrix h1;         // ReLU(pre1), dropout applied when training
  Matrix a2;         // layer-2 aggregation of h1
  Matrix logits;     // a2 * W2
};

ForwardPass run_forward(const GcnModel& m, const Graph& g, const FeatureMatrix& x,
                        const Matrix* dropout_mask, const FeatureMatrix* a1_cache) {
  if (x.num_features != m.num_features())
    throw std::invalid_argument("forward: feature dimension mismatch");
  ForwardPass f;
  if (a1_cache != nullptr) {
    f.a1 = *a1_cache;
  } else {
    f.a1 = layer1_aggregate(g, x, m.aggregation);
  }
  f.pre1 = spmm(f.a1, m.w1);
  f.h1 = f.pre1;
  for (double& v : f.h1.data) v = std::max(0.0, v);
  if (dropout_mask != nullptr) {
    if (!dropout_mask->same_shape(f.h1))
      throw std::invalid_argument("dropout mask shape mismatch");
    for (std::size_t i = 0; i < f.h1.data.size(); ++i)
      f.h1.data[i] *= dropout_mask->data[i];
  }
  f.a2 = layer2_aggregate(g, f.h1, m.aggregation);
  f.logits = matmul(f.a2, m.w2);
  if (!all_finite(f.logits))
    throw NumericError("forward produced non-finite logits");
  return f;
}

/// acc[j,:] += a[v,j] * b[v,:] over all sparse entries of a.
void add_outer_sparse(Matrix& acc, const FeatureMatrix& a, const Matrix& b) {
  for (NodeId v = 0; v < a.num_nodes; ++v) {
    auto idx = a.row_indices(v);
    auto val = a.row_values(v);
    const double* bv = b.row(v);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      double* row = acc.row(idx[k]);
      const double s = val[k];
      for (std::size_t j = 0; j < b.cols; ++j) row[j] += s * bv[j];
    }
  }
}

/// dH += aggregation-backward of dA2 through layer-2 aggregation.
void layer2_backward(const Graph& g, const Matrix& h1, const Aggregation& agg,
                     const Matrix& d_a2, Matrix& d_h1) {
  std::vector<const double*> rows;
  if (agg.kind == AggKind::WeightedMean) {
    const std::vector<double> w = gcn_edge_weights(g);
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      auto nb = g.neighbors(v);
      const std::uint64_t base = g.offsets()[v];
      const double* up = d_a2.row(v);
      for (std::size_t k = 0; k < nb.size(); ++k) {
        double* gu = d_h1.row(nb[k]);
        const double wu = w[base + k];
        for (std::size_t j = 0; j < d_a2.cols; ++j) gu[j] += wu * up[j];
      }
    }
  } else {
    std::vector<double*> grads;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      auto nb = g.neighbors(v);
      rows.clear();
      grads.clear();
      for (NodeId u : nb) {
        rows.push_back(h1.row(u));
        grads.push_back(d_h1.row(u));
      }
      kernels::order_stat_backward(rows, h1.cols, agg.kind, agg.alpha,
                                   d_a2.row_span(v), grads);
    }
  }
}

double softmax_ce(const Matrix& logits, const LabelVector& y,
                  std::span<const NodeId> mask, Matrix& d_logits) {
  const std::size_t c = logits.cols;
  const double inv = 1.0 / static_cast<double>(mask.size());
  double loss = 0.0;
  std::vector<double> p(c);
  for (NodeId v : mask) {
    const double* row = logits.row(v);
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      p[j] = std::exp(row[j] - mx);
      z += p[j];
    }
    for (std::size_t j = 0; j < c; ++j) p[j] /= z;
    const std::uint32_t label = y.labels[v];
    loss -= std::log(std::max(p[label], 1e-300)) * inv;
    double* d = d_logits.row(v);
    for (std::size_t j = 0; j < c; ++j) d[j] = (p[j] - (j == label ? 1.0 : 0.0)) * inv;
  }
  return loss;
}

LossGrads loss_and_grads_cached(const GcnModel& m, const Graph& g,
                                const FeatureMatrix& x, const LabelVector& y,
                                std::span<const NodeId> mask,
                                const Matrix* dropout_mask,
                                const FeatureMatrix* a1_cache) {
  if (mask.empty()) throw std::invalid_argument("loss_and_grads: empty mask");
  ForwardPass f = run_forward(m, g, x, dropout_mask, a1_cache);

  Matrix d_logits(f.logits.rows, f.logits.cols);
  LossGrads out;
  out.loss = softmax_ce(f.logits, y, mask, d_logits);
  for (double v : m.w1.data) out.loss += 0.5 * m.config.weight_decay * v * v;
  if (!std::isfinite(out.loss)) throw NumericError("loss is non-finite");

  out.grads.w2 = matmul_at_b(f.a2, d_logits);
  Matrix d_a2 = matmul_a_bt(d_logits, m.w2);

  Matrix d_h1(f.h1.rows, f.h1.cols);
  layer2_backward(g, f.h1, m.aggregation, d_a2, d_h1);

  if (dropout_mask != nullptr)
    for (std::size_t i = 0; i < d_h1.data.size(); ++i)
      d_h1.data[i] *= dropout_mask->data[i];
  for (std::size_t i = 0; i < d_h1.data.size(); ++i)
    if (f.pre1.data[i] <= 0.0) d_h1.data[i] = 0.0;

  out.grads.w1 = Matrix(m.w1.rows, m.w1.cols);
  add_outer_sparse(out.grads.w1, f.a1, d_h1);
  add_scaled(out.grads.w1, m.w1, m.config.weight_decay);
  return out;
}

}  // namespace

Matrix forward(const GcnModel& m, const Graph& g, const FeatureMatrix& x) {
  return run_forward(m, g, x, nullptr, nullptr).logits;
}

LossGrads loss_and_grads(const GcnModel& m, const Graph& g, const FeatureMatrix& x,
                         const LabelVector& y, std::span<const NodeId> mask,
                         const Matrix* dropout_mask) {
  return loss_and_grads_cached(m, g, x, y, mask, dropout_mask, nullptr);
}

AdamState AdamState::zeros_like(const GcnModel& m) {
  AdamState s;
  s.m1 = Matrix(m.w1.rows, m.w1.cols);
  s.v1 = Matrix(m.w1.rows, m.w1.cols);
  s.m2 = Matrix(m.w2.rows, m.w2.cols);
  s.v2 = Matrix(m.w2.rows, m.w2.cols);
  return s;
}

namespace {

void adam_update(Matrix& w, const Matrix& g, Matrix& m1, Matrix& v1, std::uint64_t t,
                 double lr, double beta1, double beta2, double eps) {
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < w.data.size(); ++i) {
    const double gi = g.data[i];
    m1.data[i] = beta1 * m1.data[i] + (1.0 - beta1) * gi;
    v1.data[i] = beta2 * v1.data[i] + (1.0 - beta2) * gi * gi;
    const double mhat = m1.data[i] / bc1;
    const double vhat = v1.data[i] / bc2;
    w.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

void adam_step(GcnModel& m, const Gradients& g, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
  if (!all_finite(g.w1) || !all_finite(g.w2))
    throw NumericError("adam_step: non-finite gradient");
  ++state.t;
  adam_update(m.w1, g.w1, state.m1, state.v1, state.t, lr, beta1, beta2, eps);
  adam_update(m.w2, g.w2, state.m2, state.v2, state.t, lr, beta1, beta2, eps);
}

namespace {

double accuracy_from_logits(const Matrix& logits, const LabelVector& y,
                            std::span<const NodeId> mask) {
  std::size_t hit = 0;
  for (NodeId v : mask)
    if (pick_class(logits.row_span(v)) == y.labels[v]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(mask.size());
}

}  // namespace

TrainResult train(const GcnConfig& cfg, const Graph& g, const FeatureMatrix& x,
                  const LabelVector& y, const Split& split) {
  cfg.validate();
  if (!g.self_loops_included()) throw ConfigError("train: graph must have self-loops");
  if (split.train.empty() || split.val.empty())
    throw ConfigError("train: split needs non-empty train and val sets");

  GcnModel model = init_model(cfg, x.num_features, y.num_classes);
  AdamState adam = AdamState::zeros_like(model);
  Rng dropout_rng(cfg.seed ^ kDropoutSalt);

  const FeatureMatrix a1 = layer1_aggregate(g, x, model.aggregation);

  TrainHistory hist;
  Matrix best_w1 = model.w1, best_w2 = model.w2;
  double best_val = -1.0;

  const double keep = 1.0 - cfg.dropout;
  Matrix mask_mat;
  for (std::uint32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const Matrix* mask_ptr = nullptr;
    if (cfg.dropout > 0.0) {
      mask_mat = Matrix(g.num_nodes(), cfg.hidden_units);
      for (double& v : mask_mat.data)
        v = (dropout_rng.uniform01() < keep) ? 1.0 / keep : 0.0;
      mask_ptr = &mask_mat;
    }

    LossGrads lg = loss_and_grads_cached(model, g, x, y, split.train, mask_ptr, &a1);
    adam_step(model, lg.grads, adam, cfg.learning_rate);

    ForwardPass eval = run_forward(model, g, x, nullptr, &a1);
    const double val_acc = accuracy_from_logits(eval.logits, y, split.val);

    hist.train_loss.push_back(lg.loss);
    hist.val_accuracy.push_back(val_acc);

    if (val_acc > best_val) {
      best_val = val_acc;
      hist.best_epoch = epoch;
      best_w1 = model.w1;
      best_w2 = model.w2;
    } else if (epoch - hist.best_epoch >= cfg.patience) {
      break;
    }
  }

  model.w1 = std::move(best_w1);
  model.w2 = std::move(best_w2);
  return {std::move(model), std::move(hist)};
}

std::uint32_t pick_class(std::span<const double> logits) {
  std::uint32_t best = 0;
  for (std::uint32_t j = 1; j < logits.size(); ++j)
    if (logits[j] > logits[best]) best = j;
  return best;
}

Prediction predict(const GcnModel& m, const Graph& g, const FeatureMatrix& x, NodeId v) {
  if (v >= g.num_nodes()) throw std::invalid_argument("predict: node out of range");
  Matrix logits = forward(m, g, x);
  Prediction p;
  p.cls = pick_class(logits.row_span(v));
  double other = -std::numeric_limits<double>::infinity();
  for (std::uint32_t j = 0; j < logits.cols; ++j)
    if (j != p.cls) other = std::max(other, logits.at(v, j));
  p.margin = logits.at(v, p.cls) - other;
  return p;
}

namespace {

ordered_json config_to_json(const GcnConfig& c) {
  ordered_json j;
  j["hidden_units"] = c.hidden_units;
  j["num_layers"] = c.num_layers;
  j["learning_rate"] = c.learning_rate;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["split_seed"] = c.split_seed;
  j["weight_decay"] = c.weight_decay;
  j["dropout"] = c.dropout;
  j["feature_norm"] = c.feature_norm;
  return j;
}

GcnConfig config_from_json(const ordered_json& j) {
  GcnConfig c;
  c.hidden_units = j.at("hidden_units").get<std::uint32_t>();
  c.num_layers = j.at("num_layers").get<std::uint32_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_epochs = j.at("max_epochs").get<std::uint32_t>();
  c.patience = j.at("patience").get<std::uint32_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.split_seed = j.at("split_seed").get<std::uint64_t>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.feature_norm = j.at("feature_norm").get<bool>();
  return c;
}

}  // namespace

void save_model(const GcnModel& m, const std::filesystem::path& path) {
  ordered_json j;
  j["format"] = "robustgcn-model-v1";
  j["num_features"] = m.num_features();
  j["hidden_units"] = m.hidden_units();
  j["num_classes"] = m.num_classes();
  j["aggregation"] = m.aggregation.name();
  j["alpha"] = m.aggregation.alpha;
  j["config"] = config_to_json(m.config);
  j["w1"] = m.w1.data;
  j["w2"] = m.w2.data;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path.string());
  out << j.dump(1) << "\n";
}

GcnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read model file: " + path.string());
  ordered_json j = ordered_json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("invalid JSON in model file: " + path.string());
  try {
    GcnModel m;
    try {
      m.aggregation = Aggregation::parse(j.at("aggregation").get<std::string>(),
                                         j.at("alpha").get<double>());
    } catch (const std::invalid_argument& e) {
      throw DataError("model file: " + std::string(e.what()));
    }
    m.config = config_from_json(j.at("config"));
    m.config.aggregation = m.aggregation;
    const auto f = j.at("num_features").get<std::uint32_t>();
    const auto h = j.at("hidden_units").get<std::uint32_t>();
    const auto c = j.at("num_classes").get<std::uint32_t>();
    m.w1 = Matrix(f, h);
    m.w1.data = j.at("w1").get<std::vector<double>>();
    m.w2 = Matrix(h, c);
    m.w2.data = j.at("w2").get<std::vector<double>>();
    if (m.w1.data.size() != static_cast<std::size_t>(f) * h ||
        m.w2.data.size() != static_cast<std::size_t>(h) * c)
      throw DataError("model file: weight size mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model file: " + std::string(e.what()));
  }
}

}  // namespace robustgcn
