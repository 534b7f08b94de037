#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "robustgcn/aggregators.hpp"
#include "robustgcn/dataset.hpp"
#include "robustgcn/graph.hpp"
#include "robustgcn/linalg.hpp"

namespace robustgcn {

struct GcnConfig {
  std::uint32_t hidden_units = 64;
  std::uint32_t num_layers = 2;  // fixed; kept for config echo
  double learning_rate = 0.01;
  std::uint32_t max_epochs = 200;
  std::uint32_t patience = 30;
  Aggregation aggregation;
  std::uint64_t seed = 1;
  std::uint64_t split_seed = 1;  // provenance: how the split was drawn
  double weight_decay = 5e-4;    // applied to W1 only
  double dropout = 0.5;          // layer-1 output, training only
  bool feature_norm = true;      // row-normalize features to unit L1 at load

  void validate() const;
};

/// Two-layer GCN: logits = f({ReLU(f({X_u}) W1)}_u) W2 with f the selected
/// aggregation over N_v (self-loops included).
struct GcnModel {
  Matrix w1;  // num_features x hidden
  Matrix w2;  // hidden x num_classes
  Aggregation aggregation;
  GcnConfig config;

  std::uint32_t num_features() const { return static_cast<std::uint32_t>(w1.rows); }
  std::uint32_t hidden_units() const { return static_cast<std::uint32_t>(w1.cols); }
  std::uint32_t num_classes() const { return static_cast<std::uint32_t>(w2.cols); }
};

/// Glorot-uniform initialization, deterministic per cfg.seed.
GcnModel init_model(const GcnConfig& cfg, std::uint32_t num_features,
                    std::uint32_t num_classes);

/// Sparse-dense product a (n x f, sparse) * b (f x h) -> n x h.
Matrix spmm(const FeatureMatrix& a, const Matrix& b);

/// Per-node aggregation of raw features over N_v (layer 1 of Eq-style
/// aggregate-then-transform). Result is sparse like the input.
FeatureMatrix layer1_aggregate(const Graph& g, const FeatureMatrix& x,
                               const Aggregation& agg);

/// H1 = ReLU(layer1_aggregate(..) W1).
Matrix layer1_hidden(const GcnModel& m, const Graph& g, const FeatureMatrix& x);

/// Per-node aggregation of dense hidden rows over N_v.
Matrix layer2_aggregate(const Graph& g, const Matrix& h, const Aggregation& agg);

/// Full forward pass; returns logits (num_nodes x num_classes). Throws
/// NumericError on non-finite intermediates.
Matrix forward(const GcnModel& m, const Graph& g, const FeatureMatrix& x);

struct Gradients {
  Matrix w1, w2;
};

struct LossGrads {
  double loss = 0.0;
  Gradients grads;
};

/// Mean softmax cross-entropy over `mask` plus 0.5 * weight_decay * |W1|^2.
/// dropout_mask, when given, scales layer-1 outputs element-wise (entries 0
/// or 1/keep); pass nullptr to disable.
LossGrads loss_and_grads(const GcnModel& m, const Graph& g, const FeatureMatrix& x,
                         const LabelVector& y, std::span<const NodeId> mask,
                         const Matrix* dropout_mask);

struct AdamState {
  Matrix m1, v1, m2, v2;
  std::uint64_t t = 0;
  static AdamState zeros_like(const GcnModel& m);
};

void adam_step(GcnModel& m, const Gradients& g, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_accuracy;
  std::uint32_t best_epoch = 0;  // 1-based
};

struct TrainResult {
  GcnModel model;
  TrainHistory history;
};

/// Full-batch training with early stopping on validation accuracy; restores
/// the best-validation weights (ties toward the earlier epoch).
TrainResult train(const GcnConfig& cfg, const Graph& g, const FeatureMatrix& x,
                  const LabelVector& y, const Split& split);

struct Prediction {
  std::uint32_t cls = 0;
  double margin = 0.0;  // logit[cls] - max other logit
};

/// Argmax class of logits row v; ties toward the lowest class index.
std::uint32_t pick_class(std::span<const double> logits);

Prediction predict(const GcnModel& m, const Graph& g, const FeatureMatrix& x, NodeId v);

void save_model(const GcnModel& m, const std::filesystem::path& path);
GcnModel load_model(const std::filesystem::path& path);

}  // namespace robustgcn
