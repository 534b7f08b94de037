#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "robustgcn/graph.hpp"
#include "robustgcn/linalg.hpp"

namespace robustgcn {

/// Per-node feature rows in CSR form (column indices sorted per row).
/// Citation features are binary-sparse; rows densify on demand.
struct FeatureMatrix {
  NodeId num_nodes = 0;
  std::uint32_t num_features = 0;
  std::vector<std::uint64_t> offsets;  // size num_nodes + 1
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  static FeatureMatrix from_triplets(
      NodeId num_nodes, std::uint32_t num_features,
      std::vector<std::tuple<NodeId, std::uint32_t, double>> triplets);
  static FeatureMatrix from_dense(const Matrix& m);

  std::span<const std::uint32_t> row_indices(NodeId i) const {
    return {index.data() + offsets[i], index.data() + offsets[i + 1]};
  }
  std::span<const double> row_values(NodeId i) const {
    return {value.data() + offsets[i], value.data() + offsets[i + 1]};
  }
  std::size_t row_nnz(NodeId i) const {
    return static_cast<std::size_t>(offsets[i + 1] - offsets[i]);
  }

  /// Scatter row i into a dense buffer of length num_features (zeros first).
  void densify_row(NodeId i, std::span<double> out) const;

  Matrix to_dense() const;

  /// Scale every row to unit L1 norm (zero rows untouched).
  void row_normalize_l1();
};

struct LabelVector {
  std::vector<std::uint32_t> labels;
  std::uint32_t num_classes = 0;
};

struct Split {
  std::vector<NodeId> train, val, test;
  std::uint64_t seed = 0;
};

struct DatasetMeta {
  std::string name;
  NodeId num_nodes = 0;
  std::uint32_t num_features = 0;
  std::uint32_t num_classes = 0;
};

struct DatasetBundle {
  DatasetMeta meta;
  Graph graph;  // no self-loops
  FeatureMatrix features;
  LabelVector labels;
  std::optional<Split> split;
};

/// Load a bundle directory (meta.json, edges.tsv, features.tsv, labels.tsv,
/// optional splits.json). Malformed rows raise DataError with file:line.
DatasetBundle load_bundle(const std::filesystem::path& dir);

struct LccResult {
  Graph graph;
  FeatureMatrix features;
  LabelVector labels;
  std::vector<NodeId> id_map;  // new id -> original id
};

/// Extract the largest connected component; ties broken by smallest
/// contained original node id. Features/labels are permuted to the new ids.
LccResult largest_connected_component(const Graph& g, const FeatureMatrix& x,
                                      const LabelVector& y);

/// Deterministic 10/10/80-style split. Sizes floor(n*r) for train/val,
/// remainder to test. Throws ConfigError for num_nodes < 3 or bad ratios.
Split random_split(NodeId num_nodes, std::array<double, 3> ratios, std::uint64_t seed);

/// Fraction of nodes in the closed 2-hop ball of v sharing v's class.
/// Self-loops are ignored; the ball always contains v, so the result is in
/// (0, 1].
double purity(const Graph& g, const LabelVector& y, NodeId v);

}  // namespace robustgcn
