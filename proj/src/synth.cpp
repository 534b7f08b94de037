#include "robustgcn/synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "robustgcn/errors.hpp"

namespace robustgcn {

SynthBundle make_synth_bundle(const SynthSpec& spec) {
  if (spec.nodes < 4 || spec.classes < 2)
    throw ConfigError("synth: need at least 4 nodes and 2 classes");
  Rng rng(spec.seed);

  const NodeId total = spec.nodes + spec.extra_component_nodes;

  std::vector<std::uint32_t> labels(total);
  for (NodeId i = 0; i < total; ++i) labels[i] = i % spec.classes;
  rng.shuffle(labels);

  std::set<EdgePair> edges;
  auto add_edge = [&](NodeId a, NodeId b) {
    if (a == b) return false;
    return edges.insert({std::min(a, b), std::max(a, b)}).second;
  };

  // Main component: a random recursive tree keeps it connected and gives the
  // leaf-heavy degree profile of citation graphs; extra intra- and
  // inter-class edges set the homophily level.
  std::vector<NodeId> order(spec.nodes);
  for (NodeId i = 0; i < spec.nodes; ++i) order[i] = i;
  rng.shuffle(order);
  for (NodeId i = 1; i < spec.nodes; ++i)
    add_edge(order[i], order[rng.below(i)]);

  std::vector<std::vector<NodeId>> members(spec.classes);
  for (NodeId i = 0; i < spec.nodes; ++i) members[labels[i]].push_back(i);

  for (std::uint32_t c = 0; c < spec.classes; ++c) {
    const auto& mem = members[c];
    if (mem.size() < 2) continue;
    const auto want = static_cast<std::size_t>(
        static_cast<double>(mem.size()) * spec.intra_degree / 2.0);
    std::size_t placed = 0, attempts = 0;
    while (placed < want && attempts < want * 20) {
      ++attempts;
      NodeId a = mem[rng.below(mem.size())];
      NodeId b = mem[rng.below(mem.size())];
      if (add_edge(a, b)) ++placed;
    }
  }

  {
    const auto want = static_cast<std::size_t>(
        static_cast<double>(spec.nodes) * spec.inter_degree / 2.0);
    std::size_t placed = 0, attempts = 0;
    while (placed < want && attempts < want * 20) {
      ++attempts;
      NodeId a = static_cast<NodeId>(rng.below(spec.nodes));
      NodeId b = static_cast<NodeId>(rng.below(spec.nodes));
      if (labels[a] == labels[b]) continue;
      if (add_edge(a, b)) ++placed;
    }
  }

  SynthBundle out;
  out.planted_lcc_nodes = spec.nodes;
  out.planted_lcc_edges = edges.size();

  // Distractor components: chains of three (shorter for the remainder).
  for (NodeId i = spec.nodes; i < total; ++i) {
    const NodeId pos = (i - spec.nodes) % 3;
    if (pos > 0) add_edge(i - 1, i);
  }

  // Features: every member carries its class core words; individual draws
  // come from the class's extra vocabulary or, with noise probability, from
  // anywhere.
  const std::uint32_t num_features = spec.num_features();
  const std::uint32_t block = spec.core_words_per_class + spec.extra_words_per_class;
  std::vector<std::tuple<NodeId, std::uint32_t, double>> trip;
  std::set<std::uint32_t> picked;
  for (NodeId i = 0; i < total; ++i) {
    picked.clear();
    const std::uint32_t base = labels[i] * block;
    for (std::uint32_t k = 0; k < spec.core_words_per_class; ++k) picked.insert(base + k);
    for (std::uint32_t k = 0; k < spec.words_per_node; ++k) {
      std::uint32_t w;
      if (rng.uniform01() < spec.noise_word_frac) {
        w = static_cast<std::uint32_t>(rng.below(num_features));
      } else {
        w = base + spec.core_words_per_class +
            static_cast<std::uint32_t>(rng.below(spec.extra_words_per_class));
      }
      picked.insert(w);
    }
    for (std::uint32_t w : picked) trip.emplace_back(i, w, 1.0);
  }

  std::vector<EdgePair> edge_vec(edges.begin(), edges.end());
  out.bundle.meta.name = "synth-" + std::to_string(spec.seed);
  out.bundle.meta.num_nodes = total;
  out.bundle.meta.num_features = num_features;
  out.bundle.meta.num_classes = spec.classes;
  out.bundle.graph = Graph::from_edges(total, edge_vec);
  out.bundle.features = FeatureMatrix::from_triplets(total, num_features, std::move(trip));
  out.bundle.labels = {std::move(labels), spec.classes};
  return out;
}

void write_bundle(const DatasetBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  {
    nlohmann::ordered_json meta;
    meta["name"] = b.meta.name;
    meta["num_nodes"] = b.meta.num_nodes;
    meta["num_features"] = b.meta.num_features;
    meta["num_classes"] = b.meta.num_classes;
    std::ofstream out(dir / "meta.json", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "meta.json").string());
    out << meta.dump(1) << "\n";
  }
  {
    std::ofstream out(dir / "edges.tsv", std::ios::binary);
    for (const auto& [u, v] : b.graph.edge_list()) out << u << "\t" << v << "\n";
  }
  {
    std::ofstream out(dir / "features.tsv", std::ios::binary);
    char buf[64];
    for (NodeId i = 0; i < b.features.num_nodes; ++i) {
      auto idx = b.features.row_indices(i);
      auto val = b.features.row_values(i);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", val[k]);
        out << i << "\t" << idx[k] << "\t" << buf << "\n";
      }
    }
  }
  {
    std::ofstream out(dir / "labels.tsv", std::ios::binary);
    for (NodeId i = 0; i < b.meta.num_nodes; ++i)
      out << i << "\t" << b.labels.labels[i] << "\n";
  }
}

}  // namespace robustgcn
