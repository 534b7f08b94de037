#pragma once

#include <cstdint>
#include <filesystem>

#include "robustgcn/dataset.hpp"

namespace robustgcn {

/// Planted-partition citation-style generator: homophilous sparse graph with
/// class-indicative binary word features. Every member of a class carries the
/// class's core words (so order-statistic aggregation sees a same-class
/// majority signal, as real co-citation text does) plus individual draws.
/// Used by tests and demos where the real citation bundles are not on disk.
struct SynthSpec {
  NodeId nodes = 300;
  std::uint32_t classes = 3;
  std::uint32_t core_words_per_class = 6;    // carried by every member
  std::uint32_t extra_words_per_class = 30;  // individual vocabulary
  std::uint32_t words_per_node = 8;          // individual draws per node
  double noise_word_frac = 0.35;             // draw crosses class vocabulary
  double intra_degree = 3.0;                 // expected same-class edges per node
  double inter_degree = 0.6;                 // expected cross-class edges per node
  NodeId extra_component_nodes = 0;          // distractor components (chains of 3)
  std::uint64_t seed = 1;

  std::uint32_t num_features() const {
    return classes * (core_words_per_class + extra_words_per_class);
  }
};

struct SynthBundle {
  DatasetBundle bundle;
  NodeId planted_lcc_nodes = 0;       // size of the main (connected) component
  std::size_t planted_lcc_edges = 0;  // its undirected edge count
};

SynthBundle make_synth_bundle(const SynthSpec& spec);

/// Write a generated bundle as a dataset directory (meta.json, edges.tsv,
/// features.tsv, labels.tsv).
void write_bundle(const DatasetBundle& b, const std::filesystem::path& dir);

}  // namespace robustgcn
