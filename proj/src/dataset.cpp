#include "robustgcn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "robustgcn/errors.hpp"

namespace robustgcn {

namespace {

using nlohmann::json;

[[noreturn]] void line_error(const std::filesystem::path& file, std::size_t line,
                             const std::string& msg) {
  throw DataError(file.filename().string() + ":" + std::to_string(line) + ": " + msg);
}

std::ifstream open_or_throw(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("missing or unreadable file: " + p.string());
  return in;
}

// Fields are TAB-separated; trailing CR tolerated nowhere (spec fixes LF).
std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::uint64_t parse_uint(const std::string& s, const std::filesystem::path& file,
                         std::size_t line) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    line_error(file, line, "expected non-negative integer, got '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const std::filesystem::path& file,
                    std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    line_error(file, line, "expected decimal float, got '" + s + "'");
  if (!std::isfinite(v)) line_error(file, line, "non-finite feature value '" + s + "'");
  return v;
}

json parse_json_file(const std::filesystem::path& p) {
  auto in = open_or_throw(p);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("invalid JSON in " + p.string());
  return j;
}

}  // namespace

FeatureMatrix FeatureMatrix::from_triplets(
    NodeId num_nodes, std::uint32_t num_features,
    std::vector<std::tuple<NodeId, std::uint32_t, double>> triplets) {
  std::sort(triplets.begin(), triplets.end(),
            [](const auto& a, const auto& b) {
              return std::tie(std::get<0>(a), std::get<1>(a)) <
                     std::tie(std::get<0>(b), std::get<1>(b));
            });
  FeatureMatrix f;
  f.num_nodes = num_nodes;
  f.num_features = num_features;
  f.offsets.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
  f.index.reserve(triplets.size());
  f.value.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    auto [node, feat, val] = triplets[k];
    if (node >= num_nodes) throw DataError("feature row out of range: " + std::to_string(node));
    if (feat >= num_features)
      throw DataError("feature index out of range: " + std::to_string(feat));
    if (k > 0 && std::get<0>(triplets[k - 1]) == node &&
        std::get<1>(triplets[k - 1]) == feat)
      throw DataError("duplicate feature entry: node " + std::to_string(node) +
                      " feature " + std::to_string(feat));
    ++f.offsets[node + 1];
    f.index.push_back(feat);
    f.value.push_back(val);
  }
  for (std::size_t i = 1; i < f.offsets.size(); ++i) f.offsets[i] += f.offsets[i - 1];
  return f;
}

FeatureMatrix FeatureMatrix::from_dense(const Matrix& m) {
  std::vector<std::tuple<NodeId, std::uint32_t, double>> trip;
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      if (m.at(i, j) != 0.0)
        trip.emplace_back(static_cast<NodeId>(i), static_cast<std::uint32_t>(j),
                          m.at(i, j));
  return from_triplets(static_cast<NodeId>(m.rows), static_cast<std::uint32_t>(m.cols),
                       std::move(trip));
}

void FeatureMatrix::densify_row(NodeId i, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  auto idx = row_indices(i);
  auto val = row_values(i);
  for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = val[k];
}

Matrix FeatureMatrix::to_dense() const {
  Matrix m(num_nodes, num_features);
  for (NodeId i = 0; i < num_nodes; ++i) densify_row(i, m.row_span(i));
  return m;
}

void FeatureMatrix::row_normalize_l1() {
  for (NodeId i = 0; i < num_nodes; ++i) {
    double s = 0.0;
    for (double v : row_values(i)) s += std::abs(v);
    if (s == 0.0) continue;
    for (std::uint64_t k = offsets[i]; k < offsets[i + 1]; ++k) value[k] /= s;
  }
}

DatasetBundle load_bundle(const std::filesystem::path& dir) {
  DatasetBundle b;

  const auto meta_path = dir / "meta.json";
  json meta = parse_json_file(meta_path);
  try {
    b.meta.name = meta.at("name").get<std::string>();
    b.meta.num_nodes = meta.at("num_nodes").get<NodeId>();
    b.meta.num_features = meta.at("num_features").get<std::uint32_t>();
    b.meta.num_classes = meta.at("num_classes").get<std::uint32_t>();
  } catch (const json::exception& e) {
    throw DataError("meta.json: " + std::string(e.what()));
  }
  if (b.meta.num_nodes == 0 || b.meta.num_classes == 0)
    throw DataError("meta.json: num_nodes and num_classes must be positive");

  // edges.tsv
  {
    const auto path = dir / "edges.tsv";
    auto in = open_or_throw(path);
    std::vector<EdgePair> edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto f = split_tabs(line);
      if (f.size() != 2) line_error(path, lineno, "expected 'u<TAB>v'");
      auto u = parse_uint(f[0], path, lineno);
      auto v = parse_uint(f[1], path, lineno);
      if (u >= b.meta.num_nodes || v >= b.meta.num_nodes)
        line_error(path, lineno, "node id out of range");
      if (u == v) line_error(path, lineno, "self-loop in input: " + std::to_string(u));
      edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
    try {
      b.graph = Graph::from_edges(b.meta.num_nodes, edges);
    } catch (const std::invalid_argument& e) {
      throw DataError("edges.tsv: " + std::string(e.what()));
    }
  }

  // features.tsv
  {
    const auto path = dir / "features.tsv";
    auto in = open_or_throw(path);
    std::vector<std::tuple<NodeId, std::uint32_t, double>> trip;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto f = split_tabs(line);
      if (f.size() != 3) line_error(path, lineno, "expected 'node<TAB>feature<TAB>value'");
      auto node = parse_uint(f[0], path, lineno);
      auto feat = parse_uint(f[1], path, lineno);
      double val = parse_double(f[2], path, lineno);
      if (node >= b.meta.num_nodes) line_error(path, lineno, "node id out of range");
      if (feat >= b.meta.num_features) line_error(path, lineno, "feature index out of range");
      trip.emplace_back(static_cast<NodeId>(node), static_cast<std::uint32_t>(feat), val);
    }
    b.features = FeatureMatrix::from_triplets(b.meta.num_nodes, b.meta.num_features,
                                              std::move(trip));
  }

  // labels.tsv
  {
    const auto path = dir / "labels.tsv";
    auto in = open_or_throw(path);
    b.labels.num_classes = b.meta.num_classes;
    b.labels.labels.assign(b.meta.num_nodes, b.meta.num_classes);  // sentinel: unset
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto f = split_tabs(line);
      if (f.size() != 2) line_error(path, lineno, "expected 'node<TAB>class'");
      auto node = parse_uint(f[0], path, lineno);
      auto cls = parse_uint(f[1], path, lineno);
      if (node >= b.meta.num_nodes) line_error(path, lineno, "node id out of range");
      if (cls >= b.meta.num_classes) line_error(path, lineno, "class out of range");
      if (b.labels.labels[node] != b.meta.num_classes)
        line_error(path, lineno, "duplicate label for node " + std::to_string(node));
      b.labels.labels[node] = static_cast<std::uint32_t>(cls);
    }
    for (NodeId i = 0; i < b.meta.num_nodes; ++i)
      if (b.labels.labels[i] == b.meta.num_classes)
        throw DataError("labels.tsv: missing label for node " + std::to_string(i));
  }

  // splits.json (optional)
  if (std::filesystem::exists(dir / "splits.json")) {
    json s = parse_json_file(dir / "splits.json");
    Split split;
    try {
      split.train = s.at("train").get<std::vector<NodeId>>();
      split.val = s.at("val").get<std::vector<NodeId>>();
      split.test = s.at("test").get<std::vector<NodeId>>();
    } catch (const json::exception& e) {
      throw DataError("splits.json: " + std::string(e.what()));
    }
    std::vector<char> seen(b.meta.num_nodes, 0);
    for (const auto* part : {&split.train, &split.val, &split.test}) {
      for (NodeId id : *part) {
        if (id >= b.meta.num_nodes)
          throw DataError("splits.json: node id out of range: " + std::to_string(id));
        if (seen[id])
          throw DataError("splits.json: node appears twice: " + std::to_string(id));
        seen[id] = 1;
      }
    }
    b.split = std::move(split);
  }

  return b;
}

LccResult largest_connected_component(const Graph& g, const FeatureMatrix& x,
                                      const LabelVector& y) {
  if (g.num_nodes() == 0) throw DataError("largest_connected_component: empty graph");

  std::vector<std::int64_t> comp(g.num_nodes(), -1);
  std::int64_t num_comp = 0;
  std::vector<NodeId> stack;
  for (NodeId s = 0; s < g.num_nodes(); ++s) {
    if (comp[s] != -1) continue;
    comp[s] = num_comp;
    stack.assign(1, s);
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      for (NodeId v : g.neighbors(u)) {
        if (comp[v] == -1) {
          comp[v] = num_comp;
          stack.push_back(v);
        }
      }
    }
    ++num_comp;
  }

  // Component sizes; ties broken by smallest contained original id, which is
  // the component's discovery order (components are discovered in order of
  // their smallest node id).
  std::vector<std::size_t> size(static_cast<std::size_t>(num_comp), 0);
  for (NodeId u = 0; u < g.num_nodes(); ++u) ++size[static_cast<std::size_t>(comp[u])];
  std::size_t best = 0;
  for (std::size_t c = 1; c < size.size(); ++c)
    if (size[c] > size[best]) best = c;

  LccResult r;
  std::vector<std::int64_t> new_id(g.num_nodes(), -1);
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (static_cast<std::size_t>(comp[u]) == best) {
      new_id[u] = static_cast<std::int64_t>(r.id_map.size());
      r.id_map.push_back(u);
    }
  }

  std::vector<EdgePair> edges;
  for (const auto& [u, v] : g.edge_list())
    if (new_id[u] != -1 && new_id[v] != -1)
      edges.emplace_back(static_cast<NodeId>(new_id[u]), static_cast<NodeId>(new_id[v]));
  r.graph = Graph::from_edges(static_cast<NodeId>(r.id_map.size()), edges);

  std::vector<std::tuple<NodeId, std::uint32_t, double>> trip;
  for (NodeId ni = 0; ni < r.id_map.size(); ++ni) {
    NodeId oi = r.id_map[ni];
    auto idx = x.row_indices(oi);
    auto val = x.row_values(oi);
    for (std::size_t k = 0; k < idx.size(); ++k) trip.emplace_back(ni, idx[k], val[k]);
  }
  r.features =
      FeatureMatrix::from_triplets(static_cast<NodeId>(r.id_map.size()), x.num_features,
                                   std::move(trip));

  r.labels.num_classes = y.num_classes;
  r.labels.labels.reserve(r.id_map.size());
  for (NodeId oi : r.id_map) r.labels.labels.push_back(y.labels[oi]);

  return r;
}

Split random_split(NodeId num_nodes, std::array<double, 3> ratios, std::uint64_t seed) {
  if (num_nodes < 3) throw ConfigError("random_split: need at least 3 nodes");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw ConfigError("random_split: ratios must sum to 1");
  std::vector<NodeId> ids(num_nodes);
  for (NodeId i = 0; i < num_nodes; ++i) ids[i] = i;
  Rng rng(seed);
  rng.shuffle(ids);
  const auto n_train = static_cast<std::size_t>(
      std::floor(ratios[0] * static_cast<double>(num_nodes)));
  const auto n_val = static_cast<std::size_t>(
      std::floor(ratios[1] * static_cast<double>(num_nodes)));
  Split s;
  s.seed = seed;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
               ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  return s;
}

double purity(const Graph& g, const LabelVector& y, NodeId v) {
  auto ball = two_hop_ball(g, v);
  std::size_t same = 0;
  for (NodeId u : ball)
    if (y.labels[u] == y.labels[v]) ++same;
  return static_cast<double>(same) / static_cast<double>(ball.size());
}

}  // namespace robustgcn
