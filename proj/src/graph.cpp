#include "rs2g/graph.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace rs2g {

void SceneGraph::validate() const {
  const int n = num_nodes();
  for (const auto& slice : adjacency) {
    if (slice.rank() != 2 || slice.rows() != n || slice.cols() != n) {
      throw std::invalid_argument("SceneGraph: adjacency slice shape " +
                                  shape_str(slice.shape()) + " for n=" +
                                  std::to_string(n));
    }
    for (int i = 0; i < n; ++i) {
      if (slice.at(i, i) != 0.0) {
        throw std::invalid_argument("SceneGraph: nonzero diagonal entry");
      }
    }
    for (double v : slice.data()) {
      const bool ok = mode == GraphMode::kSoft ? (v >= 0.0 && v <= 1.0)
                                               : (v == 0.0 || v == 1.0);
      if (!ok) {
        throw std::invalid_argument("SceneGraph: adjacency entry " +
                                    std::to_string(v) + " invalid for mode");
      }
    }
  }
}

NodeEncoder::NodeEncoder(int depth_in, ParameterSet& params,
                         const std::string& prefix, Rng& rng)
    : depth(depth_in) {
  if (depth != 1 && depth != 2) {
    throw std::invalid_argument("NodeEncoder: depth must be 1 or 2");
  }
  const int d = kAttributeWidth;
  w1 = params.add(prefix + ".w1", Tensor::uniform_init({d, d}, d, rng));
  b1 = params.add(prefix + ".b1", Tensor::uniform_init({1, d}, d, rng));
  if (depth == 2) {
    w2 = params.add(prefix + ".w2", Tensor::uniform_init({d, d}, d, rng));
    b2 = params.add(prefix + ".b2", Tensor::uniform_init({1, d}, d, rng));
  }
}

Tensor NodeEncoder::forward(const Tensor& attributes) const {
  if (attributes.rank() != 2 || attributes.cols() != kAttributeWidth) {
    throw std::invalid_argument("NodeEncoder: expected n x 15 input, got " +
                                shape_str(attributes.shape()));
  }
  Tensor h = relu(add(matmul(attributes, w1), b1));
  if (depth == 2) h = relu(add(matmul(h, w2), b2));
  return h;
}

EdgeEncoder::EdgeEncoder(int depth_in, int relations_in, ParameterSet& params,
                         const std::string& prefix, Rng& rng)
    : depth(depth_in), relations(relations_in) {
  if (depth != 1 && depth != 2) {
    throw std::invalid_argument("EdgeEncoder: depth must be 1 or 2");
  }
  if (relations < 1) {
    throw std::invalid_argument("EdgeEncoder: needs at least 1 relation");
  }
  const int in = 2 * kAttributeWidth;
  const int out = kAttributeWidth;
  if (depth == 1) {
    w1 = params.add(prefix + ".w1", Tensor::uniform_init({in, out}, in, rng));
    b1 = params.add(prefix + ".b1", Tensor::uniform_init({1, out}, in, rng));
  } else {
    w1 = params.add(prefix + ".w1", Tensor::uniform_init({in, in}, in, rng));
    b1 = params.add(prefix + ".b1", Tensor::uniform_init({1, in}, in, rng));
    w2 = params.add(prefix + ".w2", Tensor::uniform_init({in, out}, in, rng));
    b2 = params.add(prefix + ".b2", Tensor::uniform_init({1, out}, in, rng));
  }
  head_w.reserve(static_cast<std::size_t>(relations));
  head_b.reserve(static_cast<std::size_t>(relations));
  for (int r = 0; r < relations; ++r) {
    const std::string head = prefix + ".head" + std::to_string(r);
    head_w.push_back(
        params.add(head + ".w", Tensor::uniform_init({out, 1}, out, rng)));
    head_b.push_back(
        params.add(head + ".b", Tensor::uniform_init({1, 1}, out, rng)));
  }
}

std::vector<Tensor> EdgeEncoder::pair_scores(const Tensor& node_features) const {
  const int n = node_features.rows();
  std::vector<int> src, dst;
  src.reserve(static_cast<std::size_t>(n) * (n - 1));
  dst.reserve(src.capacity());
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      if (j == k) continue;
      src.push_back(j);
      dst.push_back(k);
    }
  }
  const Tensor pairs = concat(
      {gather_rows(node_features, src), gather_rows(node_features, dst)}, 1);
  Tensor h = relu(add(matmul(pairs, w1), b1));
  if (depth == 2) h = relu(add(matmul(h, w2), b2));
  std::vector<Tensor> scores;
  scores.reserve(static_cast<std::size_t>(relations));
  for (int r = 0; r < relations; ++r) {
    scores.push_back(sigmoid(add(matmul(h, head_w[static_cast<std::size_t>(r)]),
                                 head_b[static_cast<std::size_t>(r)])));
  }
  return scores;
}

void RuleConfig::validate() const {
  if (distance_tiers_m.empty() || sector_bounds_deg.empty()) {
    throw std::invalid_argument("RuleConfig: empty tier or sector list");
  }
  for (std::size_t i = 1; i < distance_tiers_m.size(); ++i) {
    if (!(distance_tiers_m[i] > distance_tiers_m[i - 1])) {
      throw std::invalid_argument(
          "RuleConfig: distance tiers must be strictly increasing");
    }
  }
  if (!(distance_tiers_m.front() > 0.0)) {
    throw std::invalid_argument("RuleConfig: first tier must be positive");
  }
  for (std::size_t i = 0; i < sector_bounds_deg.size(); ++i) {
    const double b = sector_bounds_deg[i];
    if (!(b >= -180.0 && b < 180.0)) {
      throw std::invalid_argument("RuleConfig: sector bound outside [-180,180)");
    }
    if (i > 0 && !(b > sector_bounds_deg[i - 1])) {
      throw std::invalid_argument(
          "RuleConfig: sector bounds must be strictly increasing");
    }
  }
}

int RuleConfig::distance_tier(double range_m) const {
  double lo = 0.0;
  for (std::size_t i = 0; i < distance_tiers_m.size(); ++i) {
    if (range_m >= lo && range_m < distance_tiers_m[i]) {
      return static_cast<int>(i);
    }
    lo = distance_tiers_m[i];
  }
  return -1;
}

int RuleConfig::bearing_sector(double bearing_deg) const {
  double b = bearing_deg;
  if (b == 180.0) b = -180.0;  // wrap onto [-180, 180)
  const auto m = sector_bounds_deg.size();
  for (std::size_t i = 0; i + 1 < m; ++i) {
    if (b >= sector_bounds_deg[i] && b < sector_bounds_deg[i + 1]) {
      return static_cast<int>(i);
    }
  }
  // Last sector wraps from the final boundary through +/-180 to the first.
  return static_cast<int>(m) - 1;
}

SceneGraph extract_learned(const Tensor& attributes, const NodeEncoder& nodes,
                           const EdgeEncoder& edges, GraphMode mode,
                           double gamma) {
  const int n = attributes.rows();
  SceneGraph graph;
  graph.mode = mode;
  graph.node_features = nodes.forward(attributes);
  if (n == 1) {
    for (int r = 0; r < edges.relations; ++r) {
      graph.adjacency.push_back(Tensor::zeros({1, 1}));
    }
    return graph;
  }
  const std::vector<Tensor> scores = edges.pair_scores(graph.node_features);
  if (mode == GraphMode::kSoft) {
    for (const auto& s : scores) {
      graph.adjacency.push_back(pairwise_to_square(s, n));
    }
    return graph;
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("extract_learned: gamma outside (0,1)");
  }
  for (const auto& s : scores) {
    std::vector<double> hard(static_cast<std::size_t>(n) * n, 0.0);
    const auto& sv = s.data();
    std::size_t p = 0;
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        if (j == k) continue;
        hard[static_cast<std::size_t>(j) * n + k] = sv[p++] >= gamma ? 1.0 : 0.0;
      }
    }
    graph.adjacency.push_back(Tensor::matrix(n, n, std::move(hard)));
  }
  return graph;
}

SceneGraph extract_learned(const std::vector<DetectedObject>& objects,
                           const NodeEncoder& nodes, const EdgeEncoder& edges,
                           GraphMode mode, double gamma) {
  return extract_learned(attribute_matrix(objects), nodes, edges, mode, gamma);
}

SceneGraph extract_rule_based(const std::vector<DetectedObject>& objects,
                              const RuleConfig& config) {
  config.validate();
  if (objects.empty()) {
    throw std::invalid_argument("extract_rule_based: no objects");
  }
  const int n = static_cast<int>(objects.size());
  int ego = -1;
  for (int i = 0; i < n; ++i) {
    if (objects[static_cast<std::size_t>(i)].category == ObjectCategory::kEgo) {
      if (ego >= 0) {
        throw std::invalid_argument("extract_rule_based: multiple ego objects");
      }
      ego = i;
    }
  }
  if (ego < 0) {
    throw std::invalid_argument("extract_rule_based: no ego object");
  }

  SceneGraph graph;
  graph.mode = GraphMode::kHard;
  graph.node_features = attribute_matrix(objects);
  const int tiers = static_cast<int>(config.distance_tiers_m.size());
  std::vector<std::vector<double>> slices(
      static_cast<std::size_t>(config.relations()),
      std::vector<double>(static_cast<std::size_t>(n) * n, 0.0));

  for (int i = 0; i < n; ++i) {
    if (i == ego) continue;
    const auto& obj = objects[static_cast<std::size_t>(i)];
    const int tier = config.distance_tier(obj.range_m);
    if (tier >= 0) {
      slices[static_cast<std::size_t>(tier)]
            [static_cast<std::size_t>(ego) * n + i] = 1.0;
      slices[static_cast<std::size_t>(tier)]
            [static_cast<std::size_t>(i) * n + ego] = 1.0;
    }
    const int sector = config.bearing_sector(obj.bearing_deg);
    slices[static_cast<std::size_t>(tiers + sector)]
          [static_cast<std::size_t>(ego) * n + i] = 1.0;
  }
  for (auto& slice : slices) {
    graph.adjacency.push_back(Tensor::matrix(n, n, std::move(slice)));
  }
  return graph;
}

SceneGraph binarize(const SceneGraph& graph, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("binarize: gamma " + std::to_string(gamma) +
                                " outside (0,1)");
  }
  SceneGraph hard;
  hard.mode = GraphMode::kHard;
  hard.node_features = graph.node_features;
  hard.adjacency.reserve(graph.adjacency.size());
  const int n = graph.num_nodes();
  for (const auto& slice : graph.adjacency) {
    std::vector<double> data(slice.data());
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        auto& v = data[static_cast<std::size_t>(j) * n + k];
        v = (j != k && v >= gamma) ? 1.0 : 0.0;
      }
    }
    hard.adjacency.push_back(Tensor::matrix(n, n, std::move(data)));
  }
  return hard;
}

std::size_t edge_count(const SceneGraph& graph) {
  std::size_t count = 0;
  for (const auto& slice : graph.adjacency) {
    for (double v : slice.data()) {
      if (v != 0.0) ++count;
    }
  }
  return count;
}

std::string graph_to_json(const SceneGraph& graph) {
  nlohmann::json features = nlohmann::json::array();
  const int n = graph.num_nodes();
  const int d = graph.node_features.cols();
  for (int i = 0; i < n; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < d; ++j) row.push_back(graph.node_features.at(i, j));
    features.push_back(std::move(row));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (int r = 0; r < graph.num_relations(); ++r) {
    const auto& slice = graph.adjacency[static_cast<std::size_t>(r)];
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const double v = slice.at(j, k);
        if (v != 0.0) edges.push_back({r, j, k, v});
      }
    }
  }
  nlohmann::json doc = {
      {"mode", graph.mode == GraphMode::kSoft ? "soft" : "hard"},
      {"node_features", std::move(features)},
      {"edges", std::move(edges)}};
  return doc.dump();
}

}  // namespace rs2g
