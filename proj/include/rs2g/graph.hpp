#pragma once

#include <string>
#include <vector>

#include "rs2g/params.hpp"
#include "rs2g/scene.hpp"
#include "rs2g/tensor.hpp"

namespace rs2g {

enum class GraphMode { kSoft, kHard };

// Per-frame scene representation: node feature rows plus one n-by-n
// adjacency slice per relation. Diagonals are always zero; self-connections
// are handled by the graph model's self-weight.
struct SceneGraph {
  Tensor node_features;            // n x d
  std::vector<Tensor> adjacency;   // R slices, each n x n
  GraphMode mode = GraphMode::kHard;

  int num_nodes() const { return node_features.rows(); }
  int num_relations() const { return static_cast<int>(adjacency.size()); }
  void validate() const;
};

// Row-wise MLP over attribute vectors; 1 or 2 layers of width 15, relu
// after each layer.
struct NodeEncoder {
  int depth;  // 1 or 2
  Tensor w1, b1, w2, b2;

  NodeEncoder(int depth, ParameterSet& params, const std::string& prefix,
              Rng& rng);
  Tensor forward(const Tensor& attributes) const;
};

// Shared pair trunk (30->15 or 30->30->15, relu after each layer) with an
// independent sigmoid head per relation.
struct EdgeEncoder {
  int depth;      // 1 or 2
  int relations;  // R
  Tensor w1, b1, w2, b2;
  std::vector<Tensor> head_w, head_b;

  EdgeEncoder(int depth, int relations, ParameterSet& params,
              const std::string& prefix, Rng& rng);
  // Per-relation soft scores for ordered node pairs, one m x 1 column each,
  // with m = n*(n-1) pairs in row-major (j,k) order.
  std::vector<Tensor> pair_scores(const Tensor& node_features) const;
};

// Distance tiers and bearing sectors for the rule-based baseline. Tier i
// covers ranges in [tier_{i-1}, tier_i); sectors partition [-180,180) with
// wrap-around after the last boundary.
struct RuleConfig {
  std::vector<double> distance_tiers_m{4.0, 7.0, 10.0, 16.0, 25.0};
  std::vector<double> sector_bounds_deg{-135.0, -45.0, 45.0, 135.0};

  int relations() const {
    return static_cast<int>(distance_tiers_m.size() +
                            sector_bounds_deg.size());
  }
  void validate() const;
  int distance_tier(double range_m) const;  // -1 when beyond the last tier
  int bearing_sector(double bearing_deg) const;
};

// Learned extraction: encode nodes, score every ordered pair per relation,
// fill the adjacency tensor. Soft mode keeps sigmoid scores (differentiable
// back into the encoders); hard mode thresholds at gamma.
SceneGraph extract_learned(const Tensor& attributes, const NodeEncoder& nodes,
                           const EdgeEncoder& edges, GraphMode mode,
                           double gamma);
SceneGraph extract_learned(const std::vector<DetectedObject>& objects,
                           const NodeEncoder& nodes, const EdgeEncoder& edges,
                           GraphMode mode, double gamma);

// Rule-based extraction: ego<->object edges per distance tier, ego->object
// edges per bearing sector; node features are the raw attribute vectors.
SceneGraph extract_rule_based(const std::vector<DetectedObject>& objects,
                              const RuleConfig& config);

// Thresholds a soft graph at gamma (entry 1 iff score >= gamma). Hard
// inputs pass through unchanged for gamma <= 1.
SceneGraph binarize(const SceneGraph& graph, double gamma);

std::size_t edge_count(const SceneGraph& graph);  // hard graphs

// Inspection dump: node features plus a sparse (r, j, k, score) edge list.
std::string graph_to_json(const SceneGraph& graph);

}  // namespace rs2g
