#pragma once

#include <string>
#include <vector>

#include "rs2g/graph.hpp"
#include "rs2g/metrics.hpp"
#include "rs2g/pipeline.hpp"

namespace rs2g {

// Mean cosine similarity between learned and rule relation slices across a
// set of paired frames. All-zero slices contribute similarity 0.
struct RelationSimilarityMatrix {
  int learned_relations = 0;
  int rule_relations = 0;
  std::vector<double> values;  // row-major, learned x rule

  double at(int learned_r, int rule_r) const;
  std::string to_csv() const;  // header: rule relation columns
  std::string to_json() const;
};

RelationSimilarityMatrix cosine_relation_similarity(
    const std::vector<SceneGraph>& learned_graphs,
    const std::vector<SceneGraph>& rule_graphs);

// Edge statistics over hard graphs. Degree is the directed edge count
// divided by the node count; std is the population deviation.
struct GraphStructureStats {
  double avg_degree = 0.0;
  double avg_edges = 0.0;
  double std_edges = 0.0;
};

GraphStructureStats graph_structure_stats(const std::vector<SceneGraph>& graphs);

struct SweepPoint {
  double gamma = 0.0;
  GraphStructureStats stats;
  EvalReport report;
};

// Re-thresholds a trained learned-extractor model at each gamma and
// re-evaluates; soft graphs are extracted once and reused.
std::vector<SweepPoint> gamma_sweep(const ModelBundle& model,
                                    const Dataset& dataset,
                                    const std::vector<double>& gammas);

std::string sweep_to_csv(const std::vector<SweepPoint>& points);

}  // namespace rs2g
