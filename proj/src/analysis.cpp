#include "rs2g/analysis.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace rs2g {

double RelationSimilarityMatrix::at(int learned_r, int rule_r) const {
  return values.at(static_cast<std::size_t>(learned_r) * rule_relations +
                   rule_r);
}

std::string RelationSimilarityMatrix::to_csv() const {
  std::string out = "learned_relation";
  for (int r = 0; r < rule_relations; ++r) {
    out += ",rule_" + std::to_string(r);
  }
  out += "\n";
  for (int l = 0; l < learned_relations; ++l) {
    out += std::to_string(l);
    for (int r = 0; r < rule_relations; ++r) {
      out += "," + format_double(at(l, r));
    }
    out += "\n";
  }
  return out;
}

std::string RelationSimilarityMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (int l = 0; l < learned_relations; ++l) {
    nlohmann::json row = nlohmann::json::array();
    for (int r = 0; r < rule_relations; ++r) row.push_back(at(l, r));
    rows.push_back(std::move(row));
  }
  nlohmann::json j = {{"learned_relations", learned_relations},
                      {"rule_relations", rule_relations},
                      {"similarity", std::move(rows)}};
  return j.dump(2);
}

namespace {

double slice_cosine(const Tensor& a, const Tensor& b) {
  const auto& av = a.data();
  const auto& bv = b.data();
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    na += av[i] * av[i];
    nb += bv[i] * bv[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

RelationSimilarityMatrix cosine_relation_similarity(
    const std::vector<SceneGraph>& learned_graphs,
    const std::vector<SceneGraph>& rule_graphs) {
  if (learned_graphs.empty() || learned_graphs.size() != rule_graphs.size()) {
    throw std::invalid_argument(
        "cosine_relation_similarity: graph lists must pair up frame by frame");
  }
  RelationSimilarityMatrix result;
  result.learned_relations = learned_graphs.front().num_relations();
  result.rule_relations = rule_graphs.front().num_relations();
  result.values.assign(static_cast<std::size_t>(result.learned_relations) *
                           result.rule_relations,
                       0.0);
  for (std::size_t f = 0; f < learned_graphs.size(); ++f) {
    const auto& lg = learned_graphs[f];
    const auto& rg = rule_graphs[f];
    if (lg.num_nodes() != rg.num_nodes()) {
      throw std::invalid_argument(
          "cosine_relation_similarity: node count mismatch at frame " +
          std::to_string(f));
    }
    for (int l = 0; l < result.learned_relations; ++l) {
      for (int r = 0; r < result.rule_relations; ++r) {
        result.values[static_cast<std::size_t>(l) * result.rule_relations + r] +=
            slice_cosine(lg.adjacency[static_cast<std::size_t>(l)],
                         rg.adjacency[static_cast<std::size_t>(r)]);
      }
    }
  }
  for (double& v : result.values) {
    v /= static_cast<double>(learned_graphs.size());
  }
  return result;
}

GraphStructureStats graph_structure_stats(const std::vector<SceneGraph>& graphs) {
  if (graphs.empty()) {
    throw std::invalid_argument("graph_structure_stats: empty graph list");
  }
  GraphStructureStats stats;
  std::vector<double> edge_counts;
  edge_counts.reserve(graphs.size());
  for (const auto& graph : graphs) {
    const double edges = static_cast<double>(edge_count(graph));
    edge_counts.push_back(edges);
    stats.avg_degree += edges / static_cast<double>(graph.num_nodes());
  }
  const double n = static_cast<double>(graphs.size());
  stats.avg_degree /= n;
  for (double e : edge_counts) stats.avg_edges += e;
  stats.avg_edges /= n;
  double var = 0.0;
  for (double e : edge_counts) {
    var += (e - stats.avg_edges) * (e - stats.avg_edges);
  }
  stats.std_edges = std::sqrt(var / n);
  return stats;
}

std::vector<SweepPoint> gamma_sweep(const ModelBundle& model,
                                    const Dataset& dataset,
                                    const std::vector<double>& gammas) {
  if (model.config().extractor == ExtractorKind::kRule) {
    throw std::invalid_argument("gamma_sweep: needs a learned-extractor model");
  }
  if (dataset.sequences.empty()) {
    throw std::invalid_argument("gamma_sweep: empty dataset");
  }

  // Soft scores do not depend on gamma, so extract once.
  std::vector<std::vector<SceneGraph>> soft;
  soft.reserve(dataset.sequences.size());
  for (const auto& seq : dataset.sequences) {
    std::vector<SceneGraph> frames;
    frames.reserve(seq.frames.size());
    for (const auto& frame : seq.frames) {
      frames.push_back(model.extract(frame, GraphMode::kSoft));
    }
    soft.push_back(std::move(frames));
  }

  std::vector<SweepPoint> points;
  points.reserve(gammas.size());
  for (double gamma : gammas) {
    SweepPoint point;
    point.gamma = gamma;
    std::vector<SceneGraph> all_hard;
    std::vector<int> labels;
    std::vector<double> scores;
    for (std::size_t s = 0; s < soft.size(); ++s) {
      std::vector<Tensor> embeddings;
      embeddings.reserve(soft[s].size());
      for (const auto& graph : soft[s]) {
        SceneGraph hard = binarize(graph, gamma);
        embeddings.push_back(model.embed_graph(hard));
        all_hard.push_back(std::move(hard));
      }
      const Tensor probs =
          softmax(model.classify_logits(model.temporal_embed(embeddings)), 1);
      labels.push_back(dataset.sequences[s].label);
      scores.push_back(probs.at(0, 1));
    }
    point.stats = graph_structure_stats(all_hard);
    point.report = compute_metrics(labels, scores);
    point.report.train_domain = model.train_domain;
    point.report.test_domain = dataset.sequences.front().domain_tag;
    point.report.extractor = to_string(model.config().extractor);
    point.report.spatial = to_string(model.config().spatial);
    point.report.temporal = to_string(model.config().temporal);
    points.push_back(std::move(point));
  }
  return points;
}

std::string sweep_to_csv(const std::vector<SweepPoint>& points) {
  std::string out = "gamma,avg_degree,avg_edges,std_edges,acc,mcc,auc\n";
  for (const auto& p : points) {
    out += format_double(p.gamma) + "," + format_double(p.stats.avg_degree) +
           "," + format_double(p.stats.avg_edges) + "," +
           format_double(p.stats.std_edges) + "," +
           format_double(p.report.accuracy) + "," +
           format_double(p.report.mcc) + "," + format_double(p.report.auc) +
           "\n";
  }
  return out;
}

}  // namespace rs2g
