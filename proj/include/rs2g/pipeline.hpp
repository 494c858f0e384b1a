#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rs2g/graph.hpp"
#include "rs2g/params.hpp"
#include "rs2g/scene.hpp"
#include "rs2g/spatial.hpp"
#include "rs2g/temporal.hpp"

namespace rs2g {

enum class ExtractorKind { kRule, kLearned1d, kLearned2d };

ExtractorKind extractor_from_string(const std::string& name);
std::string to_string(ExtractorKind kind);

enum class SpatialKind { kMrgcn, kMlp };

SpatialKind spatial_from_string(const std::string& name);
std::string to_string(SpatialKind kind);

struct ModelConfig {
  ExtractorKind extractor = ExtractorKind::kLearned2d;
  int relations = 12;   // learned extractor only
  double gamma = 0.5;   // hard-graph edge threshold
  RuleConfig rule;      // rule extractor only
  SpatialKind spatial = SpatialKind::kMrgcn;
  int mrgcn_hidden = 64;  // width of both graph-conv layers
  double pool_ratio = 0.5;
  ReadoutOp readout = ReadoutOp::kMean;
  TemporalMode temporal = TemporalMode::kLstmAttn;
  int lstm_hidden = 64;
  int classifier_hidden = 64;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& json_text);
};

struct RiskPrediction {
  double p_safe = 0.0;
  double p_risky = 0.0;
  int label = 0;  // 1 iff p_risky >= p_safe
};

// The assembled extractor -> spatial -> temporal -> classifier stack, with
// every trainable tensor registered in one ParameterSet.
class ModelBundle {
 public:
  ModelBundle(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  int graph_relations() const;
  int embedding_width() const;

  // Stage operations; training runs soft graphs (so gradients reach the
  // edge encoder), evaluation runs hard graphs. The rule extractor is
  // always hard.
  SceneGraph extract(const Frame& frame, GraphMode mode) const;
  Tensor embed_graph(const SceneGraph& graph) const;
  Tensor temporal_embed(const std::vector<Tensor>& embeddings) const;
  Tensor classify_logits(const Tensor& z) const;

  Tensor sequence_logits(const SceneSequence& seq, GraphMode mode) const;
  Tensor sequence_loss(const SceneSequence& seq, GraphMode mode) const;
  RiskPrediction assess(const SceneSequence& seq) const;

  std::string train_domain;

 private:
  ModelConfig config_;
  ParameterSet params_;
  std::optional<NodeEncoder> node_encoder_;
  std::optional<EdgeEncoder> edge_encoder_;
  std::optional<MrgcnSpatialModel> mrgcn_;
  std::optional<MlpSpatialModel> mlp_spatial_;
  std::optional<TemporalModel> temporal_;
  Tensor clf_w1_, clf_b1_, clf_w2_, clf_b2_;
};

RiskPrediction assess_risk(const SceneSequence& seq, const ModelBundle& model);

struct TrainOptions {
  int epochs = 50;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool class_weights = false;
  OptimizerOptions optimizer;
  // Invoked after each epoch with (epoch index, mean loss); returning true
  // stops training early.
  std::function<bool(int, double)> after_epoch;
};

struct TrainResult {
  std::vector<double> loss_curve;  // mean per-sequence loss per epoch
  int epochs_run = 0;
};

TrainResult train(ModelBundle& model, const Dataset& train_set,
                  const TrainOptions& options);

void save_checkpoint(const ModelBundle& model, const std::string& path);
ModelBundle load_checkpoint(const std::string& path);

}  // namespace rs2g
