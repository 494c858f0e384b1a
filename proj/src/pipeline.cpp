#include "rs2g/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace rs2g {

ExtractorKind extractor_from_string(const std::string& name) {
  if (name == "rule") return ExtractorKind::kRule;
  if (name == "rs2g-1d") return ExtractorKind::kLearned1d;
  if (name == "rs2g-2d") return ExtractorKind::kLearned2d;
  throw std::invalid_argument("unknown extractor '" + name + "'");
}

std::string to_string(ExtractorKind kind) {
  switch (kind) {
    case ExtractorKind::kRule: return "rule";
    case ExtractorKind::kLearned1d: return "rs2g-1d";
    case ExtractorKind::kLearned2d: return "rs2g-2d";
  }
  return "?";
}

SpatialKind spatial_from_string(const std::string& name) {
  if (name == "mrgcn") return SpatialKind::kMrgcn;
  if (name == "mlp") return SpatialKind::kMlp;
  throw std::invalid_argument("unknown spatial model '" + name + "'");
}

std::string to_string(SpatialKind kind) {
  return kind == SpatialKind::kMrgcn ? "mrgcn" : "mlp";
}

std::string ModelConfig::to_json() const {
  nlohmann::json j = {{"extractor", rs2g::to_string(extractor)},
                      {"relations", relations},
                      {"gamma", gamma},
                      {"rule_distance_tiers_m", rule.distance_tiers_m},
                      {"rule_sector_bounds_deg", rule.sector_bounds_deg},
                      {"spatial", rs2g::to_string(spatial)},
                      {"mrgcn_hidden", mrgcn_hidden},
                      {"pool_ratio", pool_ratio},
                      {"readout", rs2g::to_string(readout)},
                      {"temporal", rs2g::to_string(temporal)},
                      {"lstm_hidden", lstm_hidden},
                      {"classifier_hidden", classifier_hidden}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  ModelConfig c;
  c.extractor = extractor_from_string(j.at("extractor").get<std::string>());
  c.relations = j.at("relations").get<int>();
  c.gamma = j.at("gamma").get<double>();
  c.rule.distance_tiers_m =
      j.at("rule_distance_tiers_m").get<std::vector<double>>();
  c.rule.sector_bounds_deg =
      j.at("rule_sector_bounds_deg").get<std::vector<double>>();
  c.spatial = spatial_from_string(j.at("spatial").get<std::string>());
  c.mrgcn_hidden = j.at("mrgcn_hidden").get<int>();
  c.pool_ratio = j.at("pool_ratio").get<double>();
  c.readout = readout_from_string(j.at("readout").get<std::string>());
  c.temporal = temporal_from_string(j.at("temporal").get<std::string>());
  c.lstm_hidden = j.at("lstm_hidden").get<int>();
  c.classifier_hidden = j.at("classifier_hidden").get<int>();
  return c;
}

ModelBundle::ModelBundle(const ModelConfig& config, std::uint64_t seed)
    : config_(config) {
  if (config_.extractor != ExtractorKind::kRule && config_.relations < 1) {
    throw std::invalid_argument("ModelBundle: relations must be >= 1");
  }
  if (!(config_.gamma > 0.0 && config_.gamma < 1.0)) {
    throw std::invalid_argument("ModelBundle: gamma outside (0,1)");
  }
  config_.rule.validate();

  Rng rng(seed);
  if (config_.extractor != ExtractorKind::kRule) {
    const int depth = config_.extractor == ExtractorKind::kLearned2d ? 2 : 1;
    Rng r_nodes = rng.child(1);
    Rng r_edges = rng.child(2);
    node_encoder_.emplace(depth, params_, "node_enc", r_nodes);
    edge_encoder_.emplace(depth, config_.relations, params_, "edge_enc",
                          r_edges);
  }

  const int relations = graph_relations();
  Rng r_spatial = rng.child(3);
  if (config_.spatial == SpatialKind::kMrgcn) {
    mrgcn_.emplace(kAttributeWidth,
                   std::vector<int>{config_.mrgcn_hidden, config_.mrgcn_hidden},
                   relations, config_.pool_ratio, config_.readout, params_,
                   "spatial", r_spatial);
  } else {
    mlp_spatial_.emplace(kAttributeWidth, config_.mrgcn_hidden, config_.readout,
                         params_, "spatial", r_spatial);
  }

  Rng r_temporal = rng.child(4);
  temporal_.emplace(config_.temporal, embedding_width(), config_.lstm_hidden,
                    params_, "temporal", r_temporal);

  const int z_width = temporal_->output_width(embedding_width());
  Rng r_clf = rng.child(5);
  clf_w1_ = params_.add("classifier.w1",
                        Tensor::uniform_init({z_width, config_.classifier_hidden},
                                             z_width, r_clf));
  clf_b1_ = params_.add("classifier.b1",
                        Tensor::uniform_init({1, config_.classifier_hidden},
                                             z_width, r_clf));
  clf_w2_ = params_.add("classifier.w2",
                        Tensor::uniform_init({config_.classifier_hidden, 2},
                                             config_.classifier_hidden, r_clf));
  clf_b2_ = params_.add("classifier.b2",
                        Tensor::uniform_init({1, 2}, config_.classifier_hidden,
                                             r_clf));
}

int ModelBundle::graph_relations() const {
  return config_.extractor == ExtractorKind::kRule ? config_.rule.relations()
                                                   : config_.relations;
}

int ModelBundle::embedding_width() const {
  return mrgcn_ ? mrgcn_->embedding_width() : mlp_spatial_->embedding_width();
}

SceneGraph ModelBundle::extract(const Frame& frame, GraphMode mode) const {
  if (config_.extractor == ExtractorKind::kRule) {
    return extract_rule_based(frame.objects, config_.rule);
  }
  return extract_learned(frame.objects, *node_encoder_, *edge_encoder_, mode,
                         config_.gamma);
}

Tensor ModelBundle::embed_graph(const SceneGraph& graph) const {
  return mrgcn_ ? mrgcn_->embed(graph) : mlp_spatial_->embed(graph);
}

Tensor ModelBundle::temporal_embed(const std::vector<Tensor>& embeddings) const {
  return temporal_->embed(embeddings);
}

Tensor ModelBundle::classify_logits(const Tensor& z) const {
  const Tensor h = relu(add(matmul(z, clf_w1_), clf_b1_));
  return add(matmul(h, clf_w2_), clf_b2_);
}

Tensor ModelBundle::sequence_logits(const SceneSequence& seq,
                                    GraphMode mode) const {
  if (seq.frames.size() < 2) {
    throw std::invalid_argument("ModelBundle: sequence '" + seq.id +
                                "' has fewer than 2 frames");
  }
  std::vector<Tensor> embeddings;
  embeddings.reserve(seq.frames.size());
  for (const auto& frame : seq.frames) {
    embeddings.push_back(embed_graph(extract(frame, mode)));
  }
  return classify_logits(temporal_embed(embeddings));
}

Tensor ModelBundle::sequence_loss(const SceneSequence& seq,
                                  GraphMode mode) const {
  return softmax_cross_entropy(sequence_logits(seq, mode), seq.label);
}

RiskPrediction ModelBundle::assess(const SceneSequence& seq) const {
  const Tensor probs = softmax(sequence_logits(seq, GraphMode::kHard), 1);
  RiskPrediction pred;
  pred.p_safe = probs.at(0, 0);
  pred.p_risky = probs.at(0, 1);
  pred.label = pred.p_risky >= pred.p_safe ? 1 : 0;
  return pred;
}

RiskPrediction assess_risk(const SceneSequence& seq, const ModelBundle& model) {
  return model.assess(seq);
}

TrainResult train(ModelBundle& model, const Dataset& train_set,
                  const TrainOptions& options) {
  if (train_set.sequences.empty()) {
    throw std::invalid_argument("train: empty training set");
  }
  std::size_t positives = 0;
  for (const auto& seq : train_set.sequences) {
    positives += seq.label == 1 ? 1u : 0u;
  }
  if (positives == 0 || positives == train_set.sequences.size()) {
    throw std::invalid_argument("train: training set needs both classes");
  }

  model.train_domain = train_set.sequences.front().domain_tag;

  double weight[2] = {1.0, 1.0};
  if (options.class_weights) {
    const double n = static_cast<double>(train_set.sequences.size());
    const double pos = static_cast<double>(positives);
    weight[1] = n / (2.0 * pos);
    weight[0] = n / (2.0 * (n - pos));
  }

  const GraphMode train_mode =
      model.config().extractor == ExtractorKind::kRule ? GraphMode::kHard
                                                       : GraphMode::kSoft;

  OptimizerOptions opt_options = options.optimizer;
  opt_options.lr = options.lr;
  Optimizer optimizer(opt_options);
  Rng rng(options.seed);

  std::vector<std::size_t> order(train_set.sequences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    Rng shuffler = rng.child(static_cast<std::uint64_t>(epoch));
    shuffler.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const SceneSequence& seq = train_set.sequences[idx];
      Tape tape;
      model.params().attach_all(tape);
      Tensor loss = model.sequence_loss(seq, train_mode);
      if (weight[seq.label] != 1.0) {
        loss = mul_scalar(loss, weight[seq.label]);
      }
      const double loss_value = loss.scalar_value();
      if (!std::isfinite(loss_value)) {
        model.params().detach_all();
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", sequence '" +
                                 seq.id + "'");
      }
      tape.backward(loss);
      const Gradients grads = model.params().collect_gradients();
      model.params().detach_all();
      optimizer.step(model.params(), grads);
      loss_sum += loss_value;
    }
    const double mean_loss =
        loss_sum / static_cast<double>(train_set.sequences.size());
    result.loss_curve.push_back(mean_loss);
    result.epochs_run = epoch + 1;
    if (options.after_epoch && options.after_epoch(epoch, mean_loss)) break;
  }
  return result;
}

void save_checkpoint(const ModelBundle& model, const std::string& path) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : model.params()) {
    params[name] = {{"shape", t.shape()}, {"data", t.data()}};
  }
  nlohmann::json doc = {
      {"format", "rs2g-checkpoint-v1"},
      {"architecture", nlohmann::json::parse(model.config().to_json())},
      {"train_domain", model.train_domain},
      {"parameters", std::move(params)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << doc.dump(2) << "\n";
}

ModelBundle load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("parse error in '" + path + "': " + e.what());
  }
  if (doc.value("format", "") != "rs2g-checkpoint-v1") {
    throw std::runtime_error("'" + path + "' is not a model checkpoint");
  }
  ModelBundle model(ModelConfig::from_json(doc.at("architecture").dump()), 0);
  model.train_domain = doc.value("train_domain", "");
  const auto& params = doc.at("parameters");
  std::size_t loaded = 0;
  for (auto& [name, t] : model.params()) {
    auto it = params.find(name);
    if (it == params.end()) {
      throw std::runtime_error("checkpoint missing parameter '" + name + "'");
    }
    const Shape shape = it->at("shape").get<Shape>();
    if (shape != t.shape()) {
      throw std::runtime_error("checkpoint parameter '" + name + "' has shape " +
                               shape_str(shape) + ", model wants " +
                               shape_str(t.shape()));
    }
    std::vector<double> data = it->at("data").get<std::vector<double>>();
    t.mutable_data() = std::move(data);
    ++loaded;
  }
  if (loaded != params.size()) {
    throw std::runtime_error("checkpoint has extra parameters");
  }
  return model;
}

}  // namespace rs2g
