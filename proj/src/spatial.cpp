#include "rs2g/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rs2g {

namespace {
constexpr double kDegreeFloor = 1e-8;
}

MrgcnLayer::MrgcnLayer(int in_width_arg, int out_width_arg, int relations,
                       ParameterSet& params, const std::string& prefix,
                       Rng& rng)
    : in_width(in_width_arg), out_width(out_width_arg) {
  if (relations < 1) {
    throw std::invalid_argument("MrgcnLayer: needs at least 1 relation");
  }
  phi_self = params.add(prefix + ".self",
                        Tensor::uniform_init({in_width, out_width}, in_width, rng));
  phi_rel.reserve(static_cast<std::size_t>(relations));
  for (int r = 0; r < relations; ++r) {
    phi_rel.push_back(params.add(
        prefix + ".rel" + std::to_string(r),
        Tensor::uniform_init({in_width, out_width}, in_width, rng)));
  }
}

Tensor MrgcnLayer::forward(const Tensor& node_features,
                           const std::vector<Tensor>& adjacency) const {
  return mrgcn_forward(node_features, adjacency, *this);
}

Tensor mrgcn_forward(const Tensor& node_features,
                     const std::vector<Tensor>& adjacency,
                     const MrgcnLayer& layer) {
  if (node_features.rank() != 2 || node_features.cols() != layer.in_width) {
    throw std::invalid_argument(
        "mrgcn_forward: node features " + shape_str(node_features.shape()) +
        " do not match layer input width " + std::to_string(layer.in_width));
  }
  if (adjacency.size() != layer.phi_rel.size()) {
    throw std::invalid_argument(
        "mrgcn_forward: graph has " + std::to_string(adjacency.size()) +
        " relations, layer expects " + std::to_string(layer.phi_rel.size()));
  }
  Tensor out = matmul(node_features, layer.phi_self);
  for (std::size_t r = 0; r < adjacency.size(); ++r) {
    // Row v of incoming[v][u] holds the weight of edge u -> v.
    const Tensor incoming = transpose(adjacency[r]);
    const Tensor degree = clamp_min(sum(incoming, 1), kDegreeFloor);
    const Tensor normalized = div(incoming, degree);
    const Tensor messages = matmul(normalized, matmul(node_features, layer.phi_rel[r]));
    out = add(out, messages);
  }
  return out;
}

Tensor layer_concat(const std::vector<Tensor>& per_layer) {
  if (per_layer.empty()) throw std::invalid_argument("layer_concat: no layers");
  const int n = per_layer.front().rows();
  for (const auto& t : per_layer) {
    if (t.rows() != n) {
      throw std::invalid_argument("layer_concat: node count mismatch " +
                                  shape_str(per_layer.front().shape()) +
                                  " vs " + shape_str(t.shape()));
    }
  }
  if (per_layer.size() == 1) return per_layer.front();
  return concat(per_layer, 1);
}

ReadoutOp readout_from_string(const std::string& name) {
  if (name == "sum") return ReadoutOp::kSum;
  if (name == "mean") return ReadoutOp::kMean;
  if (name == "max") return ReadoutOp::kMax;
  throw std::invalid_argument("unknown readout '" + name + "'");
}

std::string to_string(ReadoutOp op) {
  switch (op) {
    case ReadoutOp::kSum: return "sum";
    case ReadoutOp::kMean: return "mean";
    case ReadoutOp::kMax: return "max";
  }
  return "?";
}

Tensor readout(const Tensor& pooled_features, ReadoutOp op) {
  if (pooled_features.rank() != 2 || pooled_features.rows() < 1) {
    throw std::invalid_argument("readout: needs a non-empty node matrix");
  }
  switch (op) {
    case ReadoutOp::kSum: return sum(pooled_features, 0);
    case ReadoutOp::kMean: return mean(pooled_features, 0);
    case ReadoutOp::kMax: return reduce_max(pooled_features, 0);
  }
  throw std::invalid_argument("readout: unknown op");
}

SagPool::SagPool(int feature_width, double ratio_arg, ParameterSet& params,
                 const std::string& prefix, Rng& rng)
    : ratio(ratio_arg),
      scorer(feature_width, 1, 1, params, prefix + ".scorer", rng) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw std::invalid_argument("SagPool: ratio outside (0,1]");
  }
}

SagPool::Result SagPool::forward(const Tensor& x_prop,
                                 const std::vector<Tensor>& adjacency) const {
  if (adjacency.empty()) {
    throw std::invalid_argument("SagPool: graph has no relations");
  }
  const int n = x_prop.rows();
  Tensor collapsed = adjacency.front();
  for (std::size_t r = 1; r < adjacency.size(); ++r) {
    collapsed = maximum(collapsed, adjacency[r]);
  }
  const Tensor scores = scorer.forward(x_prop, {collapsed});

  const int keep = std::max(
      1, static_cast<int>(std::ceil(ratio * static_cast<double>(n) - 1e-9)));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores.at(a, 0) > scores.at(b, 0);  // stable: ties keep lower index
  });
  std::vector<int> kept(order.begin(), order.begin() + keep);
  std::sort(kept.begin(), kept.end());

  Result result;
  result.scores = scores;
  result.kept = kept;
  result.x_pool = gather_rows(mul(x_prop, tanh_op(scores)), kept);
  result.a_pool.reserve(adjacency.size());
  for (const auto& slice : adjacency) {
    result.a_pool.push_back(submatrix(slice, kept, kept));
  }
  return result;
}

MrgcnSpatialModel::MrgcnSpatialModel(int input_width,
                                     const std::vector<int>& hidden_widths,
                                     int relations, double pool_ratio,
                                     ReadoutOp op, ParameterSet& params,
                                     const std::string& prefix, Rng& rng)
    : pool(input_width + std::accumulate(hidden_widths.begin(),
                                         hidden_widths.end(), 0),
           pool_ratio, params, prefix, rng),
      readout_op(op) {
  if (hidden_widths.empty()) {
    throw std::invalid_argument("MrgcnSpatialModel: needs at least one layer");
  }
  int in = input_width;
  for (std::size_t l = 0; l < hidden_widths.size(); ++l) {
    layers.emplace_back(in, hidden_widths[l], relations, params,
                        prefix + ".gc" + std::to_string(l), rng);
    in = hidden_widths[l];
  }
}

int MrgcnSpatialModel::embedding_width() const {
  int w = layers.front().in_width;
  for (const auto& layer : layers) w += layer.out_width;
  return w;
}

Tensor MrgcnSpatialModel::embed(const SceneGraph& graph) const {
  std::vector<Tensor> per_layer{graph.node_features};
  Tensor h = graph.node_features;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = layers[l].forward(h, graph.adjacency);
    if (l + 1 < layers.size()) h = relu(h);
    per_layer.push_back(h);
  }
  const Tensor x_prop = layer_concat(per_layer);
  const SagPool::Result pooled = pool.forward(x_prop, graph.adjacency);
  return readout(pooled.x_pool, readout_op);
}

MlpSpatialModel::MlpSpatialModel(int input_width, int hidden_width_arg,
                                 ReadoutOp op, ParameterSet& params,
                                 const std::string& prefix, Rng& rng)
    : hidden_width(hidden_width_arg), readout_op(op) {
  w1 = params.add(prefix + ".w1",
                  Tensor::uniform_init({input_width, hidden_width}, input_width, rng));
  b1 = params.add(prefix + ".b1",
                  Tensor::uniform_init({1, hidden_width}, input_width, rng));
  w2 = params.add(prefix + ".w2",
                  Tensor::uniform_init({hidden_width, hidden_width}, hidden_width, rng));
  b2 = params.add(prefix + ".b2",
                  Tensor::uniform_init({1, hidden_width}, hidden_width, rng));
}

Tensor MlpSpatialModel::embed(const SceneGraph& graph) const {
  const Tensor h1 = relu(add(matmul(graph.node_features, w1), b1));
  const Tensor h2 = add(matmul(h1, w2), b2);
  return readout(h2, readout_op);
}

}  // namespace rs2g
