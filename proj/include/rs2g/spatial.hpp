#pragma once

#include <string>
#include <vector>

#include "rs2g/graph.hpp"
#include "rs2g/params.hpp"
#include "rs2g/tensor.hpp"

namespace rs2g {

// One multi-relational graph convolution: a self-connection weight plus a
// per-relation weight with mean-normalized neighbor aggregation. For soft
// graphs the normalizer is the sum of incoming soft weights (floored at
// 1e-8); for hard graphs that reduces to 1/|N_r(v)|.
struct MrgcnLayer {
  int in_width, out_width;
  Tensor phi_self;
  std::vector<Tensor> phi_rel;

  MrgcnLayer(int in_width, int out_width, int relations, ParameterSet& params,
             const std::string& prefix, Rng& rng);
  Tensor forward(const Tensor& node_features,
                 const std::vector<Tensor>& adjacency) const;
};

Tensor mrgcn_forward(const Tensor& node_features,
                     const std::vector<Tensor>& adjacency,
                     const MrgcnLayer& layer);

// Per-node concatenation of layer 0 (input) through layer L outputs.
Tensor layer_concat(const std::vector<Tensor>& per_layer);

enum class ReadoutOp { kSum, kMean, kMax };

ReadoutOp readout_from_string(const std::string& name);
std::string to_string(ReadoutOp op);

Tensor readout(const Tensor& pooled_features, ReadoutOp op);

// Self-attention pooling: a single-relation GCN scores each node over the
// relation-collapsed adjacency (elementwise max across slices); the top
// ceil(ratio*n) nodes survive, features gated by tanh(score). Ties keep the
// lower node index.
struct SagPool {
  double ratio;
  MrgcnLayer scorer;

  SagPool(int feature_width, double ratio, ParameterSet& params,
          const std::string& prefix, Rng& rng);

  struct Result {
    Tensor x_pool;
    std::vector<Tensor> a_pool;
    std::vector<int> kept;  // ascending node indices
    Tensor scores;          // n x 1, pre-pooling
  };
  Result forward(const Tensor& x_prop,
                 const std::vector<Tensor>& adjacency) const;
};

// 2-layer MRGCN stack with relu between layers, layer concatenation,
// self-attention pooling, and readout.
struct MrgcnSpatialModel {
  std::vector<MrgcnLayer> layers;
  SagPool pool;
  ReadoutOp readout_op;

  MrgcnSpatialModel(int input_width, const std::vector<int>& hidden_widths,
                    int relations, double pool_ratio, ReadoutOp op,
                    ParameterSet& params, const std::string& prefix, Rng& rng);
  int embedding_width() const;
  Tensor embed(const SceneGraph& graph) const;
};

// Ablation baseline: per-node MLP then readout; ignores the adjacency.
struct MlpSpatialModel {
  Tensor w1, b1, w2, b2;
  int hidden_width;
  ReadoutOp readout_op;

  MlpSpatialModel(int input_width, int hidden_width, ReadoutOp op,
                  ParameterSet& params, const std::string& prefix, Rng& rng);
  int embedding_width() const { return hidden_width; }
  Tensor embed(const SceneGraph& graph) const;
};

}  // namespace rs2g
