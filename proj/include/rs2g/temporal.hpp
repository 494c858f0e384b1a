#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rs2g/params.hpp"
#include "rs2g/tensor.hpp"

namespace rs2g {

// Standard LSTM cell: sigmoid input/forget/output gates, tanh candidate
// and output squashing. Gate weights act on [x_t, h_{t-1}].
struct LstmLayer {
  int input_width, hidden_width;
  Tensor w_i, b_i, w_f, b_f, w_o, b_o, w_g, b_g;

  LstmLayer(int input_width, int hidden_width, ParameterSet& params,
            const std::string& prefix, Rng& rng);

  struct State {
    Tensor h, c;  // 1 x hidden each
  };
  State zero_state() const;
  State step(const Tensor& x, const State& prev) const;
};

// Hidden sequence p_1..p_T; final_state receives (p_T, c_T) when non-null.
// Zero initial state unless provided.
std::vector<Tensor> lstm_forward(const std::vector<Tensor>& inputs,
                                 const LstmLayer& layer,
                                 LstmLayer::State* final_state = nullptr,
                                 const LstmLayer::State* initial = nullptr);

// Additive attention over LSTM hidden states: energy
// e_t = v' tanh(W_query s0 + W_key p_t) with s0 = p_T, softmax weights,
// context q = sum_t beta_t p_t.
struct TemporalAttention {
  Tensor w_query, w_key, v;

  TemporalAttention(int hidden_width, ParameterSet& params,
                    const std::string& prefix, Rng& rng);

  // Returns (q: 1 x d_h, beta: 1 x T).
  std::pair<Tensor, Tensor> forward(const std::vector<Tensor>& hidden) const;
};

enum class TemporalMode { kLstmAttn, kLstmLast, kMean };

TemporalMode temporal_from_string(const std::string& name);
std::string to_string(TemporalMode mode);

// last: Z = p_T. attn: Z = one decoder step on the context vector, state
// initialized from the encoder's final (p_T, c_T).
Tensor temporal_readout(const std::vector<Tensor>& hidden, TemporalMode mode,
                        const TemporalAttention& attn, const LstmLayer& decoder,
                        const LstmLayer::State& final_state);

// 2-layer stacked LSTM encoder with a selectable readout. kMean bypasses
// the LSTM entirely and averages the input embeddings over time.
struct TemporalModel {
  TemporalMode mode;
  int hidden_width;
  std::vector<LstmLayer> encoder;
  // Only materialized for kLstmAttn.
  std::vector<TemporalAttention> attention;
  std::vector<LstmLayer> decoder;

  TemporalModel(TemporalMode mode, int input_width, int hidden_width,
                ParameterSet& params, const std::string& prefix, Rng& rng);
  int output_width(int input_width) const;
  Tensor embed(const std::vector<Tensor>& embeddings) const;
};

}  // namespace rs2g
