#include "rs2g/temporal.hpp"

#include <stdexcept>

namespace rs2g {

LstmLayer::LstmLayer(int input_width_arg, int hidden_width_arg,
                     ParameterSet& params, const std::string& prefix, Rng& rng)
    : input_width(input_width_arg), hidden_width(hidden_width_arg) {
  const int in = input_width + hidden_width;
  auto w = [&](const char* name) {
    return params.add(prefix + "." + name,
                      Tensor::uniform_init({in, hidden_width}, in, rng));
  };
  auto b = [&](const char* name) {
    return params.add(prefix + "." + name,
                      Tensor::uniform_init({1, hidden_width}, in, rng));
  };
  w_i = w("wi"); b_i = b("bi");
  w_f = w("wf"); b_f = b("bf");
  w_o = w("wo"); b_o = b("bo");
  w_g = w("wg"); b_g = b("bg");
}

LstmLayer::State LstmLayer::zero_state() const {
  return State{Tensor::zeros({1, hidden_width}), Tensor::zeros({1, hidden_width})};
}

LstmLayer::State LstmLayer::step(const Tensor& x, const State& prev) const {
  if (x.rank() != 2 || x.rows() != 1 || x.cols() != input_width) {
    throw std::invalid_argument("LstmLayer: input " + shape_str(x.shape()) +
                                " does not match width " +
                                std::to_string(input_width));
  }
  const Tensor z = concat({x, prev.h}, 1);
  const Tensor gate_i = sigmoid(add(matmul(z, w_i), b_i));
  const Tensor gate_f = sigmoid(add(matmul(z, w_f), b_f));
  const Tensor gate_o = sigmoid(add(matmul(z, w_o), b_o));
  const Tensor cand = tanh_op(add(matmul(z, w_g), b_g));
  const Tensor c = add(mul(gate_f, prev.c), mul(gate_i, cand));
  const Tensor h = mul(gate_o, tanh_op(c));
  return State{h, c};
}

std::vector<Tensor> lstm_forward(const std::vector<Tensor>& inputs,
                                 const LstmLayer& layer,
                                 LstmLayer::State* final_state,
                                 const LstmLayer::State* initial) {
  if (inputs.empty()) throw std::invalid_argument("lstm_forward: empty input");
  LstmLayer::State state = initial ? *initial : layer.zero_state();
  std::vector<Tensor> hidden;
  hidden.reserve(inputs.size());
  for (const auto& x : inputs) {
    state = layer.step(x, state);
    hidden.push_back(state.h);
  }
  if (final_state) *final_state = state;
  return hidden;
}

TemporalAttention::TemporalAttention(int hidden_width, ParameterSet& params,
                                     const std::string& prefix, Rng& rng) {
  w_query = params.add(prefix + ".wq", Tensor::uniform_init(
                                           {hidden_width, hidden_width},
                                           hidden_width, rng));
  w_key = params.add(prefix + ".wk", Tensor::uniform_init(
                                         {hidden_width, hidden_width},
                                         hidden_width, rng));
  v = params.add(prefix + ".v",
                 Tensor::uniform_init({hidden_width, 1}, hidden_width, rng));
}

std::pair<Tensor, Tensor> TemporalAttention::forward(
    const std::vector<Tensor>& hidden) const {
  if (hidden.empty()) {
    throw std::invalid_argument("TemporalAttention: empty sequence");
  }
  const Tensor query = matmul(hidden.back(), w_query);
  std::vector<Tensor> energies;
  energies.reserve(hidden.size());
  for (const auto& p : hidden) {
    energies.push_back(matmul(tanh_op(add(query, matmul(p, w_key))), v));
  }
  const Tensor beta = softmax(concat(energies, 1), 1);
  const Tensor stacked = concat(hidden, 0);  // T x d_h
  return {matmul(beta, stacked), beta};
}

TemporalMode temporal_from_string(const std::string& name) {
  if (name == "lstm-attn") return TemporalMode::kLstmAttn;
  if (name == "lstm-last") return TemporalMode::kLstmLast;
  if (name == "mean") return TemporalMode::kMean;
  throw std::invalid_argument("unknown temporal mode '" + name + "'");
}

std::string to_string(TemporalMode mode) {
  switch (mode) {
    case TemporalMode::kLstmAttn: return "lstm-attn";
    case TemporalMode::kLstmLast: return "lstm-last";
    case TemporalMode::kMean: return "mean";
  }
  return "?";
}

Tensor temporal_readout(const std::vector<Tensor>& hidden, TemporalMode mode,
                        const TemporalAttention& attn, const LstmLayer& decoder,
                        const LstmLayer::State& final_state) {
  if (hidden.empty()) throw std::invalid_argument("temporal_readout: empty");
  switch (mode) {
    case TemporalMode::kLstmLast:
      return hidden.back();
    case TemporalMode::kLstmAttn: {
      const auto [context, beta] = attn.forward(hidden);
      return decoder.step(context, final_state).h;
    }
    default:
      throw std::invalid_argument("temporal_readout: unsupported mode '" +
                                  to_string(mode) + "'");
  }
}

TemporalModel::TemporalModel(TemporalMode mode_arg, int input_width,
                             int hidden_width_arg, ParameterSet& params,
                             const std::string& prefix, Rng& rng)
    : mode(mode_arg), hidden_width(hidden_width_arg) {
  if (mode == TemporalMode::kMean) return;
  encoder.emplace_back(input_width, hidden_width, params, prefix + ".enc0", rng);
  encoder.emplace_back(hidden_width, hidden_width, params, prefix + ".enc1", rng);
  if (mode == TemporalMode::kLstmAttn) {
    attention.emplace_back(hidden_width, params, prefix + ".attn", rng);
    decoder.emplace_back(hidden_width, hidden_width, params, prefix + ".dec", rng);
  }
}

int TemporalModel::output_width(int input_width) const {
  return mode == TemporalMode::kMean ? input_width : hidden_width;
}

Tensor TemporalModel::embed(const std::vector<Tensor>& embeddings) const {
  if (embeddings.empty()) {
    throw std::invalid_argument("TemporalModel: empty sequence");
  }
  if (mode == TemporalMode::kMean) {
    return mean(concat(embeddings, 0), 0);
  }
  LstmLayer::State final_state;
  std::vector<Tensor> hidden = lstm_forward(embeddings, encoder[0]);
  hidden = lstm_forward(hidden, encoder[1], &final_state);
  if (mode == TemporalMode::kLstmLast) {
    return hidden.back();
  }
  return temporal_readout(hidden, mode, attention.front(), decoder.front(),
                          final_state);
}

}  // namespace rs2g
