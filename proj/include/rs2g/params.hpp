#pragma once

#include <map>
#include <string>
#include <vector>

#include "rs2g/tensor.hpp"

namespace rs2g {

using Gradients = std::map<std::string, std::vector<double>>;

// Named trainable tensors. std::map keys give a deterministic iteration
// order; shapes are frozen at registration.
class ParameterSet {
 public:
  // Stores a handle sharing the tensor's buffer and returns it, so the
  // registered tensor and the caller's copy stay in sync.
  Tensor add(const std::string& name, Tensor tensor);

  bool contains(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  std::size_t size() const { return params_.size(); }
  std::size_t total_scalars() const;

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }

  void attach_all(Tape& tape);
  void detach_all();

  // Reads accumulated gradients off the tape; parameters that never made
  // it onto the tape get zeros.
  Gradients collect_gradients() const;

  void save_json(const std::string& path) const;
  static ParameterSet load_json(const std::string& path);

 private:
  std::map<std::string, Tensor> params_;
};

struct OptimizerOptions {
  double lr = 1e-3;
  // Plain gradient descent by default; `adaptive` switches on per-parameter
  // first/second-moment scaling.
  bool adaptive = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global-norm gradient clip; <= 0 disables.
  double clip_norm = 5.0;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerOptions options = {}) : options_(options) {}

  const OptimizerOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }

  void step(ParameterSet& params, const Gradients& grads);

 private:
  OptimizerOptions options_;
  std::map<std::string, std::vector<double>> first_moment_;
  std::map<std::string, std::vector<double>> second_moment_;
  long step_count_ = 0;
};

}  // namespace rs2g
