#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "rs2g/params.hpp"
#include "rs2g/random.hpp"
#include "rs2g/tensor.hpp"

namespace rs2g::testing {

inline Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0,
                          double hi = 1.0) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  std::vector<double> data(n);
  for (double& v : data) v = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(data));
}

struct GradCheckResult {
  bool ok = true;
  double max_err = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// Central-difference check of every scalar in `params` against one
// reverse-mode pass. `loss_fn` must rebuild the forward pass from the
// current parameter values on each call.
inline GradCheckResult grad_check(ParameterSet& params,
                                  const std::function<Tensor()>& loss_fn,
                                  double eps = 1e-5, double rtol = 1e-4,
                                  double afloor = 1e-6) {
  Gradients analytic;
  {
    Tape tape;
    params.attach_all(tape);
    Tensor loss = loss_fn();
    tape.backward(loss);
    analytic = params.collect_gradients();
    params.detach_all();
  }

  GradCheckResult result;
  for (auto& [name, tensor] : params) {
    auto& data = tensor.mutable_data();
    const auto& grad = analytic.at(name);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + eps;
      const double up = loss_fn().scalar_value();
      data[i] = orig - eps;
      const double down = loss_fn().scalar_value();
      data[i] = orig;
      const double fd = (up - down) / (2.0 * eps);
      const double a = grad[i];
      const double err = std::abs(a - fd);
      const double tol = std::max(rtol * std::max(std::abs(a), std::abs(fd)),
                                  afloor);
      result.checked += 1;
      const double scaled =
          err / std::max(std::max(std::abs(a), std::abs(fd)), afloor);
      if (scaled > result.max_err) {
        result.max_err = scaled;
        result.worst = name + "[" + std::to_string(i) + "] analytic=" +
                       std::to_string(a) + " fd=" + std::to_string(fd);
      }
      if (err > tol) result.ok = false;
    }
  }
  return result;
}

}  // namespace rs2g::testing
