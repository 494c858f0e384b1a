#include "rs2g/params.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace rs2g {

Tensor ParameterSet::add(const std::string& name, Tensor tensor) {
  if (name.empty()) throw std::invalid_argument("ParameterSet: empty name");
  if (params_.count(name)) {
    throw std::invalid_argument("ParameterSet: duplicate name '" + name + "'");
  }
  tensor.set_requires_grad(true);
  params_.emplace(name, tensor);
  return tensor;
}

bool ParameterSet::contains(const std::string& name) const {
  return params_.count(name) > 0;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw std::invalid_argument("ParameterSet: unknown parameter '" + name +
                                "'");
  }
  return it->second;
}

Tensor& ParameterSet::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw std::invalid_argument("ParameterSet: unknown parameter '" + name +
                                "'");
  }
  return it->second;
}

std::size_t ParameterSet::total_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void ParameterSet::attach_all(Tape& tape) {
  for (auto& [name, t] : params_) t.attach(tape);
}

void ParameterSet::detach_all() {
  for (auto& [name, t] : params_) t.detach();
}

Gradients ParameterSet::collect_gradients() const {
  Gradients grads;
  for (const auto& [name, t] : params_) {
    if (t.attached()) {
      grads[name] = t.tape()->grad(t.node());
    } else {
      grads[name] = std::vector<double>(t.numel(), 0.0);
    }
  }
  return grads;
}

void ParameterSet::save_json(const std::string& path) const {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [name, t] : params_) {
    doc[name] = {{"shape", t.shape()}, {"data", t.data()}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << doc.dump(2) << "\n";
}

ParameterSet ParameterSet::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("parse error in '" + path + "': " + e.what());
  }
  ParameterSet params;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    Shape shape = it.value().at("shape").get<Shape>();
    std::vector<double> data = it.value().at("data").get<std::vector<double>>();
    params.add(it.key(), Tensor(std::move(shape), std::move(data), true));
  }
  return params;
}

void Optimizer::step(ParameterSet& params, const Gradients& grads) {
  step_count_ += 1;

  for (const auto& [name, g] : grads) {
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw std::runtime_error("optimizer: non-finite gradient in '" + name +
                                 "'");
      }
    }
  }

  double scale = 1.0;
  if (options_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& [name, g] : grads) {
      for (double v : g) sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (norm > options_.clip_norm) scale = options_.clip_norm / norm;
  }

  for (auto& [name, t] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) continue;
    const auto& g = it->second;
    auto& w = t.mutable_data();
    if (g.size() != w.size()) {
      throw std::invalid_argument("optimizer: gradient size mismatch for '" +
                                  name + "'");
    }
    if (!options_.adaptive) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] -= options_.lr * scale * g[i];
      }
    } else {
      auto& m = first_moment_[name];
      auto& v = second_moment_[name];
      m.resize(w.size(), 0.0);
      v.resize(w.size(), 0.0);
      const double bc1 = 1.0 - std::pow(options_.beta1, step_count_);
      const double bc2 = 1.0 - std::pow(options_.beta2, step_count_);
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = scale * g[i];
        m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * gi;
        v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * gi * gi;
        const double mh = m[i] / bc1;
        const double vh = v[i] / bc2;
        w[i] -= options_.lr * mh / (std::sqrt(vh) + options_.eps);
      }
    }
  }
}

}  // namespace rs2g
