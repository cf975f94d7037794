#include "coherence/params.hpp"

#include <cmath>

#include "coherence/error.hpp"

namespace coherence {

Parameter& ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  if (params_.count(name)) throw Error("duplicate parameter: " + name);
  Parameter p;
  p.accum = Tensor(value.shape, 0.0);
  p.value = std::move(value);
  p.trainable = trainable;
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::add_uniform(const std::string& name, Shape shape, double scale,
                                   std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& v : t.data) v = dist(rng);
  return add(name, std::move(t));
}

Parameter& ParamStore::add_zeros(const std::string& name, Shape shape) {
  return add(name, Tensor(std::move(shape), 0.0));
}

bool ParamStore::contains(std::string_view name) const { return params_.find(name) != params_.end(); }

Parameter& ParamStore::at(std::string_view name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter: " + std::string(name));
  return it->second;
}

const Parameter& ParamStore::at(std::string_view name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter: " + std::string(name));
  return it->second;
}

std::size_t ParamStore::coordinate_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

void ParamStore::reset_accumulators() {
  for (auto& [name, p] : params_) p.accum = Tensor(p.value.shape, 0.0);
}

Gradients ParamStore::zero_gradients() const {
  Gradients g;
  for (const auto& [name, p] : params_) g.emplace(name, Tensor(p.value.shape, 0.0));
  return g;
}

double global_norm(const Gradients& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.data) sq += v * v;
  return std::sqrt(sq);
}

void accumulate(Gradients& into, const Gradients& other, double weight) {
  for (const auto& [name, g] : other) {
    auto it = into.find(name);
    if (it == into.end()) {
      Tensor scaled = g;
      for (double& v : scaled.data) v *= weight;
      into.emplace(name, std::move(scaled));
      continue;
    }
    if (it->second.shape != g.shape) throw ShapeError("gradient shape mismatch for " + name);
    for (std::size_t i = 0; i < g.size(); ++i) it->second.data[i] += weight * g.data[i];
  }
}

void adagrad_step(ParamStore& params, const Gradients& grads, double learning_rate, double clip) {
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  double factor = 1.0;
  if (clip > 0.0) {
    const double norm = global_norm(grads);
    if (norm > clip) factor = clip / norm;
  }
  for (const auto& [name, g] : grads) {
    Parameter& p = params.at(name);
    if (!p.trainable) continue;
    if (p.value.shape != g.shape) {
      throw ShapeError("gradient for " + name + " has shape " + shape_string(g.shape) +
                       ", parameter has " + shape_string(p.value.shape));
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g.data[i] * factor;
      p.accum.data[i] += gi * gi;
      p.value.data[i] -= learning_rate * gi / std::sqrt(p.accum.data[i] + kAdagradEpsilon);
    }
  }
}

}  // namespace coherence
