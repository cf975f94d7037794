#pragma once

#include <map>
#include <random>
#include <string>
#include <string_view>

#include "coherence/tensor.hpp"

namespace coherence {

struct Parameter {
  Tensor value;
  Tensor accum;  // running sum of squared gradients, same shape as value
  bool trainable = true;
};

using Gradients = std::map<std::string, Tensor>;

// Named parameters plus AdaGrad state. Iteration order is by name, which keeps
// serialization and random initialization deterministic.
class ParamStore {
 public:
  Parameter& add(const std::string& name, Tensor value, bool trainable = true);
  // Uniform(-scale, scale) initialization.
  Parameter& add_uniform(const std::string& name, Shape shape, double scale, std::mt19937_64& rng);
  Parameter& add_zeros(const std::string& name, Shape shape);

  bool contains(std::string_view name) const;
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  const Tensor& value(std::string_view name) const { return at(name).value; }
  Tensor& value(std::string_view name) { return at(name).value; }

  std::map<std::string, Parameter, std::less<>>& items() { return params_; }
  const std::map<std::string, Parameter, std::less<>>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t coordinate_count() const;

  void reset_accumulators();
  Gradients zero_gradients() const;

 private:
  std::map<std::string, Parameter, std::less<>> params_;
};

inline constexpr double kDefaultInitScale = 0.08;
inline constexpr double kDefaultClipNorm = 5.0;
inline constexpr double kAdagradEpsilon = 1e-8;

double global_norm(const Gradients& grads);

// Adds `other` into `into` (missing entries are created).
void accumulate(Gradients& into, const Gradients& other, double weight = 1.0);

// Global-norm clipping followed by the AdaGrad update
//   accum += g^2;  p -= lr * g / sqrt(accum + 1e-8).
// Non-trainable parameters are left untouched. clip <= 0 disables clipping.
void adagrad_step(ParamStore& params, const Gradients& grads, double learning_rate,
                  double clip = kDefaultClipNorm);

}  // namespace coherence
