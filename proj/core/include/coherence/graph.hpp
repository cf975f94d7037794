#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coherence/params.hpp"
#include "coherence/tensor.hpp"

namespace coherence {

// Handle to a node of a Graph.
struct Var {
  std::uint32_t index = UINT32_MAX;
  bool valid() const { return index != UINT32_MAX; }
};

// Tape for reverse-mode differentiation over vectors and matrices.
//
// A Graph borrows a ParamStore; parameter nodes read the stored values without
// copying, so the store must outlive the graph and must not be mutated while
// the graph is alive. Gradients land in a separate map and never touch the
// store.
class Graph {
 public:
  explicit Graph(const ParamStore& params);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var param(std::string_view name);
  Var constant(Tensor value);
  Var constant_vector(std::span<const double> values);
  Var zeros(std::size_t n);

  // W{r,c} * x{c} (+ b{r}).
  Var matvec(Var w, Var x);
  Var affine(Var w, Var x, Var b);
  // x{r}^T * W{r,c}, a vector of length c.
  Var vecmat(Var x, Var w);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var a, double factor);
  Var add_constant(Var a, double c);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sqrt(Var a);
  Var square(Var a);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }
  Var slice(Var a, std::size_t offset, std::size_t length);
  Var sum(Var a);
  // Row `index` of a matrix, as a vector.
  Var row(Var table, std::size_t index);
  // -log softmax(logits)[target]; a scalar.
  Var softmax_xent(Var logits, std::size_t target);
  // Binary cross-entropy of sigmoid(logit) against label in {0,1}; a scalar.
  Var bce_with_logit(Var logit, double label);

  const Tensor& value(Var v) const;
  double scalar(Var v) const { return value(v).item(); }
  // Softmax probabilities cached by a softmax_xent node.
  const std::vector<double>& softmax_of(Var xent) const;
  const Shape& shape(Var v) const { return value(v).shape; }
  std::size_t node_count() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates. May be called once.
  void backward(Var loss);
  // Gradient for every parameter in the store; zero where unreachable.
  Gradients gradients() const;
  // Adds weight * gradient into `into` for parameters reached by backward.
  void accumulate_gradients(Gradients& into, double weight = 1.0) const;

 private:
  enum class Op : std::uint8_t {
    kParam, kConstant, kMatVec, kAffine, kVecMat, kAdd, kSub, kMul, kDiv, kScale, kAddConst, kTanh,
    kSigmoid, kSoftplus, kExp, kLog, kSqrt, kSquare, kConcat, kSlice, kSum, kRow, kSoftmaxXent,
    kBceLogit
  };

  struct Node {
    Op op;
    bool needs_grad = false;
    std::uint32_t a = UINT32_MAX;
    std::uint32_t b = UINT32_MAX;
    std::uint32_t c = UINT32_MAX;
    std::size_t aux = 0;
    double scalar = 0.0;
    const Tensor* external = nullptr;  // parameter value
    Tensor own;
    std::vector<double> grad;
    std::vector<double> cache;  // softmax probabilities
    std::vector<std::uint32_t> parts;
    std::string name;
  };

  const Tensor& val(std::uint32_t i) const {
    const Node& n = nodes_[i];
    return n.external ? *n.external : n.own;
  }
  Var push(Node node);
  Var unary(Op op, Var a, Tensor out);
  Var binary_elementwise(Op op, Var a, Var b, const char* label);
  std::vector<double>& grad_of(std::uint32_t i);
  void require_vector(Var v, const char* label) const;

  const ParamStore& params_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::uint32_t> param_nodes_;
  bool backward_done_ = false;
};

}  // namespace coherence
