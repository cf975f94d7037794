#include "coherence/graph.hpp"

#include <algorithm>
#include <cmath>

#include "coherence/error.hpp"

namespace coherence {
namespace {

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

Graph::Graph(const ParamStore& params) : params_(params) { nodes_.reserve(256); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Graph::value(Var v) const {
  if (!v.valid() || v.index >= nodes_.size()) throw Error("invalid graph variable");
  return val(v.index);
}

const std::vector<double>& Graph::softmax_of(Var xent) const {
  const Node& n = nodes_.at(xent.index);
  if (n.op != Op::kSoftmaxXent) throw Error("softmax_of on a non-softmax node");
  return n.cache;
}

void Graph::require_vector(Var v, const char* label) const {
  if (val(v.index).shape.size() != 1) {
    throw ShapeError(std::string(label) + ": expected a vector, got shape " +
                     shape_string(val(v.index).shape));
  }
}

Var Graph::param(std::string_view name) {
  std::string key(name);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var{it->second};
  const Parameter& p = params_.at(name);
  Node n;
  n.op = Op::kParam;
  n.needs_grad = true;
  n.external = &p.value;
  n.name = key;
  Var v = push(std::move(n));
  param_nodes_.emplace(std::move(key), v.index);
  return v;
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.own = std::move(value);
  return push(std::move(n));
}

Var Graph::constant_vector(std::span<const double> values) {
  return constant(Tensor::vector(std::vector<double>(values.begin(), values.end())));
}

Var Graph::zeros(std::size_t n) { return constant(Tensor(Shape{n}, 0.0)); }

Var Graph::matvec(Var w, Var x) {
  const Tensor& W = val(w.index);
  const Tensor& X = val(x.index);
  if (W.shape.size() != 2 || X.shape.size() != 1 || W.shape[1] != X.shape[0]) {
    throw ShapeError("matvec: cannot multiply " + shape_string(W.shape) + " by " +
                     shape_string(X.shape));
  }
  const std::size_t r = W.shape[0], c = W.shape[1];
  Tensor out(Shape{r});
  const double* wp = W.data.data();
  const double* xp = X.data.data();
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    const double* row = wp + i * c;
    for (std::size_t j = 0; j < c; ++j) acc += row[j] * xp[j];
    out.data[i] = acc;
  }
  Node n;
  n.op = Op::kMatVec;
  n.a = w.index;
  n.b = x.index;
  n.needs_grad = nodes_[w.index].needs_grad || nodes_[x.index].needs_grad;
  n.own = std::move(out);
  return push(std::move(n));
}

Var Graph::affine(Var w, Var x, Var b) {
  const Tensor& W = val(w.index);
  const Tensor& X = val(x.index);
  const Tensor& B = val(b.index);
  if (W.shape.size() != 2 || X.shape.size() != 1 || W.shape[1] != X.shape[0] ||
      B.shape != Shape{W.shape[0]}) {
    throw ShapeError("affine: incompatible shapes W" + shape_string(W.shape) + " x" +
                     shape_string(X.shape) + " b" + shape_string(B.shape));
  }
  const std::size_t r = W.shape[0], c = W.shape[1];
  Tensor out(Shape{r});
  const double* wp = W.data.data();
  const double* xp = X.data.data();
  for (std::size_t i = 0; i < r; ++i) {
    double acc = B.data[i];
    const double* row = wp + i * c;
    for (std::size_t j = 0; j < c; ++j) acc += row[j] * xp[j];
    out.data[i] = acc;
  }
  Node n;
  n.op = Op::kAffine;
  n.a = w.index;
  n.b = x.index;
  n.c = b.index;
  n.needs_grad = nodes_[w.index].needs_grad || nodes_[x.index].needs_grad ||
                 nodes_[b.index].needs_grad;
  n.own = std::move(out);
  return push(std::move(n));
}

Var Graph::vecmat(Var x, Var w) {
  const Tensor& X = val(x.index);
  const Tensor& W = val(w.index);
  if (W.shape.size() != 2 || X.shape.size() != 1 || W.shape[0] != X.shape[0]) {
    throw ShapeError("vecmat: cannot multiply " + shape_string(X.shape) + " by " +
                     shape_string(W.shape));
  }
  const std::size_t r = W.shape[0], c = W.shape[1];
  Tensor out(Shape{c});
  for (std::size_t i = 0; i < r; ++i) {
    const double xi = X.data[i];
    const double* row = W.data.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) out.data[j] += xi * row[j];
  }
  Node n;
  n.op = Op::kVecMat;
  n.a = x.index;
  n.b = w.index;
  n.needs_grad = nodes_[x.index].needs_grad || nodes_[w.index].needs_grad;
  n.own = std::move(out);
  return push(std::move(n));
}

Var Graph::binary_elementwise(Op op, Var a, Var b, const char* label) {
  const Tensor& A = val(a.index);
  const Tensor& B = val(b.index);
  if (A.shape != B.shape) {
    throw ShapeError(std::string(label) + ": shape mismatch " + shape_string(A.shape) + " vs " +
                     shape_string(B.shape));
  }
  Tensor out(A.shape);
  const std::size_t size = A.size();
  for (std::size_t i = 0; i < size; ++i) {
    const double x = A.data[i], y = B.data[i];
    switch (op) {
      case Op::kAdd: out.data[i] = x + y; break;
      case Op::kSub: out.data[i] = x - y; break;
      case Op::kMul: out.data[i] = x * y; break;
      case Op::kDiv: out.data[i] = x / y; break;
      default: break;
    }
  }
  Node n;
  n.op = op;
  n.a = a.index;
  n.b = b.index;
  n.needs_grad = nodes_[a.index].needs_grad || nodes_[b.index].needs_grad;
  n.own = std::move(out);
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) { return binary_elementwise(Op::kAdd, a, b, "add"); }
Var Graph::sub(Var a, Var b) { return binary_elementwise(Op::kSub, a, b, "sub"); }
Var Graph::mul(Var a, Var b) { return binary_elementwise(Op::kMul, a, b, "mul"); }
Var Graph::div(Var a, Var b) { return binary_elementwise(Op::kDiv, a, b, "div"); }

Var Graph::unary(Op op, Var a, Tensor out) {
  Node n;
  n.op = op;
  n.a = a.index;
  n.needs_grad = nodes_[a.index].needs_grad;
  n.own = std::move(out);
  return push(std::move(n));
}

Var Graph::scale(Var a, double factor) {
  Tensor out = val(a.index);
  for (double& v : out.data) v *= factor;
  Var r = unary(Op::kScale, a, std::move(out));
  nodes_[r.index].scalar = factor;
  return r;
}

Var Graph::add_constant(Var a, double c) {
  Tensor out = val(a.index);
  for (double& v : out.data) v += c;
  return unary(Op::kAddConst, a, std::move(out));
}

Var Graph::tanh(Var a) {
  Tensor out = val(a.index);
  for (double& v : out.data) v = std::tanh(v);
  return unary(Op::kTanh, a, std::move(out));
}

Var Graph::sigmoid(Var a) {
  Tensor out = val(a.index);
  for (double& v : out.data) v = sigmoid_value(v);
  return unary(Op::kSigmoid, a, std::move(out));
}

Var Graph::softplus(Var a) {
  Tensor out = val(a.index);
  for (double& v : out.data) v = softplus_value(v);
  return unary(Op::kSoftplus, a, std::move(out));
}

Var Graph::exp(Var a) {
  Tensor out = val(a.index);
  for (double& v : out.data) v = std::exp(v);
  return unary(Op::kExp, a, std::move(out));
}

Var Graph::log(Var a) {
  Tensor out = val(a.index);
  for (double& v : out.data) {
    if (!(v > 0.0)) throw Error("log of non-positive value");
    v = std::log(v);
  }
  return unary(Op::kLog, a, std::move(out));
}

Var Graph::sqrt(Var a) {
  Tensor out = val(a.index);
  for (double& v : out.data) {
    if (!(v > 0.0)) throw Error("sqrt of non-positive value");
    v = std::sqrt(v);
  }
  return unary(Op::kSqrt, a, std::move(out));
}

Var Graph::square(Var a) {
  Tensor out = val(a.index);
  for (double& v : out.data) v = v * v;
  return unary(Op::kSquare, a, std::move(out));
}

Var Graph::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::size_t total = 0;
  bool needs = false;
  for (Var p : parts) {
    if (val(p.index).shape.size() > 1) require_vector(p, "concat");
    total += val(p.index).size();
    needs = needs || nodes_[p.index].needs_grad;
  }
  Tensor out(Shape{total});
  std::size_t off = 0;
  Node n;
  n.op = Op::kConcat;
  for (Var p : parts) {
    const Tensor& t = val(p.index);
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += t.size();
    n.parts.push_back(p.index);
  }
  n.needs_grad = needs;
  n.own = std::move(out);
  return push(std::move(n));
}

Var Graph::slice(Var a, std::size_t offset, std::size_t length) {
  require_vector(a, "slice");
  const Tensor& A = val(a.index);
  if (offset + length > A.size() || length == 0) {
    throw ShapeError("slice: range [" + std::to_string(offset) + "," +
                     std::to_string(offset + length) + ") outside " + shape_string(A.shape));
  }
  Tensor out(Shape{length});
  std::copy_n(A.data.begin() + static_cast<std::ptrdiff_t>(offset), length, out.data.begin());
  Var r = unary(Op::kSlice, a, std::move(out));
  nodes_[r.index].aux = offset;
  return r;
}

Var Graph::sum(Var a) {
  const Tensor& A = val(a.index);
  double s = 0.0;
  for (double v : A.data) s += v;
  return unary(Op::kSum, a, Tensor::scalar(s));
}

Var Graph::row(Var table, std::size_t index) {
  const Tensor& T = val(table.index);
  if (T.shape.size() != 2 || index >= T.shape[0]) {
    throw ShapeError("row: index " + std::to_string(index) + " outside " + shape_string(T.shape));
  }
  auto r = T.row(index);
  Var v = unary(Op::kRow, table, Tensor(Shape{r.size()}, std::vector<double>(r.begin(), r.end())));
  nodes_[v.index].aux = index;
  return v;
}

Var Graph::softmax_xent(Var logits, std::size_t target) {
  require_vector(logits, "softmax_xent");
  const Tensor& L = val(logits.index);
  if (target >= L.size()) {
    throw ShapeError("softmax_xent: target " + std::to_string(target) + " outside " +
                     shape_string(L.shape));
  }
  const double mx = *std::max_element(L.data.begin(), L.data.end());
  std::vector<double> probs(L.size());
  double z = 0.0;
  for (std::size_t i = 0; i < L.size(); ++i) {
    probs[i] = std::exp(L.data[i] - mx);
    z += probs[i];
  }
  for (double& p : probs) p /= z;
  const double loss = mx + std::log(z) - L.data[target];
  Var v = unary(Op::kSoftmaxXent, logits, Tensor::scalar(loss));
  nodes_[v.index].aux = target;
  nodes_[v.index].cache = std::move(probs);
  return v;
}

Var Graph::bce_with_logit(Var logit, double label) {
  const Tensor& L = val(logit.index);
  if (L.size() != 1) throw ShapeError("bce_with_logit: logit must have one element");
  const double x = L.data[0];
  Var v = unary(Op::kBceLogit, logit, Tensor::scalar(softplus_value(x) - label * x));
  nodes_[v.index].scalar = label;
  return v;
}

std::vector<double>& Graph::grad_of(std::uint32_t i) {
  Node& n = nodes_[i];
  if (n.grad.empty()) n.grad.assign(val(i).size(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (backward_done_) throw Error("backward called twice on the same graph");
  backward_done_ = true;
  if (val(loss.index).size() != 1) throw ShapeError("backward: loss must be a scalar");
  grad_of(loss.index)[0] = 1.0;

  for (std::int64_t idx = loss.index; idx >= 0; --idx) {
    const auto i = static_cast<std::uint32_t>(idx);
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    const std::vector<double>& g = n.grad;
    const Tensor& out = val(i);
    auto wants = [&](std::uint32_t k) { return k != UINT32_MAX && nodes_[k].needs_grad; };

    switch (n.op) {
      case Op::kParam:
      case Op::kConstant:
        break;
      case Op::kMatVec:
      case Op::kAffine: {
        const Tensor& W = val(n.a);
        const Tensor& X = val(n.b);
        const std::size_t r = W.shape[0], c = W.shape[1];
        if (wants(n.a)) {
          auto& gw = grad_of(n.a);
          for (std::size_t row = 0; row < r; ++row) {
            const double gr = g[row];
            if (gr == 0.0) continue;
            double* dst = gw.data() + row * c;
            for (std::size_t j = 0; j < c; ++j) dst[j] += gr * X.data[j];
          }
        }
        if (wants(n.b)) {
          auto& gx = grad_of(n.b);
          for (std::size_t row = 0; row < r; ++row) {
            const double gr = g[row];
            if (gr == 0.0) continue;
            const double* src = W.data.data() + row * c;
            for (std::size_t j = 0; j < c; ++j) gx[j] += gr * src[j];
          }
        }
        if (n.op == Op::kAffine && wants(n.c)) {
          auto& gb = grad_of(n.c);
          for (std::size_t row = 0; row < r; ++row) gb[row] += g[row];
        }
        break;
      }
      case Op::kVecMat: {
        const Tensor& X = val(n.a);
        const Tensor& W = val(n.b);
        const std::size_t r = W.shape[0], c = W.shape[1];
        if (wants(n.a)) {
          auto& gx = grad_of(n.a);
          for (std::size_t row = 0; row < r; ++row) {
            const double* src = W.data.data() + row * c;
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j) acc += src[j] * g[j];
            gx[row] += acc;
          }
        }
        if (wants(n.b)) {
          auto& gw = grad_of(n.b);
          for (std::size_t row = 0; row < r; ++row) {
            const double xr = X.data[row];
            double* dst = gw.data() + row * c;
            for (std::size_t j = 0; j < c; ++j) dst[j] += xr * g[j];
          }
        }
        break;
      }
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kDiv: {
        const Tensor& A = val(n.a);
        const Tensor& B = val(n.b);
        if (wants(n.a)) {
          auto& ga = grad_of(n.a);
          for (std::size_t k = 0; k < g.size(); ++k) {
            switch (n.op) {
              case Op::kMul: ga[k] += g[k] * B.data[k]; break;
              case Op::kDiv: ga[k] += g[k] / B.data[k]; break;
              default: ga[k] += g[k]; break;
            }
          }
        }
        if (wants(n.b)) {
          auto& gb = grad_of(n.b);
          for (std::size_t k = 0; k < g.size(); ++k) {
            switch (n.op) {
              case Op::kAdd: gb[k] += g[k]; break;
              case Op::kSub: gb[k] -= g[k]; break;
              case Op::kMul: gb[k] += g[k] * A.data[k]; break;
              case Op::kDiv: gb[k] -= g[k] * A.data[k] / (B.data[k] * B.data[k]); break;
              default: break;
            }
          }
        }
        break;
      }
      case Op::kScale:
      case Op::kAddConst:
      case Op::kTanh:
      case Op::kSigmoid:
      case Op::kSoftplus:
      case Op::kExp:
      case Op::kLog:
      case Op::kSqrt:
      case Op::kSquare: {
        if (!wants(n.a)) break;
        const Tensor& A = val(n.a);
        auto& ga = grad_of(n.a);
        for (std::size_t k = 0; k < g.size(); ++k) {
          double d = 1.0;
          switch (n.op) {
            case Op::kScale: d = n.scalar; break;
            case Op::kAddConst: d = 1.0; break;
            case Op::kTanh: d = 1.0 - out.data[k] * out.data[k]; break;
            case Op::kSigmoid: d = out.data[k] * (1.0 - out.data[k]); break;
            case Op::kSoftplus: d = sigmoid_value(A.data[k]); break;
            case Op::kExp: d = out.data[k]; break;
            case Op::kLog: d = 1.0 / A.data[k]; break;
            case Op::kSqrt: d = 0.5 / out.data[k]; break;
            case Op::kSquare: d = 2.0 * A.data[k]; break;
            default: break;
          }
          ga[k] += g[k] * d;
        }
        break;
      }
      case Op::kConcat: {
        std::size_t off = 0;
        for (std::uint32_t p : n.parts) {
          const std::size_t len = val(p).size();
          if (wants(p)) {
            auto& gp = grad_of(p);
            for (std::size_t k = 0; k < len; ++k) gp[k] += g[off + k];
          }
          off += len;
        }
        break;
      }
      case Op::kSlice: {
        if (!wants(n.a)) break;
        auto& ga = grad_of(n.a);
        for (std::size_t k = 0; k < g.size(); ++k) ga[n.aux + k] += g[k];
        break;
      }
      case Op::kSum: {
        if (!wants(n.a)) break;
        auto& ga = grad_of(n.a);
        for (double& v : ga) v += g[0];
        break;
      }
      case Op::kRow: {
        if (!wants(n.a)) break;
        auto& ga = grad_of(n.a);
        const std::size_t c = val(n.a).cols();
        for (std::size_t k = 0; k < c; ++k) ga[n.aux * c + k] += g[k];
        break;
      }
      case Op::kSoftmaxXent: {
        if (!wants(n.a)) break;
        auto& ga = grad_of(n.a);
        for (std::size_t k = 0; k < n.cache.size(); ++k) {
          ga[k] += g[0] * (n.cache[k] - (k == n.aux ? 1.0 : 0.0));
        }
        break;
      }
      case Op::kBceLogit: {
        if (!wants(n.a)) break;
        auto& ga = grad_of(n.a);
        ga[0] += g[0] * (sigmoid_value(val(n.a).data[0]) - n.scalar);
        break;
      }
    }
  }
}

Gradients Graph::gradients() const {
  Gradients grads = params_.zero_gradients();
  for (const auto& [name, index] : param_nodes_) {
    const Node& n = nodes_[index];
    if (n.grad.empty()) continue;
    std::copy(n.grad.begin(), n.grad.end(), grads.at(name).data.begin());
  }
  return grads;
}

void Graph::accumulate_gradients(Gradients& into, double weight) const {
  for (const auto& [name, index] : param_nodes_) {
    const Node& n = nodes_[index];
    if (n.grad.empty()) continue;
    auto it = into.find(name);
    if (it == into.end()) {
      it = into.emplace(name, Tensor(val(index).shape, 0.0)).first;
    }
    auto& dst = it->second.data;
    for (std::size_t k = 0; k < n.grad.size(); ++k) dst[k] += weight * n.grad[k];
  }
}

}  // namespace coherence
