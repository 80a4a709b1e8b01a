#include "opo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "opo/kernels.hpp"
#include "opo/rng.hpp"

namespace opo::ad {
namespace {

thread_local int g_no_grad_depth = 0;

std::int64_t numel_of(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (const int e : shape) n *= e;
  return n;
}

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

void check_shape_data(const std::vector<int>& shape,
                      const std::vector<double>& data) {
  for (const int e : shape) {
    if (e <= 0) fail("tensor extent must be positive, got " + shape_str(shape));
  }
  if (numel_of(shape) != static_cast<std::int64_t>(data.size())) {
    fail("data length " + std::to_string(data.size()) +
         " does not match shape " + shape_str(shape));
  }
}

// Builds the result node. Records on the inputs' tape when gradients are
// enabled and some input requires them; otherwise the result is a constant
// and input references are dropped.
Tensor make_op(std::vector<int> shape, std::vector<double> value,
               std::vector<NodePtr> inputs, std::function<void(Node&)> back) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);

  Tape* tape = nullptr;
  bool rg = false;
  for (const auto& in : inputs) {
    if (in->tape != nullptr) {
      if (tape != nullptr && tape != in->tape) {
        fail("operation mixes tensors from two tapes");
      }
      tape = in->tape;
    }
    rg = rg || in->requires_grad;
  }
  if (grad_enabled() && rg && tape != nullptr) {
    node->inputs = std::move(inputs);
    node->requires_grad = true;
    node->tape = tape;
    node->back = std::move(back);
    tape->record(node);
  }
  return Tensor(node);
}

const kernels::Ops& K() { return kernels::active(); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
         " vs " + shape_str(b.shape()));
  }
}

void check_axis(const Tensor& a, int axis, const char* op) {
  if (axis < 0 || axis >= static_cast<int>(a.shape().size())) {
    fail(std::string(op) + ": axis " + std::to_string(axis) +
         " out of range for " + shape_str(a.shape()));
  }
}

// outer / len / inner split around `axis`
struct AxisSplit {
  std::int64_t outer = 1, len = 1, inner = 1;
};
AxisSplit split_axis(const std::vector<int>& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (int i = axis + 1; i < static_cast<int>(shape.size()); ++i)
    s.inner *= shape[i];
  return s;
}

void transpose_into(const double* src, std::int64_t rows, std::int64_t cols,
                    double* dst) {
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

Tensor elementwise(const Tensor& a, const char* /*op*/,
                   const std::function<double(double)>& f,
                   // dgrad(x, y) -> dy/dx, given input and output values
                   const std::function<double(double, double)>& df) {
  const auto n = static_cast<std::size_t>(a.size());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a.value()[i]);
  return make_op(a.shape(), std::move(out), {a.node()}, [df](Node& self) {
    const auto& x = self.inputs[0];
    if (!x->requires_grad) return;
    const std::size_t n = self.value.size();
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
      g[i] = self.grad[i] * df(x->value[i], self.value[i]);
    x->accumulate(g);
  });
}

}  // namespace

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

void Node::accumulate(std::span<const double> g) {
  if (!requires_grad) return;
  if (g.size() != value.size()) {
    fail("gradient size " + std::to_string(g.size()) +
         " does not match value size " + std::to_string(value.size()));
  }
  if (grad.empty()) grad.assign(value.size(), 0.0);
  K().add(grad.data(), g.data(), grad.data(), grad.size());
}

double Tensor::item() const {
  if (size() != 1) fail("item() on non-scalar tensor " + shape_str(shape()));
  return node_->value[0];
}

Tensor Tape::leaf(std::vector<int> shape, std::vector<double> data,
                  bool requires_grad, std::string name) {
  check_shape_data(shape, data);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->tape = this;
  node->requires_grad = requires_grad;
  node->leaf = true;
  node->name = std::move(name);
  return Tensor(node);
}

void Tape::backward(const Tensor& root) {
  if (!root.defined()) fail("backward: undefined root");
  if (root.size() != 1) {
    fail("backward: root must be scalar, got " + shape_str(root.shape()));
  }
  // A detached constant root depends on nothing: every gradient is zero.
  if (root.node()->tape == nullptr && !root.node()->requires_grad) return;
  if (root.node()->tape != this) fail("backward: root not on this tape");
  root.node()->grad.assign(1, 1.0);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    Node& n = **it;
    if (n.grad.empty() || !n.back) continue;
    n.back(n);
  }
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

Tensor constant(std::vector<int> shape, std::vector<double> data) {
  check_shape_data(shape, data);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  return Tensor(node);
}

Tensor scalar(double v) { return constant({1}, {v}); }

Tensor zeros(std::vector<int> shape) {
  const auto n = static_cast<std::size_t>(numel_of(shape));
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor ones(std::vector<int> shape) {
  const auto n = static_cast<std::size_t>(numel_of(shape));
  return constant(std::move(shape), std::vector<double>(n, 1.0));
}

Tensor detach(const Tensor& t) {
  return constant(t.shape(), std::vector<double>(t.value().begin(), t.value().end()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.shape()[1] != b.shape()[0]) {
    fail("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
         shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n);
  K().matmul(a.value().data(), b.value().data(), out.data(), m, k, n, false);
  return make_op({static_cast<int>(m), static_cast<int>(n)}, std::move(out),
                 {a.node(), b.node()}, [m, k, n](Node& self) {
                   const auto& a = self.inputs[0];
                   const auto& b = self.inputs[1];
                   if (a->requires_grad) {
                     // dA = dC * B^T
                     std::vector<double> bt(k * n);
                     transpose_into(b->value.data(), k, n, bt.data());
                     std::vector<double> da(m * k);
                     K().matmul(self.grad.data(), bt.data(), da.data(), m, n, k,
                                false);
                     a->accumulate(da);
                   }
                   if (b->requires_grad) {
                     // dB = A^T * dC
                     std::vector<double> at(m * k);
                     transpose_into(a->value.data(), m, k, at.data());
                     std::vector<double> db(k * n);
                     K().matmul(at.data(), self.grad.data(), db.data(), k, m, n,
                                false);
                     b->accumulate(db);
                   }
                 });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  K().add(a.value().data(), b.value().data(), out.data(), out.size());
  return make_op(a.shape(), std::move(out), {a.node(), b.node()},
                 [](Node& self) {
                   self.inputs[0]->accumulate(self.grad);
                   self.inputs[1]->accumulate(self.grad);
                 });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  K().sub(a.value().data(), b.value().data(), out.data(), out.size());
  return make_op(a.shape(), std::move(out), {a.node(), b.node()},
                 [](Node& self) {
                   self.inputs[0]->accumulate(self.grad);
                   if (self.inputs[1]->requires_grad) {
                     std::vector<double> g(self.grad.size());
                     K().scale(self.grad.data(), -1.0, g.data(), g.size());
                     self.inputs[1]->accumulate(g);
                   }
                 });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "hadamard");
  std::vector<double> out(a.size());
  K().mul(a.value().data(), b.value().data(), out.data(), out.size());
  return make_op(a.shape(), std::move(out), {a.node(), b.node()},
                 [](Node& self) {
                   const auto& a = self.inputs[0];
                   const auto& b = self.inputs[1];
                   std::vector<double> g(self.grad.size());
                   if (a->requires_grad) {
                     K().mul(self.grad.data(), b->value.data(), g.data(), g.size());
                     a->accumulate(g);
                   }
                   if (b->requires_grad) {
                     K().mul(self.grad.data(), a->value.data(), g.data(), g.size());
                     b->accumulate(g);
                   }
                 });
}

Tensor scalar_mul(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  K().scale(a.value().data(), s, out.data(), out.size());
  return make_op(a.shape(), std::move(out), {a.node()}, [s](Node& self) {
    std::vector<double> g(self.grad.size());
    K().scale(self.grad.data(), s, g.data(), g.size());
    self.inputs[0]->accumulate(g);
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (const double v : a.value()) acc += v;
  return make_op({1}, {acc}, {a.node()}, [](Node& self) {
    std::vector<double> g(self.inputs[0]->value.size(), self.grad[0]);
    self.inputs[0]->accumulate(g);
  });
}

Tensor sum_axis(const Tensor& a, int axis) {
  check_axis(a, axis, "sum_axis");
  const AxisSplit s = split_axis(a.shape(), axis);
  std::vector<int> oshape;
  for (int i = 0; i < static_cast<int>(a.shape().size()); ++i)
    if (i != axis) oshape.push_back(a.shape()[i]);
  if (oshape.empty()) oshape = {1};
  std::vector<double> out(s.outer * s.inner, 0.0);
  const double* x = a.value().data();
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t l = 0; l < s.len; ++l)
      K().add(out.data() + o * s.inner, x + (o * s.len + l) * s.inner,
              out.data() + o * s.inner, s.inner);
  return make_op(std::move(oshape), std::move(out), {a.node()}, [s](Node& self) {
    std::vector<double> g(self.inputs[0]->value.size());
    for (std::int64_t o = 0; o < s.outer; ++o)
      for (std::int64_t l = 0; l < s.len; ++l)
        std::copy_n(self.grad.data() + o * s.inner, s.inner,
                    g.data() + (o * s.len + l) * s.inner);
    self.inputs[0]->accumulate(g);
  });
}

Tensor mean(const Tensor& a) {
  return scalar_mul(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor mean_axis(const Tensor& a, int axis) {
  check_axis(a, axis, "mean_axis");
  return scalar_mul(sum_axis(a, axis), 1.0 / a.shape()[axis]);
}

Tensor exp(const Tensor& a) {
  return elementwise(
      a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (const double v : a.value()) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      fail("log: input must be finite and positive, got " + std::to_string(v));
    }
  }
  return elementwise(
      a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor sigmoid(const Tensor& a) {
  return elementwise(
      a, "sigmoid",
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  const auto n = static_cast<std::size_t>(a.size());
  std::vector<double> out(n);
  K().relu(a.value().data(), out.data(), n);
  return make_op(a.shape(), std::move(out), {a.node()}, [](Node& self) {
    const auto& x = self.inputs[0]->value;
    std::vector<double> g(self.grad.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] = x[i] > 0.0 ? self.grad[i] : 0.0;
    self.inputs[0]->accumulate(g);
  });
}

Tensor softplus(const Tensor& a) {
  return elementwise(
      a, "softplus",
      [](double x) {
        if (x > 35.0) return x;
        if (x < -35.0) return std::exp(x);
        return std::log1p(std::exp(x));
      },
      [](double x, double) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Tensor square(const Tensor& a) {
  return elementwise(
      a, "square", [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  for (const double v : a.value()) {
    if (v < 0.0 || !std::isfinite(v)) {
      fail("sqrt: input must be finite and non-negative, got " +
           std::to_string(v));
    }
  }
  const auto n = static_cast<std::size_t>(a.size());
  std::vector<double> out(n);
  K().sqrt(a.value().data(), out.data(), n);
  return make_op(a.shape(), std::move(out), {a.node()}, [](Node& self) {
    std::vector<double> g(self.grad.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] = self.grad[i] * 0.5 / self.value[i];
    self.inputs[0]->accumulate(g);
  });
}

Tensor softmax(const Tensor& a, int axis) {
  check_axis(a, axis, "softmax");
  const AxisSplit s = split_axis(a.shape(), axis);
  std::vector<double> out(a.size());
  const double* x = a.value().data();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t i = 0; i < s.inner; ++i) {
      const auto at = [&](std::int64_t l) {
        return (o * s.len + l) * s.inner + i;
      };
      double mx = x[at(0)];
      for (std::int64_t l = 1; l < s.len; ++l) mx = std::max(mx, x[at(l)]);
      double denom = 0.0;
      for (std::int64_t l = 0; l < s.len; ++l) {
        const double e = std::exp(x[at(l)] - mx);
        out[at(l)] = e;
        denom += e;
      }
      for (std::int64_t l = 0; l < s.len; ++l) out[at(l)] /= denom;
    }
  }
  return make_op(a.shape(), std::move(out), {a.node()}, [s](Node& self) {
    std::vector<double> g(self.grad.size());
    for (std::int64_t o = 0; o < s.outer; ++o) {
      for (std::int64_t i = 0; i < s.inner; ++i) {
        const auto at = [&](std::int64_t l) {
          return (o * s.len + l) * s.inner + i;
        };
        double dot = 0.0;
        for (std::int64_t l = 0; l < s.len; ++l)
          dot += self.grad[at(l)] * self.value[at(l)];
        for (std::int64_t l = 0; l < s.len; ++l)
          g[at(l)] = self.value[at(l)] * (self.grad[at(l)] - dot);
      }
    }
    self.inputs[0]->accumulate(g);
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) fail("concat: no inputs");
  check_axis(parts[0], axis, "concat");
  const auto rank = parts[0].shape().size();
  std::vector<int> oshape = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    if (p.shape().size() != rank) fail("concat: rank mismatch");
    for (std::size_t i = 0; i < rank; ++i) {
      if (static_cast<int>(i) != axis && p.shape()[i] != oshape[i]) {
        fail("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
             shape_str(oshape));
      }
    }
    total += p.shape()[axis];
  }
  oshape[axis] = total;

  const AxisSplit so = split_axis(oshape, axis);
  std::vector<double> out(numel_of(oshape));
  std::vector<NodePtr> inputs;
  std::vector<std::int64_t> lens;
  std::int64_t off = 0;
  for (const auto& p : parts) {
    const AxisSplit sp = split_axis(p.shape(), axis);
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      std::copy_n(p.value().data() + o * sp.len * sp.inner, sp.len * sp.inner,
                  out.data() + (o * so.len + off) * so.inner);
    }
    off += sp.len;
    inputs.push_back(p.node());
    lens.push_back(sp.len);
  }
  return make_op(std::move(oshape), std::move(out), std::move(inputs),
                 [so, lens](Node& self) {
                   std::int64_t off = 0;
                   for (std::size_t pi = 0; pi < self.inputs.size(); ++pi) {
                     const auto& in = self.inputs[pi];
                     const std::int64_t len = lens[pi];
                     if (in->requires_grad) {
                       std::vector<double> g(in->value.size());
                       for (std::int64_t o = 0; o < so.outer; ++o) {
                         std::copy_n(
                             self.grad.data() + (o * so.len + off) * so.inner,
                             len * so.inner, g.data() + o * len * so.inner);
                       }
                       in->accumulate(g);
                     }
                     off += len;
                   }
                 });
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
  check_axis(a, axis, "slice");
  if (start < 0 || len <= 0 || start + len > a.shape()[axis]) {
    fail("slice: range [" + std::to_string(start) + "," +
         std::to_string(start + len) + ") invalid for axis extent " +
         std::to_string(a.shape()[axis]));
  }
  const AxisSplit s = split_axis(a.shape(), axis);
  std::vector<int> oshape = a.shape();
  oshape[axis] = len;
  std::vector<double> out(s.outer * len * s.inner);
  for (std::int64_t o = 0; o < s.outer; ++o) {
    std::copy_n(a.value().data() + (o * s.len + start) * s.inner,
                len * s.inner, out.data() + o * len * s.inner);
  }
  return make_op(std::move(oshape), std::move(out), {a.node()},
                 [s, start, len](Node& self) {
                   std::vector<double> g(self.inputs[0]->value.size(), 0.0);
                   for (std::int64_t o = 0; o < s.outer; ++o) {
                     std::copy_n(self.grad.data() + o * len * s.inner,
                                 len * s.inner,
                                 g.data() + (o * s.len + start) * s.inner);
                   }
                   self.inputs[0]->accumulate(g);
                 });
}

Tensor broadcast_rows(const Tensor& a, int n) {
  if (n <= 0) fail("broadcast_rows: extent must be positive");
  const std::int64_t block = a.size();
  std::vector<int> oshape;
  oshape.push_back(n);
  for (const int e : a.shape()) oshape.push_back(e);
  std::vector<double> out(static_cast<std::size_t>(block) * n);
  for (int i = 0; i < n; ++i)
    std::copy_n(a.value().data(), block, out.data() + i * block);
  return make_op(std::move(oshape), std::move(out), {a.node()},
                 [n, block](Node& self) {
                   std::vector<double> g(block, 0.0);
                   for (int i = 0; i < n; ++i)
                     K().add(g.data(), self.grad.data() + i * block, g.data(),
                             block);
                   self.inputs[0]->accumulate(g);
                 });
}

Tensor transpose(const Tensor& a) {
  if (a.shape().size() != 2) {
    fail("transpose: expected 2-D tensor, got " + shape_str(a.shape()));
  }
  const std::int64_t r = a.shape()[0], c = a.shape()[1];
  std::vector<double> out(a.size());
  transpose_into(a.value().data(), r, c, out.data());
  return make_op({a.shape()[1], a.shape()[0]}, std::move(out), {a.node()},
                 [r, c](Node& self) {
                   std::vector<double> g(self.grad.size());
                   transpose_into(self.grad.data(), c, r, g.data());
                   self.inputs[0]->accumulate(g);
                 });
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (numel_of(shape) != a.size()) {
    fail("reshape: size mismatch " + shape_str(a.shape()) + " -> " +
         shape_str(shape));
  }
  std::vector<double> out(a.value().begin(), a.value().end());
  return make_op(std::move(shape), std::move(out), {a.node()}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad);
  });
}

Tensor rowscale(const Tensor& a, const Tensor& s) {
  if (a.shape().empty()) fail("rowscale: scalar input");
  const std::int64_t rows = a.shape()[0];
  const std::int64_t cols = a.size() / rows;
  if (s.size() != rows) {
    fail("rowscale: scale shape " + shape_str(s.shape()) +
         " does not match rows of " + shape_str(a.shape()));
  }
  std::vector<double> out(a.size());
  for (std::int64_t r = 0; r < rows; ++r)
    K().scale(a.value().data() + r * cols, s.value()[r], out.data() + r * cols,
              cols);
  return make_op(a.shape(), std::move(out), {a.node(), s.node()},
                 [rows, cols](Node& self) {
                   const auto& a = self.inputs[0];
                   const auto& s = self.inputs[1];
                   if (a->requires_grad) {
                     std::vector<double> g(a->value.size());
                     for (std::int64_t r = 0; r < rows; ++r)
                       K().scale(self.grad.data() + r * cols, s->value[r],
                                 g.data() + r * cols, cols);
                     a->accumulate(g);
                   }
                   if (s->requires_grad) {
                     std::vector<double> g(rows, 0.0);
                     for (std::int64_t r = 0; r < rows; ++r) {
                       double acc = 0.0;
                       for (std::int64_t c = 0; c < cols; ++c)
                         acc += self.grad[r * cols + c] * a->value[r * cols + c];
                       g[r] = acc;
                     }
                     s->accumulate(g);
                   }
                 });
}

Tensor rownorm(const Tensor& a) {
  if (a.shape().size() != 2) {
    fail("rownorm: expected 2-D tensor, got " + shape_str(a.shape()));
  }
  const std::int64_t rows = a.shape()[0], cols = a.shape()[1];
  std::vector<double> out(rows);
  for (std::int64_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) {
      const double v = a.value()[r * cols + c];
      acc += v * v;
    }
    out[r] = std::sqrt(acc);
  }
  return make_op({static_cast<int>(rows), 1}, std::move(out), {a.node()},
                 [rows, cols](Node& self) {
                   const auto& x = self.inputs[0]->value;
                   std::vector<double> g(x.size(), 0.0);
                   for (std::int64_t r = 0; r < rows; ++r) {
                     const double nrm = self.value[r];
                     if (nrm <= 0.0) continue;  // subgradient 0 at the origin
                     const double s = self.grad[r] / nrm;
                     for (std::int64_t c = 0; c < cols; ++c)
                       g[r * cols + c] = s * x[r * cols + c];
                   }
                   self.inputs[0]->accumulate(g);
                 });
}

Tensor gather_linear(const Tensor& a,
                     std::shared_ptr<const LinearTaps> taps) {
  if (a.shape().size() != 2 || a.shape()[0] != taps->in_rows) {
    fail("gather_linear: input " + shape_str(a.shape()) +
         " does not match taps (in_rows=" + std::to_string(taps->in_rows) + ")");
  }
  const std::int64_t cols = a.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(taps->out_rows) * cols, 0.0);
  const double* x = a.value().data();
  for (int o = 0; o < taps->out_rows; ++o) {
    double* orow = out.data() + static_cast<std::int64_t>(o) * cols;
    for (std::int32_t t = taps->offsets[o]; t < taps->offsets[o + 1]; ++t) {
      K().axpy(taps->weights[t], x + static_cast<std::int64_t>(taps->rows[t]) * cols,
               orow, cols);
    }
  }
  return make_op({taps->out_rows, static_cast<int>(cols)}, std::move(out),
                 {a.node()}, [taps, cols](Node& self) {
                   std::vector<double> g(self.inputs[0]->value.size(), 0.0);
                   for (int o = 0; o < taps->out_rows; ++o) {
                     const double* grow =
                         self.grad.data() + static_cast<std::int64_t>(o) * cols;
                     for (std::int32_t t = taps->offsets[o];
                          t < taps->offsets[o + 1]; ++t) {
                       K().axpy(taps->weights[t], grow,
                                g.data() +
                                    static_cast<std::int64_t>(taps->rows[t]) * cols,
                                cols);
                     }
                   }
                   self.inputs[0]->accumulate(g);
                 });
}

double step_surrogate(double u) {
  const double au = std::abs(u);
  if (au > 1.0) return 0.0;
  if (au >= 0.4) return 0.4;  // boundary belongs here so H(0.4) is exactly 0.4
  return 2.0 - 4.0 * au;
}

Tensor step_quantize(const Tensor& x, const Tensor& threshold, bool surrogate) {
  check_same_shape(x, threshold, "step_quantize");
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = (x.value()[i] - threshold.value()[i]) >= 0.0 ? 1.0 : 0.0;
  if (!surrogate) return constant(x.shape(), std::move(out));
  return make_op(x.shape(), std::move(out), {x.node(), threshold.node()},
                 [](Node& self) {
                   const auto& x = self.inputs[0];
                   const auto& th = self.inputs[1];
                   const std::size_t n = self.value.size();
                   std::vector<double> g(n);
                   for (std::size_t i = 0; i < n; ++i)
                     g[i] = self.grad[i] *
                            step_surrogate(x->value[i] - th->value[i]);
                   x->accumulate(g);
                   if (th->requires_grad) {
                     K().scale(g.data(), -1.0, g.data(), n);
                     th->accumulate(g);
                   }
                 });
}

Tensor volume_render(const Tensor& color, const Tensor& sigma,
                     const std::vector<double>& deltas, int rays, int samples,
                     const std::array<double, 3>& background) {
  const std::int64_t b = static_cast<std::int64_t>(rays) * samples;
  if (color.shape().size() != 2 || color.shape()[0] != b ||
      color.shape()[1] != 3) {
    fail("volume_render: color must be [" + std::to_string(b) + ",3], got " +
         shape_str(color.shape()));
  }
  if (sigma.shape().size() != 2 || sigma.shape()[0] != b ||
      sigma.shape()[1] != 1) {
    fail("volume_render: sigma must be [" + std::to_string(b) + ",1], got " +
         shape_str(sigma.shape()));
  }
  if (static_cast<std::int64_t>(deltas.size()) != b) {
    fail("volume_render: deltas size mismatch");
  }
  for (const double d : deltas)
    if (!(d > 0.0)) fail("volume_render: deltas must be positive");
  for (const double s : sigma.value())
    if (s < 0.0) fail("volume_render: negative density");

  std::vector<double> out(static_cast<std::size_t>(rays) * 3, 0.0);
  const double* c = color.value().data();
  const double* sg = sigma.value().data();
  for (int r = 0; r < rays; ++r) {
    double t = 1.0;
    double* px = out.data() + r * 3;
    for (int i = 0; i < samples; ++i) {
      const std::int64_t bi = static_cast<std::int64_t>(r) * samples + i;
      const double alpha = 1.0 - std::exp(-sg[bi] * deltas[bi]);
      const double w = t * alpha;
      for (int ch = 0; ch < 3; ++ch) px[ch] += w * c[bi * 3 + ch];
      t *= 1.0 - alpha;
    }
    for (int ch = 0; ch < 3; ++ch) px[ch] += t * background[ch];
  }
  return make_op(
      {rays, 3}, std::move(out), {color.node(), sigma.node()},
      [deltas, rays, samples, background](Node& self) {
        const auto& cn = self.inputs[0];
        const auto& sn = self.inputs[1];
        std::vector<double> gc(cn->value.size(), 0.0);
        std::vector<double> gs(sn->value.size(), 0.0);
        std::vector<double> trans(samples + 1);
        for (int r = 0; r < rays; ++r) {
          const double* gpx = self.grad.data() + r * 3;
          trans[0] = 1.0;
          for (int i = 0; i < samples; ++i) {
            const std::int64_t bi = static_cast<std::int64_t>(r) * samples + i;
            const double alpha = 1.0 - std::exp(-sn->value[bi] * deltas[bi]);
            trans[i + 1] = trans[i] * (1.0 - alpha);
          }
          // suffix[ch] = sum_{j>i} w_j c_j + T_final * bg, built backwards
          double suffix[3];
          for (int ch = 0; ch < 3; ++ch)
            suffix[ch] = trans[samples] * background[ch];
          for (int i = samples - 1; i >= 0; --i) {
            const std::int64_t bi = static_cast<std::int64_t>(r) * samples + i;
            const double alpha = 1.0 - std::exp(-sn->value[bi] * deltas[bi]);
            const double w = trans[i] * alpha;
            double dsig = 0.0;
            for (int ch = 0; ch < 3; ++ch) {
              const double cv = cn->value[bi * 3 + ch];
              gc[bi * 3 + ch] = gpx[ch] * w;
              dsig += gpx[ch] * (trans[i + 1] * cv - suffix[ch]);
              suffix[ch] += w * cv;
            }
            gs[bi] = dsig * deltas[bi];
          }
        }
        cn->accumulate(gc);
        sn->accumulate(gs);
      });
}

double finite_difference_check(const ScalarFn& f, const std::vector<int>& shape,
                               const std::vector<double>& x0, double eps) {
  Tape tape;
  Tensor x = tape.leaf(shape, x0, true);
  Tensor y = f(tape, x);
  if (y.size() != 1) fail("finite_difference_check: f must be scalar-valued");
  tape.backward(y);
  std::vector<double> analytic(x0.size(), 0.0);
  if (x.has_grad())
    std::copy(x.grad().begin(), x.grad().end(), analytic.begin());

  const auto eval = [&](const std::vector<double>& xv) {
    NoGradGuard ng;
    Tape t;
    Tensor xi = t.leaf(shape, xv, false);
    return f(t, xi).item();
  };

  double worst = 0.0;
  std::vector<double> xv = x0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double keep = xv[i];
    xv[i] = keep + eps;
    const double fp = eval(xv);
    xv[i] = keep - eps;
    const double fm = eval(xv);
    xv[i] = keep;
    const double fd = (fp - fm) / (2.0 * eps);
    const double err = std::abs(fd - analytic[i]) / (std::abs(analytic[i]) + 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

double finite_difference_check_params(
    Tape& tape, const std::function<Tensor()>& build_loss,
    std::span<const Tensor> params, double eps, int max_coords,
    std::uint64_t coord_seed) {
  tape.clear();
  for (const Tensor& p : params) const_cast<Tensor&>(p).zero_grad();
  Tensor loss = build_loss();
  if (loss.size() != 1) fail("finite_difference_check_params: loss not scalar");
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) {
    std::vector<double> g(p.size(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), g.begin());
    analytic.push_back(std::move(g));
  }
  tape.clear();

  const auto eval = [&]() {
    NoGradGuard ng;
    return build_loss().item();
  };

  double worst = 0.0;
  rng::Stream pick(rng::derive_seed(coord_seed, "fd-coords"));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    std::vector<std::int64_t> coords;
    const std::int64_t n = p.size();
    if (max_coords <= 0 || n <= max_coords) {
      coords.resize(n);
      std::iota(coords.begin(), coords.end(), 0);
    } else {
      for (int i = 0; i < max_coords; ++i)
        coords.push_back(static_cast<std::int64_t>(pick.below(n)));
    }
    for (const std::int64_t i : coords) {
      auto& v = p.raw();
      const double keep = v[i];
      v[i] = keep + eps;
      const double fp = eval();
      v[i] = keep - eps;
      const double fm = eval();
      v[i] = keep;
      const double fd = (fp - fm) / (2.0 * eps);
      const double an = analytic[pi][i];
      worst = std::max(worst, std::abs(fd - an) / (std::abs(an) + 1e-8));
    }
  }
  return worst;
}

}  // namespace opo::ad
