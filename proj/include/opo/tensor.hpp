#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace opo::ad {

class Tape;
struct Node;
using NodePtr = std::shared_ptr<Node>;

// One value in the computation graph. Dense row-major doubles; the gradient
// buffer is allocated on first accumulation.
struct Node {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> back;
  Tape* tape = nullptr;
  bool requires_grad = false;
  bool leaf = false;
  std::string name;

  std::int64_t numel() const { return static_cast<std::int64_t>(value.size()); }
  void accumulate(std::span<const double> g);
};

// Value-semantic handle over a graph node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  std::int64_t size() const { return node_->numel(); }
  std::span<const double> value() const { return node_->value; }
  std::vector<double>& raw() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  double item() const;
  double operator[](std::int64_t i) const { return node_->value[static_cast<std::size_t>(i)]; }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& name() const { return node_->name; }
  const NodePtr& node() const { return node_; }
  void zero_grad() { node_->grad.clear(); }

 private:
  NodePtr node_;
};

// Recording context. Operations whose inputs live on a tape are appended in
// creation order, which is a topological order by construction; backward()
// walks that list once, in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor leaf(std::vector<int> shape, std::vector<double> data,
              bool requires_grad, std::string name = "");

  // Seeds root with gradient 1 and accumulates leaf gradients. The root must
  // be a scalar attached to this tape.
  void backward(const Tensor& root);

  // Drops recorded operations; leaves held elsewhere survive.
  void clear() { records_.clear(); }
  std::size_t op_count() const { return records_.size(); }

  void record(const NodePtr& n) { records_.push_back(n); }

 private:
  std::vector<NodePtr> records_;
};

// While alive, newly built operations are plain evaluations: nothing is
// recorded and results are detached constants. Thread-local.
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};
bool grad_enabled();

// ---- constants -------------------------------------------------------------

Tensor constant(std::vector<int> shape, std::vector<double> data);
Tensor scalar(double v);
Tensor zeros(std::vector<int> shape);
Tensor ones(std::vector<int> shape);
// Constant copy of t's value (cuts the graph).
Tensor detach(const Tensor& t);

// ---- operations ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor sum(const Tensor& a);
Tensor sum_axis(const Tensor& a, int axis);
Tensor mean(const Tensor& a);
Tensor mean_axis(const Tensor& a, int axis);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor softmax(const Tensor& a, int axis);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int start, int len);
// Prepends a leading axis of extent n (the only broadcasting form supported).
Tensor broadcast_rows(const Tensor& a, int n);
Tensor transpose(const Tensor& a);  // 2-D
Tensor reshape(const Tensor& a, std::vector<int> shape);
// out[r, :] = a[r, :] * s[r]; s has shape [rows] or [rows, 1].
Tensor rowscale(const Tensor& a, const Tensor& s);
// L2 norm of each row of a 2-D tensor -> [rows, 1]; subgradient 0 at 0.
Tensor rownorm(const Tensor& a);

// Sparse row-mixing operator: out[o, :] = sum_t w_t * a[row_t, :]. Backs
// bilinear/trilinear sampling, neighbor smoothing and permutations; the taps
// are constant data, so the op is linear in `a`.
struct LinearTaps {
  int in_rows = 0;
  int out_rows = 0;
  std::vector<std::int32_t> offsets;  // out_rows + 1 prefix offsets
  std::vector<std::int32_t> rows;
  std::vector<double> weights;
};
Tensor gather_linear(const Tensor& a, std::shared_ptr<const LinearTaps> taps);

// Binary step with the long-tailed surrogate derivative:
//   forward   1 where (x - threshold) >= 0 else 0
//   backward  dx += g * H(u), dthreshold -= g * H(u), u = x - threshold,
//             H(u) = 2 - 4|u| on |u| <= 0.4, 0.4 on 0.4 < |u| <= 1, else 0.
// With surrogate=false the output is a detached constant.
Tensor step_quantize(const Tensor& x, const Tensor& threshold,
                     bool surrogate = true);
double step_surrogate(double u);

// Classical emission-absorption compositing over rays laid out row-major as
// [rays * samples]. Colors are [B,3], densities [B,1]; deltas per sample.
Tensor volume_render(const Tensor& color, const Tensor& sigma,
                     const std::vector<double>& deltas, int rays, int samples,
                     const std::array<double, 3>& background);

// ---- gradient checking -----------------------------------------------------

// Max over coordinates of |central difference - analytic| / (|analytic|+1e-8)
// for a scalar-valued function of one tensor.
using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;
double finite_difference_check(const ScalarFn& f, const std::vector<int>& shape,
                               const std::vector<double>& x0, double eps);

// Same check against an already-built parameter set. `build_loss` must
// re-evaluate the full graph from the current parameter values. When
// max_coords > 0, that many coordinates per parameter are probed (seeded).
double finite_difference_check_params(
    Tape& tape, const std::function<Tensor()>& build_loss,
    std::span<const Tensor> params, double eps, int max_coords = -1,
    std::uint64_t coord_seed = 0);

std::string shape_str(const std::vector<int>& s);

}  // namespace opo::ad
