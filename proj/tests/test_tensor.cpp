#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "opo/tensor.hpp"
#include "opo/rng.hpp"

using namespace opo;
using namespace opo::ad;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double lo = -2.0,
                               double hi = 2.0) {
  rng::Stream s(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = s.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("matmul forward matches hand arithmetic") {
  Tape t;
  // identity case
  Tensor i2 = constant({2, 2}, {1, 0, 0, 1});
  Tensor b = constant({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor r = matmul(i2, b);
  for (int i = 0; i < 6; ++i) CHECK(r[i] == b[i]);

  Tensor a = constant({2, 2}, {1, 2, 3, 4});
  Tensor v = constant({2, 1}, {5, 6});
  Tensor mv = matmul(a, v);
  CHECK(mv[0] == 17.0);
  CHECK(mv[1] == 39.0);

  CHECK_THROWS(matmul(a, constant({3, 1}, {1, 2, 3})));
}

TEST_CASE("sigmoid(0) = 0.5 and elementwise error paths") {
  Tensor z = sigmoid(scalar(0.0));
  CHECK(z.item() == 0.5);
  CHECK_THROWS(log(scalar(0.0)));
  CHECK_THROWS(log(scalar(-1.0)));
  CHECK_THROWS(ad::sqrt(scalar(-1e-9)));
  CHECK_THROWS(add(constant({2}, {1, 2}), constant({3}, {1, 2, 3})));
}

TEST_CASE("backward on linear and quadratic forms") {
  {
    Tape t;
    Tensor x = t.leaf({4}, {1, -1, 2, 0.5}, true);
    Tensor y = sum(scalar_mul(x, 3.0));
    t.backward(y);
    for (int i = 0; i < 4; ++i) CHECK(x.grad()[i] == 3.0);
  }
  {
    Tape t;
    Tensor x = t.leaf({2}, {1, 2}, true);
    Tensor y = sum(hadamard(x, x));
    t.backward(y);
    CHECK(x.grad()[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(x.grad()[1] == doctest::Approx(4.0).epsilon(1e-12));
  }
  {
    // constant root: gradient never reaches x
    Tape t;
    Tensor x = t.leaf({3}, {1, 2, 3}, true);
    Tensor y = sum(scalar_mul(x, 1.0));
    Tensor c = t.leaf({1}, {7.0}, true);
    Tensor root = sum(hadamard(c, c));
    t.backward(root);
    CHECK_FALSE(x.has_grad());
    (void)y;
  }
  {
    Tape t;
    Tensor x = t.leaf({2}, {1, 2}, true);
    CHECK_THROWS(t.backward(x));  // non-scalar root
  }
}

TEST_CASE("fan-out gradients accumulate") {
  Tape t;
  Tensor x = t.leaf({3}, {0.5, -1.5, 2.0}, true);
  // y = sum(2x) + sum(x*x): dy/dx = 2 + 2x
  Tensor y = add(sum(scalar_mul(x, 2.0)), sum(hadamard(x, x)));
  t.backward(y);
  for (int i = 0; i < 3; ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0 + 2.0 * x[i]).epsilon(1e-13));
}

TEST_CASE("step_quantize forward, tie rule and surrogate probes") {
  Tensor x = constant({5}, {0.0, 0.7, 1.5, -0.2, -3.0});
  Tensor th = zeros({5});
  Tensor q = step_quantize(x, th);
  CHECK(q[0] == 1.0);  // tie at 0 quantizes to 1
  CHECK(q[1] == 1.0);
  CHECK(q[2] == 1.0);
  CHECK(q[3] == 0.0);
  CHECK(q[4] == 0.0);
  for (const double v : q.value()) CHECK((v == 0.0 || v == 1.0));

  // surrogate values, exact at the probe points
  const double probes[] = {0.0, 0.2,  -0.2, 0.4,  -0.4, 0.7,
                           -0.7, 1.0, -1.0, 1.5,  -1.5};
  const double expect[] = {2.0, 1.2, 1.2, 0.4, 0.4, 0.4,
                           0.4, 0.4, 0.4, 0.0, 0.0};
  for (int i = 0; i < 11; ++i) CHECK(step_surrogate(probes[i]) == expect[i]);

  // gradient: dx gets g*H(u), threshold gets the negation
  Tape t;
  Tensor xx = t.leaf({3}, {0.0, 0.7, 1.5}, true);
  Tensor tt = t.leaf({3}, {0.0, 0.0, 0.0}, true);
  Tensor s = sum(step_quantize(xx, tt));
  t.backward(s);
  CHECK(xx.grad()[0] == 2.0);
  CHECK(xx.grad()[1] == 0.4);
  CHECK(xx.grad()[2] == 0.0);
  CHECK(tt.grad()[0] == -2.0);
  CHECK(tt.grad()[1] == -0.4);
  CHECK(tt.grad()[2] == -0.0);

  CHECK_THROWS(step_quantize(constant({2}, {1, 2}), zeros({3})));
}

TEST_CASE("finite differences: stated examples") {
  // f = sum(x^2)
  const auto sq = [](Tape&, const Tensor& x) { return sum(square(x)); };
  CHECK(finite_difference_check(sq, {6}, random_vec(6, 3), 1e-5) < 1e-4);
  // constant f
  const auto cf = [](Tape&, const Tensor&) { return scalar(4.2); };
  CHECK(finite_difference_check(cf, {4}, random_vec(4, 5), 1e-5) == 0.0);
  // sigmoid-sum
  const auto sg = [](Tape&, const Tensor& x) { return sum(sigmoid(x)); };
  CHECK(finite_difference_check(sg, {5}, random_vec(5, 7), 1e-5) < 1e-4);
}

TEST_CASE("finite differences across every differentiable op kind") {
  struct Case {
    const char* name;
    std::vector<int> shape;
    ScalarFn fn;
    double lo = -2.0, hi = 2.0;
  };
  const auto taps = std::make_shared<LinearTaps>();
  taps->in_rows = 4;
  taps->out_rows = 3;
  taps->offsets = {0, 2, 3, 5};
  taps->rows = {0, 2, 1, 3, 0};
  taps->weights = {0.25, 0.75, 1.0, -0.5, 0.125};

  const std::vector<Case> cases = {
      {"matmul-lhs", {3, 4},
       [](Tape&, const Tensor& x) {
         return sum(matmul(x, constant({4, 2}, random_vec(8, 100))));
       }},
      {"matmul-rhs", {4, 2},
       [](Tape&, const Tensor& x) {
         return sum(matmul(constant({3, 4}, random_vec(12, 101)), x));
       }},
      {"add", {5},
       [](Tape&, const Tensor& x) {
         return sum(add(x, constant({5}, random_vec(5, 102))));
       }},
      {"sub", {5},
       [](Tape&, const Tensor& x) {
         return sum(sub(constant({5}, random_vec(5, 103)), x));
       }},
      {"hadamard", {5},
       [](Tape&, const Tensor& x) {
         return sum(hadamard(x, constant({5}, random_vec(5, 104))));
       }},
      {"scalar-mul", {5},
       [](Tape&, const Tensor& x) { return sum(scalar_mul(x, -1.3)); }},
      {"sum-axis", {3, 4},
       [](Tape&, const Tensor& x) {
         return sum(square(sum_axis(x, 1)));
       }},
      {"mean", {7}, [](Tape&, const Tensor& x) { return mean(square(x)); }},
      {"mean-axis", {3, 4},
       [](Tape&, const Tensor& x) {
         return sum(square(mean_axis(x, 0)));
       }},
      {"exp", {5}, [](Tape&, const Tensor& x) { return sum(ad::exp(x)); }},
      {"log", {5}, [](Tape&, const Tensor& x) { return sum(ad::log(x)); },
       0.5, 3.0},
      {"sigmoid", {5},
       [](Tape&, const Tensor& x) { return sum(sigmoid(x)); }},
      {"relu", {5}, [](Tape&, const Tensor& x) { return sum(relu(x)); },
       0.1, 2.0},
      {"softplus", {5},
       [](Tape&, const Tensor& x) { return sum(softplus(x)); }},
      {"square", {5}, [](Tape&, const Tensor& x) { return sum(square(x)); }},
      {"sqrt", {5}, [](Tape&, const Tensor& x) { return sum(ad::sqrt(x)); },
       0.5, 3.0},
      {"softmax", {2, 4},
       [](Tape&, const Tensor& x) {
         return sum(hadamard(softmax(x, 1),
                             constant({2, 4}, random_vec(8, 105))));
       }},
      {"concat", {2, 3},
       [](Tape&, const Tensor& x) {
         Tensor other = constant({2, 2}, random_vec(4, 106));
         return sum(square(concat({x, other}, 1)));
       }},
      {"slice", {3, 4},
       [](Tape&, const Tensor& x) {
         return sum(square(slice(x, 1, 1, 2)));
       }},
      {"broadcast", {4},
       [](Tape&, const Tensor& x) {
         return sum(square(broadcast_rows(x, 3)));
       }},
      {"transpose", {3, 4},
       [](Tape&, const Tensor& x) { return sum(square(transpose(x))); }},
      {"reshape", {3, 4},
       [](Tape&, const Tensor& x) {
         return sum(square(reshape(x, {4, 3})));
       }},
      {"rowscale-data", {3, 4},
       [](Tape&, const Tensor& x) {
         return sum(rowscale(x, constant({3}, random_vec(3, 107))));
       }},
      {"rowscale-scale", {3},
       [](Tape&, const Tensor& x) {
         return sum(rowscale(constant({3, 4}, random_vec(12, 108)), x));
       }},
      {"rownorm", {3, 4},
       [](Tape&, const Tensor& x) { return sum(rownorm(x)); }, 0.5, 2.0},
      {"gather-linear", {4, 3},
       [taps](Tape&, const Tensor& x) {
         return sum(square(gather_linear(x, taps)));
       }},
      {"volume-render-color", {6, 3},
       [](Tape&, const Tensor& x) {
         Tensor sg = constant({6, 1}, random_vec(6, 109, 0.1, 2.0));
         return sum(volume_render(sigmoid(x), sg, {0.3, 0.3, 0.4, 0.3, 0.3, 0.4},
                                  2, 3, {0.2, 0.3, 0.4}));
       }},
      {"volume-render-sigma", {6, 1},
       [](Tape&, const Tensor& x) {
         Tensor c = constant({6, 3}, random_vec(18, 110, 0.0, 1.0));
         return sum(volume_render(c, softplus(x), {0.3, 0.3, 0.4, 0.3, 0.3, 0.4},
                                  2, 3, {0.2, 0.3, 0.4}));
       }},
  };

  for (const auto& c : cases) {
    CAPTURE(c.name);
    std::int64_t n = 1;
    for (const int e : c.shape) n *= e;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto x0 = random_vec(n, seed * 991, c.lo, c.hi);
      worst = std::max(worst,
                       finite_difference_check(c.fn, c.shape, x0, 1e-5));
    }
    CHECK_MESSAGE(worst < 1e-4, c.name << " worst fd error " << worst);
  }
}

TEST_CASE("identical graph replay reproduces identical bits") {
  const auto run = [] {
    Tape t;
    Tensor x = t.leaf({4, 4}, random_vec(16, 42), true);
    Tensor w = t.leaf({4, 4}, random_vec(16, 43), true);
    Tensor y = sum(sigmoid(matmul(x, relu(w))));
    t.backward(y);
    std::vector<double> out(y.value().begin(), y.value().end());
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    return out;
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("no-grad evaluation produces detached constants") {
  Tape t;
  Tensor x = t.leaf({3}, {1, 2, 3}, true);
  {
    NoGradGuard ng;
    Tensor y = sum(square(x));
    CHECK_FALSE(y.requires_grad());
    CHECK(y.item() == 14.0);
  }
  CHECK(t.op_count() == 0);
}

TEST_CASE("volume_render rejects invalid inputs") {
  Tensor c = constant({2, 3}, random_vec(6, 7, 0.0, 1.0));
  CHECK_THROWS(volume_render(c, constant({2, 1}, {0.5, -0.1}), {0.1, 0.1}, 1,
                             2, {0, 0, 0}));
  CHECK_THROWS(volume_render(c, constant({2, 1}, {0.5, 0.1}), {0.1, 0.0}, 1, 2,
                             {0, 0, 0}));
}
