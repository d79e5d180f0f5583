#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "flowact/autodiff.hpp"
#include "flowact/rng.hpp"

using namespace flowact;

namespace {

// Central finite differences against the tape gradient for a scalar-valued
// graph over a set of leaf tensors.
void check_grads(std::vector<Tensor>& leaves,
                 const std::function<Var(Tape&, std::vector<Var>&)>& build,
                 double tol = 1e-7, double h = 1e-6) {
  Tape tape;
  std::vector<Var> vars;
  for (auto& t : leaves) vars.push_back(tape.leaf(t));
  Var loss = build(tape, vars);
  REQUIRE(tape.val(loss).size() == 1);
  tape.backward(loss);

  std::vector<Tensor> grads;
  for (auto v : vars) grads.push_back(tape.grad(v));

  for (std::size_t li = 0; li < leaves.size(); ++li) {
    for (std::size_t i = 0; i < leaves[li].data.size(); ++i) {
      const double orig = leaves[li].data[i];
      leaves[li].data[i] = orig + h;
      Tape tp;
      std::vector<Var> vp;
      for (auto& t : leaves) vp.push_back(tp.leaf(t));
      double up = tp.val(build(tp, vp)).at(0, 0);
      leaves[li].data[i] = orig - h;
      Tape tm;
      std::vector<Var> vm;
      for (auto& t : leaves) vm.push_back(tm.leaf(t));
      double dn = tm.val(build(tm, vm)).at(0, 0);
      leaves[li].data[i] = orig;
      double fd = (up - dn) / (2 * h);
      double ad = grads[li].data[i];
      double denom = std::max({1.0, std::abs(fd), std::abs(ad)});
      CHECK(std::abs(fd - ad) / denom < tol);
    }
  }
}

Tensor randn(int r, int c, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor::randn(r, c, rng);
}

}  // namespace

TEST_CASE("matmul forward and gradient") {
  std::vector<Tensor> leaves = {randn(3, 4, 1), randn(4, 5, 2)};
  check_grads(leaves, [](Tape& t, std::vector<Var>& v) {
    return t.mean_all(t.matmul(v[0], v[1]));
  });
}

TEST_CASE("matmul_nt matches explicit transpose") {
  Tensor A = randn(3, 4, 5), B = randn(6, 4, 6);
  Tape t;
  Var c = t.matmul_nt(t.leaf(A), t.leaf(B));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 6; ++j) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += A.at(i, k) * B.at(j, k);
      CHECK(t.val(c).at(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  std::vector<Tensor> leaves = {A, B};
  check_grads(leaves, [](Tape& tp, std::vector<Var>& v) {
    return tp.mean_all(tp.matmul_nt(v[0], v[1]));
  });
}

TEST_CASE("elementwise ops gradients") {
  std::vector<Tensor> leaves = {randn(3, 4, 7), randn(3, 4, 8)};
  check_grads(leaves, [](Tape& t, std::vector<Var>& v) {
    Var x = t.add(v[0], v[1]);
    Var y = t.hadamard(x, v[0]);
    Var z = t.tanh_(y);
    return t.mean_all(t.square(z));
  });
}

TEST_CASE("row broadcast ops gradients") {
  std::vector<Tensor> leaves = {randn(4, 6, 9), randn(1, 6, 10), randn(1, 6, 11)};
  check_grads(leaves, [](Tape& t, std::vector<Var>& v) {
    Var x = t.add_row(v[0], v[1]);
    Var y = t.mul_row(x, v[2]);
    return t.mean_all(y);
  });
}

TEST_CASE("layernorm gradient") {
  std::vector<Tensor> leaves = {randn(3, 8, 12), randn(1, 8, 13), randn(1, 8, 14)};
  // keep gain away from zero for a well-conditioned check
  for (auto& x : leaves[1].data) x = 1.0 + 0.2 * x;
  check_grads(leaves, [](Tape& t, std::vector<Var>& v) {
    return t.mean_all(t.square(t.layernorm(v[0], v[1], v[2])));
  }, 1e-6);
}

TEST_CASE("softmax rows sums to one and gradient") {
  std::vector<Tensor> leaves = {randn(4, 6, 15)};
  Tape t;
  Var s = t.softmax_rows(t.leaf(leaves[0]));
  for (int i = 0; i < 4; ++i) {
    double sum = 0;
    for (int j = 0; j < 6; ++j) sum += t.val(s).at(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  check_grads(leaves, [](Tape& tp, std::vector<Var>& v) {
    return tp.mean_all(tp.square(tp.softmax_rows(v[0])));
  });
}

TEST_CASE("softmax with additive causal mask ignores the future") {
  Tensor A = randn(3, 3, 16);
  Tensor mask(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) mask.at(i, j) = j > i ? -1e30 : 0.0;
  Tape t;
  Var s = t.softmax_rows(t.leaf(A), &mask);
  CHECK(t.val(s).at(0, 1) == 0.0);
  CHECK(t.val(s).at(0, 2) == 0.0);
  CHECK(t.val(s).at(1, 2) == 0.0);
  CHECK(t.val(s).at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("cross entropy mean vs naive log softmax") {
  Tensor logits = randn(5, 7, 17);
  std::vector<int> targets = {0, 3, 6, 2, 2};
  Tape t;
  Var ce = t.cross_entropy_mean(t.leaf(logits), targets);
  double want = 0;
  for (int i = 0; i < 5; ++i) {
    double mx = -1e300;
    for (int j = 0; j < 7; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0;
    for (int j = 0; j < 7; ++j) z += std::exp(logits.at(i, j) - mx);
    want -= logits.at(i, targets[i]) - (std::log(z) + mx);
  }
  want /= 5;
  CHECK(t.val(ce).at(0, 0) == doctest::Approx(want).epsilon(1e-12));

  std::vector<Tensor> leaves = {logits};
  check_grads(leaves, [&](Tape& tp, std::vector<Var>& v) {
    return tp.cross_entropy_mean(v[0], targets);
  });
}

TEST_CASE("embedding gather scatter gradient") {
  std::vector<Tensor> leaves = {randn(10, 4, 18)};
  std::vector<int> ids = {1, 3, 3, 0, 9};
  check_grads(leaves, [&](Tape& t, std::vector<Var>& v) {
    return t.mean_all(t.square(t.embed(v[0], ids)));
  });
}

TEST_CASE("slicing and concatenation gradients") {
  std::vector<Tensor> leaves = {randn(6, 8, 19), randn(2, 8, 20)};
  check_grads(leaves, [](Tape& t, std::vector<Var>& v) {
    Var top = t.slice_rows(v[0], 0, 3);
    Var cat = t.concat_rows({top, v[1]});
    Var left = t.slice_cols(cat, 0, 5);
    Var right = t.slice_cols(cat, 5, 8);
    Var glue = t.concat_cols({right, left});
    return t.mean_all(t.square(glue));
  });
}

TEST_CASE("pooling reductions") {
  std::vector<Tensor> leaves = {randn(5, 3, 21)};
  check_grads(leaves, [](Tape& t, std::vector<Var>& v) {
    return t.mean_all(t.square(t.mean_pool_rows(v[0])));
  });
  check_grads(leaves, [](Tape& t, std::vector<Var>& v) {
    return t.sum_all(t.square(v[0]));
  });
}

TEST_CASE("weighted_sse equals loop and has correct gradient") {
  Tensor A = randn(4, 5, 22);
  Tensor W(4, 5);
  Rng rng(23);
  for (auto& w : W.data) w = rng.uniform();
  Tape t;
  Var s = t.weighted_sse(t.leaf(A), W);
  double want = 0;
  for (std::size_t i = 0; i < A.data.size(); ++i) want += W.data[i] * A.data[i] * A.data[i];
  CHECK(t.val(s).at(0, 0) == doctest::Approx(want).epsilon(1e-13));

  std::vector<Tensor> leaves = {A};
  check_grads(leaves, [&](Tape& tp, std::vector<Var>& v) {
    return tp.weighted_sse(v[0], W);
  });
}

TEST_CASE("exp clip min max gradients route correctly") {
  std::vector<Tensor> leaves = {randn(1, 6, 24), randn(1, 6, 25)};
  check_grads(leaves, [](Tape& t, std::vector<Var>& v) {
    Var e = t.exp_(t.scale(v[0], 0.3));
    Var c = t.clip(e, 0.8, 1.2);
    Var m = t.minimum(c, v[1]);
    Var M = t.maximum(m, t.scale(v[1], 0.5));
    return t.mean_all(M);
  });
}

TEST_CASE("clip zeroes gradient outside bounds") {
  Tensor A(1, 2);
  A.at(0, 0) = 5.0;   // above hi
  A.at(0, 1) = 0.5;   // inside
  Tape t;
  Var a = t.leaf(A);
  Var out = t.sum_all(t.clip(a, 0.0, 1.0));
  t.backward(out);
  CHECK(t.grad(a).at(0, 0) == 0.0);
  CHECK(t.grad(a).at(0, 1) == 1.0);
}

TEST_CASE("gradient accumulates across reuse of a leaf") {
  Tensor A = randn(2, 2, 26);
  std::vector<Tensor> leaves = {A};
  check_grads(leaves, [](Tape& t, std::vector<Var>& v) {
    Var y = t.add(t.hadamard(v[0], v[0]), t.scale(v[0], 3.0));
    return t.sum_all(y);
  });
}
