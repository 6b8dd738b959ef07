// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "fwqa/gradcheck.hpp"
#include "fwqa/tape.hpp"
#include "fwqa/verify.hpp"

using fwqa::concat;
using fwqa::Mat;
using fwqa::Rng;
using fwqa::Tape;
using fwqa::Var;

namespace {

Mat<double> mat2(std::initializer_list<std::initializer_list<double>> rows) {
  Mat<double> m(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

// independent oracle: naive triple loop
Mat<double> matmul_naive(const Mat<double>& a, const Mat<double>& b) {
  Mat<double> c = Mat<double>::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      for (Eigen::Index p = 0; p < a.cols(); ++p) c(i, j) += a(i, p) * b(p, j);
  return c;
}

}  // namespace

TEST_CASE("matmul identity and scalar cases") {
  Tape<double> t;
  Var<double> i2 = t.constant(Mat<double>::Identity(2, 2));
  Var<double> b = t.constant(mat2({{3, 4}, {5, 6}}));
  CHECK(t.value(matmul(i2, b)) == mat2({{3, 4}, {5, 6}}));

  Var<double> x = t.constant(mat2({{2}}));
  Var<double> y = t.constant(mat2({{5}}));
  CHECK(t.value(matmul(x, y))(0, 0) == 10.0);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  Rng rng(42);
  Tape<double> t;
  Mat<double> a = fwqa::verify_detail::random_mat<double>(rng, 3, 4);
  Mat<double> b = fwqa::verify_detail::random_mat<double>(rng, 4, 2);
  Mat<double> got = t.value(matmul(t.constant(a), t.constant(b)));
  Mat<double> want = matmul_naive(a, b);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("matmul shape error names both shapes") {
  Tape<double> t;
  Var<double> a = t.constant(Mat<double>::Zero(3, 4));
  Var<double> b = t.constant(Mat<double>::Zero(5, 2));
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("3x4"), fwqa::ShapeError);
}

TEST_CASE("elementwise basics") {
  Tape<double> t;
  Var<double> zero = t.constant(mat2({{0.0}}));
  CHECK(t.value(tanh(zero))(0, 0) == 0.0);
  CHECK(t.value(sigmoid(zero))(0, 0) == 0.5);
  CHECK(t.value(relu(t.constant(mat2({{-3.0}}))))(0, 0) == 0.0);

  Var<double> a = t.constant(mat2({{1}, {2}}));
  Var<double> b = t.constant(mat2({{3}}));
  Mat<double> cat = t.value(concat<double>({a, b}, 0));
  CHECK(cat.rows() == 3);
  CHECK(cat(0, 0) == 1.0);
  CHECK(cat(2, 0) == 3.0);

  CHECK_THROWS_AS(add(a, b), fwqa::ShapeError);
}

TEST_CASE("tanh gradient matches central finite difference at x = 0.7") {
  fwqa::Parameter<double> p;
  p.name = "x";
  p.value = mat2({{0.7}});
  fwqa::ParamRegistry<double> reg;
  reg.add(p);
  auto f = [&](Tape<double>& t) { return tanh(t.param(p)); };
  fwqa::GradCheckReport r = fwqa::grad_check<double>(f, reg, 1e-6, 1e-8);
  CHECK(r.pass);
  CHECK(r.max_rel_error < 1e-8);
}

TEST_CASE("softmax: uniform, analytic, and high-precision oracle") {
  Tape<double> t;
  for (double c : {0.0, -3.5, 1234.5}) {
    Mat<double> v = Mat<double>::Constant(4, 1, c);
    Mat<double> s = t.value(softmax(t.constant(v)));
    for (int i = 0; i < 4; ++i) CHECK(s(i, 0) == doctest::Approx(0.25).epsilon(1e-12));
  }

  Mat<double> v(2, 1);
  v << 0.0, std::log(2.0);
  Mat<double> s = t.value(softmax(t.constant(v)));
  CHECK(s(0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(s(1, 0) == doctest::Approx(2.0 / 3).epsilon(1e-12));

  // long-double oracle on a random length-8 vector
  Rng rng(7);
  Mat<double> x(8, 1);
  for (int i = 0; i < 8; ++i) x(i, 0) = rng.uniform(-4.0, 4.0);
  Mat<double> got = t.value(softmax(t.constant(x)));
  long double mx = x.maxCoeff();
  long double denom = 0;
  for (int i = 0; i < 8; ++i) denom += std::exp(static_cast<long double>(x(i, 0)) - mx);
  for (int i = 0; i < 8; ++i) {
    long double want = std::exp(static_cast<long double>(x(i, 0)) - mx) / denom;
    CHECK(std::abs(got(i, 0) - static_cast<double>(want)) < 1e-12);
  }

  CHECK_THROWS_AS(softmax(t.constant(Mat<double>(0, 1))), fwqa::ArgumentError);
}

TEST_CASE("softmax sums to one and is shift-invariant") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 1 + static_cast<int>(rng.below(12));
    Mat<double> x(n, 1);
    for (int i = 0; i < n; ++i) x(i, 0) = rng.uniform(-30.0, 30.0);
    Tape<double> t;
    Mat<double> s = t.value(softmax(t.constant(x)));
    CHECK(std::abs(s.sum() - 1.0) <= 1e-12);
    CHECK(s.minCoeff() >= 0.0);
    double shift = rng.uniform(-50.0, 50.0);
    Mat<double> s2 = t.value(softmax(t.constant((x.array() + shift).matrix())));
    CHECK((s - s2).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("backward: product rule and reuse of a leaf") {
  fwqa::Parameter<double> x, y;
  x.name = "x";
  x.value = mat2({{2.0}});
  y.name = "y";
  y.value = mat2({{3.0}});

  {
    Tape<double> t;
    x.grad = Mat<double>::Zero(1, 1);
    y.grad = Mat<double>::Zero(1, 1);
    Var<double> root = mul(t.param(x), t.param(y));
    t.backward(root);
    CHECK(x.grad(0, 0) == 3.0);
    CHECK(y.grad(0, 0) == 2.0);
  }
  {
    // x + x*x at x = 3 -> dx = 1 + 2*3 = 7 (fan-out accumulation)
    Tape<double> t;
    x.value = mat2({{3.0}});
    x.grad = Mat<double>::Zero(1, 1);
    Var<double> vx = t.param(x);
    t.backward(add(vx, mul(vx, vx)));
    CHECK(x.grad(0, 0) == 7.0);
  }
}

TEST_CASE("backward: non-scalar root is rejected, unreachable leaves get zero") {
  Tape<double> t;
  fwqa::Parameter<double> w;
  w.name = "w";
  w.value = mat2({{1.0, 2.0}});
  w.grad = Mat<double>::Zero(1, 2);
  Var<double> bound = t.param(w);
  CHECK_THROWS_AS(t.backward(bound), fwqa::ArgumentError);

  fwqa::Parameter<double> unused;
  unused.name = "unused";
  unused.value = mat2({{5.0}});
  unused.grad = Mat<double>::Zero(1, 1);
  t.param(unused);
  t.backward(sum(bound));
  CHECK(unused.grad(0, 0) == 0.0);
  CHECK(w.grad(0, 0) == 1.0);
}

TEST_CASE("backward of sum(tanh(W x)) matches finite differences") {
  Rng rng(5);
  fwqa::Parameter<double> W;
  W.name = "W";
  W.value = fwqa::verify_detail::random_mat<double>(rng, 4, 3, -0.5, 0.5);
  Mat<double> x = fwqa::verify_detail::random_mat<double>(rng, 3, 1);
  fwqa::ParamRegistry<double> reg;
  reg.add(W);
  auto f = [&](Tape<double>& t) { return sum(tanh(matmul(t.param(W), t.constant(x)))); };
  fwqa::GradCheckReport r = fwqa::grad_check<double>(f, reg, 1e-5, 1e-6);
  CHECK(r.pass);
}

TEST_CASE("shared subexpression gradients equal the expanded graph") {
  Rng rng(11);
  fwqa::Parameter<double> a;
  a.name = "a";
  a.value = fwqa::verify_detail::random_mat<double>(rng, 3, 3);
  fwqa::ParamRegistry<double> reg;
  reg.add(a);

  // shared: s = tanh(a); root = sum(s .* s)
  reg.zero_grads();
  {
    Tape<double> t;
    Var<double> s = tanh(t.param(a));
    t.backward(sum(mul(s, s)));
  }
  Mat<double> shared_grad = a.grad;

  // expanded: two independent tanh(a) subgraphs
  reg.zero_grads();
  {
    Tape<double> t;
    Var<double> s1 = tanh(t.param(a));
    Var<double> s2 = tanh(t.param(a));
    t.backward(sum(mul(s1, s2)));
  }
  CHECK((shared_grad - a.grad).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("grad_check self-test: quadratic passes, corrupted adjoint fails") {
  Rng rng(3);
  fwqa::Parameter<double> x;
  x.name = "x";
  x.value = fwqa::verify_detail::random_mat<double>(rng, 5, 1);
  fwqa::ParamRegistry<double> reg;
  reg.add(x);

  auto quad = [&](Tape<double>& t) {
    Var<double> v = t.param(x);
    return scale(sum(mul(v, v)), 0.5);
  };
  CHECK(fwqa::grad_check<double>(quad, reg, 1e-6, 1e-7).pass);

  // negative control: the first call (the analytic pass) sees a scaled
  // function, so the recorded adjoints disagree with the numeric side
  int calls = 0;
  auto broken = [&](Tape<double>& t) {
    Var<double> v = t.param(x);
    Var<double> out = scale(sum(mul(v, v)), 0.5);
    return calls++ == 0 ? scale(out, 1.25) : out;
  };
  fwqa::GradCheckReport r = fwqa::grad_check<double>(broken, reg, 1e-6, 1e-7);
  CHECK_FALSE(r.pass);
}

TEST_CASE("every registered op passes finite differences over many seeds") {
  // tensor-core property: analytic gradients match central differences
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    auto results = fwqa::check_op_gradients<double>(seed);
    for (const auto& r : results) {
      INFO("op ", r.op, " seed ", seed, " err ", r.report.max_rel_error);
      REQUIRE(r.report.pass);
    }
  }
}

TEST_CASE("values stay finite after ops on bounded inputs") {
  Rng rng(1234);
  for (int trial = 0; trial < 50; ++trial) {
    Tape<double> t;
    Mat<double> a = fwqa::verify_detail::random_mat<double>(rng, 4, 4, -100.0, 100.0);
    Mat<double> b = fwqa::verify_detail::random_mat<double>(rng, 4, 4, -100.0, 100.0);
    Var<double> va = t.constant(a), vb = t.constant(b);
    CHECK(fwqa::all_finite(t.value(tanh(matmul(va, vb)))));
    CHECK(fwqa::all_finite(t.value(softmax(slice_cols(add(va, vb), 0, 1)))));
    CHECK(fwqa::all_finite(t.value(sigmoid(mul(va, vb)))));
  }
}
