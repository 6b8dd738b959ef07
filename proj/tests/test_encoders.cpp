// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fwqa/gradcheck.hpp"
#include "fwqa/lstm.hpp"
#include "fwqa/verify.hpp"

using fwqa::bilstm_encode;
using fwqa::bind_lstm;
using fwqa::BiLstmOut;
using fwqa::concat;
using fwqa::LstmParams;
using fwqa::LstmVars;
using fwqa::Mat;
using fwqa::qa_summary;
using fwqa::Rng;
using fwqa::Tape;
using fwqa::Var;

namespace {

LstmParams<double> random_lstm(const std::string& prefix, int d_in, int d_h,
                               std::uint64_t seed) {
  Rng rng(seed);
  LstmParams<double> p;
  p.init(prefix, d_in, d_h, rng);
  return p;
}

void fill_all(LstmParams<double>& p, double w, double b) {
  for (fwqa::Parameter<double>* m : {&p.W_i, &p.W_f, &p.W_o, &p.W_g, &p.U_i, &p.U_f,
                                     &p.U_o, &p.U_g})
    m->value.setConstant(w);
  for (fwqa::Parameter<double>* v : {&p.b_i, &p.b_f, &p.b_o, &p.b_g})
    v->value.setConstant(b);
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// scalar-loop oracle for one LSTM step, independent of the tape
void lstm_step_scalar(const LstmParams<double>& p, const std::vector<double>& x,
                      std::vector<double>& h, std::vector<double>& c) {
  const int dh = p.d_h, din = p.d_in;
  std::vector<double> h2(static_cast<std::size_t>(dh)), c2(static_cast<std::size_t>(dh));
  for (int r = 0; r < dh; ++r) {
    double zi = p.b_i.value(r, 0), zf = p.b_f.value(r, 0);
    double zo = p.b_o.value(r, 0), zg = p.b_g.value(r, 0);
    for (int k = 0; k < din; ++k) {
      zi += p.W_i.value(r, k) * x[static_cast<std::size_t>(k)];
      zf += p.W_f.value(r, k) * x[static_cast<std::size_t>(k)];
      zo += p.W_o.value(r, k) * x[static_cast<std::size_t>(k)];
      zg += p.W_g.value(r, k) * x[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < dh; ++k) {
      zi += p.U_i.value(r, k) * h[static_cast<std::size_t>(k)];
      zf += p.U_f.value(r, k) * h[static_cast<std::size_t>(k)];
      zo += p.U_o.value(r, k) * h[static_cast<std::size_t>(k)];
      zg += p.U_g.value(r, k) * h[static_cast<std::size_t>(k)];
    }
    double i = sig(zi), f = sig(zf), o = sig(zo), g = std::tanh(zg);
    c2[static_cast<std::size_t>(r)] = f * c[static_cast<std::size_t>(r)] + i * g;
    h2[static_cast<std::size_t>(r)] = o * std::tanh(c2[static_cast<std::size_t>(r)]);
  }
  h = h2;
  c = c2;
}

}  // namespace

TEST_CASE("lstm_step analytic zero-weight cases") {
  LstmParams<double> p = random_lstm("z", 1, 1, 1);
  fill_all(p, 0.0, 0.0);

  Tape<double> t;
  LstmVars<double> v = bind_lstm(t, p);
  Var<double> x = t.zeros(1, 1);
  Var<double> h0 = t.zeros(1, 1);
  Var<double> c0 = t.constant(Mat<double>::Constant(1, 1, 2.0));
  auto [h1, c1] = lstm_step(x, h0, c0, v);
  // gates 0.5, g = 0: c' = 0.5 * 2 = 1, h' = 0.5 * tanh(1)
  CHECK(t.value(c1)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(t.value(h1)(0, 0) == doctest::Approx(0.5 * std::tanh(1.0)).epsilon(1e-12));
  CHECK(t.value(h1)(0, 0) == doctest::Approx(0.3808).epsilon(1e-4));

  auto [h2, c2] = lstm_step(x, h0, t.zeros(1, 1), v);
  CHECK(t.value(h2)(0, 0) == 0.0);
}

TEST_CASE("lstm_step matches the scalar-loop oracle") {
  LstmParams<double> p = random_lstm("r", 3, 4, 77);
  Rng rng(5);
  std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  std::vector<double> h(4), c(4);
  for (int r = 0; r < 4; ++r) {
    h[static_cast<std::size_t>(r)] = rng.uniform(-1, 1);
    c[static_cast<std::size_t>(r)] = rng.uniform(-1, 1);
  }

  Tape<double> t;
  LstmVars<double> v = bind_lstm(t, p);
  Mat<double> xm(3, 1), hm(4, 1), cm(4, 1);
  for (int r = 0; r < 3; ++r) xm(r, 0) = x[static_cast<std::size_t>(r)];
  for (int r = 0; r < 4; ++r) {
    hm(r, 0) = h[static_cast<std::size_t>(r)];
    cm(r, 0) = c[static_cast<std::size_t>(r)];
  }
  auto [h2, c2] = lstm_step(t.constant(xm), t.constant(hm), t.constant(cm), v);

  lstm_step_scalar(p, x, h, c);
  for (int r = 0; r < 4; ++r) {
    CHECK(t.value(h2)(r, 0) == doctest::Approx(h[static_cast<std::size_t>(r)]).epsilon(1e-12));
    CHECK(t.value(c2)(r, 0) == doctest::Approx(c[static_cast<std::size_t>(r)]).epsilon(1e-12));
  }
}

TEST_CASE("bilstm length-1 sequence uses the same element in both directions") {
  LstmParams<double> fw = random_lstm("f", 2, 3, 10);
  LstmParams<double> bw = random_lstm("b", 2, 3, 11);
  Tape<double> t;
  LstmVars<double> fv = bind_lstm(t, fw), bv = bind_lstm(t, bw);
  Rng rng(3);
  Var<double> x = t.constant(fwqa::verify_detail::random_mat<double>(rng, 2, 1));
  BiLstmOut<double> out = bilstm_encode(t, {x}, fv, bv);
  CHECK(out.step.size() == 1);
  CHECK(t.value(out.step[0]).rows() == 6);
  // both directions consumed the same single element from zero state
  Mat<double> y = t.value(out.step[0]);
  CHECK(y.topRows(3) == t.value(out.fwd[0]));
  CHECK(y.bottomRows(3) == t.value(out.bwd[0]));

  CHECK_THROWS_AS(bilstm_encode(t, std::vector<Var<double>>{}, fv, bv),
                  fwqa::ArgumentError);
}

TEST_CASE("bilstm direction-reversal symmetry over 100 parameterizations") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    LstmParams<double> A = random_lstm("A", 2, 3, seed);
    LstmParams<double> B = random_lstm("B", 2, 3, seed + 1000);
    Rng rng(seed + 2000);
    int len = 2 + static_cast<int>(rng.below(4));
    std::vector<Mat<double>> xs;
    for (int i = 0; i < len; ++i)
      xs.push_back(fwqa::verify_detail::random_mat<double>(rng, 2, 1));

    Tape<double> t;
    LstmVars<double> va = bind_lstm(t, A), vb = bind_lstm(t, B);
    std::vector<Var<double>> seq, rev;
    for (int i = 0; i < len; ++i) seq.push_back(t.constant(xs[static_cast<std::size_t>(i)]));
    for (int i = len - 1; i >= 0; --i) rev.push_back(t.constant(xs[static_cast<std::size_t>(i)]));

    BiLstmOut<double> e1 = bilstm_encode(t, seq, va, vb);
    BiLstmOut<double> e2 = bilstm_encode(t, rev, vb, va);
    for (int i = 0; i < len; ++i) {
      // bit-identical: same op sequence per direction
      CHECK(t.value(e1.fwd[static_cast<std::size_t>(i)]) ==
            t.value(e2.bwd[static_cast<std::size_t>(len - 1 - i)]));
      CHECK(t.value(e1.bwd[static_cast<std::size_t>(i)]) ==
            t.value(e2.fwd[static_cast<std::size_t>(len - 1 - i)]));
    }
  }
}

TEST_CASE("bilstm 3-step unrolled oracle") {
  LstmParams<double> fw = random_lstm("f", 2, 3, 21);
  LstmParams<double> bw = random_lstm("b", 2, 3, 22);
  Rng rng(23);
  std::vector<Mat<double>> xs;
  for (int i = 0; i < 3; ++i) xs.push_back(fwqa::verify_detail::random_mat<double>(rng, 2, 1));

  Tape<double> t;
  LstmVars<double> fv = bind_lstm(t, fw), bv = bind_lstm(t, bw);
  std::vector<Var<double>> seq;
  for (const auto& x : xs) seq.push_back(t.constant(x));
  BiLstmOut<double> enc = bilstm_encode(t, seq, fv, bv);

  auto col = [](const Mat<double>& m) {
    std::vector<double> v(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) v[static_cast<std::size_t>(r)] = m(r, 0);
    return v;
  };
  std::vector<double> h(3, 0.0), c(3, 0.0);
  for (int step = 0; step < 3; ++step) {
    lstm_step_scalar(fw, col(xs[static_cast<std::size_t>(step)]), h, c);
    for (int r = 0; r < 3; ++r)
      CHECK(t.value(enc.fwd[static_cast<std::size_t>(step)])(r, 0) ==
            doctest::Approx(h[static_cast<std::size_t>(r)]).epsilon(1e-12));
  }
  h.assign(3, 0.0);
  c.assign(3, 0.0);
  for (int step = 2; step >= 0; --step) {
    lstm_step_scalar(bw, col(xs[static_cast<std::size_t>(step)]), h, c);
    for (int r = 0; r < 3; ++r)
      CHECK(t.value(enc.bwd[static_cast<std::size_t>(step)])(r, 0) ==
            doctest::Approx(h[static_cast<std::size_t>(r)]).epsilon(1e-12));
  }
}

TEST_CASE("qa_summary takes forward-final and backward-first outputs") {
  LstmParams<double> fw = random_lstm("f", 2, 3, 31);
  LstmParams<double> bw = random_lstm("b", 2, 3, 32);
  Tape<double> t;
  LstmVars<double> fv = bind_lstm(t, fw), bv = bind_lstm(t, bw);
  Rng rng(33);
  std::vector<Var<double>> seq;
  for (int i = 0; i < 5; ++i)
    seq.push_back(t.constant(fwqa::verify_detail::random_mat<double>(rng, 2, 1)));
  BiLstmOut<double> enc = bilstm_encode(t, seq, fv, bv);

  Mat<double> u = t.value(qa_summary(enc));
  CHECK(u.rows() == 6);
  CHECK(u.topRows(3) == t.value(enc.fwd[4]));
  CHECK(u.bottomRows(3) == t.value(enc.bwd[0]));

  // dependence check: interior outputs do not feed u
  BiLstmOut<double> mangled = enc;
  for (std::size_t i = 1; i < 5; ++i)
    mangled.bwd[i] = t.constant(fwqa::verify_detail::random_mat<double>(rng, 3, 1));
  for (std::size_t i = 0; i < 4; ++i)
    mangled.fwd[i] = t.constant(fwqa::verify_detail::random_mat<double>(rng, 3, 1));
  CHECK(t.value(qa_summary(mangled)) == u);

  // |c| = 1: u is the single step's full output
  BiLstmOut<double> one = bilstm_encode(t, {seq[0]}, fv, bv);
  CHECK(t.value(qa_summary(one)) == t.value(one.step[0]));
}

TEST_CASE("project: identity, zero, and matmul oracle") {
  Tape<double> t;
  Rng rng(41);
  Mat<double> x = fwqa::verify_detail::random_mat<double>(rng, 4, 1);
  Var<double> vx = t.constant(x);

  Var<double> pid = t.constant(Mat<double>::Identity(4, 4));
  CHECK(t.value(fwqa::project(pid, vx)) == x);

  Var<double> pz = t.constant(Mat<double>::Zero(3, 4));
  CHECK(t.value(fwqa::project(pz, vx)) == Mat<double>::Zero(3, 1));

  Mat<double> p = fwqa::verify_detail::random_mat<double>(rng, 3, 4);
  Mat<double> got = t.value(fwqa::project(t.constant(p), vx));
  Mat<double> want = Mat<double>::Zero(3, 1);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 4; ++k) want(i, 0) += p(i, k) * x(k, 0);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forget-gate bias 1 with zero weights decays cell by sigmoid(1)") {
  LstmParams<double> p = random_lstm("d", 1, 1, 51);
  fill_all(p, 0.0, 0.0);
  p.b_f.value.setConstant(1.0);
  // i = 0.5, g = 0: c_t = sigmoid(1) * c_{t-1}
  Tape<double> t;
  LstmVars<double> v = bind_lstm(t, p);
  Var<double> x = t.zeros(1, 1);
  Var<double> h = t.zeros(1, 1);
  Var<double> c = t.constant(Mat<double>::Constant(1, 1, 1.0));
  double expected = 1.0;
  for (int step = 0; step < 4; ++step) {
    auto [h2, c2] = lstm_step(x, h, c, v);
    expected *= sig(1.0);
    CHECK(t.value(c2)(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    h = h2;
    c = c2;
  }
  CHECK(sig(1.0) == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("gradients through a 4-step biLSTM match finite differences") {
  Rng rng(61);
  LstmParams<double> fw, bw;
  fw.init("f", 2, 3, rng);
  bw.init("b", 2, 3, rng);
  fwqa::ParamRegistry<double> reg;
  fw.register_in(reg);
  bw.register_in(reg);
  std::vector<Mat<double>> xs;
  for (int i = 0; i < 4; ++i) xs.push_back(fwqa::verify_detail::random_mat<double>(rng, 2, 1));

  auto f = [&](Tape<double>& t) {
    LstmVars<double> fv = bind_lstm(t, fw), bv = bind_lstm(t, bw);
    std::vector<Var<double>> seq;
    for (const auto& x : xs) seq.push_back(t.constant(x));
    BiLstmOut<double> enc = bilstm_encode(t, seq, fv, bv);
    Var<double> total = enc.step[0];
    for (std::size_t i = 1; i < enc.step.size(); ++i) total = add(total, enc.step[i]);
    return sum(tanh(total));
  };
  fwqa::GradCheckReport r = fwqa::grad_check<double>(f, reg, 1e-5, 1e-5);
  INFO("max rel error ", r.max_rel_error);
  CHECK(r.pass);
}
