// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fwqa/model.hpp"
#include "fwqa/verify.hpp"

using fwqa::AnswerResult;
using fwqa::AttendResult;
using fwqa::bind_attention;
using fwqa::concat;
using fwqa::Mat;
using fwqa::ModelConfig;
using fwqa::ModelForward;
using fwqa::ModelKind;
using fwqa::ModelParams;
using fwqa::Rng;
using fwqa::Tape;
using fwqa::Var;

namespace {

using fwqa::verify_detail::random_mat;

// Plain-Eigen forward pass for one QA-sentence, written independently of the
// tape: direct per-gate LSTM formulas, explicit attention loops.
namespace reference {

using M = Eigen::MatrixXd;
using V = Eigen::VectorXd;

V sigmoid(const V& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

std::vector<V> lstm_scan(const fwqa::LstmParams<double>& p, const std::vector<V>& xs) {
  std::vector<V> out;
  V h = V::Zero(p.d_h), c = V::Zero(p.d_h);
  for (const V& x : xs) {
    V i = sigmoid(p.W_i.value * x + p.U_i.value * h + p.b_i.value);
    V f = sigmoid(p.W_f.value * x + p.U_f.value * h + p.b_f.value);
    V o = sigmoid(p.W_o.value * x + p.U_o.value * h + p.b_o.value);
    V g = (p.W_g.value * x + p.U_g.value * h + p.b_g.value).array().tanh();
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    h = o.cwiseProduct(c.array().tanh().matrix());
    out.push_back(h);
  }
  return out;
}

V softmax_vec(const V& v) {
  V e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

double score(const ModelParams<double>& P, ModelKind kind, const M& feat, const M& qa) {
  const ModelConfig& cfg = P.cfg;
  // video encode
  std::vector<V> vx;
  for (int t = 0; t < feat.cols(); ++t) vx.push_back(P.W_in_v.value * feat.col(t));
  std::vector<V> vf = lstm_scan(P.video_fwd, vx);
  std::vector<V> vxr(vx.rbegin(), vx.rend());
  std::vector<V> vb_rev = lstm_scan(P.video_bwd, vxr);
  M Yv(cfg.d_j, feat.cols());
  for (int t = 0; t < feat.cols(); ++t) {
    V y(2 * cfg.d_hv);
    y << vf[static_cast<std::size_t>(t)],
        vb_rev[static_cast<std::size_t>(feat.cols() - 1 - t)];
    Yv.col(t) = P.P_v.value * y;
  }
  // text encode
  std::vector<V> cx;
  for (int i = 0; i < qa.cols(); ++i) cx.push_back(P.W_in_c.value * qa.col(i));
  std::vector<V> cf = lstm_scan(P.text_fwd, cx);
  std::vector<V> cxr(cx.rbegin(), cx.rend());
  std::vector<V> cb_rev = lstm_scan(P.text_bwd, cxr);
  M Yc(cfg.d_j, qa.cols());
  for (int i = 0; i < qa.cols(); ++i) {
    V y(2 * cfg.d_hc);
    y << cf[static_cast<std::size_t>(i)],
        cb_rev[static_cast<std::size_t>(qa.cols() - 1 - i)];
    Yc.col(i) = P.P_c.value * y;
  }
  V u(2 * cfg.d_hc);
  u << cf.back(), cb_rev.back();  // backward output at token 1
  V u_joint = P.P_c.value * u;

  const auto& A = P.attn;
  V r = V::Zero(cfg.d_r), w = V::Zero(cfg.d_r);
  if (kind == ModelKind::kRewatcher || kind == ModelKind::kForgettable) {
    for (int i = 0; i < qa.cols(); ++i) {
      M m = (A.W_vm.value * Yv).colwise() + (A.W_rm.value * r + A.W_cm.value * Yc.col(i));
      m = m.array().tanh();
      V s = softmax_vec(m.transpose() * A.W_ms.value);
      r = A.W_vr.value * (Yv * s) + (A.W_rr.value * r).array().tanh().matrix();
    }
  }
  if (kind == ModelKind::kRereader || kind == ModelKind::kForgettable) {
    for (int t = 0; t < feat.cols(); ++t) {
      M m = (A.W_cm.value * Yc).colwise() + (A.W_wm.value * w + A.W_vm.value * Yv.col(t));
      m = m.array().tanh();
      V s = softmax_vec(m.transpose() * A.W_ms.value);
      w = A.W_cr.value * (Yc * s) + (A.W_ww.value * w).array().tanh().matrix();
    }
  }
  V combined;
  switch (kind) {
    case ModelKind::kRewatcher:
      combined = P.head.W_rg.value * r + P.head.W_cg.value * u_joint;
      break;
    case ModelKind::kRereader:
      combined = P.head.W_wg.value * w + P.head.W_cg.value * u_joint;
      break;
    case ModelKind::kForgettable:
      combined = P.head.W_rg.value * r + P.head.W_wg.value * w + P.head.W_cg.value * u_joint;
      break;
    case ModelKind::kStraightforward: {
      V vs(2 * cfg.d_hv);
      vs << vf.back(), vb_rev.back();
      combined = P.head.W_vg.value * (P.P_v.value * vs) + P.head.W_cg.value * u_joint;
      break;
    }
  }
  V h = combined.array().tanh();
  for (std::size_t l = 0; l < P.head.fc_W.size(); ++l) {
    h = P.head.fc_W[l].value * h + P.head.fc_b[l].value;
    if (l + 1 < P.head.fc_W.size()) h = h.cwiseMax(0.0);
  }
  return h(0);
}

}  // namespace reference

fwqa::AttnVars<double> scalar_attention(Tape<double>& t, ModelParams<double>& P,
                                        double a, double b, double c, double d,
                                        double e, double f) {
  P.attn.W_vm.value.setConstant(a);
  P.attn.W_cm.value.setConstant(b);
  P.attn.W_rm.value.setConstant(c);
  P.attn.W_wm.value.setConstant(c);
  P.attn.W_ms.value.setConstant(d);
  P.attn.W_rr.value.setConstant(e);
  P.attn.W_ww.value.setConstant(e);
  P.attn.W_vr.value.setConstant(f);
  P.attn.W_cr.value.setConstant(f);
  return bind_attention(t, P.attn);
}

ModelConfig scalar_cfg() {
  ModelConfig cfg = ModelConfig::toy();
  cfg.d_j = 1;
  cfg.d_m = 1;
  cfg.d_r = 1;
  return cfg;
}

}  // namespace

TEST_CASE("attention rows are distributions; identical inputs give uniform rows") {
  ModelConfig cfg = ModelConfig::toy();
  ModelParams<double> P(cfg, 17);
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    Tape<double> t;
    fwqa::AttnVars<double> av = bind_attention(t, P.attn);
    int n = 2 + static_cast<int>(rng.below(5));
    int len = 1 + static_cast<int>(rng.below(6));
    std::vector<Var<double>> video, text;
    for (int i = 0; i < n; ++i) video.push_back(t.constant(random_mat<double>(rng, cfg.d_j, 1)));
    for (int i = 0; i < len; ++i) text.push_back(t.constant(random_mat<double>(rng, cfg.d_j, 1)));

    AttendResult<double> rw = rewatcher_attend(t, video, text, av, cfg.d_r);
    CHECK(static_cast<int>(rw.rows.size()) == len);
    for (const auto& row : rw.rows) {
      const Mat<double>& s = t.value(row);
      CHECK(std::abs(s.sum() - 1.0) <= 1e-9);
      CHECK(s.minCoeff() >= 0.0);
    }
    AttendResult<double> rr = rereader_attend(t, video, text, av, cfg.d_r);
    CHECK(static_cast<int>(rr.rows.size()) == n);
    for (const auto& row : rr.rows) {
      const Mat<double>& s = t.value(row);
      CHECK(std::abs(s.sum() - 1.0) <= 1e-9);
      CHECK(s.minCoeff() >= 0.0);
    }
  }

  // identical frames -> uniform over frames; identical tokens -> uniform over tokens
  Tape<double> t;
  fwqa::AttnVars<double> av = bind_attention(t, P.attn);
  Var<double> frame = t.constant(random_mat<double>(rng, cfg.d_j, 1));
  std::vector<Var<double>> video(4, frame);
  std::vector<Var<double>> text;
  for (int i = 0; i < 3; ++i) text.push_back(t.constant(random_mat<double>(rng, cfg.d_j, 1)));
  AttendResult<double> rw = rewatcher_attend(t, video, text, av, cfg.d_r);
  for (const auto& row : rw.rows)
    for (int j = 0; j < 4; ++j)
      CHECK(std::abs(t.value(row)(0, j) - 0.25) <= 1e-9);

  std::vector<Var<double>> same_text(5, text[0]);
  AttendResult<double> rr = rereader_attend(t, video, same_text, av, cfg.d_r);
  for (const auto& row : rr.rows)
    for (int j = 0; j < 5; ++j)
      CHECK(std::abs(t.value(row)(0, j) - 0.2) <= 1e-9);

  CHECK_THROWS_AS(rewatcher_attend(t, std::vector<Var<double>>{}, text, av, cfg.d_r),
                  fwqa::ArgumentError);
  CHECK_THROWS_AS(rereader_attend(t, video, std::vector<Var<double>>{}, av, cfg.d_r),
                  fwqa::ArgumentError);
}

TEST_CASE("re-watcher scalar hand trace (N=2, |c|=2, scalar dims)") {
  const double a = 0.7, b = -0.4, c = 0.3, d = 1.1, e = 0.5, f = -0.8;
  const double v1 = 0.9, v2 = -0.2, c1 = 0.6, c2 = -1.0;

  ModelParams<double> P(scalar_cfg(), 1);
  Tape<double> t;
  fwqa::AttnVars<double> av = scalar_attention(t, P, a, b, c, d, e, f);
  std::vector<Var<double>> video = {t.constant(Mat<double>::Constant(1, 1, v1)),
                                    t.constant(Mat<double>::Constant(1, 1, v2))};
  std::vector<Var<double>> text = {t.constant(Mat<double>::Constant(1, 1, c1)),
                                   t.constant(Mat<double>::Constant(1, 1, c2))};
  AttendResult<double> got = rewatcher_attend(t, video, text, av, 1);

  // hand-executed trace in plain arithmetic
  double r = 0.0;
  double m11 = std::tanh(a * v1 + c * r + b * c1);
  double m12 = std::tanh(a * v2 + c * r + b * c1);
  double e11 = std::exp(d * m11 - std::max(d * m11, d * m12));
  double e12 = std::exp(d * m12 - std::max(d * m11, d * m12));
  double s11 = e11 / (e11 + e12), s12 = e12 / (e11 + e12);
  double r1 = f * (s11 * v1 + s12 * v2) + std::tanh(e * r);
  double m21 = std::tanh(a * v1 + c * r1 + b * c2);
  double m22 = std::tanh(a * v2 + c * r1 + b * c2);
  double e21 = std::exp(d * m21 - std::max(d * m21, d * m22));
  double e22 = std::exp(d * m22 - std::max(d * m21, d * m22));
  double s21 = e21 / (e21 + e22), s22 = e22 / (e21 + e22);
  double r2 = f * (s21 * v1 + s22 * v2) + std::tanh(e * r1);

  CHECK(t.value(got.rows[0])(0, 0) == doctest::Approx(s11).epsilon(1e-12));
  CHECK(t.value(got.rows[0])(0, 1) == doctest::Approx(s12).epsilon(1e-12));
  CHECK(t.value(got.rows[1])(0, 0) == doctest::Approx(s21).epsilon(1e-12));
  CHECK(t.value(got.rows[1])(0, 1) == doctest::Approx(s22).epsilon(1e-12));
  CHECK(t.value(got.memory)(0, 0) == doctest::Approx(r2).epsilon(1e-12));
}

TEST_CASE("re-reader scalar hand trace (N=2, |c|=2, scalar dims)") {
  const double a = -0.6, b = 0.8, c = 0.25, d = -0.9, e = 0.4, f = 1.2;
  const double v1 = 0.5, v2 = -0.7, c1 = -0.3, c2 = 1.1;

  ModelParams<double> P(scalar_cfg(), 1);
  Tape<double> t;
  fwqa::AttnVars<double> av = scalar_attention(t, P, a, b, c, d, e, f);
  std::vector<Var<double>> video = {t.constant(Mat<double>::Constant(1, 1, v1)),
                                    t.constant(Mat<double>::Constant(1, 1, v2))};
  std::vector<Var<double>> text = {t.constant(Mat<double>::Constant(1, 1, c1)),
                                   t.constant(Mat<double>::Constant(1, 1, c2))};
  AttendResult<double> got = rereader_attend(t, video, text, av, 1);

  double w = 0.0;
  double m11 = std::tanh(b * c1 + c * w + a * v1);
  double m12 = std::tanh(b * c2 + c * w + a * v1);
  double e11 = std::exp(d * m11 - std::max(d * m11, d * m12));
  double e12 = std::exp(d * m12 - std::max(d * m11, d * m12));
  double s11 = e11 / (e11 + e12), s12 = e12 / (e11 + e12);
  double w1 = f * (s11 * c1 + s12 * c2) + std::tanh(e * w);
  double m21 = std::tanh(b * c1 + c * w1 + a * v2);
  double m22 = std::tanh(b * c2 + c * w1 + a * v2);
  double e21 = std::exp(d * m21 - std::max(d * m21, d * m22));
  double e22 = std::exp(d * m22 - std::max(d * m21, d * m22));
  double s21 = e21 / (e21 + e22), s22 = e22 / (e21 + e22);
  double w2 = f * (s21 * c1 + s22 * c2) + std::tanh(e * w1);

  CHECK(t.value(got.rows[0])(0, 0) == doctest::Approx(s11).epsilon(1e-12));
  CHECK(t.value(got.rows[0])(0, 1) == doctest::Approx(s12).epsilon(1e-12));
  CHECK(t.value(got.rows[1])(0, 0) == doctest::Approx(s21).epsilon(1e-12));
  CHECK(t.value(got.rows[1])(0, 1) == doctest::Approx(s22).epsilon(1e-12));
  CHECK(t.value(got.memory)(0, 0) == doctest::Approx(w2).epsilon(1e-12));
}

TEST_CASE("structural reductions: zeroed head weights collapse forgettable") {
  ModelConfig cfg = ModelConfig::toy();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ModelParams<double> P(cfg, seed);
    fwqa::ToyInstance<double> inst = fwqa::make_toy_instance<double>(cfg, seed);

    auto probs = [&](ModelKind kind) {
      Tape<double> t;
      ModelForward<double> fwd(t, P, kind);
      AnswerResult<double> ans = answer_question(fwd, inst.features, inst.qa_embeds);
      return Mat<double>(t.value(ans.probabilities));
    };

    P.head.W_wg.value.setZero();
    CHECK(probs(ModelKind::kForgettable) == probs(ModelKind::kRewatcher));

    ModelParams<double> Q(cfg, seed + 500);
    Q.head.W_rg.value.setZero();
    auto probs_q = [&](ModelKind kind) {
      Tape<double> t;
      ModelForward<double> fwd(t, Q, kind);
      AnswerResult<double> ans = answer_question(fwd, inst.features, inst.qa_embeds);
      return Mat<double>(t.value(ans.probabilities));
    };
    CHECK(probs_q(ModelKind::kForgettable) == probs_q(ModelKind::kRereader));
  }
}

TEST_CASE("score_qa matches an independently coded forward pass") {
  ModelConfig cfg = ModelConfig::toy();
  for (ModelKind kind : {ModelKind::kRewatcher, ModelKind::kRereader,
                         ModelKind::kForgettable, ModelKind::kStraightforward}) {
    ModelParams<double> P(cfg, 99);
    fwqa::ToyInstance<double> inst = fwqa::make_toy_instance<double>(cfg, 7);

    Tape<double> t;
    ModelForward<double> fwd(t, P, kind);
    fwqa::VideoContext<double> video = fwd.encode_video(inst.features);
    double got = t.value(fwd.score_qa(video, inst.qa_embeds[0]).score)(0, 0);
    double want = reference::score(P, kind, inst.features.cast<double>(),
                                   inst.qa_embeds[0].cast<double>());
    INFO("kind ", fwqa::to_string(kind));
    CHECK(got == doctest::Approx(want).epsilon(1e-12));

    // reproducible: rebuilding the graph gives the identical score
    Tape<double> t2;
    ModelForward<double> fwd2(t2, P, kind);
    fwqa::VideoContext<double> video2 = fwd2.encode_video(inst.features);
    CHECK(t2.value(fwd2.score_qa(video2, inst.qa_embeds[0]).score)(0, 0) == got);
  }
}

TEST_CASE("answer_question: simplex output, symmetry, equivariance, determinism") {
  ModelConfig cfg = ModelConfig::toy();
  ModelParams<double> P(cfg, 3);
  fwqa::ToyInstance<double> inst = fwqa::make_toy_instance<double>(cfg, 5);

  Tape<double> t;
  ModelForward<double> fwd(t, P, ModelKind::kForgettable);
  AnswerResult<double> ans = answer_question(fwd, inst.features, inst.qa_embeds);
  const Mat<double> p = t.value(ans.probabilities);
  CHECK(p.rows() == 8);
  CHECK(std::abs(p.sum() - 1.0) <= 1e-9);

  // all candidates identical -> exactly uniform
  std::vector<Mat<double>> same(8, inst.qa_embeds[0]);
  Tape<double> t2;
  ModelForward<double> fwd2(t2, P, ModelKind::kForgettable);
  AnswerResult<double> uni = answer_question(fwd2, inst.features, same);
  for (int k = 0; k < 8; ++k)
    CHECK(t2.value(uni.probabilities)(k, 0) == doctest::Approx(0.125).epsilon(1e-12));

  // permuting candidates permutes probabilities and maps the argmax
  std::vector<Mat<double>> rotated;
  for (int k = 0; k < 8; ++k) rotated.push_back(inst.qa_embeds[static_cast<std::size_t>((k + 3) % 8)]);
  Tape<double> t3;
  ModelForward<double> fwd3(t3, P, ModelKind::kForgettable);
  AnswerResult<double> rot = answer_question(fwd3, inst.features, rotated);
  for (int k = 0; k < 8; ++k)
    CHECK(t3.value(rot.probabilities)(k, 0) ==
          doctest::Approx(p((k + 3) % 8, 0)).epsilon(1e-12));
  CHECK((rot.predicted + 3) % 8 == ans.predicted);

  // deterministic: identical probabilities on a rebuilt graph
  Tape<double> t4;
  ModelForward<double> fwd4(t4, P, ModelKind::kForgettable);
  AnswerResult<double> again = answer_question(fwd4, inst.features, inst.qa_embeds);
  CHECK(t4.value(again.probabilities) == p);

  std::vector<Mat<double>> seven(inst.qa_embeds.begin(), inst.qa_embeds.begin() + 7);
  Tape<double> t5;
  ModelForward<double> fwd5(t5, P, ModelKind::kForgettable);
  CHECK_THROWS_AS(answer_question(fwd5, inst.features, seven), fwqa::ArgumentError);
}

TEST_CASE("qa_loss analytic values") {
  Tape<double> t;
  Var<double> uniform = t.constant(Mat<double>::Constant(8, 1, 0.125));
  CHECK(t.value(fwqa::qa_loss(uniform, 3))(0, 0) ==
        doctest::Approx(std::log(8.0)).epsilon(1e-12));
  CHECK(t.value(fwqa::qa_loss(uniform, 3))(0, 0) == doctest::Approx(2.0794).epsilon(1e-4));

  Mat<double> onehot = Mat<double>::Zero(8, 1);
  onehot(2, 0) = 1.0;
  CHECK(t.value(fwqa::qa_loss(t.constant(onehot), 2))(0, 0) == 0.0);

  Mat<double> skewed = Mat<double>::Constant(8, 1, 0.5 / 7.0);
  skewed(0, 0) = 0.5;
  CHECK(t.value(fwqa::qa_loss(t.constant(skewed), 0))(0, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(fwqa::qa_loss(uniform, 8), fwqa::ArgumentError);
  CHECK_THROWS_AS(fwqa::qa_loss(uniform, -1), fwqa::ArgumentError);
}

TEST_CASE("full forgettable model passes the gradient check at toy dims") {
  fwqa::GradCheckReport r = fwqa::check_model_gradients<double>(
      ModelKind::kForgettable, ModelConfig::toy(), 12);
  INFO("max rel error ", r.max_rel_error, " worst ", r.worst_param);
  CHECK(r.pass);
}
