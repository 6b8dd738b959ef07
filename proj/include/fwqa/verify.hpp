// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fwqa/config.hpp"
#include "fwqa/gradcheck.hpp"
#include "fwqa/model.hpp"
#include "fwqa/rng.hpp"

namespace fwqa {

// Finite-difference verification of every registered op and of the four
// full models at toy dimensions. Used by the gradcheck CLI command, the
// unit suite, and the acceptance suite.

namespace verify_detail {

template <typename Scalar>
Mat<Scalar> random_mat(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Mat<Scalar> m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = static_cast<Scalar>(rng.uniform(lo, hi));
  return m;
}

template <typename Scalar>
struct OpCase {
  std::string name;
  std::vector<Parameter<Scalar>> leaves;
  std::function<Var<Scalar>(Tape<Scalar>&, std::vector<Parameter<Scalar>>&)> build;
};

/// Random scalar functions exercising each op. The root weights the op
/// output by a fixed random matrix so every output coordinate matters.
template <typename Scalar>
std::vector<OpCase<Scalar>> make_op_cases(std::uint64_t seed) {
  Rng rng(splitmix64(seed ^ 0x9e1ull));
  std::vector<OpCase<Scalar>> cases;
  auto leaf = [&](const char* n, int r, int c, double lo = -1.0, double hi = 1.0) {
    Parameter<Scalar> p;
    p.name = n;
    p.value = random_mat<Scalar>(rng, r, c, lo, hi);
    return p;
  };
  auto weighted_sum = [](Tape<Scalar>& t, Var<Scalar> x, const Mat<Scalar>& w) {
    return sum(mul(x, t.constant(w)));
  };

  {
    OpCase<Scalar> c{"matmul", {}, nullptr};
    c.leaves.push_back(leaf("A", 3, 4));
    c.leaves.push_back(leaf("B", 4, 2));
    Mat<Scalar> w = random_mat<Scalar>(rng, 3, 2);
    c.build = [w, weighted_sum](Tape<Scalar>& t, std::vector<Parameter<Scalar>>& ls) {
      return weighted_sum(t, matmul(t.param(ls[0]), t.param(ls[1])), w);
    };
    cases.push_back(std::move(c));
  }
  {
    OpCase<Scalar> c{"add", {}, nullptr};
    c.leaves.push_back(leaf("A", 3, 3));
    c.leaves.push_back(leaf("B", 3, 3));
    Mat<Scalar> w = random_mat<Scalar>(rng, 3, 3);
    c.build = [w, weighted_sum](Tape<Scalar>& t, std::vector<Parameter<Scalar>>& ls) {
      return weighted_sum(t, add(t.param(ls[0]), t.param(ls[1])), w);
    };
    cases.push_back(std::move(c));
  }
  {
    OpCase<Scalar> c{"add_colwise", {}, nullptr};
    c.leaves.push_back(leaf("M", 3, 4));
    c.leaves.push_back(leaf("v", 3, 1));
    Mat<Scalar> w = random_mat<Scalar>(rng, 3, 4);
    c.build = [w, weighted_sum](Tape<Scalar>& t, std::vector<Parameter<Scalar>>& ls) {
      return weighted_sum(t, add_colwise(t.param(ls[0]), t.param(ls[1])), w);
    };
    cases.push_back(std::move(c));
  }
  {
    OpCase<Scalar> c{"mul", {}, nullptr};
    c.leaves.push_back(leaf("A", 3, 3));
    c.leaves.push_back(leaf("B", 3, 3));
    Mat<Scalar> w = random_mat<Scalar>(rng, 3, 3);
    c.build = [w, weighted_sum](Tape<Scalar>& t, std::vector<Parameter<Scalar>>& ls) {
      return weighted_sum(t, mul(t.param(ls[0]), t.param(ls[1])), w);
    };
    cases.push_back(std::move(c));
  }
  for (const char* unary : {"tanh", "sigmoid", "relu"}) {
    OpCase<Scalar> c{unary, {}, nullptr};
    // keep relu inputs away from the kink so central differences are valid
    Parameter<Scalar> p = leaf("X", 3, 4, 0.1, 1.0);
    Mat<Scalar> sign = random_mat<Scalar>(rng, 3, 4);
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 3; ++i)
        if (sign(i, j) < 0) p.value(i, j) = -p.value(i, j);
    c.leaves.push_back(std::move(p));
    Mat<Scalar> w = random_mat<Scalar>(rng, 3, 4);
    std::string name = unary;
    c.build = [w, weighted_sum, name](Tape<Scalar>& t, std::vector<Parameter<Scalar>>& ls) {
      Var<Scalar> x = t.param(ls[0]);
      Var<Scalar> y = name == "tanh" ? tanh(x) : name == "sigmoid" ? sigmoid(x) : relu(x);
      return weighted_sum(t, y, w);
    };
    cases.push_back(std::move(c));
  }
  {
    OpCase<Scalar> c{"scale", {}, nullptr};
    c.leaves.push_back(leaf("X", 2, 5));
    Mat<Scalar> w = random_mat<Scalar>(rng, 2, 5);
    c.build = [w, weighted_sum](Tape<Scalar>& t, std::vector<Parameter<Scalar>>& ls) {
      return weighted_sum(t, scale(t.param(ls[0]), Scalar(-1.7)), w);
    };
    cases.push_back(std::move(c));
  }
  {
    OpCase<Scalar> c{"log", {}, nullptr};
    c.leaves.push_back(leaf("X", 3, 3, 0.5, 2.0));
    Mat<Scalar> w = random_mat<Scalar>(rng, 3, 3);
    c.build = [w, weighted_sum](Tape<Scalar>& t, std::vector<Parameter<Scalar>>& ls) {
      return weighted_sum(t, log(t.param(ls[0])), w);
    };
    cases.push_back(std::move(c));
  }
  {
    OpCase<Scalar> c{"concat", {}, nullptr};
    c.leaves.push_back(leaf("A", 2, 3));
    c.leaves.push_back(leaf("B", 4, 3));
    c.leaves.push_back(leaf("C", 2, 2));
    Mat<Scalar> w0 = random_mat<Scalar>(rng, 6, 3);
    Mat<Scalar> w1 = random_mat<Scalar>(rng, 2, 5);
    c.build = [w0, w1, weighted_sum](Tape<Scalar>& t, std::vector<Parameter<Scalar>>& ls) {
      Var<Scalar> rows = concat<Scalar>({t.param(ls[0]), t.param(ls[1])}, 0);
      Var<Scalar> cols = concat<Scalar>({t.param(ls[0]), t.param(ls[2])}, 1);
      return add(weighted_sum(t, rows, w0), weighted_sum(t, cols, w1));
    };
    cases.push_back(std::move(c));
  }
  {
    OpCase<Scalar> c{"slice", {}, nullptr};
    c.leaves.push_back(leaf("X", 5, 4));
    Mat<Scalar> w0 = random_mat<Scalar>(rng, 2, 4);
    Mat<Scalar> w1 = random_mat<Scalar>(rng, 5, 2);
    c.build = [w0, w1, weighted_sum](Tape<Scalar>& t, std::vector<Parameter<Scalar>>& ls) {
      Var<Scalar> x = t.param(ls[0]);
      return add(weighted_sum(t, slice_rows(x, 1, 3), w0),
                 weighted_sum(t, slice_cols(x, 2, 4), w1));
    };
    cases.push_back(std::move(c));
  }
  {
    OpCase<Scalar> c{"transpose", {}, nullptr};
    c.leaves.push_back(leaf("X", 3, 5));
    Mat<Scalar> w = random_mat<Scalar>(rng, 5, 3);
    c.build = [w, weighted_sum](Tape<Scalar>& t, std::vector<Parameter<Scalar>>& ls) {
      return weighted_sum(t, transpose(t.param(ls[0])), w);
    };
    cases.push_back(std::move(c));
  }
  {
    OpCase<Scalar> c{"softmax", {}, nullptr};
    c.leaves.push_back(leaf("X", 6, 1));
    Mat<Scalar> w = random_mat<Scalar>(rng, 6, 1);
    c.build = [w, weighted_sum](Tape<Scalar>& t, std::vector<Parameter<Scalar>>& ls) {
      return weighted_sum(t, softmax(t.param(ls[0])), w);
    };
    cases.push_back(std::move(c));
  }
  {
    OpCase<Scalar> c{"sum_pick", {}, nullptr};
    c.leaves.push_back(leaf("X", 4, 3));
    c.build = [](Tape<Scalar>& t, std::vector<Parameter<Scalar>>& ls) {
      Var<Scalar> x = t.param(ls[0]);
      return add(sum(tanh(x)), scale(pick(x, 2, 1), Scalar(0.5)));
    };
    cases.push_back(std::move(c));
  }
  return cases;
}

}  // namespace verify_detail

struct OpCheckResult {
  std::string op;
  GradCheckReport report;
};

/// Gradient-check every registered op once with the given seed.
template <typename Scalar>
std::vector<OpCheckResult> check_op_gradients(std::uint64_t seed, double h = 1e-5,
                                              double tol = 1e-6) {
  std::vector<OpCheckResult> results;
  auto cases = verify_detail::make_op_cases<Scalar>(seed);
  for (auto& c : cases) {
    ParamRegistry<Scalar> reg;
    for (auto& p : c.leaves) reg.add(p);
    auto f = [&](Tape<Scalar>& t) { return c.build(t, c.leaves); };
    results.push_back({c.name, grad_check<Scalar>(f, reg, h, tol)});
  }
  return results;
}

/// A fixed random question at the given dims: one video, 8 candidate
/// QA-sentences of qa_len tokens each.
template <typename Scalar>
struct ToyInstance {
  Mat<Scalar> features;
  std::vector<Mat<Scalar>> qa_embeds;
  int gt_index = 2;
};

template <typename Scalar>
ToyInstance<Scalar> make_toy_instance(const ModelConfig& cfg, std::uint64_t seed,
                                      int qa_len = 5) {
  Rng rng(splitmix64(seed ^ 0x70791ull));
  ToyInstance<Scalar> inst;
  inst.features = verify_detail::random_mat<Scalar>(rng, cfg.d_v, cfg.frames, -0.8, 0.8);
  for (int k = 0; k < 8; ++k)
    inst.qa_embeds.push_back(
        verify_detail::random_mat<Scalar>(rng, cfg.d_w, qa_len, -0.8, 0.8));
  return inst;
}

/// Gradient-check the loss of a full model against central differences over
/// every parameter.
template <typename Scalar>
GradCheckReport check_model_gradients(ModelKind kind, const ModelConfig& cfg,
                                      std::uint64_t seed, double h = 1e-5,
                                      double tol = 1e-4) {
  ModelParams<Scalar> params(cfg, seed);
  ToyInstance<Scalar> inst = make_toy_instance<Scalar>(cfg, seed);
  auto f = [&](Tape<Scalar>& t) {
    ModelForward<Scalar> fwd(t, params, kind);
    AnswerResult<Scalar> ans = answer_question(fwd, inst.features, inst.qa_embeds);
    return qa_loss(ans.probabilities, inst.gt_index);
  };
  return grad_check<Scalar>(f, params.registry, h, tol);
}

}  // namespace fwqa
