// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fwqa/common.hpp"
#include "fwqa/params.hpp"
#include "fwqa/tape.hpp"

namespace fwqa {

/// Per-gate LSTM weights, gate order i, f, o, g. No peephole connections.
/// Forget-gate bias is initialized to 1, everything else Glorot / zero.
template <typename Scalar>
struct LstmParams {
  Parameter<Scalar> W_i, W_f, W_o, W_g;  // input -> hidden
  Parameter<Scalar> U_i, U_f, U_o, U_g;  // hidden -> hidden
  Parameter<Scalar> b_i, b_f, b_o, b_g;
  int d_h = 0;
  int d_in = 0;

  void init(const std::string& prefix, int input_size, int hidden_size, Rng& rng) {
    d_h = hidden_size;
    d_in = input_size;
    auto mat = [&](Parameter<Scalar>& p, const char* n, int r, int c) {
      p.name = prefix + "." + n;
      p.rank = 2;
      p.value.resize(r, c);
      glorot_fill(p.value, rng);
    };
    auto vec = [&](Parameter<Scalar>& p, const char* n, Scalar fill) {
      p.name = prefix + "." + n;
      p.rank = 1;
      p.value = Mat<Scalar>::Constant(hidden_size, 1, fill);
    };
    mat(W_i, "W_i", d_h, d_in);
    mat(W_f, "W_f", d_h, d_in);
    mat(W_o, "W_o", d_h, d_in);
    mat(W_g, "W_g", d_h, d_in);
    mat(U_i, "U_i", d_h, d_h);
    mat(U_f, "U_f", d_h, d_h);
    mat(U_o, "U_o", d_h, d_h);
    mat(U_g, "U_g", d_h, d_h);
    vec(b_i, "b_i", Scalar(0));
    vec(b_f, "b_f", Scalar(1));
    vec(b_o, "b_o", Scalar(0));
    vec(b_g, "b_g", Scalar(0));
  }

  void register_in(ParamRegistry<Scalar>& reg) {
    for (Parameter<Scalar>* p : {&W_i, &W_f, &W_o, &W_g, &U_i, &U_f, &U_o, &U_g,
                                 &b_i, &b_f, &b_o, &b_g})
      reg.add(*p);
  }
};

/// Tape-bound LSTM weights with the four gates stacked row-wise [i; f; o; g],
/// so one matmul per step feeds all gates.
template <typename Scalar>
struct LstmVars {
  Var<Scalar> W, U, b;
  int d_h = 0;
};

template <typename Scalar>
LstmVars<Scalar> bind_lstm(Tape<Scalar>& tape, LstmParams<Scalar>& p) {
  LstmVars<Scalar> v;
  v.d_h = p.d_h;
  v.W = tape.concat({tape.param(p.W_i), tape.param(p.W_f), tape.param(p.W_o), tape.param(p.W_g)}, 0);
  v.U = tape.concat({tape.param(p.U_i), tape.param(p.U_f), tape.param(p.U_o), tape.param(p.U_g)}, 0);
  v.b = tape.concat({tape.param(p.b_i), tape.param(p.b_f), tape.param(p.b_o), tape.param(p.b_g)}, 0);
  return v;
}

/// One LSTM step:
///   i = sigma(W_i x + U_i h + b_i), f, o alike; g = tanh(W_g x + U_g h + b_g)
///   c' = f .* c + i .* g;  h' = o .* tanh(c')
template <typename Scalar>
std::pair<Var<Scalar>, Var<Scalar>> lstm_step(Var<Scalar> x, Var<Scalar> h,
                                              Var<Scalar> c, const LstmVars<Scalar>& p) {
  const int d = p.d_h;
  Var<Scalar> pre = add(add(matmul(p.W, x), matmul(p.U, h)), p.b);
  Var<Scalar> i = sigmoid(slice_rows(pre, 0, d));
  Var<Scalar> f = sigmoid(slice_rows(pre, d, 2 * d));
  Var<Scalar> o = sigmoid(slice_rows(pre, 2 * d, 3 * d));
  Var<Scalar> g = tanh(slice_rows(pre, 3 * d, 4 * d));
  Var<Scalar> c2 = add(mul(f, c), mul(i, g));
  Var<Scalar> h2 = mul(o, tanh(c2));
  return {h2, c2};
}

/// Outputs of a bidirectional encode. step[t] = [fwd[t]; bwd[t]] (2*d_h).
template <typename Scalar>
struct BiLstmOut {
  std::vector<Var<Scalar>> fwd;
  std::vector<Var<Scalar>> bwd;
  std::vector<Var<Scalar>> step;
};

/// Bidirectional single-layer encode from zero initial states.
template <typename Scalar>
BiLstmOut<Scalar> bilstm_encode(Tape<Scalar>& tape, const std::vector<Var<Scalar>>& seq,
                                const LstmVars<Scalar>& fwd, const LstmVars<Scalar>& bwd) {
  if (seq.empty()) throw ArgumentError("bilstm_encode: empty sequence");
  const std::size_t n = seq.size();
  BiLstmOut<Scalar> out;
  out.fwd.resize(n);
  out.bwd.resize(n);
  out.step.reserve(n);

  Var<Scalar> h = tape.zeros(fwd.d_h, 1);
  Var<Scalar> c = tape.zeros(fwd.d_h, 1);
  for (std::size_t t = 0; t < n; ++t) {
    auto [h2, c2] = lstm_step(seq[t], h, c, fwd);
    out.fwd[t] = h2;
    h = h2;
    c = c2;
  }
  h = tape.zeros(bwd.d_h, 1);
  c = tape.zeros(bwd.d_h, 1);
  for (std::size_t t = n; t-- > 0;) {
    auto [h2, c2] = lstm_step(seq[t], h, c, bwd);
    out.bwd[t] = h2;
    h = h2;
    c = c2;
  }
  for (std::size_t t = 0; t < n; ++t)
    out.step.push_back(concat<Scalar>({out.fwd[t], out.bwd[t]}, 0));
  return out;
}

/// QA-sentence summary u = [y_f(last); y_b(first)]: the two directions'
/// final outputs, each having consumed the whole sentence.
template <typename Scalar>
Var<Scalar> qa_summary(const BiLstmOut<Scalar>& enc) {
  if (enc.fwd.empty()) throw ArgumentError("qa_summary: empty encoding");
  return concat<Scalar>({enc.fwd.back(), enc.bwd.front()}, 0);
}

template <typename Scalar>
Var<Scalar> project(Var<Scalar> P, Var<Scalar> x) {
  return matmul(P, x);
}

template <typename Scalar>
std::vector<Var<Scalar>> project(Var<Scalar> P, const std::vector<Var<Scalar>>& xs) {
  std::vector<Var<Scalar>> out;
  out.reserve(xs.size());
  for (Var<Scalar> x : xs) out.push_back(matmul(P, x));
  return out;
}

}  // namespace fwqa
