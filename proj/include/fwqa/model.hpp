// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fwqa/common.hpp"
#include "fwqa/config.hpp"
#include "fwqa/lstm.hpp"
#include "fwqa/params.hpp"
#include "fwqa/rng.hpp"
#include "fwqa/tape.hpp"

namespace fwqa {

/// Weights of the re-watching / re-reading attention passes. W_vm, W_cm and
/// the scoring vector W_ms are shared between the two passes; W_vr / W_cr
/// map the attention-weighted context from joint space into memory space.
template <typename Scalar>
struct AttentionParams {
  Parameter<Scalar> W_vm, W_cm;  // joint -> match
  Parameter<Scalar> W_rm, W_wm;  // memory -> match
  Parameter<Scalar> W_ms;        // match scoring vector (d_m x 1)
  Parameter<Scalar> W_rr, W_ww;  // memory -> memory
  Parameter<Scalar> W_vr, W_cr;  // joint -> memory (context projections)

  void init(const ModelConfig& cfg, Rng& rng) {
    auto mat = [&](Parameter<Scalar>& p, const char* n, int r, int c, int rank = 2) {
      p.name = std::string("attn.") + n;
      p.rank = rank;
      p.value.resize(r, c);
      glorot_fill(p.value, rng);
    };
    mat(W_vm, "W_vm", cfg.d_m, cfg.d_j);
    mat(W_cm, "W_cm", cfg.d_m, cfg.d_j);
    mat(W_rm, "W_rm", cfg.d_m, cfg.d_r);
    mat(W_wm, "W_wm", cfg.d_m, cfg.d_r);
    mat(W_ms, "W_ms", cfg.d_m, 1, 1);
    mat(W_rr, "W_rr", cfg.d_r, cfg.d_r);
    mat(W_ww, "W_ww", cfg.d_r, cfg.d_r);
    mat(W_vr, "W_vr", cfg.d_r, cfg.d_j);
    mat(W_cr, "W_cr", cfg.d_r, cfg.d_j);
  }

  void register_in(ParamRegistry<Scalar>& reg) {
    for (Parameter<Scalar>* p : {&W_vm, &W_cm, &W_rm, &W_wm, &W_ms, &W_rr, &W_ww, &W_vr, &W_cr})
      reg.add(*p);
  }
};

/// Score head: g = FC(tanh(W_rg r + W_wg w + W_cg u~ [+ W_vg yv^])) with a
/// ReLU-ReLU-ReLU-linear stack of four layers.
template <typename Scalar>
struct ScoreHeadParams {
  Parameter<Scalar> W_rg, W_wg;  // memory -> combine
  Parameter<Scalar> W_cg, W_vg;  // joint -> combine
  std::vector<Parameter<Scalar>> fc_W;
  std::vector<Parameter<Scalar>> fc_b;

  void init(const ModelConfig& cfg, Rng& rng) {
    auto mat = [&](Parameter<Scalar>& p, const std::string& n, int r, int c) {
      p.name = "head." + n;
      p.rank = 2;
      p.value.resize(r, c);
      glorot_fill(p.value, rng);
    };
    mat(W_rg, "W_rg", cfg.d_g, cfg.d_r);
    mat(W_wg, "W_wg", cfg.d_g, cfg.d_r);
    mat(W_cg, "W_cg", cfg.d_g, cfg.d_j);
    mat(W_vg, "W_vg", cfg.d_g, cfg.d_j);
    fc_W.resize(cfg.fc_sizes.size());
    fc_b.resize(cfg.fc_sizes.size());
    int in = cfg.d_g;
    for (std::size_t l = 0; l < cfg.fc_sizes.size(); ++l) {
      int out = cfg.fc_sizes[l];
      mat(fc_W[l], "fc" + std::to_string(l + 1) + ".W", out, in);
      fc_b[l].name = "head.fc" + std::to_string(l + 1) + ".b";
      fc_b[l].rank = 1;
      fc_b[l].value = Mat<Scalar>::Zero(out, 1);
      in = out;
    }
  }

  void register_in(ParamRegistry<Scalar>& reg) {
    for (Parameter<Scalar>* p : {&W_rg, &W_wg, &W_cg, &W_vg}) reg.add(*p);
    for (std::size_t l = 0; l < fc_W.size(); ++l) {
      reg.add(fc_W[l]);
      reg.add(fc_b[l]);
    }
  }
};

/// Every weight of the system. All four model kinds share this set; a kind
/// simply leaves some members out of its graph (their gradients stay zero).
template <typename Scalar>
struct ModelParams {
  ModelConfig cfg;
  LstmParams<Scalar> video_fwd, video_bwd, text_fwd, text_bwd;
  Parameter<Scalar> W_in_v, W_in_c;  // raw feature / embedding -> LSTM input
  Parameter<Scalar> P_v, P_c;        // encoder output -> joint space
  AttentionParams<Scalar> attn;
  ScoreHeadParams<Scalar> head;
  ParamRegistry<Scalar> registry;

  explicit ModelParams(const ModelConfig& config, std::uint64_t seed = 1)
      : cfg(config) {
    cfg.validate();
    Rng rng(splitmix64(seed ^ 0x6d6f64656cull));
    const int vin = cfg.video_input_projection ? cfg.lstm_input : cfg.d_v;
    const int cin = cfg.text_input_projection ? cfg.lstm_input : cfg.d_w;
    video_fwd.init("video_fwd", vin, cfg.d_hv, rng);
    video_bwd.init("video_bwd", vin, cfg.d_hv, rng);
    text_fwd.init("text_fwd", cin, cfg.d_hc, rng);
    text_bwd.init("text_bwd", cin, cfg.d_hc, rng);
    auto mat = [&](Parameter<Scalar>& p, const char* n, int r, int c) {
      p.name = n;
      p.rank = 2;
      p.value.resize(r, c);
      glorot_fill(p.value, rng);
    };
    mat(W_in_v, "W_in_v", cfg.lstm_input, cfg.d_v);
    mat(W_in_c, "W_in_c", cfg.lstm_input, cfg.d_w);
    mat(P_v, "P_v", cfg.d_j, 2 * cfg.d_hv);
    mat(P_c, "P_c", cfg.d_j, 2 * cfg.d_hc);
    attn.init(cfg, rng);
    head.init(cfg, rng);

    video_fwd.register_in(registry);
    video_bwd.register_in(registry);
    text_fwd.register_in(registry);
    text_bwd.register_in(registry);
    registry.add(W_in_v);
    registry.add(W_in_c);
    registry.add(P_v);
    registry.add(P_c);
    attn.register_in(registry);
    head.register_in(registry);
  }

  ModelParams(const ModelParams&) = delete;
  ModelParams& operator=(const ModelParams&) = delete;
};

template <typename Scalar>
struct AttendResult {
  Var<Scalar> memory;              // r(|c|) or w(N), d_r x 1
  std::vector<Var<Scalar>> rows;   // softmax rows, each 1 x (target length)
};

/// Tape-bound attention weights plus the hoisted per-forward products.
template <typename Scalar>
struct AttnVars {
  Var<Scalar> W_vm, W_cm, W_rm, W_wm, W_ms_t, W_rr, W_ww, W_vr, W_cr;
};

template <typename Scalar>
AttnVars<Scalar> bind_attention(Tape<Scalar>& tape, AttentionParams<Scalar>& p) {
  AttnVars<Scalar> v;
  v.W_vm = tape.param(p.W_vm);
  v.W_cm = tape.param(p.W_cm);
  v.W_rm = tape.param(p.W_rm);
  v.W_wm = tape.param(p.W_wm);
  v.W_ms_t = transpose(tape.param(p.W_ms));
  v.W_rr = tape.param(p.W_rr);
  v.W_ww = tape.param(p.W_ww);
  v.W_vr = tape.param(p.W_vr);
  v.W_cr = tape.param(p.W_cr);
  return v;
}

/// Re-watching pass. For each QA-sentence token i (video matrix Yv is
/// d_j x N, columns are frames):
///   m(i, .) = tanh(W_vm Yv  .+  (W_rm r(i-1) + W_cm yc(i)))
///   s(i, .) = softmax_t(W_ms^T m(i, .))
///   r(i)    = W_vr (Yv s(i, .)^T) + tanh(W_rr r(i-1))
/// `premixed_video` is W_vm * Yv (shared across the 8 candidates of a
/// question) and `premixed_text` is W_cm * Yc, so the loop body is free of
/// joint-space matmuls.
template <typename Scalar>
AttendResult<Scalar> rewatcher_attend(Tape<Scalar>& tape, Var<Scalar> video_joint,
                                      Var<Scalar> premixed_video,
                                      Var<Scalar> premixed_text,
                                      const AttnVars<Scalar>& w, int d_r) {
  const int len = static_cast<int>(tape.value(premixed_text).cols());
  if (tape.value(video_joint).cols() < 1)
    throw ArgumentError("rewatcher_attend: empty video");
  if (len < 1) throw ArgumentError("rewatcher_attend: empty sentence");
  AttendResult<Scalar> out;
  out.rows.reserve(static_cast<std::size_t>(len));
  Var<Scalar> r = tape.zeros(d_r, 1);
  for (int i = 0; i < len; ++i) {
    Var<Scalar> shift = add(matmul(w.W_rm, r), slice_cols(premixed_text, i, i + 1));
    Var<Scalar> match = tanh(add_colwise(premixed_video, shift));
    Var<Scalar> row = softmax(matmul(w.W_ms_t, match));
    out.rows.push_back(row);
    Var<Scalar> context = matmul(video_joint, transpose(row));
    r = add(matmul(w.W_vr, context), tanh(matmul(w.W_rr, r)));
  }
  out.memory = r;
  return out;
}

/// Re-reading pass, the mirror image: each frame t attends over the QA
/// tokens (Yc is d_j x |c|):
///   m(t, .) = tanh(W_cm Yc  .+  (W_wm w(t-1) + W_vm yv(t)))
///   s(t, .) = softmax_i(W_ms^T m(t, .))
///   w(t)    = W_cr (Yc s(t, .)^T) + tanh(W_ww w(t-1))
template <typename Scalar>
AttendResult<Scalar> rereader_attend(Tape<Scalar>& tape, Var<Scalar> text_joint,
                                     Var<Scalar> premixed_text,
                                     Var<Scalar> premixed_video,
                                     const AttnVars<Scalar>& w, int d_r) {
  const int frames = static_cast<int>(tape.value(premixed_video).cols());
  if (tape.value(text_joint).cols() < 1)
    throw ArgumentError("rereader_attend: empty sentence");
  if (frames < 1) throw ArgumentError("rereader_attend: empty video");
  AttendResult<Scalar> out;
  out.rows.reserve(static_cast<std::size_t>(frames));
  Var<Scalar> w_mem = tape.zeros(d_r, 1);
  for (int t = 0; t < frames; ++t) {
    Var<Scalar> shift = add(matmul(w.W_wm, w_mem), slice_cols(premixed_video, t, t + 1));
    Var<Scalar> match = tanh(add_colwise(premixed_text, shift));
    Var<Scalar> row = softmax(matmul(w.W_ms_t, match));
    out.rows.push_back(row);
    Var<Scalar> context = matmul(text_joint, transpose(row));
    w_mem = add(matmul(w.W_cr, context), tanh(matmul(w.W_ww, w_mem)));
  }
  out.memory = w_mem;
  return out;
}

/// Convenience forms over per-step encodings, matching the pass definitions
/// directly (used by tests and small experiments).
template <typename Scalar>
AttendResult<Scalar> rewatcher_attend(Tape<Scalar>& tape,
                                      const std::vector<Var<Scalar>>& video_joint,
                                      const std::vector<Var<Scalar>>& qa_joint,
                                      const AttnVars<Scalar>& w, int d_r) {
  if (video_joint.empty()) throw ArgumentError("rewatcher_attend: empty video");
  if (qa_joint.empty()) throw ArgumentError("rewatcher_attend: empty sentence");
  Var<Scalar> yv = concat(video_joint, 1);
  Var<Scalar> yc = concat(qa_joint, 1);
  return rewatcher_attend(tape, yv, matmul(w.W_vm, yv), matmul(w.W_cm, yc), w, d_r);
}

template <typename Scalar>
AttendResult<Scalar> rereader_attend(Tape<Scalar>& tape,
                                     const std::vector<Var<Scalar>>& video_joint,
                                     const std::vector<Var<Scalar>>& qa_joint,
                                     const AttnVars<Scalar>& w, int d_r) {
  if (video_joint.empty()) throw ArgumentError("rereader_attend: empty video");
  if (qa_joint.empty()) throw ArgumentError("rereader_attend: empty sentence");
  Var<Scalar> yv = concat(video_joint, 1);
  Var<Scalar> yc = concat(qa_joint, 1);
  return rereader_attend(tape, yc, matmul(w.W_cm, yc), matmul(w.W_vm, yv), w, d_r);
}

/// Encoded video shared by all candidates of one question.
template <typename Scalar>
struct VideoContext {
  std::vector<Var<Scalar>> joint;  // per-frame joint vectors
  Var<Scalar> joint_mat;           // d_j x N
  Var<Scalar> premixed;            // W_vm * joint_mat (attention kinds only)
  Var<Scalar> summary_joint;       // [y_f(N); y_b(1)] -> joint (straightforward)
};

/// Bound model: all weights registered on one tape, reused across the
/// candidates of a question.
template <typename Scalar>
class ModelForward {
 public:
  ModelForward(Tape<Scalar>& tape, ModelParams<Scalar>& params, ModelKind kind)
      : tape_(tape), params_(params), kind_(kind) {
    video_fwd_ = bind_lstm(tape, params.video_fwd);
    video_bwd_ = bind_lstm(tape, params.video_bwd);
    text_fwd_ = bind_lstm(tape, params.text_fwd);
    text_bwd_ = bind_lstm(tape, params.text_bwd);
    if (params.cfg.video_input_projection) w_in_v_ = tape.param(params.W_in_v);
    if (params.cfg.text_input_projection) w_in_c_ = tape.param(params.W_in_c);
    if (params.cfg.video_output_projection) p_v_ = tape.param(params.P_v);
    if (params.cfg.text_output_projection) p_c_ = tape.param(params.P_c);
    if (uses_attention()) attn_ = bind_attention(tape, params.attn);
    head_W_rg_ = tape.param(params.head.W_rg);
    head_W_wg_ = tape.param(params.head.W_wg);
    head_W_cg_ = tape.param(params.head.W_cg);
    head_W_vg_ = tape.param(params.head.W_vg);
    for (std::size_t l = 0; l < params.head.fc_W.size(); ++l) {
      fc_W_.push_back(tape.param(params.head.fc_W[l]));
      fc_b_.push_back(tape.param(params.head.fc_b[l]));
    }
  }

  bool uses_rewatch() const {
    return kind_ == ModelKind::kRewatcher || kind_ == ModelKind::kForgettable;
  }
  bool uses_reread() const {
    return kind_ == ModelKind::kRereader || kind_ == ModelKind::kForgettable;
  }
  bool uses_attention() const { return uses_rewatch() || uses_reread(); }

  /// Encode one video (features are d_v x N, columns are frames).
  VideoContext<Scalar> encode_video(const Mat<Scalar>& features) {
    if (features.cols() < 1) throw ArgumentError("encode_video: no frames");
    if (features.rows() != params_.cfg.d_v)
      throw ShapeError("encode_video: features are " + shape_str(features) +
                       ", expected rows = " + std::to_string(params_.cfg.d_v));
    Var<Scalar> x = tape_.constant(features);
    if (params_.cfg.video_input_projection) x = matmul(w_in_v_, x);
    const int n = static_cast<int>(features.cols());
    std::vector<Var<Scalar>> steps;
    steps.reserve(n);
    for (int t = 0; t < n; ++t) steps.push_back(slice_cols(x, t, t + 1));
    BiLstmOut<Scalar> enc = bilstm_encode(tape_, steps, video_fwd_, video_bwd_);

    VideoContext<Scalar> ctx;
    ctx.joint = params_.cfg.video_output_projection ? project(p_v_, enc.step) : enc.step;
    ctx.joint_mat = concat(ctx.joint, 1);
    if (uses_attention()) ctx.premixed = matmul(attn_.W_vm, ctx.joint_mat);
    if (kind_ == ModelKind::kStraightforward) {
      Var<Scalar> summary = concat<Scalar>({enc.fwd.back(), enc.bwd.front()}, 0);
      ctx.summary_joint = params_.cfg.video_output_projection ? matmul(p_v_, summary) : summary;
    }
    return ctx;
  }

  /// Score one QA-sentence (embeddings are d_w x |c|, columns are tokens)
  /// against an encoded video. Returns the scalar score plus the attention
  /// rows that were produced on the way.
  struct ScoreResult {
    Var<Scalar> score;
    std::vector<Var<Scalar>> rewatch_rows;
    std::vector<Var<Scalar>> reread_rows;
  };

  ScoreResult score_qa(const VideoContext<Scalar>& video, const Mat<Scalar>& qa_embed) {
    if (qa_embed.cols() < 1) throw ArgumentError("score_qa: empty QA-sentence");
    if (qa_embed.rows() != params_.cfg.d_w)
      throw ShapeError("score_qa: embeddings are " + shape_str(qa_embed) +
                       ", expected rows = " + std::to_string(params_.cfg.d_w));
    Var<Scalar> x = tape_.constant(qa_embed);
    if (params_.cfg.text_input_projection) x = matmul(w_in_c_, x);
    const int n = static_cast<int>(qa_embed.cols());
    std::vector<Var<Scalar>> steps;
    steps.reserve(n);
    for (int i = 0; i < n; ++i) steps.push_back(slice_cols(x, i, i + 1));
    BiLstmOut<Scalar> enc = bilstm_encode(tape_, steps, text_fwd_, text_bwd_);

    std::vector<Var<Scalar>> joint =
        params_.cfg.text_output_projection ? project(p_c_, enc.step) : enc.step;
    Var<Scalar> u = qa_summary(enc);
    Var<Scalar> u_joint = params_.cfg.text_output_projection ? matmul(p_c_, u) : u;

    Var<Scalar> text_mat, premixed_text;
    if (uses_attention()) {
      text_mat = concat(joint, 1);
      premixed_text = matmul(attn_.W_cm, text_mat);
    }

    ScoreResult res;
    Var<Scalar> combined;
    switch (kind_) {
      case ModelKind::kRewatcher: {
        AttendResult<Scalar> rw = rewatcher_attend(tape_, video.joint_mat, video.premixed,
                                                   premixed_text, attn_, params_.cfg.d_r);
        res.rewatch_rows = rw.rows;
        combined = add(matmul(head_W_rg_, rw.memory), matmul(head_W_cg_, u_joint));
        break;
      }
      case ModelKind::kRereader: {
        AttendResult<Scalar> rr = rereader_attend(tape_, text_mat, premixed_text,
                                                  video.premixed, attn_, params_.cfg.d_r);
        res.reread_rows = rr.rows;
        combined = add(matmul(head_W_wg_, rr.memory), matmul(head_W_cg_, u_joint));
        break;
      }
      case ModelKind::kForgettable: {
        AttendResult<Scalar> rw = rewatcher_attend(tape_, video.joint_mat, video.premixed,
                                                   premixed_text, attn_, params_.cfg.d_r);
        AttendResult<Scalar> rr = rereader_attend(tape_, text_mat, premixed_text,
                                                  video.premixed, attn_, params_.cfg.d_r);
        res.rewatch_rows = rw.rows;
        res.reread_rows = rr.rows;
        combined = add(add(matmul(head_W_rg_, rw.memory), matmul(head_W_wg_, rr.memory)),
                       matmul(head_W_cg_, u_joint));
        break;
      }
      case ModelKind::kStraightforward:
        combined = add(matmul(head_W_vg_, video.summary_joint), matmul(head_W_cg_, u_joint));
        break;
    }
    Var<Scalar> h = tanh(combined);
    for (std::size_t l = 0; l < fc_W_.size(); ++l) {
      h = add(matmul(fc_W_[l], h), fc_b_[l]);
      if (l + 1 < fc_W_.size()) h = relu(h);
    }
    res.score = h;
    return res;
  }

  Tape<Scalar>& tape() { return tape_; }

 private:
  Tape<Scalar>& tape_;
  ModelParams<Scalar>& params_;
  ModelKind kind_;
  LstmVars<Scalar> video_fwd_, video_bwd_, text_fwd_, text_bwd_;
  Var<Scalar> w_in_v_, w_in_c_, p_v_, p_c_;
  AttnVars<Scalar> attn_;
  Var<Scalar> head_W_rg_, head_W_wg_, head_W_cg_, head_W_vg_;
  std::vector<Var<Scalar>> fc_W_, fc_b_;
};

template <typename Scalar>
struct AnswerResult {
  Var<Scalar> probabilities;  // 8 x 1 simplex
  int predicted = 0;
  std::array<Var<Scalar>, 8> scores;
};

/// Score all 8 candidate QA-sentences of a question against one video and
/// softmax the 8 scores. The prediction is the argmax probability.
template <typename Scalar>
AnswerResult<Scalar> answer_question(ModelForward<Scalar>& model,
                                     const Mat<Scalar>& features,
                                     const std::vector<Mat<Scalar>>& qa_embeds) {
  if (qa_embeds.size() != 8)
    throw ArgumentError("answer_question: expected exactly 8 candidates, got " +
                        std::to_string(qa_embeds.size()));
  VideoContext<Scalar> video = model.encode_video(features);
  AnswerResult<Scalar> out;
  std::vector<Var<Scalar>> scores;
  scores.reserve(8);
  for (int k = 0; k < 8; ++k) {
    out.scores[static_cast<std::size_t>(k)] = model.score_qa(video, qa_embeds[k]).score;
    scores.push_back(out.scores[static_cast<std::size_t>(k)]);
  }
  Var<Scalar> g = concat(scores, 0);
  out.probabilities = softmax(g);
  const Mat<Scalar>& p = model.tape().value(out.probabilities);
  Eigen::Index best = 0;
  p.col(0).maxCoeff(&best);
  out.predicted = static_cast<int>(best);
  return out;
}

/// Cross-entropy against the ground-truth slot: -log(p[gt]).
template <typename Scalar>
Var<Scalar> qa_loss(Var<Scalar> probabilities, int gt_index) {
  const Mat<Scalar>& p = probabilities.tape->value(probabilities);
  if (gt_index < 0 || gt_index >= p.rows())
    throw ArgumentError("qa_loss: gt index " + std::to_string(gt_index) +
                        " out of range 0.." + std::to_string(p.rows() - 1));
  return scale(log(pick(probabilities, gt_index, 0)), Scalar(-1));
}

}  // namespace fwqa
