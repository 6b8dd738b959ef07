// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fwqa/config.hpp"
#include "fwqa/data_io.hpp"
#include "fwqa/dataset.hpp"
#include "fwqa/metrics.hpp"
#include "fwqa/train.hpp"

namespace fwqa {

/// Sample, tokenize and embed instances into model-ready form. Features are
/// transposed to d_v x N (columns = frames); embeddings to d_w x |c|.
template <typename Scalar>
std::vector<PreparedInstance<Scalar>> prepare_instances(
    const std::vector<QAInstance>& instances, const FeatureStore& features,
    const EmbeddingTable& table, const ModelConfig& cfg) {
  if (table.dim() != cfg.d_w)
    throw ShapeError("embedding dim " + std::to_string(table.dim()) +
                     " does not match d_w = " + std::to_string(cfg.d_w));
  std::vector<PreparedInstance<Scalar>> out;
  out.reserve(instances.size());
  for (const QAInstance& inst : instances) {
    const Eigen::MatrixXd& raw = features.get(inst.video_id);  // N_raw x d_v
    if (raw.cols() != cfg.d_v)
      throw ShapeError("features of " + inst.video_id + " have dim " +
                       std::to_string(raw.cols()) + ", expected d_v = " +
                       std::to_string(cfg.d_v));
    std::vector<int> idx = sample_frames(static_cast<int>(raw.rows()), cfg.frames);
    PreparedInstance<Scalar> p;
    p.features.resize(cfg.d_v, cfg.frames);
    for (int j = 0; j < cfg.frames; ++j)
      p.features.col(j) = raw.row(idx[static_cast<std::size_t>(j)]).transpose().cast<Scalar>();

    auto sentences = make_qa_sentences(tokenize_question(inst.question), inst.candidates);
    p.qa_embeds.reserve(8);
    for (const auto& sent : sentences) {
      if (sent.empty())
        throw InvariantError("empty QA-sentence for video " + inst.video_id);
      Eigen::MatrixXd e = embed_tokens(sent, table);  // |c| x d_w
      p.qa_embeds.push_back(e.transpose().cast<Scalar>());
    }
    p.gt_index = inst.gt_index;
    out.push_back(std::move(p));
  }
  return out;
}

struct TrainCommand {
  std::string model;
  std::string config_path;  // optional; defaults apply when empty
  std::string train_path;
  std::string val_path;
  std::string features_dir;
  std::string embeddings_path;
  std::string out_path;
  std::optional<std::uint64_t> seed_override;
};

struct EvalCommand {
  std::string checkpoint_path;
  std::string test_path;
  std::string features_dir;
  std::string embeddings_path;
  std::string taxonomy_path;
  std::string report_path;
};

struct TrainOutcome {
  TrainResult result;
  PipelineConfig config;
};

/// Train a model and write <out> (checkpoint), <out>.meta.json (model kind
/// and config, consumed by eval) and <out>.history.csv
/// (epoch,train_loss,val_accuracy).
TrainOutcome run_train_command(const TrainCommand& cmd);

/// Evaluate a checkpoint; writes the report JSON and returns the report.
EvalReport run_eval_command(const EvalCommand& cmd);

struct GradcheckCommand {
  std::string model = "all";  // rewatcher|rereader|forgettable|straightforward|ops|all
  std::string dims = "toy";
  double tol = 1e-4;
  std::uint64_t seed = 1;
};

/// Print one line per check; true when everything passed.
bool run_gradcheck_command(const GradcheckCommand& cmd, std::ostream& os);

}  // namespace fwqa
