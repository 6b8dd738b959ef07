// SPDX-License-Identifier: Apache-2.0
#include "fwqa/pipeline.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fwqa/checkpoint.hpp"
#include "fwqa/verify.hpp"

namespace fwqa {

using nlohmann::json;

namespace {

std::string history_csv(const TrainResult& result) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,val_accuracy\n";
  for (const EpochStats& e : result.history)
    os << e.epoch << "," << e.train_loss << "," << e.val_accuracy << "\n";
  return os.str();
}

template <typename Scalar>
TrainOutcome train_impl(const PipelineConfig& cfg, ModelKind kind, const TrainCommand& cmd) {
  std::vector<QAInstance> train_inst = read_qa_instances(cmd.train_path);
  std::vector<QAInstance> val_inst = read_qa_instances(cmd.val_path);
  FeatureStore store(cmd.features_dir);
  EmbeddingTable table = EmbeddingTable::load(cmd.embeddings_path);

  auto prepared_train = prepare_instances<Scalar>(train_inst, store, table, cfg.model);
  auto prepared_val = prepare_instances<Scalar>(val_inst, store, table, cfg.model);

  ModelParams<Scalar> params(cfg.model, cfg.train.seed);
  TrainOutcome outcome;
  outcome.config = cfg;
  outcome.result = train(params, kind, prepared_train, prepared_val, cfg.train, &std::cerr);

  save_checkpoint(params.registry, cmd.out_path);
  json meta;
  meta["model_kind"] = to_string(kind);
  meta["config"] = json::parse(pipeline_config_to_json(cfg));
  atomic_write_text(cmd.out_path + ".meta.json", meta.dump(2) + "\n");
  atomic_write_text(cmd.out_path + ".history.csv", history_csv(outcome.result));
  return outcome;
}

template <typename Scalar>
EvalReport eval_impl(const PipelineConfig& cfg, ModelKind kind, const EvalCommand& cmd) {
  std::vector<QAInstance> instances = read_qa_instances(cmd.test_path);
  FeatureStore store(cmd.features_dir);
  EmbeddingTable table = EmbeddingTable::load(cmd.embeddings_path);
  Taxonomy tax = Taxonomy::load(cmd.taxonomy_path);

  auto prepared = prepare_instances<Scalar>(instances, store, table, cfg.model);
  ModelParams<Scalar> params(cfg.model, cfg.train.seed);
  load_checkpoint(params.registry, cmd.checkpoint_path);

  std::vector<int> predicted = predict_all(params, kind, prepared, cfg.train.workers);
  EvalReport report = evaluate(predicted, instances, tax);
  if (!cmd.report_path.empty())
    atomic_write_text(cmd.report_path, report.to_json() + "\n");
  return report;
}

}  // namespace

TrainOutcome run_train_command(const TrainCommand& cmd) {
  ModelKind kind = model_kind_from_string(cmd.model);
  PipelineConfig cfg;
  if (!cmd.config_path.empty()) cfg = load_pipeline_config(cmd.config_path);
  if (cmd.seed_override) cfg.train.seed = *cmd.seed_override;
  if (cfg.precision == Precision::kDouble) return train_impl<double>(cfg, kind, cmd);
  return train_impl<float>(cfg, kind, cmd);
}

EvalReport run_eval_command(const EvalCommand& cmd) {
  std::ifstream meta_is(cmd.checkpoint_path + ".meta.json");
  if (!meta_is)
    throw IoError("cannot open checkpoint metadata: " + cmd.checkpoint_path +
                  ".meta.json");
  json meta;
  try {
    meta_is >> meta;
  } catch (const json::parse_error& e) {
    throw IoError(std::string("checkpoint metadata: ") + e.what());
  }
  ModelKind kind = model_kind_from_string(meta.at("model_kind").get<std::string>());
  PipelineConfig cfg = parse_pipeline_config(meta.at("config").dump());
  if (cfg.precision == Precision::kDouble) return eval_impl<double>(cfg, kind, cmd);
  return eval_impl<float>(cfg, kind, cmd);
}

bool run_gradcheck_command(const GradcheckCommand& cmd, std::ostream& os) {
  if (cmd.dims != "toy")
    throw ArgumentError("gradcheck: only --dims toy is supported");
  ModelConfig dims = ModelConfig::toy();
  bool all_pass = true;

  auto report_line = [&](const std::string& what, const GradCheckReport& r) {
    bool ok = r.max_rel_error <= cmd.tol;
    all_pass = all_pass && ok;
    os << (ok ? "[pass] " : "[FAIL] ") << what << ": max rel error "
       << r.max_rel_error << " over " << r.coords_checked << " coordinates";
    if (!ok) os << " (worst: " << r.worst_param << "[" << r.worst_index << "])";
    os << "\n";
  };

  const bool ops = cmd.model == "ops" || cmd.model == "all";
  const bool all_models = cmd.model == "all";
  if (ops) {
    for (const OpCheckResult& r : check_op_gradients<double>(cmd.seed))
      report_line("op " + r.op, r.report);
  }
  std::vector<std::string> kinds;
  if (all_models)
    kinds = {"rewatcher", "rereader", "forgettable", "straightforward"};
  else if (!ops)
    kinds = {cmd.model};
  for (const std::string& k : kinds) {
    ModelKind kind = model_kind_from_string(k);
    GradCheckReport r = check_model_gradients<double>(kind, dims, cmd.seed, 1e-5, cmd.tol);
    report_line("model " + k, r);
  }
  return all_pass;
}

}  // namespace fwqa
