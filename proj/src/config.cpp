// SPDX-License-Identifier: Apache-2.0
#include "fwqa/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fwqa {

using nlohmann::json;

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "rewatcher") return ModelKind::kRewatcher;
  if (s == "rereader") return ModelKind::kRereader;
  if (s == "forgettable") return ModelKind::kForgettable;
  if (s == "straightforward") return ModelKind::kStraightforward;
  throw ArgumentError("unknown model kind: \"" + s +
                      "\" (expected rewatcher|rereader|forgettable|straightforward)");
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kRewatcher: return "rewatcher";
    case ModelKind::kRereader: return "rereader";
    case ModelKind::kForgettable: return "forgettable";
    case ModelKind::kStraightforward: return "straightforward";
  }
  return "forgettable";
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ArgumentError(std::string("model config: ") + name + " must be >= 1");
  };
  positive(d_v, "d_v");
  positive(d_w, "d_w");
  positive(d_hv, "d_hv");
  positive(d_hc, "d_hc");
  positive(d_j, "d_j");
  positive(lstm_input, "lstm_input");
  positive(d_r, "d_r");
  positive(d_m, "d_m");
  positive(d_g, "d_g");
  positive(frames, "frames");
  if (fc_sizes.empty() || fc_sizes.back() != 1)
    throw ArgumentError("model config: fc_sizes must end in a scalar layer");
  for (int s : fc_sizes) positive(s, "fc size");
  if (!video_input_projection && d_v != lstm_input)
    throw ArgumentError("model config: identity video input projection needs d_v == lstm_input");
  if (!text_input_projection && d_w != lstm_input)
    throw ArgumentError("model config: identity text input projection needs d_w == lstm_input");
  if (!video_output_projection && 2 * d_hv != d_j)
    throw ArgumentError("model config: identity video output projection needs 2*d_hv == d_j");
  if (!text_output_projection && 2 * d_hc != d_j)
    throw ArgumentError("model config: identity text output projection needs 2*d_hc == d_j");
}

AdamConfig AdamConfig::preset(const std::string& name) {
  AdamConfig c;
  if (name == "standard") {
    c.beta1 = 0.9;
    c.beta2 = 0.999;
  } else if (name == "paper") {
    // the decay rates as printed; "standard" is the usual reading
    c.beta1 = 0.1;
    c.beta2 = 0.001;
  } else {
    throw ArgumentError("unknown adam preset: \"" + name + "\" (expected standard|paper)");
  }
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ArgumentError("train config: batch_size must be >= 1");
  if (max_epochs < 1) throw ArgumentError("train config: max_epochs must be >= 1");
  if (patience < 1) throw ArgumentError("train config: patience must be >= 1");
  if (clip_norm <= 0) throw ArgumentError("train config: clip_norm must be positive");
  if (adam.learning_rate <= 0) throw ArgumentError("train config: learning_rate must be positive");
}

namespace {

void apply_model_json(const json& j, ModelConfig& m) {
  if (j.contains("preset")) {
    std::string p = j.at("preset").get<std::string>();
    if (p == "toy")
      m = ModelConfig::toy();
    else if (p == "full")
      m = ModelConfig::full_scale();
    else
      throw ArgumentError("model config: unknown preset \"" + p + "\"");
  }
  m.d_v = j.value("d_v", m.d_v);
  m.d_w = j.value("d_w", m.d_w);
  m.d_hv = j.value("d_hv", m.d_hv);
  m.d_hc = j.value("d_hc", m.d_hc);
  m.d_j = j.value("d_j", m.d_j);
  m.lstm_input = j.value("lstm_input", j.value("d_j", m.lstm_input));
  m.d_r = j.value("d_r", m.d_r);
  m.d_m = j.value("d_m", j.value("d_r", m.d_m));
  m.d_g = j.value("d_g", m.d_g);
  if (j.contains("fc_sizes")) m.fc_sizes = j.at("fc_sizes").get<std::vector<int>>();
  m.frames = j.value("frames", m.frames);
  m.video_input_projection = j.value("video_input_projection", m.video_input_projection);
  m.text_input_projection = j.value("text_input_projection", m.text_input_projection);
  m.video_output_projection = j.value("video_output_projection", m.video_output_projection);
  m.text_output_projection = j.value("text_output_projection", m.text_output_projection);
}

void apply_train_json(const json& j, TrainConfig& t) {
  t.batch_size = j.value("batch_size", t.batch_size);
  t.max_epochs = j.value("max_epochs", t.max_epochs);
  t.patience = j.value("patience", t.patience);
  t.clip_norm = j.value("clip_norm", t.clip_norm);
  t.seed = j.value("seed", t.seed);
  t.workers = j.value("workers", t.workers);
  if (j.contains("adam_preset"))
    t.adam = AdamConfig::preset(j.at("adam_preset").get<std::string>());
  t.adam.learning_rate = j.value("learning_rate", t.adam.learning_rate);
  t.adam.beta1 = j.value("beta1", t.adam.beta1);
  t.adam.beta2 = j.value("beta2", t.adam.beta2);
  t.adam.epsilon = j.value("epsilon", t.adam.epsilon);
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text, PipelineConfig base) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("config: ") + e.what());
  }
  if (j.contains("precision")) {
    std::string p = j.at("precision").get<std::string>();
    if (p == "double")
      base.precision = Precision::kDouble;
    else if (p == "float")
      base.precision = Precision::kFloat;
    else
      throw ArgumentError("config: precision must be double|float");
  }
  if (j.contains("model")) apply_model_json(j.at("model"), base.model);
  if (j.contains("train")) apply_train_json(j.at("train"), base.train);
  base.model.validate();
  base.train.validate();
  return base;
}

PipelineConfig load_pipeline_config(const std::string& path, PipelineConfig base) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_pipeline_config(buf.str(), base);
}

std::string pipeline_config_to_json(const PipelineConfig& cfg) {
  json j;
  j["precision"] = cfg.precision == Precision::kDouble ? "double" : "float";
  j["model"] = {{"d_v", cfg.model.d_v},
                {"d_w", cfg.model.d_w},
                {"d_hv", cfg.model.d_hv},
                {"d_hc", cfg.model.d_hc},
                {"d_j", cfg.model.d_j},
                {"lstm_input", cfg.model.lstm_input},
                {"d_r", cfg.model.d_r},
                {"d_m", cfg.model.d_m},
                {"d_g", cfg.model.d_g},
                {"fc_sizes", cfg.model.fc_sizes},
                {"frames", cfg.model.frames},
                {"video_input_projection", cfg.model.video_input_projection},
                {"text_input_projection", cfg.model.text_input_projection},
                {"video_output_projection", cfg.model.video_output_projection},
                {"text_output_projection", cfg.model.text_output_projection}};
  j["train"] = {{"batch_size", cfg.train.batch_size},
                {"max_epochs", cfg.train.max_epochs},
                {"patience", cfg.train.patience},
                {"clip_norm", cfg.train.clip_norm},
                {"seed", cfg.train.seed},
                {"workers", cfg.train.workers},
                {"learning_rate", cfg.train.adam.learning_rate},
                {"beta1", cfg.train.adam.beta1},
                {"beta2", cfg.train.adam.beta2},
                {"epsilon", cfg.train.adam.epsilon}};
  return j.dump(2);
}

}  // namespace fwqa
