// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fwqa/common.hpp"

namespace fwqa {

enum class ModelKind { kRewatcher, kRereader, kForgettable, kStraightforward };

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind k);

/// All model dimensions. Defaults are the full-scale sizes; toy() shrinks
/// everything for gradient checks and synthetic runs.
struct ModelConfig {
  int d_v = 4096;  // raw frame-feature dim
  int d_w = 300;   // word-embedding dim
  int d_hv = 1024; // video LSTM hidden per direction (2*d_hv = 2048)
  int d_hc = 512;  // text LSTM hidden per direction (2*d_hc = 1024)
  int d_j = 1024;  // joint feature dim
  int lstm_input = 1024;  // input projection target (defaults to d_j)
  int d_r = 512;   // attention memory
  int d_m = 512;   // attention match space
  int d_g = 512;   // score-head combine dim
  std::vector<int> fc_sizes = {512, 256, 128, 1};
  int frames = 16;  // N after frame sampling

  // Either projection can be turned into an identity, in which case the
  // neighbouring dimensions must already agree.
  bool video_input_projection = true;
  bool text_input_projection = true;
  bool video_output_projection = true;
  bool text_output_projection = true;

  static ModelConfig full_scale() { return ModelConfig{}; }

  static ModelConfig toy() {
    ModelConfig c;
    c.d_v = 12;
    c.d_w = 10;
    c.d_hv = 4;
    c.d_hc = 3;
    c.d_j = 8;
    c.lstm_input = 8;
    c.d_r = 4;
    c.d_m = 4;
    c.d_g = 6;
    c.fc_sizes = {6, 5, 4, 1};
    c.frames = 3;
    return c;
  }

  void validate() const;
};

struct AdamConfig {
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// "standard" is (0.9, 0.999); "paper" is (0.1, 0.001).
  static AdamConfig preset(const std::string& name);
};

struct TrainConfig {
  int batch_size = 100;
  int max_epochs = 100;
  int patience = 5;
  double clip_norm = 10.0;
  std::uint64_t seed = 1;
  AdamConfig adam;
  int workers = 1;

  void validate() const;
};

/// Precision of the numeric core: double for verification paths, float is
/// allowed for training speed.
enum class Precision { kDouble, kFloat };

struct PipelineConfig {
  ModelConfig model;
  TrainConfig train;
  Precision precision = Precision::kDouble;
};

/// Parse a JSON config file. Missing keys keep the defaults of `base`.
/// Recognizes "preset": "full" | "toy" for the model block and
/// "adam_preset": "standard" | "paper" for the train block.
PipelineConfig load_pipeline_config(const std::string& path, PipelineConfig base = {});
PipelineConfig parse_pipeline_config(const std::string& json_text, PipelineConfig base = {});
std::string pipeline_config_to_json(const PipelineConfig& cfg);

}  // namespace fwqa
