// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fwqa/common.hpp"
#include "fwqa/data_io.hpp"
#include "fwqa/dataset.hpp"

namespace fwqa {

/// Desk-scale synthetic stand-in for a video-QA corpus. Entities carry
/// random signature vectors; a video's frames contain the signatures of the
/// entities present plus Gaussian noise, so the tasks are exactly decodable
/// at zero noise.
///
/// who:      one acting entity appears in a random subset of the frames;
///           the candidates are entity phrases whose embeddings equal the
///           planted signatures.
/// howmany:  k distinct individuals of the asked category are scattered one
///           per (frame, slot) with at most per_frame_cap incidences per
///           frame, along with individuals of a distractor category, so no
///           single frame determines the count.
struct SynthConfig {
  int num_instances = 2000;
  int num_entities = 12;   // Who needs at least 8
  int frames_per_video = 12;
  int signature_dim = 16;
  double noise = 0.05;
  double mix_who = 1.0;     // task mix weights, normalized
  double mix_howmany = 0.0;
  int per_frame_cap = 2;    // howmany incidences per frame
  int num_categories = 2;   // counted + distractor categories
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthOutput {
  std::vector<QARecord> records;
  std::vector<QAInstance> instances;
  std::vector<std::pair<std::string, Eigen::MatrixXf>> features;  // id -> N x d_v
  EmbeddingTable embeddings;
  std::vector<std::pair<std::string, std::string>> taxonomy_edges;
};

SynthOutput synth_make(const SynthConfig& cfg);

/// Write records.jsonl, instances.jsonl, embeddings.txt, taxonomy.tsv and
/// features/<video_id>.vfeat under out_dir. Byte-identical per seed.
void synth_generate(const SynthConfig& cfg, const std::string& out_dir);

SynthConfig load_synth_config(const std::string& path);
SynthConfig parse_synth_config(const std::string& json_text);

}  // namespace fwqa
