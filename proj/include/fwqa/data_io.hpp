// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fwqa/common.hpp"
#include "fwqa/dataset.hpp"

namespace fwqa {

// QARecord JSONL keys: video_id, description, question, answer, type?
// QAInstance JSONL keys: video_id, question, candidates (8), gt_index, type
std::vector<QARecord> read_qa_records(const std::string& path);
void write_qa_records(const std::vector<QARecord>& records, const std::string& path);
std::vector<QAInstance> read_qa_instances(const std::string& path);
void write_qa_instances(const std::vector<QAInstance>& instances, const std::string& path);

struct DiscardEntry {
  QARecord record;
  std::string reason;
  std::string detail;
};
void write_discards(const std::vector<DiscardEntry>& discards, const std::string& path);

// Per-video feature file (.vfeat): magic "VFEA", u32 version = 1, u32 nRaw,
// u32 d_v, then float32 little-endian row-major (frames are rows).
void write_vfeat(const std::string& path, const Eigen::MatrixXf& features);
Eigen::MatrixXd read_vfeat(const std::string& path);

/// Word-embedding text file: first line "COUNT DIM", then one line per word
/// "word v1 v2 ... v_dw". Lookups of unknown words draw a deterministic
/// vector from a hash of the word, uniform in [-0.05, 0.05]^dim.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(int dim) : dim_(dim) {}

  static EmbeddingTable load(const std::string& path);
  void save(const std::string& path) const;

  int dim() const { return dim_; }
  std::size_t size() const { return order_.size(); }
  bool contains(const std::string& word) const { return table_.count(word) > 0; }
  void insert(const std::string& word, Eigen::VectorXd v);
  Eigen::VectorXd lookup(const std::string& word) const;

 private:
  int dim_ = 0;
  std::unordered_map<std::string, Eigen::VectorXd> table_;
  std::vector<std::string> order_;  // insertion order, fixes the file layout
};

/// Embed a token sequence as a |c| x dim matrix (one row per token).
Eigen::MatrixXd embed_tokens(const std::vector<std::string>& tokens,
                             const EmbeddingTable& table);

/// Indices that sample n_raw frames down (or repeat the last frame up) to
/// n: floor(j * n_raw / n) when n_raw >= n, else 0..n_raw-1 padded with the
/// last index.
std::vector<int> sample_frames(int n_raw, int n);

/// Directory of .vfeat files keyed by video id, with an in-memory cache.
class FeatureStore {
 public:
  explicit FeatureStore(std::string dir) : dir_(std::move(dir)) {}
  const Eigen::MatrixXd& get(const std::string& video_id) const;

 private:
  std::string dir_;
  mutable std::unordered_map<std::string, Eigen::MatrixXd> cache_;
};

void atomic_write_text(const std::string& path, const std::string& content);

}  // namespace fwqa
