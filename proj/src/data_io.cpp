// SPDX-License-Identifier: Apache-2.0
#include "fwqa/data_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fwqa/rng.hpp"

namespace fwqa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json record_to_json(const QARecord& r) {
  json j{{"video_id", r.video_id},
         {"description", r.description},
         {"question", r.question},
         {"answer", r.answer}};
  if (r.type) j["type"] = to_string(*r.type);
  return j;
}

QARecord record_from_json(const json& j) {
  QARecord r;
  r.video_id = j.at("video_id").get<std::string>();
  r.description = j.value("description", "");
  r.question = j.at("question").get<std::string>();
  r.answer = j.at("answer").get<std::string>();
  if (j.contains("type")) {
    auto t = question_type_from_string(j.at("type").get<std::string>());
    if (!t) throw IoError("unknown question type: " + j.at("type").get<std::string>());
    r.type = t;
  }
  return r;
}

template <typename Fn>
void for_each_jsonl(const std::string& path, Fn&& fn) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    fn(j, line_no);
  }
}

void put_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<QARecord> read_qa_records(const std::string& path) {
  std::vector<QARecord> out;
  for_each_jsonl(path, [&](const json& j, std::size_t) { out.push_back(record_from_json(j)); });
  return out;
}

void write_qa_records(const std::vector<QARecord>& records, const std::string& path) {
  std::ostringstream os;
  for (const QARecord& r : records) os << record_to_json(r).dump() << "\n";
  atomic_write_text(path, os.str());
}

std::vector<QAInstance> read_qa_instances(const std::string& path) {
  std::vector<QAInstance> out;
  for_each_jsonl(path, [&](const json& j, std::size_t line_no) {
    QAInstance inst;
    inst.video_id = j.at("video_id").get<std::string>();
    inst.question = j.at("question").get<std::string>();
    const auto& cands = j.at("candidates");
    if (!cands.is_array() || cands.size() != 8)
      throw IoError(path + ":" + std::to_string(line_no) + ": expected 8 candidates");
    for (std::size_t k = 0; k < 8; ++k) inst.candidates[k] = cands[k].get<std::string>();
    inst.gt_index = j.at("gt_index").get<int>();
    auto t = question_type_from_string(j.at("type").get<std::string>());
    if (!t)
      throw IoError(path + ":" + std::to_string(line_no) + ": unknown type " +
                    j.at("type").get<std::string>());
    inst.type = *t;
    inst.validate();
    out.push_back(std::move(inst));
  });
  return out;
}

void write_qa_instances(const std::vector<QAInstance>& instances, const std::string& path) {
  std::ostringstream os;
  for (const QAInstance& inst : instances) {
    json j{{"video_id", inst.video_id},
           {"question", inst.question},
           {"candidates", inst.candidates},
           {"gt_index", inst.gt_index},
           {"type", to_string(inst.type)}};
    os << j.dump() << "\n";
  }
  atomic_write_text(path, os.str());
}

void write_discards(const std::vector<DiscardEntry>& discards, const std::string& path) {
  std::ostringstream os;
  for (const DiscardEntry& d : discards) {
    json j = record_to_json(d.record);
    j["reason"] = d.reason;
    j["detail"] = d.detail;
    os << j.dump() << "\n";
  }
  atomic_write_text(path, os.str());
}

void write_vfeat(const std::string& path, const Eigen::MatrixXf& features) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + tmp);
    os.write("VFEA", 4);
    put_u32le(os, 1);
    put_u32le(os, static_cast<std::uint32_t>(features.rows()));
    put_u32le(os, static_cast<std::uint32_t>(features.cols()));
    static_assert(sizeof(float) == 4);
    for (Eigen::Index i = 0; i < features.rows(); ++i)
      for (Eigen::Index j = 0; j < features.cols(); ++j) {
        float v = features(i, j);
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32le(os, bits);
      }
    if (!os) throw IoError("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

Eigen::MatrixXd read_vfeat(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open features: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "VFEA")
    throw IoError("not a vfeat file (bad magic): " + path);
  const std::uint32_t version = get_u32le(is);
  if (version != 1) throw IoError("unsupported vfeat version " + std::to_string(version));
  const std::uint32_t rows = get_u32le(is);
  const std::uint32_t cols = get_u32le(is);
  if (rows == 0 || cols == 0) throw IoError("empty vfeat file: " + path);
  Eigen::MatrixXd out(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) {
      std::uint32_t bits = get_u32le(is);
      float v;
      std::memcpy(&v, &bits, 4);
      out(i, j) = static_cast<double>(v);
    }
  if (!is) throw IoError("truncated vfeat file: " + path);
  return out;
}

EmbeddingTable EmbeddingTable::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open embeddings: " + path);
  std::size_t count = 0;
  int dim = 0;
  if (!(is >> count >> dim) || dim <= 0)
    throw IoError("embeddings " + path + ": bad header (expected COUNT DIM)");
  EmbeddingTable table(dim);
  for (std::size_t k = 0; k < count; ++k) {
    std::string word;
    if (!(is >> word)) throw IoError("embeddings " + path + ": truncated at entry " +
                                     std::to_string(k));
    Eigen::VectorXd v(dim);
    for (int d = 0; d < dim; ++d)
      if (!(is >> v(d)))
        throw IoError("embeddings " + path + ": truncated vector for " + word);
    table.insert(word, std::move(v));
  }
  return table;
}

void EmbeddingTable::save(const std::string& path) const {
  std::ostringstream os;
  os.precision(17);
  os << order_.size() << " " << dim_ << "\n";
  for (const std::string& w : order_) {
    os << w;
    const Eigen::VectorXd& v = table_.at(w);
    for (int d = 0; d < dim_; ++d) os << " " << v(d);
    os << "\n";
  }
  atomic_write_text(path, os.str());
}

void EmbeddingTable::insert(const std::string& word, Eigen::VectorXd v) {
  if (v.size() != dim_)
    throw ShapeError("embedding of \"" + word + "\" has dim " +
                     std::to_string(v.size()) + ", table dim is " + std::to_string(dim_));
  if (table_.emplace(word, std::move(v)).second) order_.push_back(word);
}

Eigen::VectorXd EmbeddingTable::lookup(const std::string& word) const {
  auto it = table_.find(word);
  if (it != table_.end()) return it->second;
  // stable across runs: seeded only by the word itself
  Rng rng(splitmix64(fnv1a64(word) ^ 0x6f6f76ull));
  Eigen::VectorXd v(dim_);
  for (int d = 0; d < dim_; ++d) v(d) = rng.uniform(-0.05, 0.05);
  return v;
}

Eigen::MatrixXd embed_tokens(const std::vector<std::string>& tokens,
                             const EmbeddingTable& table) {
  if (tokens.empty()) throw ArgumentError("embed_tokens: empty token list");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(tokens.size()), table.dim());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = table.lookup(tokens[i]).transpose();
  return out;
}

std::vector<int> sample_frames(int n_raw, int n) {
  if (n_raw < 1) throw ArgumentError("sample_frames: n_raw must be >= 1");
  if (n < 1) throw ArgumentError("sample_frames: n must be >= 1");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n));
  if (n_raw >= n) {
    for (int j = 0; j < n; ++j)
      out.push_back(static_cast<int>((static_cast<long long>(j) * n_raw) / n));
  } else {
    for (int j = 0; j < n_raw; ++j) out.push_back(j);
    while (static_cast<int>(out.size()) < n) out.push_back(n_raw - 1);
  }
  return out;
}

const Eigen::MatrixXd& FeatureStore::get(const std::string& video_id) const {
  auto it = cache_.find(video_id);
  if (it != cache_.end()) return it->second;
  fs::path p = fs::path(dir_) / (video_id + ".vfeat");
  auto [ins, fresh] = cache_.emplace(video_id, read_vfeat(p.string()));
  return ins->second;
}

void atomic_write_text(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + tmp);
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw IoError("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

}  // namespace fwqa
