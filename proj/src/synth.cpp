// SPDX-License-Identifier: Apache-2.0
#include "fwqa/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fwqa/rng.hpp"

namespace fwqa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string>& entity_words() {
  static const std::vector<std::string> v = {
      "archer", "baker",  "climber", "dancer",  "farmer", "golfer", "hiker",
      "juggler", "knight", "miner",  "nurse",   "pilot",  "piper",  "rider",
      "runner", "sailor", "singer",  "skater",  "tailor", "waiter", "weaver",
      "welder", "writer", "boxer",   "diver",   "fencer"};
  return v;
}

const std::vector<std::string>& category_words() {
  static const std::vector<std::string> v = {"cats", "dogs", "birds", "cars"};
  return v;
}

const std::vector<std::string>& question_words() {
  static const std::vector<std::string> v = {"who", "is",     "acting", "how",
                                             "many", "appear", "in",     "the",
                                             "scene", "a"};
  return v;
}

Eigen::VectorXd random_unit(Rng& rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int d = 0; d < dim; ++d) v(d) = rng.normal();
  double n = v.norm();
  if (n < 1e-12) {
    v.setZero();
    v(0) = 1.0;
    return v;
  }
  return v / n;
}

std::string zero_pad(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_instances < 1) throw ArgumentError("synth: num_instances must be >= 1");
  if (frames_per_video < 1) throw ArgumentError("synth: frames_per_video must be >= 1");
  if (signature_dim < 2) throw ArgumentError("synth: signature_dim must be >= 2");
  if (noise < 0) throw ArgumentError("synth: noise must be >= 0");
  if (mix_who < 0 || mix_howmany < 0 || mix_who + mix_howmany <= 0)
    throw ArgumentError("synth: task mix weights must be >= 0 and not all zero");
  if (mix_who > 0 && num_entities < 8)
    throw ArgumentError("synth: the who task needs num_entities >= 8");
  if (num_entities > static_cast<int>(entity_words().size()))
    throw ArgumentError("synth: num_entities must be <= " +
                        std::to_string(entity_words().size()));
  if (mix_howmany > 0) {
    if (per_frame_cap < 1) throw ArgumentError("synth: per_frame_cap must be >= 1");
    if (num_categories < 2 || num_categories > static_cast<int>(category_words().size()))
      throw ArgumentError("synth: num_categories must be in 2.." +
                          std::to_string(category_words().size()));
    if (frames_per_video * per_frame_cap < 8)
      throw ArgumentError("synth: frames * cap must fit counts up to 8");
  }
}

SynthOutput synth_make(const SynthConfig& cfg) {
  cfg.validate();
  SynthOutput out;
  Rng rng(splitmix64(cfg.seed ^ 0x73796e7468ull));

  const int dim = cfg.signature_dim;
  out.embeddings = EmbeddingTable(dim);

  // Entity signatures double as their word embeddings.
  std::vector<Eigen::VectorXd> entity_sig;
  for (int e = 0; e < cfg.num_entities; ++e) {
    entity_sig.push_back(random_unit(rng, dim));
    out.embeddings.insert(entity_words()[static_cast<std::size_t>(e)], entity_sig.back());
  }
  std::vector<Eigen::VectorXd> category_base;
  for (int c = 0; c < cfg.num_categories; ++c) {
    category_base.push_back(random_unit(rng, dim));
    out.embeddings.insert(category_words()[static_cast<std::size_t>(c)], category_base.back());
  }
  // Number words get a shared magnitude direction plus a distinct component,
  // so count evidence has a linear handle.
  Eigen::VectorXd magnitude_dir = random_unit(rng, dim);
  for (int n = 1; n <= 8; ++n) {
    Eigen::VectorXd v = 0.8 * random_unit(rng, dim) + (0.6 * n / 8.0) * magnitude_dir;
    out.embeddings.insert(number_word(n), v);
  }
  for (const std::string& w : question_words())
    if (!out.embeddings.contains(w))
      out.embeddings.insert(w, 0.5 * random_unit(rng, dim));

  out.taxonomy_edges = {{"person", "thing"}, {"animal", "thing"},
                        {"vehicle", "thing"}, {"number", "thing"}};
  for (int e = 0; e < cfg.num_entities; ++e)
    out.taxonomy_edges.emplace_back(entity_words()[static_cast<std::size_t>(e)], "person");
  for (int c = 0; c < cfg.num_categories; ++c) {
    const std::string& w = category_words()[static_cast<std::size_t>(c)];
    out.taxonomy_edges.emplace_back(w, w == "cars" ? "vehicle" : "animal");
  }
  for (int n = 1; n <= 8; ++n) out.taxonomy_edges.emplace_back(number_word(n), "number");

  const int frames = cfg.frames_per_video;
  const double who_share = cfg.mix_who / (cfg.mix_who + cfg.mix_howmany);

  for (int i = 0; i < cfg.num_instances; ++i) {
    Rng irng(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(i) + 0x1711ull)));
    const bool who = irng.uniform() < who_share;
    const std::string video_id = (who ? "who_" : "hm_") + zero_pad(i, 6);

    Eigen::MatrixXd feat = Eigen::MatrixXd::Zero(frames, dim);
    QARecord rec;
    rec.video_id = video_id;
    QAInstance inst;
    inst.video_id = video_id;

    if (who) {
      const int actor = static_cast<int>(irng.below(static_cast<std::uint64_t>(cfg.num_entities)));
      bool any = false;
      for (int f = 0; f < frames; ++f) {
        if (irng.uniform() < 0.5) {
          feat.row(f) += entity_sig[static_cast<std::size_t>(actor)].transpose();
          any = true;
        }
      }
      if (!any) {
        int f = static_cast<int>(irng.below(static_cast<std::uint64_t>(frames)));
        feat.row(f) += entity_sig[static_cast<std::size_t>(actor)].transpose();
      }
      const std::string& actor_word = entity_words()[static_cast<std::size_t>(actor)];
      rec.description = "a " + actor_word + " is acting";
      rec.question = "Who is acting ?";
      rec.answer = "a " + actor_word;
      rec.type = QuestionType::kWho;

      // 7 distinct distractor entities
      std::vector<int> others;
      for (int e = 0; e < cfg.num_entities; ++e)
        if (e != actor) others.push_back(e);
      irng.shuffle(others);
      std::vector<std::string> candidates = {rec.answer};
      for (int k = 0; k < 7; ++k)
        candidates.push_back("a " + entity_words()[static_cast<std::size_t>(others[static_cast<std::size_t>(k)])]);
      irng.shuffle(candidates);
      inst.question = rec.question;
      inst.type = QuestionType::kWho;
      for (std::size_t k = 0; k < 8; ++k) {
        inst.candidates[k] = candidates[k];
        if (candidates[k] == rec.answer) inst.gt_index = static_cast<int>(k);
      }
    } else {
      const int cat_a = static_cast<int>(irng.below(static_cast<std::uint64_t>(cfg.num_categories)));
      int cat_b = static_cast<int>(irng.below(static_cast<std::uint64_t>(cfg.num_categories - 1)));
      if (cat_b >= cat_a) ++cat_b;
      const int capacity = frames * cfg.per_frame_cap;
      const int k_a = 1 + static_cast<int>(irng.below(8));
      const int max_b = std::min(8, capacity - k_a);
      const int k_b = max_b > 0 ? static_cast<int>(irng.below(static_cast<std::uint64_t>(max_b + 1))) : 0;

      // one (frame, slot) per individual keeps every frame under the cap
      std::vector<int> slots(static_cast<std::size_t>(capacity));
      std::iota(slots.begin(), slots.end(), 0);
      irng.shuffle(slots);
      int next_slot = 0;
      auto place = [&](const Eigen::VectorXd& base) {
        Eigen::VectorXd sig = base + 0.3 * random_unit(irng, dim);
        int f = slots[static_cast<std::size_t>(next_slot++)] / cfg.per_frame_cap;
        feat.row(f) += sig.transpose();
      };
      for (int k = 0; k < k_a; ++k) place(category_base[static_cast<std::size_t>(cat_a)]);
      for (int k = 0; k < k_b; ++k) place(category_base[static_cast<std::size_t>(cat_b)]);

      const std::string& cat_word = category_words()[static_cast<std::size_t>(cat_a)];
      rec.description = number_word(k_a) + " " + cat_word + " appear in the scene";
      rec.question = "How many " + cat_word + " appear in the scene ?";
      rec.answer = number_word(k_a) + " " + cat_word;
      rec.type = QuestionType::kHowMany;

      std::vector<std::string> candidates;
      for (int n = 1; n <= 8; ++n) candidates.push_back(number_word(n) + " " + cat_word);
      irng.shuffle(candidates);
      inst.question = rec.question;
      inst.type = QuestionType::kHowMany;
      for (std::size_t k = 0; k < 8; ++k) {
        inst.candidates[k] = candidates[k];
        if (candidates[k] == rec.answer) inst.gt_index = static_cast<int>(k);
      }
    }

    if (cfg.noise > 0) {
      for (int f = 0; f < frames; ++f)
        for (int d = 0; d < dim; ++d) feat(f, d) += cfg.noise * irng.normal();
    }

    inst.validate();
    out.records.push_back(std::move(rec));
    out.instances.push_back(std::move(inst));
    out.features.emplace_back(video_id, feat.cast<float>());
  }
  return out;
}

void synth_generate(const SynthConfig& cfg, const std::string& out_dir) {
  SynthOutput data = synth_make(cfg);
  fs::create_directories(fs::path(out_dir) / "features");
  write_qa_records(data.records, (fs::path(out_dir) / "records.jsonl").string());
  write_qa_instances(data.instances, (fs::path(out_dir) / "instances.jsonl").string());
  data.embeddings.save((fs::path(out_dir) / "embeddings.txt").string());
  for (const auto& [id, feat] : data.features)
    write_vfeat((fs::path(out_dir) / "features" / (id + ".vfeat")).string(), feat);
  std::ostringstream tax;
  for (const auto& [child, parent] : data.taxonomy_edges)
    tax << child << "\t" << parent << "\n";
  atomic_write_text((fs::path(out_dir) / "taxonomy.tsv").string(), tax.str());
}

SynthConfig parse_synth_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("synth config: ") + e.what());
  }
  SynthConfig cfg;
  cfg.num_instances = j.value("num_instances", cfg.num_instances);
  cfg.num_entities = j.value("num_entities", cfg.num_entities);
  cfg.frames_per_video = j.value("frames_per_video", cfg.frames_per_video);
  cfg.signature_dim = j.value("signature_dim", cfg.signature_dim);
  cfg.noise = j.value("noise", cfg.noise);
  cfg.per_frame_cap = j.value("per_frame_cap", cfg.per_frame_cap);
  cfg.num_categories = j.value("num_categories", cfg.num_categories);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("task_mix")) {
    const json& mix = j.at("task_mix");
    cfg.mix_who = mix.value("who", 0.0);
    cfg.mix_howmany = mix.value("howmany", 0.0);
  }
  cfg.validate();
  return cfg;
}

SynthConfig load_synth_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open synth config: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_synth_config(buf.str());
}

}  // namespace fwqa
