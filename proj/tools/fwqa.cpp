// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fwqa/data_io.hpp"
#include "fwqa/dataset.hpp"
#include "fwqa/metrics.hpp"
#include "fwqa/pipeline.hpp"
#include "fwqa/synth.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitInvariant = 4;

std::uint64_t env_seed_or(std::uint64_t fallback) {
  const char* env = std::getenv("FWQA_SEED");
  if (env == nullptr || *env == '\0') return fallback;
  try {
    return std::stoull(env);
  } catch (const std::exception&) {
    throw fwqa::ArgumentError(std::string("FWQA_SEED is not an integer: ") + env);
  }
}

std::array<double, 3> parse_ratios(const std::string& text) {
  std::array<double, 3> out{};
  std::stringstream ss(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) throw fwqa::ArgumentError("--ratios expects three comma-separated values");
    out[i++] = std::stod(part);
  }
  if (i != 3) throw fwqa::ArgumentError("--ratios expects three comma-separated values");
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw fwqa::IoError("cannot open: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) out.push_back(line);
  return out;
}

int cmd_build_dataset(const std::string& in, const std::string& out_dir,
                      std::uint64_t seed, int min_count, const std::string& lexicon_path,
                      const std::string& blocklist_path) {
  std::vector<fwqa::QARecord> records = fwqa::read_qa_records(in);
  std::unordered_set<std::string> lexicon, blocklist;
  if (!lexicon_path.empty()) lexicon = fwqa::load_word_set(lexicon_path);
  if (!blocklist_path.empty()) blocklist = fwqa::load_word_set(blocklist_path);

  fwqa::EntityList entities = fwqa::build_entity_list(records, min_count, blocklist, lexicon);
  fwqa::EntityList nouns = fwqa::build_noun_list(records, min_count, blocklist, lexicon);

  std::vector<fwqa::QAInstance> instances;
  std::vector<fwqa::DiscardEntry> discards;
  std::size_t fallbacks = 0;
  for (const fwqa::QARecord& rec : records) {
    fwqa::Rng rng = fwqa::record_rng(rec, seed);
    fwqa::GenResult res = fwqa::gen_candidates(rec, entities, nouns, rng, lexicon);
    if (res.instance) {
      if (res.pronoun_pool_exhausted) {
        ++fallbacks;
        std::cerr << "note: pronoun pool exhausted for \"" << rec.answer
                  << "\" (video " << rec.video_id << "); varied the head noun\n";
      }
      instances.push_back(std::move(*res.instance));
    } else {
      discards.push_back({rec, fwqa::to_string(res.discard->reason), res.discard->detail});
    }
  }
  fs::create_directories(out_dir);
  fwqa::write_qa_instances(instances, (fs::path(out_dir) / "instances.jsonl").string());
  fwqa::write_discards(discards, (fs::path(out_dir) / "discards.jsonl").string());
  std::cerr << "build-dataset: " << instances.size() << " instances, "
            << discards.size() << " discards (" << fallbacks
            << " pronoun-pool fallbacks), entity list " << entities.size()
            << ", noun list " << nouns.size() << "\n";
  return 0;
}

int cmd_split(const std::string& in, const std::string& out_dir,
              const std::string& ratios_text, std::uint64_t seed) {
  std::array<double, 3> ratios = parse_ratios(ratios_text);
  std::vector<fwqa::QAInstance> instances = fwqa::read_qa_instances(in);
  fwqa::DatasetSplit split = fwqa::split_dataset(instances, ratios, seed);
  fs::create_directories(out_dir);
  fwqa::write_qa_instances(split.train, (fs::path(out_dir) / "train.jsonl").string());
  fwqa::write_qa_instances(split.val, (fs::path(out_dir) / "val.jsonl").string());
  fwqa::write_qa_instances(split.test, (fs::path(out_dir) / "test.jsonl").string());
  std::cerr << "split: " << split.train.size() << " train, " << split.val.size()
            << " val, " << split.test.size() << " test\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bidirectional-LSTM video question answering: dataset building, "
               "training, evaluation and verification"};
  app.require_subcommand(1);

  // build-dataset
  auto* build = app.add_subcommand("build-dataset",
                                   "Generate 8-candidate instances from QA records");
  std::string build_in, build_out, build_lexicon, build_blocklist;
  std::uint64_t build_seed = 0;
  int build_min_count = 5;
  build->add_option("--in", build_in, "QARecord JSONL")->required();
  build->add_option("--out", build_out, "output directory")->required();
  auto* build_seed_opt = build->add_option("--seed", build_seed, "RNG seed");
  build->add_option("--min-noun-count", build_min_count, "entity frequency threshold");
  build->add_option("--noun-lexicon", build_lexicon, "extra noun word list");
  build->add_option("--blocklist", build_blocklist, "nouns to exclude");

  // split
  auto* split = app.add_subcommand("split", "Split instances by video");
  std::string split_in, split_out, split_ratios = "0.801,0.086,0.113";
  std::uint64_t split_seed = 0;
  split->add_option("--in", split_in, "QAInstance JSONL")->required();
  split->add_option("--out", split_out, "output directory")->required();
  split->add_option("--ratios", split_ratios, "train,val,test ratios");
  auto* split_seed_opt = split->add_option("--seed", split_seed, "RNG seed");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  std::string synth_config, synth_out;
  synth->add_option("--config", synth_config, "SynthConfig JSON")->required();
  synth->add_option("--out", synth_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  fwqa::TrainCommand train_cmd;
  std::uint64_t train_seed = 0;
  train->add_option("--model", train_cmd.model,
                    "rewatcher|rereader|forgettable|straightforward")->required();
  train->add_option("--config", train_cmd.config_path, "pipeline config JSON");
  train->add_option("--train", train_cmd.train_path, "train instances JSONL")->required();
  train->add_option("--val", train_cmd.val_path, "validation instances JSONL")->required();
  train->add_option("--features", train_cmd.features_dir, "vfeat directory")->required();
  train->add_option("--embeddings", train_cmd.embeddings_path, "embedding table")->required();
  train->add_option("--out", train_cmd.out_path, "checkpoint path")->required();
  auto* train_seed_opt = train->add_option("--seed", train_seed, "overrides config seed");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  fwqa::EvalCommand eval_cmd;
  eval->add_option("--checkpoint", eval_cmd.checkpoint_path, "checkpoint")->required();
  eval->add_option("--test", eval_cmd.test_path, "test instances JSONL")->required();
  eval->add_option("--features", eval_cmd.features_dir, "vfeat directory")->required();
  eval->add_option("--embeddings", eval_cmd.embeddings_path, "embedding table")->required();
  eval->add_option("--taxonomy", eval_cmd.taxonomy_path, "taxonomy TSV")->required();
  eval->add_option("--report", eval_cmd.report_path, "report JSON output");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  fwqa::GradcheckCommand gc_cmd;
  gradcheck->add_option("--model", gc_cmd.model,
                        "rewatcher|rereader|forgettable|straightforward|ops|all");
  gradcheck->add_option("--dims", gc_cmd.dims, "dimension preset (toy)");
  gradcheck->add_option("--tol", gc_cmd.tol, "max relative error");
  auto* gc_seed_opt = gradcheck->add_option("--seed", gc_cmd.seed, "RNG seed");

  // wups
  auto* wups_cmd = app.add_subcommand("wups", "WUPS score of predictions vs truths");
  std::string wups_tax, wups_pred, wups_truth;
  double wups_theta = 0.9;
  wups_cmd->add_option("--taxonomy", wups_tax, "taxonomy TSV")->required();
  wups_cmd->add_option("--pred", wups_pred, "predictions, one per line")->required();
  wups_cmd->add_option("--truth", wups_truth, "ground truths, one per line")->required();
  wups_cmd->add_option("--theta", wups_theta, "threshold in [0, 1]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (build->parsed()) {
      std::uint64_t seed = build_seed_opt->count() ? build_seed : env_seed_or(1);
      return cmd_build_dataset(build_in, build_out, seed, build_min_count,
                               build_lexicon, build_blocklist);
    }
    if (split->parsed()) {
      std::uint64_t seed = split_seed_opt->count() ? split_seed : env_seed_or(1);
      return cmd_split(split_in, split_out, split_ratios, seed);
    }
    if (synth->parsed()) {
      fwqa::synth_generate(fwqa::load_synth_config(synth_config), synth_out);
      std::cerr << "synth: wrote " << synth_out << "\n";
      return 0;
    }
    if (train->parsed()) {
      if (train_seed_opt->count())
        train_cmd.seed_override = train_seed;
      else if (std::getenv("FWQA_SEED") != nullptr)
        train_cmd.seed_override = env_seed_or(1);
      fwqa::TrainOutcome outcome = fwqa::run_train_command(train_cmd);
      std::cerr << "train: best epoch " << outcome.result.best_epoch
                << ", val accuracy " << outcome.result.best_val_accuracy << "\n";
      return 0;
    }
    if (eval->parsed()) {
      fwqa::EvalReport report = fwqa::run_eval_command(eval_cmd);
      std::cout << report.to_table();
      return 0;
    }
    if (gradcheck->parsed()) {
      if (gc_seed_opt->count() == 0) gc_cmd.seed = env_seed_or(gc_cmd.seed);
      bool ok = fwqa::run_gradcheck_command(gc_cmd, std::cout);
      return ok ? 0 : kExitInvariant;
    }
    if (wups_cmd->parsed()) {
      fwqa::Taxonomy tax = fwqa::Taxonomy::load(wups_tax);
      double score = fwqa::wups(tax, read_lines(wups_pred), read_lines(wups_truth), wups_theta);
      std::cout << "wups@" << wups_theta << " = " << score << "\n";
      return 0;
    }
  } catch (const fwqa::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fwqa::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fwqa::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const fwqa::InvariantError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return 0;
}
