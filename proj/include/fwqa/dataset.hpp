// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "fwqa/common.hpp"
#include "fwqa/rng.hpp"

namespace fwqa {

enum class QuestionType { kHowMany, kWho, kWhose, kWhat, kWhere, kWhen };

std::string to_string(QuestionType t);
std::optional<QuestionType> question_type_from_string(const std::string& s);

/// One (video, description, question, ground truth) row as produced by an
/// upstream question generator.
struct QARecord {
  std::string video_id;
  std::string description;
  std::string question;
  std::string answer;
  std::optional<QuestionType> type;  // inferred from the question when absent
};

/// A multiple-choice item: 8 pairwise-distinct candidates with the ground
/// truth in exactly one slot.
struct QAInstance {
  std::string video_id;
  std::string question;
  std::array<std::string, 8> candidates;
  int gt_index = 0;
  QuestionType type = QuestionType::kWhat;

  const std::string& gt_answer() const { return candidates[static_cast<std::size_t>(gt_index)]; }
  void validate() const;  // throws InvariantError
};

enum class DiscardReason {
  kUnclassified,
  kNumberOutOfRange,
  kNoReplaceableToken,
  kResamplingExhausted,
};

std::string to_string(DiscardReason r);

struct Discard {
  DiscardReason reason;
  std::string detail;
};

/// Frequency-filtered noun vocabulary, ordered by (-count, lexicographic).
struct EntityList {
  struct Entry {
    std::string word;
    int count = 0;
  };
  std::vector<Entry> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
  bool contains(const std::string& word) const;
  const std::string& sample(Rng& rng) const;
};

std::vector<std::string> tokenize_ws(const std::string& text);
std::string lowercase(const std::string& s);
std::string join_tokens(const std::vector<std::string>& tokens);

/// English word form of 0..100 ("twenty-one" style), lowercase.
std::string number_word(int n);
bool is_number_word(const std::string& token);
/// 1..8 for "one".."eight", nullopt otherwise.
std::optional<int> small_number_value(const std::string& token);

/// Replace every standalone decimal integer token 0..100 by its English
/// word form; all other text, including whitespace, is untouched.
std::string normalize_numerals(const std::string& text);

/// Case-insensitive longest-prefix match on
/// {how many, whose, who, what, where, when} at a word boundary.
std::optional<QuestionType> try_classify_question(const std::string& question);
QuestionType classify_question(const std::string& question);  // throws ArgumentError

/// Noun heuristic: a token counts as a noun when it is in the lexicon, or
/// directly follows an article / possessive pronoun, or carries a
/// possessive marker ("boy 's" or "boy's"). Articles, pronouns, number
/// words and the marker itself never qualify.
std::vector<int> noun_token_indices(const std::vector<std::string>& tokens,
                                    const std::unordered_set<std::string>& lexicon);

/// Harvest nouns from the answers of Who records (build_entity_list) or of
/// every record (build_noun_list), count them, and keep those with
/// count >= min_count that are not blocklisted.
EntityList build_entity_list(const std::vector<QARecord>& records, int min_count,
                             const std::unordered_set<std::string>& blocklist,
                             const std::unordered_set<std::string>& lexicon);
EntityList build_noun_list(const std::vector<QARecord>& records, int min_count,
                           const std::unordered_set<std::string>& blocklist,
                           const std::unordered_set<std::string>& lexicon);

struct GenResult {
  std::optional<QAInstance> instance;
  std::optional<Discard> discard;
  bool pronoun_pool_exhausted = false;  // head noun varied to fill the set
};

/// Turn one record into a multiple-choice instance via the per-type
/// distractor rules. Deterministic given (record, lists, rng state).
GenResult gen_candidates(const QARecord& record, const EntityList& entities,
                         const EntityList& nouns, Rng& rng,
                         const std::unordered_set<std::string>& lexicon);

/// Per-record RNG so generation is independent of record order.
Rng record_rng(const QARecord& record, std::uint64_t seed);

struct DatasetSplit {
  std::vector<QAInstance> train;
  std::vector<QAInstance> val;
  std::vector<QAInstance> test;
};

/// Split index (0 train, 1 val, 2 test) of a video. Pure in (video_id,
/// ratios, seed): adding videos never reassigns existing ones.
int split_of_video(const std::string& video_id, const std::array<double, 3>& ratios,
                   std::uint64_t seed);

/// Assign instances to train/val/test by video via a seeded hash.
DatasetSplit split_dataset(const std::vector<QAInstance>& instances,
                           const std::array<double, 3>& ratios, std::uint64_t seed);

/// The 8 QA-sentences of an instance: lowercase question tokens (terminal
/// '?' stripped) followed by each candidate's tokens.
std::array<std::vector<std::string>, 8> make_qa_sentences(
    const std::vector<std::string>& question_tokens,
    const std::array<std::string, 8>& candidates);
std::vector<std::string> tokenize_question(const std::string& question);

std::unordered_set<std::string> load_word_set(const std::string& path);  // one word per line

}  // namespace fwqa
