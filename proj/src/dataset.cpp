// SPDX-License-Identifier: Apache-2.0
#include "fwqa/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace fwqa {

namespace {

const std::unordered_set<std::string>& articles() {
  static const std::unordered_set<std::string> s = {"a", "an", "the"};
  return s;
}

const std::vector<std::string>& possessive_pronouns() {
  static const std::vector<std::string> v = {"my", "your", "his", "her",
                                             "its", "our", "their"};
  return v;
}

bool is_possessive_pronoun(const std::string& t) {
  const auto& v = possessive_pronouns();
  return std::find(v.begin(), v.end(), t) != v.end();
}

bool ends_with_possessive(const std::string& t) {
  return t.size() > 2 && t.compare(t.size() - 2, 2, "'s") == 0;
}

std::string strip_possessive(const std::string& t) {
  return ends_with_possessive(t) ? t.substr(0, t.size() - 2) : t;
}

const std::vector<std::string>& ones_words() {
  static const std::vector<std::string> v = {
      "zero",    "one",     "two",       "three",    "four",
      "five",    "six",     "seven",     "eight",    "nine",
      "ten",     "eleven",  "twelve",    "thirteen", "fourteen",
      "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
  return v;
}

const std::vector<std::string>& tens_words() {
  static const std::vector<std::string> v = {"twenty", "thirty", "forty",
                                             "fifty",  "sixty",  "seventy",
                                             "eighty", "ninety"};
  return v;
}

const std::unordered_set<std::string>& number_word_set() {
  static const std::unordered_set<std::string> s = [] {
    std::unordered_set<std::string> out;
    for (int n = 0; n <= 100; ++n) out.insert(number_word(n));
    out.insert("hundred");
    return out;
  }();
  return s;
}

std::string substitute(std::vector<std::string> tokens, std::size_t idx,
                       const std::string& word) {
  if (ends_with_possessive(tokens[idx]))
    tokens[idx] = word + "'s";
  else
    tokens[idx] = word;
  return join_tokens(tokens);
}

constexpr int kMaxDraws = 100;

}  // namespace

std::string to_string(QuestionType t) {
  switch (t) {
    case QuestionType::kHowMany: return "how_many";
    case QuestionType::kWho: return "who";
    case QuestionType::kWhose: return "whose";
    case QuestionType::kWhat: return "what";
    case QuestionType::kWhere: return "where";
    case QuestionType::kWhen: return "when";
  }
  return "what";
}

std::optional<QuestionType> question_type_from_string(const std::string& s) {
  std::string t = lowercase(s);
  if (t == "how_many" || t == "how many" || t == "howmany") return QuestionType::kHowMany;
  if (t == "who") return QuestionType::kWho;
  if (t == "whose") return QuestionType::kWhose;
  if (t == "what") return QuestionType::kWhat;
  if (t == "where") return QuestionType::kWhere;
  if (t == "when") return QuestionType::kWhen;
  return std::nullopt;
}

void QAInstance::validate() const {
  if (gt_index < 0 || gt_index >= 8)
    throw InvariantError("QAInstance: gt_index " + std::to_string(gt_index) +
                         " out of range");
  const std::string& gt = candidates[static_cast<std::size_t>(gt_index)];
  int gt_hits = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] == gt) ++gt_hits;
    for (std::size_t j = i + 1; j < candidates.size(); ++j)
      if (candidates[i] == candidates[j])
        throw InvariantError("QAInstance: duplicate candidate \"" + candidates[i] +
                             "\" (video " + video_id + ")");
  }
  if (gt_hits != 1)
    throw InvariantError("QAInstance: ground truth appears " +
                         std::to_string(gt_hits) + " times");
}

std::string to_string(DiscardReason r) {
  switch (r) {
    case DiscardReason::kUnclassified: return "unclassified";
    case DiscardReason::kNumberOutOfRange: return "number_out_of_range";
    case DiscardReason::kNoReplaceableToken: return "no_replaceable_token";
    case DiscardReason::kResamplingExhausted: return "resampling_exhausted";
  }
  return "unclassified";
}

bool EntityList::contains(const std::string& word) const {
  for (const auto& e : entries)
    if (e.word == word) return true;
  return false;
}

const std::string& EntityList::sample(Rng& rng) const {
  if (entries.empty()) throw ArgumentError("EntityList::sample: empty list");
  return entries[static_cast<std::size_t>(rng.below(entries.size()))].word;
}

std::vector<std::string> tokenize_ws(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string number_word(int n) {
  if (n < 0 || n > 100) throw ArgumentError("number_word: " + std::to_string(n));
  if (n < 20) return ones_words()[static_cast<std::size_t>(n)];
  if (n == 100) return "one hundred";
  std::string w = tens_words()[static_cast<std::size_t>(n / 10 - 2)];
  if (n % 10) w += "-" + ones_words()[static_cast<std::size_t>(n % 10)];
  return w;
}

bool is_number_word(const std::string& token) {
  return number_word_set().count(token) > 0;
}

std::optional<int> small_number_value(const std::string& token) {
  const auto& ones = ones_words();
  for (int n = 1; n <= 8; ++n)
    if (token == ones[static_cast<std::size_t>(n)]) return n;
  return std::nullopt;
}

std::string normalize_numerals(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      out += text[i++];
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string tok = text.substr(i, j - i);
    bool digits = !tok.empty() && tok.size() <= 3;
    for (char c : tok)
      digits = digits && std::isdigit(static_cast<unsigned char>(c));
    if (digits) {
      int value = std::stoi(tok);
      if (value <= 100)
        out += number_word(value);
      else
        out += tok;
    } else {
      out += tok;
    }
    i = j;
  }
  return out;
}

std::optional<QuestionType> try_classify_question(const std::string& question) {
  std::size_t start = 0;
  while (start < question.size() &&
         std::isspace(static_cast<unsigned char>(question[start])))
    ++start;
  std::string head = lowercase(question.substr(start, 9));
  auto matches = [&](const std::string& prefix) {
    if (head.compare(0, prefix.size(), prefix) != 0) return false;
    if (head.size() == prefix.size()) return true;
    return !std::isalpha(static_cast<unsigned char>(head[prefix.size()]));
  };
  // longest prefix first; "whose" must win over "who"
  if (matches("how many")) return QuestionType::kHowMany;
  if (matches("whose")) return QuestionType::kWhose;
  if (matches("who")) return QuestionType::kWho;
  if (matches("what")) return QuestionType::kWhat;
  if (matches("where")) return QuestionType::kWhere;
  if (matches("when")) return QuestionType::kWhen;
  return std::nullopt;
}

QuestionType classify_question(const std::string& question) {
  auto t = try_classify_question(question);
  if (!t) throw ArgumentError("unclassified question: \"" + question + "\"");
  return *t;
}

std::vector<int> noun_token_indices(const std::vector<std::string>& tokens,
                                    const std::unordered_set<std::string>& lexicon) {
  std::vector<int> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string t = lowercase(tokens[i]);
    std::string stem = strip_possessive(t);
    if (t == "'s" || articles().count(t) || is_possessive_pronoun(t) ||
        is_number_word(t))
      continue;
    bool noun = lexicon.count(stem) > 0;
    if (!noun && i > 0) {
      std::string prev = lowercase(tokens[i - 1]);
      noun = articles().count(prev) > 0 || is_possessive_pronoun(prev);
    }
    if (!noun && i + 1 < tokens.size() && tokens[i + 1] == "'s") noun = true;
    if (!noun && ends_with_possessive(t)) noun = true;
    if (noun) out.push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

EntityList harvest_nouns(const std::vector<QARecord>& records, int min_count,
                         const std::unordered_set<std::string>& blocklist,
                         const std::unordered_set<std::string>& lexicon,
                         bool who_only) {
  if (min_count < 1) throw ArgumentError("build_entity_list: min_count must be >= 1");
  std::map<std::string, int> counts;  // ordered so ties break lexicographically
  for (const QARecord& rec : records) {
    std::optional<QuestionType> type =
        rec.type ? rec.type : try_classify_question(rec.question);
    if (who_only && type != QuestionType::kWho) continue;
    std::vector<std::string> tokens = tokenize_ws(lowercase(rec.answer));
    for (int idx : noun_token_indices(tokens, lexicon))
      counts[strip_possessive(tokens[static_cast<std::size_t>(idx)])] += 1;
  }
  EntityList list;
  for (const auto& [word, count] : counts) {
    if (count < min_count) continue;
    if (blocklist.count(word)) continue;
    list.entries.push_back({word, count});
  }
  std::stable_sort(list.entries.begin(), list.entries.end(),
                   [](const EntityList::Entry& a, const EntityList::Entry& b) {
                     if (a.count != b.count) return a.count > b.count;
                     return a.word < b.word;
                   });
  if (list.empty())
    throw ArgumentError(
        "entity list is empty after filtering; lower --min-noun-count or "
        "extend the noun lexicon");
  return list;
}

}  // namespace

EntityList build_entity_list(const std::vector<QARecord>& records, int min_count,
                             const std::unordered_set<std::string>& blocklist,
                             const std::unordered_set<std::string>& lexicon) {
  return harvest_nouns(records, min_count, blocklist, lexicon, /*who_only=*/true);
}

EntityList build_noun_list(const std::vector<QARecord>& records, int min_count,
                           const std::unordered_set<std::string>& blocklist,
                           const std::unordered_set<std::string>& lexicon) {
  return harvest_nouns(records, min_count, blocklist, lexicon, /*who_only=*/false);
}

Rng record_rng(const QARecord& record, std::uint64_t seed) {
  std::uint64_t h = fnv1a64(record.video_id);
  h = splitmix64(h ^ fnv1a64(record.question));
  h = splitmix64(h ^ fnv1a64(record.answer));
  return Rng(splitmix64(h ^ splitmix64(seed)));
}

namespace {

GenResult discard(DiscardReason reason, std::string detail) {
  GenResult r;
  r.discard = Discard{reason, std::move(detail)};
  return r;
}

/// Draw distractors by substituting `pool` samples at token `idx` until
/// 7 distinct non-GT strings exist. Nullopt when draws run out.
std::optional<std::vector<std::string>> draw_substitutions(
    const std::vector<std::string>& tokens, std::size_t idx, const std::string& gt,
    const EntityList& pool, Rng& rng) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen = {gt};
  int draws = 0;
  while (out.size() < 7 && draws < kMaxDraws) {
    ++draws;
    std::string cand = substitute(tokens, idx, pool.sample(rng));
    if (seen.insert(cand).second) out.push_back(cand);
  }
  if (out.size() < 7) return std::nullopt;
  return out;
}

GenResult finish(const QARecord& record, QuestionType type, const std::string& gt,
                 std::vector<std::string> candidates, Rng& rng,
                 bool pool_exhausted = false) {
  candidates.insert(candidates.begin(), gt);
  rng.shuffle(candidates);
  QAInstance inst;
  inst.video_id = record.video_id;
  inst.question = record.question;
  inst.type = type;
  for (std::size_t i = 0; i < 8; ++i) {
    inst.candidates[i] = candidates[i];
    if (candidates[i] == gt) inst.gt_index = static_cast<int>(i);
  }
  inst.validate();
  GenResult res;
  res.instance = std::move(inst);
  res.pronoun_pool_exhausted = pool_exhausted;
  return res;
}

}  // namespace

GenResult gen_candidates(const QARecord& record, const EntityList& entities,
                         const EntityList& nouns, Rng& rng,
                         const std::unordered_set<std::string>& lexicon) {
  std::optional<QuestionType> type =
      record.type ? record.type : try_classify_question(record.question);
  if (!type) return discard(DiscardReason::kUnclassified, record.question);

  std::vector<std::string> tokens =
      tokenize_ws(lowercase(normalize_numerals(record.answer)));
  if (tokens.empty())
    return discard(DiscardReason::kNoReplaceableToken, "empty answer");
  const std::string gt = join_tokens(tokens);

  if (*type == QuestionType::kHowMany) {
    int num_idx = -1;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!is_number_word(tokens[i])) continue;
      std::optional<int> value = small_number_value(tokens[i]);
      bool composite = i + 1 < tokens.size() && tokens[i + 1] == "hundred";
      if (!value || composite)
        return discard(DiscardReason::kNumberOutOfRange, tokens[i]);
      num_idx = static_cast<int>(i);
      break;
    }
    if (num_idx < 0)
      return discard(DiscardReason::kNoReplaceableToken, "no number word in \"" + gt + "\"");
    std::vector<std::string> candidates;
    for (int n = 1; n <= 8; ++n) {
      std::string cand = substitute(tokens, static_cast<std::size_t>(num_idx), number_word(n));
      if (cand != gt) candidates.push_back(cand);
    }
    return finish(record, *type, gt, std::move(candidates), rng);
  }

  std::vector<int> noun_idx = noun_token_indices(tokens, lexicon);

  if (*type == QuestionType::kWho) {
    if (noun_idx.empty())
      return discard(DiscardReason::kNoReplaceableToken, "no entity noun in \"" + gt + "\"");
    std::size_t idx = static_cast<std::size_t>(noun_idx.back());
    auto distractors = draw_substitutions(tokens, idx, gt, entities, rng);
    if (!distractors)
      return discard(DiscardReason::kResamplingExhausted,
                     "entity list too small for \"" + gt + "\"");
    return finish(record, *type, gt, std::move(*distractors), rng);
  }

  if (*type == QuestionType::kWhose) {
    if (is_possessive_pronoun(tokens[0])) {
      // Pronoun pool has 7 entries so only 6 pure swaps exist; fill the
      // remainder by also varying the head noun.
      std::vector<std::string> candidates;
      std::unordered_set<std::string> seen = {gt};
      for (const std::string& p : possessive_pronouns()) {
        std::string cand = substitute(tokens, 0, p);
        if (seen.insert(cand).second) candidates.push_back(cand);
      }
      bool exhausted = candidates.size() < 7;
      int draws = 0;
      while (candidates.size() < 7 && draws < kMaxDraws) {
        ++draws;
        if (nouns.empty()) break;
        std::vector<std::string> t2 = tokens;
        t2[0] = possessive_pronouns()[static_cast<std::size_t>(rng.below(7))];
        std::size_t head = noun_idx.empty()
                               ? tokens.size() - 1
                               : static_cast<std::size_t>(noun_idx.back());
        std::string cand = substitute(t2, head, nouns.sample(rng));
        if (seen.insert(cand).second) candidates.push_back(cand);
      }
      if (candidates.size() < 7)
        return discard(DiscardReason::kResamplingExhausted,
                       "cannot fill pronoun candidates for \"" + gt + "\"");
      return finish(record, *type, gt, std::move(candidates), rng, exhausted);
    }
    // possessive noun: "X 's" or "X's"
    int poss_idx = -1;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if ((i + 1 < tokens.size() && tokens[i + 1] == "'s") ||
          (tokens[i].size() > 2 && tokens[i].compare(tokens[i].size() - 2, 2, "'s") == 0)) {
        poss_idx = static_cast<int>(i);
        break;
      }
    }
    if (poss_idx < 0)
      return discard(DiscardReason::kNoReplaceableToken, "no possessive in \"" + gt + "\"");
    auto distractors =
        draw_substitutions(tokens, static_cast<std::size_t>(poss_idx), gt, entities, rng);
    if (!distractors)
      return discard(DiscardReason::kResamplingExhausted,
                     "entity list too small for \"" + gt + "\"");
    return finish(record, *type, gt, std::move(*distractors), rng);
  }

  // What / Where / When: replace the head noun (last noun token).
  if (noun_idx.empty())
    return discard(DiscardReason::kNoReplaceableToken, "no head noun in \"" + gt + "\"");
  std::size_t idx = static_cast<std::size_t>(noun_idx.back());
  auto distractors = draw_substitutions(tokens, idx, gt, nouns, rng);
  if (!distractors)
    return discard(DiscardReason::kResamplingExhausted,
                   "noun list too small for \"" + gt + "\"");
  return finish(record, *type, gt, std::move(*distractors), rng);
}

int split_of_video(const std::string& video_id, const std::array<double, 3>& ratios,
                   std::uint64_t seed) {
  double u = unit_from_u64(splitmix64(fnv1a64(video_id) ^ splitmix64(seed)));
  if (u < ratios[0]) return 0;
  if (u < ratios[0] + ratios[1]) return 1;
  return 2;
}

DatasetSplit split_dataset(const std::vector<QAInstance>& instances,
                           const std::array<double, 3>& ratios, std::uint64_t seed) {
  double sum = 0;
  for (double r : ratios) {
    if (r < 0) throw ArgumentError("split_dataset: negative ratio");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ArgumentError("split_dataset: ratios (" + std::to_string(ratios[0]) + ", " +
                        std::to_string(ratios[1]) + ", " + std::to_string(ratios[2]) +
                        ") sum to " + std::to_string(sum) + ", expected 1");
  DatasetSplit split;
  for (const QAInstance& inst : instances) {
    switch (split_of_video(inst.video_id, ratios, seed)) {
      case 0: split.train.push_back(inst); break;
      case 1: split.val.push_back(inst); break;
      default: split.test.push_back(inst); break;
    }
  }
  return split;
}

std::vector<std::string> tokenize_question(const std::string& question) {
  std::vector<std::string> tokens = tokenize_ws(lowercase(question));
  if (!tokens.empty()) {
    std::string& last = tokens.back();
    while (!last.empty() && last.back() == '?') last.pop_back();
    if (last.empty()) tokens.pop_back();
  }
  return tokens;
}

std::array<std::vector<std::string>, 8> make_qa_sentences(
    const std::vector<std::string>& question_tokens,
    const std::array<std::string, 8>& candidates) {
  std::array<std::vector<std::string>, 8> out;
  for (std::size_t k = 0; k < 8; ++k) {
    out[k] = question_tokens;
    for (const std::string& tok : tokenize_ws(lowercase(candidates[k])))
      out[k].push_back(tok);
  }
  return out;
}

std::unordered_set<std::string> load_word_set(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open word list: " + path);
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    for (const std::string& tok : tokenize_ws(lowercase(line))) out.insert(tok);
  }
  return out;
}

}  // namespace fwqa
