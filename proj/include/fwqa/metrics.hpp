// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "fwqa/common.hpp"
#include "fwqa/dataset.hpp"

namespace fwqa {

/// Rooted is-a tree over words, loaded from a TSV of "child<TAB>parent"
/// edges. Node ids may carry a sense suffix ("seal#1"); the word of a node
/// is the id up to '#', and a word may map to several nodes. depth(root) = 1.
class Taxonomy {
 public:
  static Taxonomy load(const std::string& path);
  static Taxonomy from_edges(
      const std::vector<std::pair<std::string, std::string>>& child_parent);

  bool contains(const std::string& word) const;
  std::size_t node_count() const { return parent_.size(); }
  int depth_of_word(const std::string& word) const;  // max over senses, 0 if absent

  /// Wu-Palmer similarity 2*depth(lcs) / (depth(a) + depth(b)), max over
  /// sense pairs. Identical words score 1 even out of vocabulary; any other
  /// out-of-vocabulary pair scores 0.
  double wu_palmer(const std::string& a, const std::string& b) const;

 private:
  int lcs_depth(int a, int b) const;

  std::vector<int> parent_;  // -1 at root
  std::vector<int> depth_;
  std::unordered_map<std::string, std::vector<int>> senses_;
};

double wu_palmer(const Taxonomy& tax, const std::string& a, const std::string& b);

/// Corpus-level WUPS at threshold theta, in [0, 100]. Answers are tokenized
/// into sets (lowercase, stripped of leading/trailing punctuation); per
/// token pair, the Wu-Palmer score is kept when >= theta and scaled by 0.1
/// otherwise; the item score is the min over the two pairing directions of
/// the products of best matches.
double wups(const Taxonomy& tax, const std::vector<std::string>& predictions,
            const std::vector<std::string>& truths, double theta);

struct TypeAccuracy {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

struct EvalReport {
  std::size_t total = 0;
  double accuracy = 0;
  double wups_0 = 0;
  double wups_9 = 0;
  std::map<QuestionType, TypeAccuracy> per_type;
  TypeAccuracy excluding_where_when;  // aggregate over types not in {Where, When}

  std::string to_json() const;
  std::string to_table() const;
};

/// Score predicted candidate indices against their instances: overall and
/// per-type accuracy plus WUPS@0.0 / WUPS@0.9 of the predicted candidate
/// string against the ground-truth string.
EvalReport evaluate(const std::vector<int>& predicted,
                    const std::vector<QAInstance>& instances, const Taxonomy& tax);

}  // namespace fwqa
