// SPDX-License-Identifier: Apache-2.0
#include "fwqa/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fwqa {

namespace {

std::string word_of_node_id(const std::string& id) {
  auto pos = id.find('#');
  return pos == std::string::npos ? id : id.substr(0, pos);
}

std::set<std::string> answer_token_set(const std::string& answer) {
  std::set<std::string> out;
  for (std::string tok : tokenize_ws(lowercase(answer))) {
    std::size_t b = 0, e = tok.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(tok[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(tok[e - 1]))) --e;
    if (e > b) out.insert(tok.substr(b, e - b));
  }
  return out;
}

}  // namespace

Taxonomy Taxonomy::from_edges(
    const std::vector<std::pair<std::string, std::string>>& child_parent) {
  std::unordered_map<std::string, int> index;
  auto intern = [&](const std::string& id) {
    auto [it, fresh] = index.emplace(id, static_cast<int>(index.size()));
    return it->second;
  };
  std::vector<std::pair<int, int>> edges;
  edges.reserve(child_parent.size());
  for (const auto& [child, parent] : child_parent)
    edges.emplace_back(intern(child), intern(parent));

  Taxonomy tax;
  tax.parent_.assign(index.size(), -1);
  std::vector<bool> has_parent(index.size(), false);
  for (const auto& [c, p] : edges) {
    if (has_parent[static_cast<std::size_t>(c)] &&
        tax.parent_[static_cast<std::size_t>(c)] != p)
      throw InvariantError("taxonomy: node has two parents");
    tax.parent_[static_cast<std::size_t>(c)] = p;
    has_parent[static_cast<std::size_t>(c)] = true;
  }
  int root = -1;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (!has_parent[i]) {
      if (root >= 0) throw InvariantError("taxonomy: more than one root");
      root = static_cast<int>(i);
    }
  }
  if (root < 0) throw InvariantError("taxonomy: no root (cycle)");

  // depth by walking up; a walk longer than the node count means a cycle
  tax.depth_.assign(index.size(), 0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    int d = 1;
    int at = static_cast<int>(i);
    while (tax.parent_[static_cast<std::size_t>(at)] >= 0) {
      at = tax.parent_[static_cast<std::size_t>(at)];
      if (++d > static_cast<int>(index.size()))
        throw InvariantError("taxonomy: cycle detected");
    }
    if (at != root) throw InvariantError("taxonomy: node unreachable from root");
    tax.depth_[i] = d;
  }

  for (const auto& [id, node] : index)
    tax.senses_[word_of_node_id(lowercase(id))].push_back(node);
  return tax;
}

Taxonomy Taxonomy::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open taxonomy: " + path);
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw IoError("taxonomy " + path + ": line " + std::to_string(line_no) +
                    " missing tab separator");
    edges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  if (edges.empty()) throw IoError("taxonomy " + path + " is empty");
  return from_edges(edges);
}

bool Taxonomy::contains(const std::string& word) const {
  return senses_.count(lowercase(word)) > 0;
}

int Taxonomy::depth_of_word(const std::string& word) const {
  auto it = senses_.find(lowercase(word));
  if (it == senses_.end()) return 0;
  int best = 0;
  for (int n : it->second) best = std::max(best, depth_[static_cast<std::size_t>(n)]);
  return best;
}

int Taxonomy::lcs_depth(int a, int b) const {
  std::set<int> ancestors;
  for (int at = a; at >= 0; at = parent_[static_cast<std::size_t>(at)])
    ancestors.insert(at);
  for (int at = b; at >= 0; at = parent_[static_cast<std::size_t>(at)])
    if (ancestors.count(at)) return depth_[static_cast<std::size_t>(at)];
  return 0;
}

double Taxonomy::wu_palmer(const std::string& a, const std::string& b) const {
  std::string la = lowercase(a), lb = lowercase(b);
  if (la == lb) return 1.0;
  auto ia = senses_.find(la);
  auto ib = senses_.find(lb);
  if (ia == senses_.end() || ib == senses_.end()) return 0.0;
  double best = 0.0;
  for (int na : ia->second)
    for (int nb : ib->second) {
      double da = depth_[static_cast<std::size_t>(na)];
      double db = depth_[static_cast<std::size_t>(nb)];
      double sim = 2.0 * lcs_depth(na, nb) / (da + db);
      best = std::max(best, sim);
    }
  return best;
}

double wu_palmer(const Taxonomy& tax, const std::string& a, const std::string& b) {
  return tax.wu_palmer(a, b);
}

double wups(const Taxonomy& tax, const std::vector<std::string>& predictions,
            const std::vector<std::string>& truths, double theta) {
  if (predictions.size() != truths.size())
    throw ArgumentError("wups: " + std::to_string(predictions.size()) +
                        " predictions vs " + std::to_string(truths.size()) + " truths");
  if (theta < 0.0 || theta > 1.0)
    throw ArgumentError("wups: theta must be in [0, 1]");
  if (predictions.empty()) throw ArgumentError("wups: empty input");

  auto scaled = [&](double wup) { return wup >= theta ? wup : 0.1 * wup; };
  auto direction = [&](const std::set<std::string>& from, const std::set<std::string>& to) {
    double prod = 1.0;
    for (const std::string& a : from) {
      double best = 0.0;
      for (const std::string& t : to) best = std::max(best, scaled(tax.wu_palmer(a, t)));
      prod *= best;
    }
    return prod;
  };

  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    std::set<std::string> a = answer_token_set(predictions[i]);
    std::set<std::string> t = answer_token_set(truths[i]);
    total += std::min(direction(a, t), direction(t, a));
  }
  return 100.0 * total / static_cast<double>(predictions.size());
}

EvalReport evaluate(const std::vector<int>& predicted,
                    const std::vector<QAInstance>& instances, const Taxonomy& tax) {
  if (instances.empty()) throw ArgumentError("evaluate: empty input");
  if (predicted.size() != instances.size())
    throw ArgumentError("evaluate: " + std::to_string(predicted.size()) +
                        " predictions vs " + std::to_string(instances.size()) +
                        " instances");
  EvalReport rep;
  rep.total = instances.size();
  std::vector<std::string> pred_text, gt_text;
  pred_text.reserve(instances.size());
  gt_text.reserve(instances.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const QAInstance& inst = instances[i];
    if (predicted[i] < 0 || predicted[i] >= 8)
      throw ArgumentError("evaluate: predicted index " + std::to_string(predicted[i]) +
                          " out of range");
    const bool hit = predicted[i] == inst.gt_index;
    correct += hit ? 1u : 0u;
    TypeAccuracy& t = rep.per_type[inst.type];
    t.total += 1;
    t.correct += hit ? 1u : 0u;
    if (inst.type != QuestionType::kWhere && inst.type != QuestionType::kWhen) {
      rep.excluding_where_when.total += 1;
      rep.excluding_where_when.correct += hit ? 1u : 0u;
    }
    pred_text.push_back(inst.candidates[static_cast<std::size_t>(predicted[i])]);
    gt_text.push_back(inst.gt_answer());
  }
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(rep.total);
  rep.wups_0 = wups(tax, pred_text, gt_text, 0.0);
  rep.wups_9 = wups(tax, pred_text, gt_text, 0.9);
  return rep;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["total"] = total;
  j["accuracy"] = accuracy;
  j["wups_0.0"] = wups_0;
  j["wups_0.9"] = wups_9;
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [type, acc] : per_type) {
    types[to_string(type)] = {{"total", acc.total},
                              {"correct", acc.correct},
                              {"accuracy", acc.accuracy()}};
  }
  j["per_type"] = types;
  j["excluding_where_when"] = {{"total", excluding_where_when.total},
                               {"correct", excluding_where_when.correct},
                               {"accuracy", excluding_where_when.accuracy()}};
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "items      " << total << "\n";
  os << "accuracy   " << accuracy << "\n";
  os << "wups@0.0   " << std::setprecision(2) << wups_0 << "\n";
  os << "wups@0.9   " << wups_9 << "\n" << std::setprecision(4);
  for (const auto& [type, acc] : per_type)
    os << std::left << std::setw(11) << to_string(type) << acc.accuracy() << "  ("
       << acc.correct << "/" << acc.total << ")\n";
  os << "not where/when " << excluding_where_when.accuracy() << "  ("
     << excluding_where_when.correct << "/" << excluding_where_when.total << ")\n";
  return os.str();
}

}  // namespace fwqa
