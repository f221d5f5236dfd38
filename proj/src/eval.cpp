#include "kvqa/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include "io.hpp"
#include "kvqa/error.hpp"

namespace kvqa {

Taxonomy Taxonomy::from_edges(const std::vector<std::pair<std::string, std::string>>& child_parent) {
  Taxonomy t;
  std::set<std::string> parents;
  for (const auto& [child, parent] : child_parent) {
    if (child.empty() || parent.empty()) {
      throw Error(ErrorKind::MalformedRecord, "taxonomy edge with an empty concept");
    }
    if (child == parent) throw Error(ErrorKind::MalformedRecord, "taxonomy self-loop at '" + child + "'");
    auto [it, fresh] = t.parent_.emplace(child, parent);
    if (!fresh && it->second != parent) {
      throw Error(ErrorKind::MalformedRecord, "concept '" + child + "' has two parents");
    }
    parents.insert(parent);
  }
  std::vector<std::string> roots;
  for (const auto& p : parents) {
    if (!t.parent_.count(p)) roots.push_back(p);
  }
  if (t.parent_.empty()) throw Error(ErrorKind::MalformedRecord, "empty taxonomy");
  if (roots.size() != 1) {
    // Zero roots means every chain loops back on itself.
    throw Error(ErrorKind::MalformedRecord,
                "taxonomy needs exactly one root, found " + std::to_string(roots.size()));
  }
  t.root_ = roots.front();
  t.parent_.emplace(t.root_, "");
  t.depth_[t.root_] = 1;

  for (const auto& [node, parent] : t.parent_) {
    // Walk up until a node with known depth, then assign depths on the way back.
    std::vector<std::string> chain;
    std::string cur = node;
    while (!t.depth_.count(cur)) {
      chain.push_back(cur);
      if (chain.size() > t.parent_.size()) {
        throw Error(ErrorKind::MalformedRecord, "taxonomy cycle through '" + node + "'");
      }
      cur = t.parent_.at(cur);
    }
    std::size_t d = t.depth_.at(cur);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) t.depth_[*it] = ++d;
  }
  return t;
}

Taxonomy Taxonomy::load(const std::filesystem::path& path) {
  std::istringstream in(detail::read_text(path));
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw Error(ErrorKind::MalformedRecord,
                  path.string() + " line " + std::to_string(line_no) + ": expected child<TAB>parent");
    }
    edges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  try {
    return from_edges(edges);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::size_t Taxonomy::depth(const std::string& concept_name) const {
  auto it = depth_.find(concept_name);
  if (it == depth_.end()) throw Error(ErrorKind::InvalidArgument, "'" + concept_name + "' not in taxonomy");
  return it->second;
}

std::string Taxonomy::lca(const std::string& a, const std::string& b) const {
  std::string x = a;
  std::string y = b;
  std::size_t dx = depth(x);
  std::size_t dy = depth(y);
  while (dx > dy) {
    x = parent_.at(x);
    --dx;
  }
  while (dy > dx) {
    y = parent_.at(y);
    --dy;
  }
  while (x != y) {
    x = parent_.at(x);
    y = parent_.at(y);
  }
  return x;
}

double wup_similarity(const std::string& a, const std::string& b, const Taxonomy& taxonomy) {
  if (a == b) return 1.0;
  if (!taxonomy.contains(a) || !taxonomy.contains(b)) return 0.0;
  const double lca_depth = static_cast<double>(taxonomy.depth(taxonomy.lca(a, b)));
  return 2.0 * lca_depth / static_cast<double>(taxonomy.depth(a) + taxonomy.depth(b));
}

double wups_score(const std::string& prediction, const std::vector<std::string>& ground_truths,
                  const Taxonomy& taxonomy, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "WUPS threshold must lie in [0, 1]");
  }
  double best = 0.0;
  for (const auto& gt : ground_truths) best = std::max(best, wup_similarity(prediction, gt, taxonomy));
  return best < threshold ? best * kWupsDownWeight : best;
}

EvalReport evaluate(const std::unordered_map<std::int64_t, std::string>& predictions,
                    const std::vector<AnnotationRecord>& annotations, const Taxonomy& taxonomy,
                    const std::vector<double>& thresholds, std::string label) {
  EvalReport report;
  report.label = std::move(label);
  report.thresholds = thresholds;
  report.wups_at_threshold.assign(thresholds.size(), 0.0);
  std::size_t exact = 0;
  for (const auto& ann : annotations) {
    auto it = predictions.find(ann.question_id);
    if (it == predictions.end()) {
      throw Error(ErrorKind::MissingPrediction, "no prediction for question_id " + std::to_string(ann.question_id));
    }
    EvalRow row;
    row.question_id = ann.question_id;
    row.prediction = it->second;
    for (const auto& a : ann.answers) row.ground_truths.push_back(a.answer);
    row.exact = std::find(row.ground_truths.begin(), row.ground_truths.end(), row.prediction) !=
                row.ground_truths.end();
    if (row.exact) ++exact;
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      row.wups.push_back(wups_score(row.prediction, row.ground_truths, taxonomy, thresholds[k]));
      report.wups_at_threshold[k] += row.wups.back();
    }
    report.rows.push_back(std::move(row));
  }
  if (!report.rows.empty()) {
    const auto n = static_cast<double>(report.rows.size());
    report.exact_accuracy = static_cast<double>(exact) / n;
    for (double& w : report.wups_at_threshold) w /= n;
  }
  return report;
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "question_id,prediction,ground_truths,exact";
  for (double t : report.thresholds) out << ",wups@" << t;
  out << '\n' << std::setprecision(17);
  for (const auto& row : report.rows) {
    std::string truths;
    for (std::size_t i = 0; i < row.ground_truths.size(); ++i) {
      if (i) truths += '|';
      truths += row.ground_truths[i];
    }
    out << row.question_id << ',' << row.prediction << ',' << truths << ',' << (row.exact ? 1 : 0);
    for (double w : row.wups) out << ',' << w;
    out << '\n';
  }
  detail::write_text(path, out.str());
}

}  // namespace kvqa
