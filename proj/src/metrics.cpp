#include "ambisql/metrics.hpp"

#include "ambisql/errors.hpp"

#include <cstdio>
#include <set>

namespace ambisql {
namespace {

bool group_matches_any_gold(const MatchReport& report, const std::vector<int>& group) {
  for (int p : group) {
    if (p < 0 || static_cast<std::size_t>(p) >= report.match_matrix.size()) continue;
    for (bool m : report.match_matrix[p]) {
      if (m) return true;
    }
  }
  return false;
}

std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

}  // namespace

ExampleScore score_example(const MatchReport& report) {
  ExampleScore score;
  score.tags = report.tags;
  score.is_ambiguous = report.is_ambiguous;
  score.golds = static_cast<int>(report.gold_denotations.size());
  score.failed_predictions = static_cast<int>(report.failed_predictions.size());

  const std::size_t n_golds = report.gold_denotations.size();
  score.single = report.covered_gold_indices.empty() ? 0 : 1;
  score.full = (report.missing_gold_indices.empty() && n_golds > 0) ? 1 : 0;
  score.recall = n_golds == 0
                     ? 0.0
                     : static_cast<double>(report.covered_gold_indices.size()) /
                           static_cast<double>(n_golds);

  const std::size_t distinct = report.duplicate_groups.size();
  if (distinct > 0) {
    std::size_t matched_groups = 0;
    for (const auto& group : report.duplicate_groups) {
      if (group_matches_any_gold(report, group)) ++matched_groups;
    }
    score.precision = static_cast<double>(matched_groups) / static_cast<double>(distinct);
  }

  std::size_t successful = 0;
  std::size_t matched_preds = 0;
  for (std::size_t p = 0; p < report.match_matrix.size(); ++p) {
    bool failed = false;
    for (const FailedPrediction& f : report.failed_predictions) {
      if (f.index == static_cast<int>(p)) failed = true;
    }
    if (failed) continue;
    ++successful;
    bool any = false;
    for (bool m : report.match_matrix[p]) any = any || m;
    if (any) ++matched_preds;
  }
  if (successful > 0) {
    score.precision_raw = static_cast<double>(matched_preds) / static_cast<double>(successful);
  }
  return score;
}

int score_unambiguous(const MatchReport& report) {
  if (report.gold_denotations.size() != 1) {
    throw Error("score_unambiguous requires exactly one gold, got " +
                std::to_string(report.gold_denotations.size()));
  }
  return report.covered_gold_indices.count(0) ? 1 : 0;
}

MetricsSummary aggregate(const std::vector<ExampleScore>& scores) {
  if (scores.empty()) throw Error("aggregate over an empty score list");
  MetricsSummary summary;
  summary.n_examples = static_cast<int>(scores.size());

  double single = 0, full = 0, recall = 0, precision = 0, precision_raw = 0;
  struct TagAcc {
    int n = 0;
    double single = 0, full = 0, recall = 0, precision = 0;
    int precision_defined = 0;
  };
  std::map<std::string, TagAcc> tag_acc;

  for (const ExampleScore& s : scores) {
    single += s.single;
    full += s.full;
    recall += s.recall;
    if (s.precision) {
      precision += *s.precision;
      ++summary.precision_defined;
    }
    if (s.precision_raw) {
      precision_raw += *s.precision_raw;
      ++summary.precision_raw_defined;
    }
    summary.failed_predictions += s.failed_predictions;
    std::set<std::string> unique_tags(s.tags.begin(), s.tags.end());
    for (const std::string& tag : unique_tags) {
      TagAcc& acc = tag_acc[tag];
      ++acc.n;
      acc.single += s.single;
      acc.full += s.full;
      acc.recall += s.recall;
      if (s.precision) {
        acc.precision += *s.precision;
        ++acc.precision_defined;
      }
    }
  }

  const double n = static_cast<double>(scores.size());
  summary.single_cov = 100.0 * single / n;
  summary.full_cov = 100.0 * full / n;
  summary.recall = 100.0 * recall / n;
  summary.precision =
      summary.precision_defined ? 100.0 * precision / summary.precision_defined : 0.0;
  summary.precision_raw =
      summary.precision_raw_defined ? 100.0 * precision_raw / summary.precision_raw_defined : 0.0;

  for (const auto& [tag, acc] : tag_acc) {
    TagBreakdown b;
    b.n = acc.n;
    b.single_cov = 100.0 * acc.single / acc.n;
    b.full_cov = 100.0 * acc.full / acc.n;
    b.recall = 100.0 * acc.recall / acc.n;
    b.precision = acc.precision_defined ? 100.0 * acc.precision / acc.precision_defined : 0.0;
    b.precision_defined = acc.precision_defined;
    summary.by_tag[tag] = b;
  }
  return summary;
}

std::optional<UnambiguousSummary> summarize_unambiguous(const std::vector<MatchReport>& reports) {
  UnambiguousSummary u;
  int found = 0;
  for (const MatchReport& report : reports) {
    if (report.gold_denotations.size() != 1) continue;
    ++u.n;
    found += score_unambiguous(report);
  }
  if (u.n == 0) return std::nullopt;
  u.found_pct = 100.0 * found / u.n;
  return u;
}

nlohmann::ordered_json summary_to_json(const MetricsSummary& summary,
                                       const std::optional<UnambiguousSummary>& unambig) {
  nlohmann::ordered_json j;
  j["n_examples"] = summary.n_examples;
  j["single_cov"] = summary.single_cov;
  j["full_cov"] = summary.full_cov;
  j["recall"] = summary.recall;
  j["precision"] = summary.precision;
  j["precision_defined"] = summary.precision_defined;
  j["precision_raw"] = summary.precision_raw;
  j["precision_raw_defined"] = summary.precision_raw_defined;
  j["failed_predictions"] = summary.failed_predictions;
  nlohmann::ordered_json tags = nlohmann::ordered_json::object();
  for (const auto& [tag, b] : summary.by_tag) {
    nlohmann::ordered_json tj;
    tj["n"] = b.n;
    tj["single_cov"] = b.single_cov;
    tj["full_cov"] = b.full_cov;
    tj["recall"] = b.recall;
    tj["precision"] = b.precision;
    tj["precision_defined"] = b.precision_defined;
    tags[tag] = std::move(tj);
  }
  j["by_tag"] = std::move(tags);
  if (unambig) {
    nlohmann::ordered_json uj;
    uj["n"] = unambig->n;
    uj["found_pct"] = unambig->found_pct;
    j["unambiguous"] = std::move(uj);
  }
  return j;
}

std::string render_table(const MetricsSummary& summary,
                         const std::optional<UnambiguousSummary>& unambig) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %8s %8s %8s %10s\n", "", "Single", "Full", "Recall",
                "Precision");
  out += line;
  std::snprintf(line, sizeof(line), "%-16s %8s %8s %8s %10s\n",
                ("overall (n=" + std::to_string(summary.n_examples) + ")").c_str(),
                fmt1(summary.single_cov).c_str(), fmt1(summary.full_cov).c_str(),
                fmt1(summary.recall).c_str(), fmt1(summary.precision).c_str());
  out += line;
  for (const auto& [tag, b] : summary.by_tag) {
    std::snprintf(line, sizeof(line), "%-16s %8s %8s %8s %10s\n",
                  (tag + " (n=" + std::to_string(b.n) + ")").c_str(), fmt1(b.single_cov).c_str(),
                  fmt1(b.full_cov).c_str(), fmt1(b.recall).c_str(), fmt1(b.precision).c_str());
    out += line;
  }
  if (unambig) {
    std::snprintf(line, sizeof(line), "unambiguous (n=%d): found %s\n", unambig->n,
                  fmt1(unambig->found_pct).c_str());
    out += line;
  }
  return out;
}

}  // namespace ambisql
