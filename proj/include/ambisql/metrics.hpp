#pragma once

#include "ambisql/matcher.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ambisql {

struct ExampleScore {
  int single = 0;  // at least one gold denotation covered
  int full = 0;    // every gold denotation covered
  double recall = 0.0;
  // Distinct predicted denotations matching some gold over distinct predicted
  // denotations; absent when there are zero verifiable predictions.
  std::optional<double> precision;
  // Same ratio over raw predictions, kept for the unresolved counting choice.
  std::optional<double> precision_raw;
  std::vector<std::string> tags;
  std::optional<bool> is_ambiguous;
  int golds = 0;
  int failed_predictions = 0;
};

ExampleScore score_example(const MatchReport& report);

// Unambiguous variant: found iff the single gold is covered, extra
// predictions are never penalized. Throws if the report has != 1 gold.
int score_unambiguous(const MatchReport& report);

struct TagBreakdown {
  int n = 0;
  double single_cov = 0.0;
  double full_cov = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  int precision_defined = 0;
};

struct MetricsSummary {
  int n_examples = 0;
  double single_cov = 0.0;  // percentages
  double full_cov = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  int precision_defined = 0;
  double precision_raw = 0.0;
  int precision_raw_defined = 0;
  int failed_predictions = 0;
  std::map<std::string, TagBreakdown> by_tag;
};

// Macro (per-example) averages; precision averaged over examples where it is
// defined. Throws on an empty list.
MetricsSummary aggregate(const std::vector<ExampleScore>& scores);

struct UnambiguousSummary {
  int n = 0;
  double found_pct = 0.0;
};

// Scores the |golds| == 1 subset; nullopt when the subset is empty.
std::optional<UnambiguousSummary> summarize_unambiguous(const std::vector<MatchReport>& reports);

nlohmann::ordered_json summary_to_json(const MetricsSummary& summary,
                                       const std::optional<UnambiguousSummary>& unambig = {});
// Aligned plain-text table in Single / Full / Recall / Precision column order.
std::string render_table(const MetricsSummary& summary,
                         const std::optional<UnambiguousSummary>& unambig = {});

}  // namespace ambisql
