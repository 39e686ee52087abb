#pragma once

#include "ambisql/dataset.hpp"
#include "ambisql/interpretation.hpp"
#include "ambisql/sandbox.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ambisql {

struct PredictedItem {
  std::optional<Interpretation> interpretation;
  std::string sql;
  ExecOutcome outcome;
  // Set by dedup_by_denotation on failed predictions it retains.
  bool unverifiable = false;
};

// Matcher input: sql to execute, or sql plus an already-known outcome (e.g.
// an extraction failure, or a pipeline execution being reused).
struct PredictionInput {
  std::optional<Interpretation> interpretation;
  std::string sql;
  std::optional<ExecOutcome> outcome;
};

struct FailedPrediction {
  int index = 0;
  std::string kind;
  std::string message;
};

struct MatchReport {
  std::string example_id;
  std::vector<Denotation> gold_denotations;  // index-aligned with gold_sql
  std::vector<PredictedItem> predictions;
  std::vector<std::vector<bool>> match_matrix;  // predictions x golds
  std::set<int> covered_gold_indices;
  std::set<int> missing_gold_indices;
  std::vector<std::vector<int>> duplicate_groups;  // partition of successful predictions
  std::vector<FailedPrediction> failed_predictions;
  // Carried from the Example so reports alone can drive metric variants.
  std::vector<std::string> tags;
  std::optional<bool> is_ambiguous;
};

// Executes golds and predictions and fills the full coverage structure.
// Throws GoldExecutionError naming the gold index when a gold query fails
// (dataset defect).
MatchReport match_predictions(const Example& example, const std::vector<PredictionInput>& inputs,
                              const SandboxLimits& limits = {},
                              ComparisonMode mode = ComparisonMode::multiset);

// Keeps the first successful prediction per denotation fingerprint in input
// order; failed predictions are retained and tagged unverifiable.
std::vector<PredictedItem> dedup_by_denotation(const std::vector<PredictedItem>& predictions);

struct CoverageSets {
  std::set<int> covered;
  std::set<int> missing;
  int matched_prediction_count = 0;
  int distinct_prediction_denotations = 0;
};

CoverageSets coverage_sets(const MatchReport& report);

nlohmann::ordered_json denotation_to_json(const Denotation& d);
nlohmann::ordered_json report_to_json(const MatchReport& report);
// Round-trip of the fields metrics need; predictions come back without
// interpretations or row data (reports store denotations compactly).
MatchReport report_from_json(const nlohmann::ordered_json& j);

}  // namespace ambisql
