#include "ambisql/matcher.hpp"

#include "ambisql/errors.hpp"

#include <unordered_map>

namespace ambisql {
namespace {

using ordered_json = nlohmann::ordered_json;

nlohmann::ordered_json interpretation_to_json(const Interpretation& interp) {
  ordered_json j;
  j["text"] = interp.text;
  j["provenance"] = provenance_name(interp.provenance);
  j["ordinal"] = interp.ordinal;
  return j;
}

}  // namespace

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::default_gen: return "default";
    case Provenance::infilled: return "infilled";
    case Provenance::gold_reference: return "gold_reference";
    case Provenance::self_corrected: return "self_corrected";
  }
  return "default";
}

Provenance parse_provenance(const std::string& name) {
  if (name == "default") return Provenance::default_gen;
  if (name == "infilled") return Provenance::infilled;
  if (name == "gold_reference") return Provenance::gold_reference;
  if (name == "self_corrected") return Provenance::self_corrected;
  throw ConfigError("unknown provenance: " + name);
}

MatchReport match_predictions(const Example& example, const std::vector<PredictionInput>& inputs,
                              const SandboxLimits& limits, ComparisonMode mode) {
  MatchReport report;
  report.example_id = example.example_id;
  report.tags = example.tags;
  report.is_ambiguous = example.is_ambiguous;

  if (!example.db) throw GoldExecutionError("example " + example.example_id + ": no database spec");
  DatabaseHandle handle = build_database(*example.db);

  for (std::size_t g = 0; g < example.gold_sql.size(); ++g) {
    ExecOutcome outcome = execute(handle, example.gold_sql[g], limits);
    if (!is_ok(outcome)) {
      throw GoldExecutionError("example " + example.example_id + ": gold " + std::to_string(g) +
                               " failed: " + outcome_message(outcome));
    }
    report.gold_denotations.push_back(ok_denotation(outcome));
  }

  for (const PredictionInput& input : inputs) {
    PredictedItem item;
    item.interpretation = input.interpretation;
    item.sql = input.sql;
    if (input.outcome) {
      item.outcome = *input.outcome;
    } else {
      item.outcome = execute(handle, input.sql, limits);
    }
    report.predictions.push_back(std::move(item));
  }

  const std::size_t n_golds = example.gold_sql.size();
  report.match_matrix.assign(report.predictions.size(), std::vector<bool>(n_golds, false));
  std::unordered_map<std::string, std::size_t> group_of;
  for (std::size_t p = 0; p < report.predictions.size(); ++p) {
    const PredictedItem& item = report.predictions[p];
    if (!is_ok(item.outcome)) {
      report.failed_predictions.push_back(
          {static_cast<int>(p), outcome_kind(item.outcome), outcome_message(item.outcome)});
      continue;
    }
    const Denotation& d = ok_denotation(item.outcome);
    for (std::size_t g = 0; g < n_golds; ++g) {
      if (denotation_equal(d, report.gold_denotations[g], mode)) {
        report.match_matrix[p][g] = true;
        report.covered_gold_indices.insert(static_cast<int>(g));
      }
    }
    auto it = group_of.find(d.fingerprint);
    if (it == group_of.end()) {
      group_of.emplace(d.fingerprint, report.duplicate_groups.size());
      report.duplicate_groups.push_back({static_cast<int>(p)});
    } else {
      report.duplicate_groups[it->second].push_back(static_cast<int>(p));
    }
  }
  for (std::size_t g = 0; g < n_golds; ++g) {
    if (!report.covered_gold_indices.count(static_cast<int>(g))) {
      report.missing_gold_indices.insert(static_cast<int>(g));
    }
  }
  return report;
}

std::vector<PredictedItem> dedup_by_denotation(const std::vector<PredictedItem>& predictions) {
  std::vector<PredictedItem> out;
  std::unordered_map<std::string, bool> seen;
  for (const PredictedItem& item : predictions) {
    if (!is_ok(item.outcome)) {
      PredictedItem kept = item;
      kept.unverifiable = true;
      out.push_back(std::move(kept));
      continue;
    }
    const std::string& fp = ok_denotation(item.outcome).fingerprint;
    if (seen[fp]) continue;
    seen[fp] = true;
    out.push_back(item);
  }
  return out;
}

CoverageSets coverage_sets(const MatchReport& report) {
  CoverageSets sets;
  sets.covered = report.covered_gold_indices;
  sets.missing = report.missing_gold_indices;
  sets.distinct_prediction_denotations = static_cast<int>(report.duplicate_groups.size());
  for (std::size_t p = 0; p < report.match_matrix.size(); ++p) {
    bool any = false;
    for (bool m : report.match_matrix[p]) any = any || m;
    if (any) ++sets.matched_prediction_count;
  }
  return sets;
}

nlohmann::ordered_json denotation_to_json(const Denotation& d) {
  ordered_json j;
  j["columns"] = d.columns;
  j["row_count"] = d.rows.size();
  j["truncated"] = d.truncated;
  j["fingerprint"] = d.fingerprint;
  return j;
}

nlohmann::ordered_json report_to_json(const MatchReport& report) {
  ordered_json j;
  j["example_id"] = report.example_id;
  ordered_json golds = ordered_json::array();
  for (const Denotation& d : report.gold_denotations) golds.push_back(denotation_to_json(d));
  j["gold_denotations"] = std::move(golds);

  ordered_json preds = ordered_json::array();
  for (std::size_t p = 0; p < report.predictions.size(); ++p) {
    const PredictedItem& item = report.predictions[p];
    ordered_json pj;
    pj["index"] = p;
    if (item.interpretation) pj["interpretation"] = interpretation_to_json(*item.interpretation);
    pj["sql"] = item.sql;
    pj["outcome"] = outcome_kind(item.outcome);
    if (is_ok(item.outcome)) {
      pj["denotation"] = denotation_to_json(ok_denotation(item.outcome));
    } else {
      pj["message"] = outcome_message(item.outcome);
    }
    preds.push_back(std::move(pj));
  }
  j["predictions"] = std::move(preds);

  ordered_json matrix = ordered_json::array();
  for (const auto& row : report.match_matrix) {
    ordered_json r = ordered_json::array();
    for (bool m : row) r.push_back(m);
    matrix.push_back(std::move(r));
  }
  j["match_matrix"] = std::move(matrix);
  j["covered_gold_indices"] = report.covered_gold_indices;
  j["missing_gold_indices"] = report.missing_gold_indices;
  j["duplicate_groups"] = report.duplicate_groups;

  ordered_json failed = ordered_json::array();
  for (const FailedPrediction& f : report.failed_predictions) {
    ordered_json fj;
    fj["index"] = f.index;
    fj["kind"] = f.kind;
    fj["message"] = f.message;
    failed.push_back(std::move(fj));
  }
  j["failed_predictions"] = std::move(failed);
  j["tags"] = report.tags;
  if (report.is_ambiguous) j["is_ambiguous"] = *report.is_ambiguous;
  return j;
}

MatchReport report_from_json(const nlohmann::ordered_json& j) {
  MatchReport report;
  report.example_id = j.value("example_id", "");
  if (auto it = j.find("gold_denotations"); it != j.end()) {
    for (const auto& dj : *it) {
      Denotation d;
      d.columns = dj.value("columns", 0);
      d.truncated = dj.value("truncated", false);
      d.fingerprint = dj.value("fingerprint", "");
      // Row data is compacted away; only counts survive.
      d.rows.resize(dj.value("row_count", std::size_t{0}));
      report.gold_denotations.push_back(std::move(d));
    }
  }
  if (auto it = j.find("match_matrix"); it != j.end()) {
    for (const auto& rj : *it) {
      std::vector<bool> row;
      for (const auto& cell : rj) row.push_back(cell.get<bool>());
      report.match_matrix.push_back(std::move(row));
    }
  }
  if (auto it = j.find("covered_gold_indices"); it != j.end()) {
    for (const auto& g : *it) report.covered_gold_indices.insert(g.get<int>());
  }
  if (auto it = j.find("missing_gold_indices"); it != j.end()) {
    for (const auto& g : *it) report.missing_gold_indices.insert(g.get<int>());
  }
  if (auto it = j.find("duplicate_groups"); it != j.end()) {
    for (const auto& gj : *it) {
      std::vector<int> group;
      for (const auto& p : gj) group.push_back(p.get<int>());
      report.duplicate_groups.push_back(std::move(group));
    }
  }
  if (auto it = j.find("failed_predictions"); it != j.end()) {
    for (const auto& fj : *it) {
      report.failed_predictions.push_back(
          {fj.value("index", 0), fj.value("kind", ""), fj.value("message", "")});
    }
  }
  if (auto it = j.find("tags"); it != j.end()) {
    for (const auto& t : *it) report.tags.push_back(t.get<std::string>());
  }
  if (auto it = j.find("is_ambiguous"); it != j.end() && it->is_boolean()) {
    report.is_ambiguous = it->get<bool>();
  }
  // Predictions are reconstructed only as placeholders so sizes line up.
  if (auto it = j.find("predictions"); it != j.end()) {
    for (const auto& pj : *it) {
      PredictedItem item;
      item.sql = pj.value("sql", "");
      std::string kind = pj.value("outcome", "ok");
      if (kind == "ok") {
        Denotation d;
        if (auto dj = pj.find("denotation"); dj != pj.end()) {
          d.columns = dj->value("columns", 0);
          d.truncated = dj->value("truncated", false);
          d.fingerprint = dj->value("fingerprint", "");
          d.rows.resize(dj->value("row_count", std::size_t{0}));
        }
        item.outcome = std::move(d);
      } else if (kind == "syntax_error") {
        item.outcome = SqlSyntaxError{pj.value("message", "")};
      } else if (kind == "timeout") {
        item.outcome = ExecTimeout{0};
      } else {
        item.outcome = SqlRuntimeError{pj.value("message", "")};
      }
      report.predictions.push_back(std::move(item));
    }
  }
  return report;
}

}  // namespace ambisql
