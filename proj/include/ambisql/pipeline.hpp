#pragma once

#include "ambisql/dataset.hpp"
#include "ambisql/interpretation.hpp"
#include "ambisql/llm.hpp"
#include "ambisql/matcher.hpp"
#include "ambisql/sandbox.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ambisql {

struct ParsedQuery {
  std::optional<Interpretation> interpretation;
  std::string sql;
  ExecOutcome outcome;
};

struct TraceEntry {
  std::string stage;
  nlohmann::ordered_json detail;
};

struct PipelineResult {
  std::string example_id;
  std::vector<Interpretation> interpretations;
  std::vector<ParsedQuery> parsed;        // one per interpretation (or per split statement)
  std::vector<ParsedQuery> final_queries; // deduplicated, first-seen order
  bool infiller_said_covered = false;
  std::vector<TraceEntry> trace;
};

struct GenerationParams {
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct StageBackends {
  std::string interp = "interp";
  std::string infill = "infill";
  std::string text2sql = "text2sql";
  std::string rewrite = "rewrite";
  std::string validator = "validator";
};

struct PipelineContext {
  LlmGateway& gateway;
  StageBackends stages;
  GenerationParams gen;
  SandboxLimits limits;
  ComparisonMode mode = ComparisonMode::multiset;
  bool no_infill = false;
  // Guards against degenerate backend loops; interpretations beyond the cap
  // are dropped.
  int interp_cap = 10;
  std::uint64_t seed = 0;
  // Demonstration pool for few-shot baselines; the example under evaluation
  // is excluded at sampling time.
  const std::vector<Example>* demo_pool = nullptr;
};

std::vector<Interpretation> run_default_interps(const Example& example, PipelineContext& ctx);

struct InfillOutcome {
  std::vector<Interpretation> added;
  bool covered = false;
};

// Never removes or edits defaults; it can only add interpretations or report
// that everything is covered.
InfillOutcome run_infill(const Example& example, const std::vector<Interpretation>& defaults,
                         PipelineContext& ctx);

// One text-to-SQL generation per interpretation; extraction and execution
// failures are recorded per item and never abort the batch.
std::vector<ParsedQuery> parse_all_to_sql(const Example& example,
                                          const std::vector<Interpretation>& interps,
                                          PipelineContext& ctx);

PipelineResult disambiguate_then_parse(const Example& example, PipelineContext& ctx);

std::vector<ParsedQuery> end_to_end_baseline(const Example& example, int shots,
                                             PipelineContext& ctx);

// Replaces the candidate set; unlike infilling, removal is permitted.
// Throws on an empty candidate list.
std::vector<Interpretation> self_correct(const Example& example,
                                         const std::vector<Interpretation>& interps,
                                         PipelineContext& ctx);

std::vector<PredictionInput> to_prediction_inputs(const std::vector<ParsedQuery>& parsed);

nlohmann::ordered_json pipeline_result_to_json(const PipelineResult& result);

// Splits an end-to-end reply into SQL statements: blank lines and
// semicolon+newline are boundaries; chunks without SQL content are dropped.
std::vector<std::string> split_sql_statements(const std::string& text);

}  // namespace ambisql
