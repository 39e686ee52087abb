#pragma once

#include "ambisql/dataset.hpp"
#include "ambisql/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ambisql {

// A supervision record for the infilling stage: the target is either the
// newline-joined missing reference interpretations (gold order) or the
// covered sentinel.
struct InfillTrainingRecord {
  std::string db_dump;
  std::string question;
  std::vector<std::string> default_interps;
  std::string target;
};

// Builds one record by generating default interpretations (unless supplied),
// parsing them to SQL, executing, and matching against gold denotations.
// Throws GoldExecutionError when the example's golds cannot be executed.
InfillTrainingRecord build_infill_record(
    const Example& example, PipelineContext& ctx,
    const std::optional<std::vector<std::string>>& supplied_defaults = std::nullopt);

// The instruction wrapper around a record, ready for instruction-tuning
// toolchains.
std::string format_instruction(const InfillTrainingRecord& record);

nlohmann::ordered_json infill_record_to_json(const InfillTrainingRecord& record);

struct InfillDatasetStats {
  int total = 0;
  int sentinel_count = 0;
  int skipped = 0;
};

// Writes JSONL atomically (temp + rename); examples without aligned gold
// interpretations or with failing golds are skipped and counted.
InfillDatasetStats build_infill_dataset(const std::vector<Example>& examples, PipelineContext& ctx,
                                        const std::string& out_path, bool wrapped = false);

struct SynthesisRecord {
  std::string source_question;
  std::string synonym;
  std::string rewritten_question;
  int attempts_used = 0;
  bool accepted = false;
  std::optional<std::string> validating_sql;
};

inline constexpr int kMaxSynthesisAttempts = 5;

// Rewrites the question once per synonym, then validates each rewrite by
// generating SQL (up to five attempts) and accepting on denotation equality
// with the paired gold. The example counts as accepted only when both
// rewrites validate.
std::pair<SynthesisRecord, SynthesisRecord> synthesize_interpretations(const Example& example,
                                                                       PipelineContext& ctx);

nlohmann::ordered_json synthesis_record_to_json(const SynthesisRecord& record);

}  // namespace ambisql
