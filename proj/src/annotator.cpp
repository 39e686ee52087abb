#include "ambisql/annotator.hpp"

#include "ambisql/errors.hpp"
#include "ambisql/util.hpp"

#include <iostream>

namespace ambisql {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

GenerationRequest stage_request(const PipelineContext& ctx, const std::string& backend_id,
                                std::string prompt, std::optional<int> seed = std::nullopt) {
  GenerationRequest request;
  request.backend_id = backend_id;
  request.model = ctx.gateway.backend(backend_id).model;
  request.prompt = std::move(prompt);
  request.temperature = ctx.gen.temperature;
  request.max_tokens = ctx.gen.max_tokens;
  request.seed = seed;
  return request;
}

}  // namespace

InfillTrainingRecord build_infill_record(
    const Example& example, PipelineContext& ctx,
    const std::optional<std::vector<std::string>>& supplied_defaults) {
  if (!example.gold_interpretations ||
      example.gold_interpretations->size() != example.gold_sql.size()) {
    throw GoldExecutionError("example " + example.example_id +
                             ": gold interpretations missing or misaligned");
  }

  std::vector<std::string> default_texts;
  if (supplied_defaults) {
    default_texts = *supplied_defaults;
  } else {
    for (const Interpretation& interp : run_default_interps(example, ctx)) {
      default_texts.push_back(interp.text);
    }
  }

  std::vector<Interpretation> interps;
  for (std::size_t i = 0; i < default_texts.size(); ++i) {
    interps.push_back({default_texts[i], Provenance::default_gen, static_cast<int>(i)});
  }
  std::vector<ParsedQuery> parsed = parse_all_to_sql(example, interps, ctx);

  // Matching is execution-only: failed parses cover nothing.
  MatchReport report =
      match_predictions(example, to_prediction_inputs(parsed), ctx.limits, ctx.mode);

  InfillTrainingRecord record;
  record.db_dump = example.db ? example.db->dump_text : "";
  record.question = example.question;
  record.default_interps = default_texts;
  if (report.missing_gold_indices.empty()) {
    record.target = kCoveredSentinel;
  } else {
    std::vector<std::string> missing_refs;
    for (int g : report.missing_gold_indices) {  // std::set iterates in gold order
      missing_refs.push_back((*example.gold_interpretations)[static_cast<std::size_t>(g)]);
    }
    record.target = join_lines(missing_refs);
  }
  return record;
}

std::string format_instruction(const InfillTrainingRecord& record) {
  return render_prompt(PromptKind::infill, {{"context", record.db_dump},
                                            {"question", record.question},
                                            {"existing", join_lines(record.default_interps)}});
}

nlohmann::ordered_json infill_record_to_json(const InfillTrainingRecord& record) {
  ordered_json j;
  j["db_dump"] = record.db_dump;
  j["question"] = record.question;
  j["default_interpretations"] = record.default_interps;
  j["target"] = record.target;
  return j;
}

InfillDatasetStats build_infill_dataset(const std::vector<Example>& examples, PipelineContext& ctx,
                                        const std::string& out_path, bool wrapped) {
  InfillDatasetStats stats;
  std::string out;
  for (const Example& example : examples) {
    InfillTrainingRecord record;
    try {
      record = build_infill_record(example, ctx);
    } catch (const Error& e) {
      std::cerr << "annotate: skipping " << example.example_id << ": " << e.what() << "\n";
      ++stats.skipped;
      continue;
    }
    ++stats.total;
    if (record.target == kCoveredSentinel) ++stats.sentinel_count;
    if (wrapped) {
      ordered_json j;
      j["prompt"] = format_instruction(record);
      j["target"] = record.target;
      out += j.dump();
    } else {
      out += infill_record_to_json(record).dump();
    }
    out.push_back('\n');
  }
  util::atomic_write_file(out_path, out);
  return stats;
}

std::pair<SynthesisRecord, SynthesisRecord> synthesize_interpretations(const Example& example,
                                                                       PipelineContext& ctx) {
  if (!example.synonyms || example.synonyms->size() != 2 || example.gold_sql.size() != 2) {
    throw GoldExecutionError("example " + example.example_id +
                             ": synthesis requires a synonym pair and two gold queries");
  }
  if (!example.db) {
    throw GoldExecutionError("example " + example.example_id + ": no database spec");
  }

  DatabaseHandle handle = build_database(*example.db);
  std::vector<Denotation> gold_denotations;
  for (std::size_t g = 0; g < example.gold_sql.size(); ++g) {
    ExecOutcome outcome = execute(handle, example.gold_sql[g], ctx.limits);
    if (!is_ok(outcome)) {
      throw GoldExecutionError("example " + example.example_id + ": gold " + std::to_string(g) +
                               " failed: " + outcome_message(outcome));
    }
    gold_denotations.push_back(ok_denotation(outcome));
  }

  auto synthesize_one = [&](std::size_t i) {
    SynthesisRecord record;
    record.source_question = example.question;
    record.synonym = (*example.synonyms)[i];

    std::string rewrite_prompt = render_prompt(
        PromptKind::synonym_rewrite,
        {{"question", example.question}, {"synonym", record.synonym}});
    record.rewritten_question = util::trim(
        ctx.gateway.generate(stage_request(ctx, ctx.stages.rewrite, rewrite_prompt)));
    if (record.rewritten_question.empty()) {
      record.attempts_used = kMaxSynthesisAttempts;
      return record;
    }

    std::string sql_prompt =
        render_prompt(PromptKind::text2sql, {{"schema", example.db->dump_text},
                                             {"question", record.rewritten_question}});
    for (int attempt = 1; attempt <= kMaxSynthesisAttempts; ++attempt) {
      record.attempts_used = attempt;
      std::string reply;
      try {
        // The attempt number becomes the request seed so retries are distinct
        // requests rather than cache replays of the first answer.
        reply = ctx.gateway.generate(
            stage_request(ctx, ctx.stages.validator, sql_prompt, attempt));
      } catch (const Error&) {
        continue;  // a failed backend call consumes the attempt
      }
      std::string sql;
      try {
        sql = extract_sql(reply);
      } catch (const ExtractionError&) {
        continue;
      }
      ExecOutcome outcome = execute(handle, sql, ctx.limits);
      if (is_ok(outcome) && denotation_equal(ok_denotation(outcome), gold_denotations[i], ctx.mode)) {
        record.accepted = true;
        record.validating_sql = sql;
        break;
      }
    }
    return record;
  };

  // Example-level acceptance is the conjunction of the two records; each
  // record keeps its own validation outcome for the audit trail.
  auto first = synthesize_one(0);
  auto second = synthesize_one(1);
  return {std::move(first), std::move(second)};
}

nlohmann::ordered_json synthesis_record_to_json(const SynthesisRecord& record) {
  ordered_json j;
  j["source_question"] = record.source_question;
  j["synonym"] = record.synonym;
  j["rewritten_question"] = record.rewritten_question;
  j["attempts_used"] = record.attempts_used;
  j["accepted"] = record.accepted;
  if (record.validating_sql) j["validating_sql"] = *record.validating_sql;
  return j;
}

}  // namespace ambisql
