#include "ambisql/pipeline.hpp"

#include "ambisql/errors.hpp"
#include "ambisql/util.hpp"

#include <algorithm>
#include <random>

namespace ambisql {
namespace {

using ordered_json = nlohmann::ordered_json;

GenerationRequest make_request(const PipelineContext& ctx, const std::string& backend_id,
                               std::string prompt) {
  GenerationRequest request;
  request.backend_id = backend_id;
  request.model = ctx.gateway.backend(backend_id).model;
  request.prompt = std::move(prompt);
  request.temperature = ctx.gen.temperature;
  request.max_tokens = ctx.gen.max_tokens;
  return request;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

std::vector<std::string> texts_of(const std::vector<Interpretation>& interps) {
  std::vector<std::string> out;
  out.reserve(interps.size());
  for (const Interpretation& interp : interps) out.push_back(interp.text);
  return out;
}

ParsedQuery parse_one(const Example& example, const DatabaseHandle& handle,
                      const Interpretation& interp, PipelineContext& ctx) {
  ParsedQuery item;
  item.interpretation = interp;
  std::string reply;
  try {
    reply = ctx.gateway.generate(make_request(
        ctx, ctx.stages.text2sql,
        render_prompt(PromptKind::text2sql,
                      {{"schema", example.db->dump_text}, {"question", interp.text}})));
  } catch (const Error& e) {
    item.outcome = SqlRuntimeError{std::string("generation failed: ") + e.what()};
    return item;
  }
  try {
    item.sql = extract_sql(reply);
  } catch (const ExtractionError& e) {
    item.outcome = SqlSyntaxError{e.what()};
    return item;
  }
  item.outcome = execute(handle, item.sql, ctx.limits);
  return item;
}

ordered_json parsed_summary(const std::vector<ParsedQuery>& parsed) {
  ordered_json arr = ordered_json::array();
  for (const ParsedQuery& item : parsed) {
    ordered_json j;
    if (item.interpretation) j["ordinal"] = item.interpretation->ordinal;
    j["sql"] = item.sql;
    j["outcome"] = outcome_kind(item.outcome);
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace

std::vector<Interpretation> run_default_interps(const Example& example, PipelineContext& ctx) {
  std::string prompt = render_prompt(
      PromptKind::default_interp,
      {{"context", example.db ? example.db->dump_text : ""}, {"question", example.question}});
  std::string reply = ctx.gateway.generate(make_request(ctx, ctx.stages.interp, std::move(prompt)));
  ParsedInterpretations parsed = parse_interpretations(reply);

  std::vector<Interpretation> out;
  for (std::size_t i = 0; i < parsed.interps.size(); ++i) {
    if (static_cast<int>(out.size()) >= ctx.interp_cap) break;
    out.push_back({parsed.interps[i], Provenance::default_gen, static_cast<int>(i)});
  }
  return out;
}

InfillOutcome run_infill(const Example& example, const std::vector<Interpretation>& defaults,
                         PipelineContext& ctx) {
  std::string prompt = render_prompt(
      PromptKind::infill, {{"context", example.db ? example.db->dump_text : ""},
                           {"question", example.question},
                           {"existing", join_lines(texts_of(defaults))}});
  std::string reply = ctx.gateway.generate(make_request(ctx, ctx.stages.infill, std::move(prompt)));
  ParsedInterpretations parsed = parse_interpretations(reply);

  InfillOutcome outcome;
  outcome.covered = parsed.all_covered;
  int next_ordinal = 0;
  for (const Interpretation& interp : defaults) {
    next_ordinal = std::max(next_ordinal, interp.ordinal + 1);
  }
  for (const std::string& text : parsed.interps) {
    outcome.added.push_back({text, Provenance::infilled, next_ordinal++});
  }
  return outcome;
}

std::vector<ParsedQuery> parse_all_to_sql(const Example& example,
                                          const std::vector<Interpretation>& interps,
                                          PipelineContext& ctx) {
  if (!example.db) throw SandboxError("example " + example.example_id + ": no database spec");
  DatabaseHandle handle = build_database(*example.db);
  std::vector<ParsedQuery> out;
  out.reserve(interps.size());
  for (const Interpretation& interp : interps) {
    out.push_back(parse_one(example, handle, interp, ctx));
  }
  return out;
}

std::vector<PredictionInput> to_prediction_inputs(const std::vector<ParsedQuery>& parsed) {
  std::vector<PredictionInput> out;
  out.reserve(parsed.size());
  for (const ParsedQuery& item : parsed) {
    out.push_back({item.interpretation, item.sql, item.outcome});
  }
  return out;
}

PipelineResult disambiguate_then_parse(const Example& example, PipelineContext& ctx) {
  PipelineResult result;
  result.example_id = example.example_id;

  std::vector<Interpretation> defaults = run_default_interps(example, ctx);
  result.trace.push_back({"default_interps",
                          ordered_json{{"count", defaults.size()},
                                       {"texts", texts_of(defaults)}}});
  if (defaults.empty()) {
    result.trace.push_back({"note", ordered_json{{"message", "no default interpretations"}}});
  }
  result.interpretations = defaults;

  std::vector<ParsedQuery> parsed_defaults = parse_all_to_sql(example, defaults, ctx);
  result.trace.push_back({"parse_defaults", parsed_summary(parsed_defaults)});

  // Execution-identical paraphrases are collapsed before the infiller sees
  // the set; failed parses stay (unverifiable, not duplicates).
  std::vector<PredictedItem> dedup_input;
  for (const ParsedQuery& item : parsed_defaults) {
    dedup_input.push_back({item.interpretation, item.sql, item.outcome, false});
  }
  std::vector<PredictedItem> deduped = dedup_by_denotation(dedup_input);
  std::vector<Interpretation> deduped_defaults;
  std::vector<ParsedQuery> merged;
  for (const PredictedItem& item : deduped) {
    if (item.interpretation) deduped_defaults.push_back(*item.interpretation);
    merged.push_back({item.interpretation, item.sql, item.outcome});
  }
  result.trace.push_back({"dedup_defaults",
                          ordered_json{{"kept", deduped_defaults.size()},
                                       {"texts", texts_of(deduped_defaults)}}});

  std::vector<ParsedQuery> parsed_added;
  if (!ctx.no_infill) {
    InfillOutcome infill = run_infill(example, deduped_defaults, ctx);
    result.infiller_said_covered = infill.covered;
    int room = ctx.interp_cap - static_cast<int>(result.interpretations.size());
    if (static_cast<int>(infill.added.size()) > std::max(room, 0)) {
      infill.added.resize(static_cast<std::size_t>(std::max(room, 0)));
    }
    // Infill numbered ordinals after the deduped set; renumber against the
    // full default set so ordinals stay unique.
    int next_ordinal = static_cast<int>(result.interpretations.size());
    for (Interpretation& interp : infill.added) interp.ordinal = next_ordinal++;
    result.trace.push_back({"infill",
                            ordered_json{{"covered", infill.covered},
                                         {"added", texts_of(infill.added)}}});
    for (const Interpretation& interp : infill.added) result.interpretations.push_back(interp);

    parsed_added = parse_all_to_sql(example, infill.added, ctx);
    result.trace.push_back({"parse_infilled", parsed_summary(parsed_added)});
    for (const ParsedQuery& item : parsed_added) merged.push_back(item);
  }

  result.parsed = parsed_defaults;
  for (const ParsedQuery& item : parsed_added) result.parsed.push_back(item);

  std::vector<PredictedItem> final_input;
  for (const ParsedQuery& item : merged) {
    final_input.push_back({item.interpretation, item.sql, item.outcome, false});
  }
  std::vector<PredictedItem> final_items = dedup_by_denotation(final_input);
  for (const PredictedItem& item : final_items) {
    if (!is_ok(item.outcome)) continue;
    result.final_queries.push_back({item.interpretation, item.sql, item.outcome});
  }
  result.trace.push_back({"final_dedup",
                          ordered_json{{"final_count", result.final_queries.size()}}});
  return result;
}

std::vector<std::string> split_sql_statements(const std::string& text) {
  // Boundaries: blank lines and semicolon followed by a newline.
  std::vector<std::string> chunks;
  std::string current;
  const std::vector<std::string> lines = util::split_lines(text);
  for (const std::string& line : lines) {
    if (util::trim(line).empty()) {
      if (!util::trim(current).empty()) chunks.push_back(current);
      current.clear();
      continue;
    }
    current += line;
    current.push_back('\n');
    std::string t = util::trim(line);
    if (!t.empty() && t.back() == ';') {
      chunks.push_back(current);
      current.clear();
    }
  }
  if (!util::trim(current).empty()) chunks.push_back(current);

  std::vector<std::string> out;
  for (const std::string& chunk : chunks) {
    try {
      out.push_back(extract_sql(chunk));
    } catch (const ExtractionError&) {
      // Prose chunk; skip.
    }
  }
  return out;
}

std::vector<ParsedQuery> end_to_end_baseline(const Example& example, int shots,
                                             PipelineContext& ctx) {
  if (!example.db) throw SandboxError("example " + example.example_id + ": no database spec");
  std::string demonstrations;
  if (shots > 0) {
    if (!ctx.demo_pool || ctx.demo_pool->empty()) {
      throw ConfigError("few-shot baseline requires a demonstration pool");
    }
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < ctx.demo_pool->size(); ++i) {
      if ((*ctx.demo_pool)[i].example_id != example.example_id) candidates.push_back(i);
    }
    if (candidates.size() < static_cast<std::size_t>(shots)) {
      throw ConfigError("demonstration pool smaller than shot count");
    }
    std::seed_seq seq{ctx.seed, std::hash<std::string>{}(example.example_id)};
    std::mt19937_64 rng(seq);
    std::shuffle(candidates.begin(), candidates.end(), rng);

    demonstrations = "Examples:\n";
    for (int s = 0; s < shots; ++s) {
      const Example& demo = (*ctx.demo_pool)[candidates[static_cast<std::size_t>(s)]];
      demonstrations += "Question: " + demo.question + "\n";
      for (const std::string& gold : demo.gold_sql) demonstrations += gold + "\n";
      demonstrations += "\n";
    }
  }

  std::string prompt = render_prompt(PromptKind::end_to_end,
                                     {{"schema", example.db->dump_text},
                                      {"question", example.question},
                                      {"demonstrations", demonstrations}});
  std::string reply = ctx.gateway.generate(make_request(ctx, ctx.stages.text2sql, std::move(prompt)));

  DatabaseHandle handle = build_database(*example.db);
  std::vector<ParsedQuery> out;
  for (const std::string& sql : split_sql_statements(reply)) {
    ParsedQuery item;
    item.sql = sql;
    item.outcome = execute(handle, sql, ctx.limits);
    out.push_back(std::move(item));
  }
  if (out.empty()) {
    ParsedQuery item;
    item.outcome = SqlSyntaxError{"no SQL content in reply: " + util::trim(reply).substr(0, 80)};
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<Interpretation> self_correct(const Example& example,
                                         const std::vector<Interpretation>& interps,
                                         PipelineContext& ctx) {
  if (interps.empty()) throw Error("self_correct requires a non-empty candidate set");
  std::string prompt = render_prompt(
      PromptKind::self_correct, {{"context", example.db ? example.db->dump_text : ""},
                                 {"question", example.question},
                                 {"candidates", join_lines(texts_of(interps))}});
  std::string reply = ctx.gateway.generate(make_request(ctx, ctx.stages.interp, std::move(prompt)));
  ParsedInterpretations parsed = parse_interpretations(reply);

  std::vector<Interpretation> out;
  for (std::size_t i = 0; i < parsed.interps.size(); ++i) {
    if (static_cast<int>(out.size()) >= ctx.interp_cap) break;
    out.push_back({parsed.interps[i], Provenance::self_corrected, static_cast<int>(i)});
  }
  return out;
}

nlohmann::ordered_json pipeline_result_to_json(const PipelineResult& result) {
  ordered_json j;
  j["example_id"] = result.example_id;
  ordered_json interps = ordered_json::array();
  for (const Interpretation& interp : result.interpretations) {
    interps.push_back(ordered_json{{"text", interp.text},
                                   {"provenance", provenance_name(interp.provenance)},
                                   {"ordinal", interp.ordinal}});
  }
  j["interpretations"] = std::move(interps);
  j["parsed"] = parsed_summary(result.parsed);
  ordered_json finals = ordered_json::array();
  for (const ParsedQuery& item : result.final_queries) {
    ordered_json fj;
    fj["sql"] = item.sql;
    if (item.interpretation) fj["ordinal"] = item.interpretation->ordinal;
    if (is_ok(item.outcome)) fj["fingerprint"] = ok_denotation(item.outcome).fingerprint;
    finals.push_back(std::move(fj));
  }
  j["final_queries"] = std::move(finals);
  j["infiller_said_covered"] = result.infiller_said_covered;
  ordered_json trace = ordered_json::array();
  for (const TraceEntry& entry : result.trace) {
    ordered_json tj;
    tj["stage"] = entry.stage;
    tj["detail"] = entry.detail;
    trace.push_back(std::move(tj));
  }
  j["trace"] = std::move(trace);
  return j;
}

}  // namespace ambisql
