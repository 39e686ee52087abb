#include "ambisql/runner.hpp"

#include "ambisql/annotator.hpp"
#include "ambisql/errors.hpp"
#include "ambisql/matcher.hpp"
#include "ambisql/metrics.hpp"
#include "ambisql/util.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>

namespace ambisql {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

ordered_json value_to_json(const Value& v) {
  struct Visitor {
    ordered_json operator()(std::monostate) const { return nullptr; }
    ordered_json operator()(std::int64_t i) const { return i; }
    ordered_json operator()(double d) const { return d; }
    ordered_json operator()(const std::string& s) const { return s; }
    ordered_json operator()(const Blob& b) const {
      static const char* hex = "0123456789abcdef";
      std::string out;
      for (unsigned char c : b.bytes) {
        out.push_back(hex[c >> 4]);
        out.push_back(hex[c & 0xf]);
      }
      return ordered_json{{"blob", out}};
    }
  };
  return std::visit(Visitor{}, v);
}

ordered_json preview_rows(const Denotation& d, std::size_t limit = 5) {
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < d.rows.size() && r < limit; ++r) {
    ordered_json row = ordered_json::array();
    for (const Value& v : d.rows[r]) row.push_back(value_to_json(v));
    rows.push_back(std::move(row));
  }
  return rows;
}

PipelineResult result_from_queries(const Example& example, std::vector<ParsedQuery> queries) {
  PipelineResult result;
  result.example_id = example.example_id;
  std::vector<PredictedItem> items;
  for (const ParsedQuery& q : queries) items.push_back({q.interpretation, q.sql, q.outcome, false});
  for (const PredictedItem& item : dedup_by_denotation(items)) {
    if (is_ok(item.outcome)) {
      result.final_queries.push_back({item.interpretation, item.sql, item.outcome});
    }
  }
  result.parsed = std::move(queries);
  return result;
}

PipelineResult run_method(const Example& example, Method method, PipelineContext& ctx) {
  switch (method) {
    case Method::ours:
      // honors config.no_infill so ablations stay a flag flip away
      return disambiguate_then_parse(example, ctx);
    case Method::interp_prompt: {
      PipelineContext local = ctx;
      local.no_infill = true;
      return disambiguate_then_parse(example, local);
    }
    case Method::self_correct: {
      std::vector<Interpretation> defaults = run_default_interps(example, ctx);
      std::vector<Interpretation> corrected;
      if (!defaults.empty()) corrected = self_correct(example, defaults, ctx);
      PipelineResult result = result_from_queries(example, parse_all_to_sql(example, corrected, ctx));
      result.interpretations = corrected;
      result.trace.push_back({"self_correct",
                              ordered_json{{"candidates", defaults.size()},
                                           {"kept", corrected.size()}}});
      return result;
    }
    case Method::e2e_0shot:
      return result_from_queries(example, end_to_end_baseline(example, 0, ctx));
    case Method::e2e_3shot:
      return result_from_queries(example, end_to_end_baseline(example, 3, ctx));
    case Method::gold_interps: {
      if (!example.gold_interpretations || example.gold_interpretations->empty()) {
        throw Error("example " + example.example_id + " has no gold interpretations");
      }
      std::vector<Interpretation> interps;
      for (std::size_t i = 0; i < example.gold_interpretations->size(); ++i) {
        interps.push_back({(*example.gold_interpretations)[i], Provenance::gold_reference,
                           static_cast<int>(i)});
      }
      PipelineResult result = result_from_queries(example, parse_all_to_sql(example, interps, ctx));
      result.interpretations = interps;
      return result;
    }
  }
  throw ConfigError("unhandled method");
}

std::vector<std::string> stages_for(const RunConfig& config, Method method) {
  switch (method) {
    case Method::ours:
      return {config.stages.interp, config.stages.infill, config.stages.text2sql};
    case Method::interp_prompt:
    case Method::self_correct:
      return {config.stages.interp, config.stages.text2sql};
    case Method::e2e_0shot:
    case Method::e2e_3shot:
    case Method::gold_interps:
      return {config.stages.text2sql};
  }
  return {};
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "ours") return Method::ours;
  if (name == "interp_prompt") return Method::interp_prompt;
  if (name == "self_correct") return Method::self_correct;
  if (name == "e2e_0shot") return Method::e2e_0shot;
  if (name == "e2e_3shot") return Method::e2e_3shot;
  if (name == "gold_interps") return Method::gold_interps;
  throw ConfigError("unknown method: " + name);
}

std::string method_name(Method method) {
  switch (method) {
    case Method::ours: return "ours";
    case Method::interp_prompt: return "interp_prompt";
    case Method::self_correct: return "self_correct";
    case Method::e2e_0shot: return "e2e_0shot";
    case Method::e2e_3shot: return "e2e_3shot";
    case Method::gold_interps: return "gold_interps";
  }
  return "ours";
}

int cmd_eval(const RunConfig& config, Method method) {
  std::vector<Example> examples;
  try {
    require_stages(config, stages_for(config, method));
    examples = load_dataset(config.dataset_path, config.dataset_format);
    if (config.filter_empty) {
      FilterStats stats;
      examples = filter_nonempty(examples, config.limits, &stats, config.concurrency);
      std::cerr << "filter_nonempty: kept " << stats.kept << ", dropped " << stats.dropped << "\n";
    }
    fs::create_directories(config.out_dir);
  } catch (const Error& e) {
    std::cerr << "eval: " << e.what() << "\n";
    return 1;
  }
  if (examples.empty()) {
    std::cerr << "eval: dataset is empty\n";
    return 1;
  }

  LlmGateway gateway(config.backends, config.cache_path);
  PipelineContext base{gateway,        config.stages, config.gen,  config.limits,
                       config.mode,    config.no_infill, config.interp_cap, config.seed,
                       &examples};

  struct Slot {
    std::optional<PipelineResult> result;
    std::optional<MatchReport> report;
    std::string failure;  // pipeline-level failure, still scored with no predictions
    std::string skipped;  // gold/database defect, excluded from scoring
  };
  std::vector<Slot> slots(examples.size());

  util::parallel_for(examples.size(), config.concurrency, [&](std::size_t i) {
    const Example& example = examples[i];
    Slot& slot = slots[i];
    PipelineContext ctx = base;
    std::vector<PredictionInput> inputs;
    try {
      PipelineResult result = run_method(example, method, ctx);
      inputs = to_prediction_inputs(result.parsed);
      slot.result = std::move(result);
    } catch (const GoldExecutionError& e) {
      slot.skipped = e.what();
      return;
    } catch (const Error& e) {
      slot.failure = e.what();
    }
    try {
      slot.report = match_predictions(example, inputs, config.limits, config.mode);
    } catch (const Error& e) {
      slot.skipped = e.what();
    }
  });

  std::string results_text;
  std::string reports_text;
  std::vector<ExampleScore> scores;
  std::vector<MatchReport> reports;
  int failed_examples = 0;
  int skipped_examples = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const Slot& slot = slots[i];
    if (!slot.skipped.empty()) {
      ++skipped_examples;
      ordered_json j;
      j["example_id"] = examples[i].example_id;
      j["skipped"] = slot.skipped;
      results_text += j.dump();
      results_text.push_back('\n');
      reports_text += j.dump();
      reports_text.push_back('\n');
      continue;
    }
    if (slot.result) {
      results_text += pipeline_result_to_json(*slot.result).dump();
    } else {
      ++failed_examples;
      ordered_json j;
      j["example_id"] = examples[i].example_id;
      j["error"] = slot.failure;
      results_text += j.dump();
    }
    results_text.push_back('\n');
    if (slot.report) {
      reports_text += report_to_json(*slot.report).dump();
      reports_text.push_back('\n');
      scores.push_back(score_example(*slot.report));
      reports.push_back(*slot.report);
    }
  }

  try {
    util::atomic_write_file((fs::path(config.out_dir) / "pipeline_results.jsonl").string(),
                            results_text);
    util::atomic_write_file((fs::path(config.out_dir) / "match_reports.jsonl").string(),
                            reports_text);
    if (!scores.empty()) {
      MetricsSummary summary = aggregate(scores);
      std::optional<UnambiguousSummary> unambig = summarize_unambiguous(reports);
      ordered_json mj = summary_to_json(summary, unambig);
      mj["method"] = method_name(method);
      mj["failed_examples"] = failed_examples;
      mj["skipped_examples"] = skipped_examples;
      util::atomic_write_file((fs::path(config.out_dir) / "metrics.json").string(),
                              mj.dump(2) + "\n");
      std::string table = render_table(summary, unambig);
      util::atomic_write_file((fs::path(config.out_dir) / "metrics.txt").string(), table);
      std::cout << table;
    } else {
      std::cerr << "eval: no scorable examples (" << skipped_examples << " skipped)\n";
    }
  } catch (const Error& e) {
    std::cerr << "eval: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_run(const RunConfig& config, const std::string& question, const std::string& db_dump_path,
            bool json_output) {
  try {
    require_stages(config, {config.stages.interp, config.stages.text2sql});
    if (!config.no_infill) require_stages(config, {config.stages.infill});

    auto spec = std::make_shared<DatabaseSpec>();
    spec->db_id = fs::path(db_dump_path).stem().string();
    spec->dump_text = util::read_file(db_dump_path);
    build_database(*spec);  // fail fast on malformed dumps

    Example example;
    example.example_id = "adhoc";
    example.db = spec;
    example.question = question;

    LlmGateway gateway(config.backends, config.cache_path);
    PipelineContext ctx{gateway,     config.stages, config.gen,  config.limits,
                        config.mode, config.no_infill, config.interp_cap, config.seed,
                        nullptr};
    PipelineResult result = disambiguate_then_parse(example, ctx);

    if (json_output) {
      ordered_json j = pipeline_result_to_json(result);
      ordered_json previews = ordered_json::array();
      for (const ParsedQuery& q : result.final_queries) {
        if (is_ok(q.outcome)) previews.push_back(preview_rows(ok_denotation(q.outcome)));
      }
      j["previews"] = std::move(previews);
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    for (const ParsedQuery& q : result.final_queries) {
      std::cout << "interpretation: "
                << (q.interpretation ? q.interpretation->text : "(none)") << "\n";
      std::cout << "sql: " << q.sql << "\n";
      if (is_ok(q.outcome)) {
        const Denotation& d = ok_denotation(q.outcome);
        std::cout << "result: " << d.rows.size() << " row(s), " << d.columns << " column(s)\n";
        std::cout << preview_rows(d).dump() << "\n";
      } else {
        std::cout << "result: " << outcome_kind(q.outcome) << " " << outcome_message(q.outcome)
                  << "\n";
      }
      std::cout << "\n";
    }
    if (result.final_queries.empty()) std::cout << "no executable interpretations\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "run: " << e.what() << "\n";
    return 1;
  }
}

int cmd_annotate(const RunConfig& config, const std::string& out_path, bool wrapped) {
  try {
    require_stages(config, {config.stages.interp, config.stages.text2sql});
    std::vector<Example> examples = load_dataset(config.dataset_path, config.dataset_format);
    LlmGateway gateway(config.backends, config.cache_path);
    PipelineContext ctx{gateway,     config.stages, config.gen,  config.limits,
                        config.mode, config.no_infill, config.interp_cap, config.seed,
                        nullptr};
    InfillDatasetStats stats = build_infill_dataset(examples, ctx, out_path, wrapped);
    std::cout << "total=" << stats.total << " sentinel=" << stats.sentinel_count
              << " skipped=" << stats.skipped << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "annotate: " << e.what() << "\n";
    return 1;
  }
}

int cmd_synthesize(const RunConfig& config, const std::string& out_path) {
  try {
    require_stages(config, {config.stages.rewrite, config.stages.validator});
    std::vector<Example> examples = load_dataset(config.dataset_path, config.dataset_format);
    LlmGateway gateway(config.backends, config.cache_path);
    PipelineContext ctx{gateway,     config.stages, config.gen,  config.limits,
                        config.mode, config.no_infill, config.interp_cap, config.seed,
                        nullptr};
    std::string out;
    int accepted = 0;
    int attempted = 0;
    int skipped = 0;
    for (const Example& example : examples) {
      std::pair<SynthesisRecord, SynthesisRecord> records;
      try {
        records = synthesize_interpretations(example, ctx);
      } catch (const Error& e) {
        std::cerr << "synthesize: skipping " << example.example_id << ": " << e.what() << "\n";
        ++skipped;
        continue;
      }
      ++attempted;
      bool pair_accepted = records.first.accepted && records.second.accepted;
      if (pair_accepted) ++accepted;
      ordered_json j;
      j["example_id"] = example.example_id;
      j["accepted"] = pair_accepted;
      j["records"] = ordered_json::array({synthesis_record_to_json(records.first),
                                          synthesis_record_to_json(records.second)});
      out += j.dump();
      out.push_back('\n');
    }
    util::atomic_write_file(out_path, out);
    std::cout << "examples=" << attempted << " accepted=" << accepted << " skipped=" << skipped
              << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "synthesize: " << e.what() << "\n";
    return 1;
  }
}

int cmd_report(const std::string& reports_path, const std::string& out_dir) {
  try {
    std::string text = util::read_file(reports_path);
    std::vector<ExampleScore> scores;
    std::vector<MatchReport> reports;
    for (const std::string& line : util::split_lines(text)) {
      std::string t = util::trim(line);
      if (t.empty()) continue;
      ordered_json j = ordered_json::parse(t);
      if (j.contains("skipped")) continue;
      MatchReport report = report_from_json(j);
      scores.push_back(score_example(report));
      reports.push_back(std::move(report));
    }
    if (scores.empty()) {
      std::cerr << "report: no reports found in " << reports_path << "\n";
      return 1;
    }
    MetricsSummary summary = aggregate(scores);
    std::optional<UnambiguousSummary> unambig = summarize_unambiguous(reports);
    fs::create_directories(out_dir);
    util::atomic_write_file((fs::path(out_dir) / "metrics.json").string(),
                            summary_to_json(summary, unambig).dump(2) + "\n");
    std::string table = render_table(summary, unambig);
    util::atomic_write_file((fs::path(out_dir) / "metrics.txt").string(), table);
    std::cout << table;
    return 0;
  } catch (const Error& e) {
    std::cerr << "report: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "report: malformed report line: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ambisql
