#pragma once

#include "ambisql/config.hpp"

#include <string>

namespace ambisql {

enum class Method { ours, interp_prompt, self_correct, e2e_0shot, e2e_3shot, gold_interps };

Method parse_method(const std::string& name);
std::string method_name(Method method);

// Writes pipeline_results.jsonl, match_reports.jsonl, metrics.json and
// metrics.txt under config.out_dir. Per-example failures are recorded in the
// artifacts, not fatal; returns nonzero only on config/dataset errors.
int cmd_eval(const RunConfig& config, Method method);

// Ad-hoc single question against a dump file; prints interpretation/SQL
// blocks with execution previews, or one JSON object with --json.
int cmd_run(const RunConfig& config, const std::string& question, const std::string& db_dump_path,
            bool json_output);

int cmd_annotate(const RunConfig& config, const std::string& out_path, bool wrapped);

int cmd_synthesize(const RunConfig& config, const std::string& out_path);

// Re-renders metrics from stored MatchReports.
int cmd_report(const std::string& reports_path, const std::string& out_dir);

}  // namespace ambisql
