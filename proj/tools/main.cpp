#include "ambisql/config.hpp"
#include "ambisql/errors.hpp"
#include "ambisql/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool no_infill = false;
  std::optional<std::string> comparison;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* opt = cmd->add_option("--config", args.config_path, "run configuration JSON");
  if (config_required) opt->required();
  cmd->add_option("--out", args.out, "output directory (or file for annotate/synthesize)");
  cmd->add_option("--seed", args.seed, "random seed override");
  cmd->add_flag("--no-infill", args.no_infill, "disable the infilling stage");
  cmd->add_option("--comparison", args.comparison, "denotation comparison mode")
      ->check(CLI::IsMember({"multiset", "ordered"}));
}

ambisql::RunConfig load_with_overrides(const CommonArgs& args) {
  ambisql::RunConfig config = ambisql::load_run_config(args.config_path);
  if (args.out) config.out_dir = *args.out;
  if (args.seed) config.seed = *args.seed;
  if (args.no_infill) config.no_infill = true;
  if (args.comparison) config.mode = ambisql::parse_comparison_mode(*args.comparison);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ambiguous text-to-SQL interpretation harness"};
  app.require_subcommand(1);

  CommonArgs eval_args;
  std::string method = "ours";
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a method over a dataset");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--method", method, "evaluation method")
      ->check(CLI::IsMember(
          {"ours", "interp_prompt", "self_correct", "e2e_0shot", "e2e_3shot", "gold_interps"}));

  CommonArgs run_args;
  std::string question;
  std::string dump_path;
  bool json_out = false;
  auto* run_cmd = app.add_subcommand("run", "disambiguate and parse one ad-hoc question");
  add_common(run_cmd, run_args);
  run_cmd->add_option("--question", question, "the question to interpret")->required();
  run_cmd->add_option("--db", dump_path, "path to a SQLite-dialect dump file")->required();
  run_cmd->add_flag("--json", json_out, "emit one JSON object instead of text blocks");

  CommonArgs annotate_args;
  bool wrapped = false;
  auto* annotate_cmd =
      app.add_subcommand("annotate-infill", "build infilling supervision records");
  add_common(annotate_cmd, annotate_args);
  annotate_cmd->add_flag("--wrapped", wrapped,
                         "emit {prompt, target} records with the instruction wrapper");

  CommonArgs synth_args;
  auto* synth_cmd =
      app.add_subcommand("synthesize", "synthesize interpretations via synonym rewriting");
  add_common(synth_cmd, synth_args);

  std::string reports_path;
  std::string report_out = "out";
  auto* report_cmd = app.add_subcommand("report", "re-render metrics from stored match reports");
  report_cmd->add_option("--reports", reports_path, "match_reports.jsonl path")->required();
  report_cmd->add_option("--out", report_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (eval_cmd->parsed()) {
      return ambisql::cmd_eval(load_with_overrides(eval_args), ambisql::parse_method(method));
    }
    if (run_cmd->parsed()) {
      return ambisql::cmd_run(load_with_overrides(run_args), question, dump_path, json_out);
    }
    if (annotate_cmd->parsed()) {
      ambisql::RunConfig config = load_with_overrides(annotate_args);
      std::string out_path = annotate_args.out.value_or("infill_train.jsonl");
      return ambisql::cmd_annotate(config, out_path, wrapped);
    }
    if (synth_cmd->parsed()) {
      ambisql::RunConfig config = load_with_overrides(synth_args);
      std::string out_path = synth_args.out.value_or("synthesis.jsonl");
      return ambisql::cmd_synthesize(config, out_path);
    }
    if (report_cmd->parsed()) {
      return ambisql::cmd_report(reports_path, report_out);
    }
  } catch (const ambisql::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 1;
}
