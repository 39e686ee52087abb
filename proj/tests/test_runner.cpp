#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ambisql/errors.hpp"
#include "ambisql/runner.hpp"
#include "ambisql/util.hpp"
#include "testutil.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

using namespace ambisql;
namespace fs = std::filesystem;

namespace {

RunConfig scripted_config(const testutil::TempDir& dir, bool supplying_infill) {
  RunConfig config;
  config.dataset_path = dir.file("data.jsonl");
  config.backends = testutil::scripted_backends(supplying_infill);
  config.cache_path = dir.file("cache.jsonl");
  config.out_dir = dir.file("out");
  return config;
}

void write_corpus(const testutil::TempDir& dir) {
  write_canonical(testutil::scripted_corpus(), dir.file("data.jsonl"));
}

nlohmann::ordered_json read_metrics(const std::string& out_dir) {
  return nlohmann::ordered_json::parse(util::read_file((fs::path(out_dir) / "metrics.json").string()));
}

}  // namespace

TEST_CASE("eval writes results, reports and metrics for the scripted corpus") {
  testutil::TempDir dir("runner");
  write_corpus(dir);
  RunConfig config = scripted_config(dir, false);
  REQUIRE(cmd_eval(config, Method::ours) == 0);

  for (const char* name : {"pipeline_results.jsonl", "match_reports.jsonl", "metrics.json",
                           "metrics.txt"}) {
    CHECK(fs::exists(fs::path(config.out_dir) / name));
  }
  nlohmann::ordered_json metrics = read_metrics(config.out_dir);
  CHECK(metrics["n_examples"] == 6);
  // Sentinel infiller: hand-computed profile {1,1,1,0,0,0}.
  CHECK(metrics["full_cov"].get<double>() == 50.0);
  CHECK(metrics["unambiguous"]["n"] == 1);
  CHECK(metrics["unambiguous"]["found_pct"].get<double>() == 100.0);

  std::vector<std::string> lines;
  for (const std::string& line :
       util::split_lines(util::read_file((fs::path(config.out_dir) / "pipeline_results.jsonl").string()))) {
    if (!util::trim(line).empty()) lines.push_back(line);
  }
  CHECK(lines.size() == 6);
}

TEST_CASE("interp_prompt equals ours with infilling disabled") {
  testutil::TempDir dir("runner");
  write_corpus(dir);

  RunConfig interp = scripted_config(dir, true);
  interp.out_dir = dir.file("out_interp");
  interp.cache_path = dir.file("cache1.jsonl");
  REQUIRE(cmd_eval(interp, Method::interp_prompt) == 0);

  RunConfig no_infill = scripted_config(dir, true);
  no_infill.no_infill = true;
  no_infill.out_dir = dir.file("out_noinfill");
  no_infill.cache_path = dir.file("cache2.jsonl");
  REQUIRE(cmd_eval(no_infill, Method::ours) == 0);

  CHECK(util::read_file((fs::path(interp.out_dir) / "match_reports.jsonl").string()) ==
        util::read_file((fs::path(no_infill.out_dir) / "match_reports.jsonl").string()));
  CHECK(read_metrics(interp.out_dir)["full_cov"] == read_metrics(no_infill.out_dir)["full_cov"]);
}

TEST_CASE("infilling lifts full coverage on the scripted corpus") {
  testutil::TempDir dir("runner");
  write_corpus(dir);

  RunConfig without = scripted_config(dir, true);
  without.no_infill = true;
  without.out_dir = dir.file("out_without");
  REQUIRE(cmd_eval(without, Method::ours) == 0);

  RunConfig with = scripted_config(dir, true);
  with.out_dir = dir.file("out_with");
  with.cache_path = dir.file("cache_with.jsonl");
  REQUIRE(cmd_eval(with, Method::ours) == 0);

  double full_without = read_metrics(without.out_dir)["full_cov"].get<double>();
  double full_with = read_metrics(with.out_dir)["full_cov"].get<double>();
  CHECK(full_with > full_without);
}

TEST_CASE("gold_interps bypasses interpretation generation") {
  testutil::TempDir dir("runner");
  std::vector<Example> corpus = testutil::scripted_corpus();
  corpus.resize(1);
  corpus[0].gold_interpretations = std::vector<std::string>{"id reading", "name reading"};
  write_canonical(corpus, dir.file("data.jsonl"));

  RunConfig config = scripted_config(dir, false);
  config.backends.erase("interp");  // not needed for this method
  config.backends.erase("infill");
  REQUIRE(cmd_eval(config, Method::gold_interps) == 0);

  nlohmann::ordered_json metrics = read_metrics(config.out_dir);
  CHECK(metrics["full_cov"].get<double>() == 100.0);
  std::string results =
      util::read_file((fs::path(config.out_dir) / "pipeline_results.jsonl").string());
  CHECK(results.find("gold_reference") != std::string::npos);
}

TEST_CASE("e2e baselines run from a single generation") {
  testutil::TempDir dir("runner");
  write_corpus(dir);
  RunConfig config = scripted_config(dir, false);
  BackendConfig e2e;
  e2e.kind = BackendConfig::Kind::scripted_mock;
  e2e.default_response = "SELECT id FROM items;\n\nSELECT name FROM items;";
  config.backends["text2sql"] = e2e;
  config.backends.erase("interp");
  config.backends.erase("infill");
  REQUIRE(cmd_eval(config, Method::e2e_0shot) == 0);
  nlohmann::ordered_json metrics = read_metrics(config.out_dir);
  CHECK(metrics["n_examples"] == 6);
  CHECK(metrics["single_cov"].get<double>() > 0.0);

  RunConfig threeshot = config;
  threeshot.out_dir = dir.file("out3");
  threeshot.cache_path = dir.file("cache3.jsonl");
  REQUIRE(cmd_eval(threeshot, Method::e2e_3shot) == 0);
}

TEST_CASE("self_correct method replaces candidates before parsing") {
  testutil::TempDir dir("runner");
  write_corpus(dir);
  RunConfig config = scripted_config(dir, false);
  BackendConfig interp = testutil::scripted_interp_backend();
  // The correction pass keeps only the id reading everywhere.
  interp.script.push_back({"Candidate interpretations: ", {"id reading"}});
  config.backends["interp"] = interp;
  config.backends.erase("infill");
  REQUIRE(cmd_eval(config, Method::self_correct) == 0);
  std::string results =
      util::read_file((fs::path(config.out_dir) / "pipeline_results.jsonl").string());
  CHECK(results.find("self_corrected") != std::string::npos);
}

TEST_CASE("per-example backend failures are recorded and the batch continues") {
  testutil::TempDir dir("runner");
  write_corpus(dir);
  RunConfig config = scripted_config(dir, false);
  // The interp mock knows q1..q5 but not q6; strict mode turns q6 into a
  // hard per-example failure.
  BackendConfig interp = testutil::scripted_interp_backend();
  interp.script.pop_back();
  config.backends["interp"] = interp;

  REQUIRE(cmd_eval(config, Method::ours) == 0);
  nlohmann::ordered_json metrics = read_metrics(config.out_dir);
  CHECK(metrics["failed_examples"] == 1);
  CHECK(metrics["n_examples"] == 6);  // the failed example scores zero coverage

  std::string results =
      util::read_file((fs::path(config.out_dir) / "pipeline_results.jsonl").string());
  CHECK(results.find("\"error\"") != std::string::npos);
  std::size_t lines = 0;
  for (const std::string& line : util::split_lines(results)) {
    if (!util::trim(line).empty()) ++lines;
  }
  CHECK(lines == 6);
}

TEST_CASE("missing dataset path exits nonzero without outputs") {
  testutil::TempDir dir("runner");
  RunConfig config = scripted_config(dir, false);
  config.dataset_path = dir.file("missing.jsonl");
  CHECK(cmd_eval(config, Method::ours) != 0);
  CHECK_FALSE(fs::exists(fs::path(config.out_dir) / "metrics.json"));
}

TEST_CASE("missing stage backend is a config error at startup") {
  testutil::TempDir dir("runner");
  write_corpus(dir);
  RunConfig config = scripted_config(dir, false);
  config.backends.erase("infill");
  CHECK(cmd_eval(config, Method::ours) != 0);
  CHECK(cmd_eval(config, Method::interp_prompt) == 0);  // infill not required here
}

TEST_CASE("two eval runs over a warm cache are byte-identical") {
  testutil::TempDir dir("runner");
  write_corpus(dir);

  RunConfig first = scripted_config(dir, true);
  first.out_dir = dir.file("out_a");
  REQUIRE(cmd_eval(first, Method::ours) == 0);

  RunConfig second = scripted_config(dir, true);
  second.out_dir = dir.file("out_b");
  REQUIRE(cmd_eval(second, Method::ours) == 0);

  for (const char* name : {"pipeline_results.jsonl", "match_reports.jsonl", "metrics.json"}) {
    CHECK(util::read_file((fs::path(first.out_dir) / name).string()) ==
          util::read_file((fs::path(second.out_dir) / name).string()));
  }
}

TEST_CASE("concurrent eval matches the serial artifacts") {
  testutil::TempDir dir("runner");
  write_corpus(dir);

  RunConfig serial = scripted_config(dir, true);
  serial.out_dir = dir.file("out_serial");
  REQUIRE(cmd_eval(serial, Method::ours) == 0);

  RunConfig parallel = scripted_config(dir, true);
  parallel.concurrency = 4;
  parallel.out_dir = dir.file("out_parallel");
  REQUIRE(cmd_eval(parallel, Method::ours) == 0);

  CHECK(util::read_file((fs::path(serial.out_dir) / "match_reports.jsonl").string()) ==
        util::read_file((fs::path(parallel.out_dir) / "match_reports.jsonl").string()));
}

TEST_CASE("report re-renders identical metrics from stored match reports") {
  testutil::TempDir dir("runner");
  write_corpus(dir);
  RunConfig config = scripted_config(dir, false);
  REQUIRE(cmd_eval(config, Method::ours) == 0);

  std::string reports_path = (fs::path(config.out_dir) / "match_reports.jsonl").string();
  std::string report_out = dir.file("report_out");
  REQUIRE(cmd_report(reports_path, report_out) == 0);

  nlohmann::ordered_json original = read_metrics(config.out_dir);
  nlohmann::ordered_json rerendered = read_metrics(report_out);
  for (const char* key : {"n_examples", "single_cov", "full_cov", "recall", "precision"}) {
    CHECK(original[key] == rerendered[key]);
  }
}

TEST_CASE("run answers an ad-hoc question against a dump file") {
  testutil::TempDir dir("runner");
  std::string dump_path = dir.file("items.sql");
  {
    std::ofstream out(dump_path);
    out << testutil::kItemsDump;
  }
  RunConfig config = scripted_config(dir, false);
  BackendConfig interp;
  interp.kind = BackendConfig::Kind::scripted_mock;
  interp.default_response = "id reading\nname reading";
  config.backends["interp"] = interp;
  CHECK(cmd_run(config, "q1 list ids and names", dump_path, false) == 0);
  CHECK(cmd_run(config, "q1 list ids and names", dump_path, true) == 0);
}

TEST_CASE("run rejects a malformed dump") {
  testutil::TempDir dir("runner");
  std::string dump_path = dir.file("broken.sql");
  {
    std::ofstream out(dump_path);
    out << "CREATE TABLE (missing name);";
  }
  RunConfig config = scripted_config(dir, false);
  CHECK(cmd_run(config, "q", dump_path, false) != 0);
}

TEST_CASE("annotate command prints stats and writes the dataset") {
  testutil::TempDir dir("runner");
  std::vector<Example> corpus = testutil::scripted_corpus();
  corpus.resize(2);
  corpus[0].gold_interpretations = std::vector<std::string>{"ref id", "ref name"};
  corpus[1].gold_interpretations = std::vector<std::string>{"ref id"};
  write_canonical(corpus, dir.file("data.jsonl"));

  RunConfig config = scripted_config(dir, false);
  std::string out_path = dir.file("train.jsonl");
  REQUIRE(cmd_annotate(config, out_path, false) == 0);
  std::string text = util::read_file(out_path);
  CHECK(text.find("\"target\"") != std::string::npos);

  // An empty dataset still succeeds with total=0.
  write_canonical({}, dir.file("empty.jsonl"));
  RunConfig empty_config = config;
  empty_config.dataset_path = dir.file("empty.jsonl");
  CHECK(cmd_annotate(empty_config, dir.file("empty_out.jsonl"), false) == 0);
  CHECK(util::read_file(dir.file("empty_out.jsonl")).empty());
}

TEST_CASE("synthesize command with an always-failing validator accepts nothing") {
  testutil::TempDir dir("runner");
  auto spec = std::make_shared<DatabaseSpec>();
  spec->db_id = "syn";
  spec->dump_text = "CREATE TABLE syn(a TEXT, b TEXT); INSERT INTO syn VALUES ('x','y');";
  Example ex;
  ex.example_id = "s0";
  ex.db = spec;
  ex.question = "Show it.";
  ex.gold_sql = {"SELECT a FROM syn", "SELECT b FROM syn"};
  ex.synonyms = std::vector<std::string>{"left", "right"};
  write_canonical({ex}, dir.file("data.jsonl"));

  RunConfig config = scripted_config(dir, false);
  BackendConfig rewrite;
  rewrite.kind = BackendConfig::Kind::scripted_mock;
  rewrite.default_response = "Rewritten question.";
  BackendConfig validator;
  validator.kind = BackendConfig::Kind::scripted_mock;
  validator.default_response = "no sql at all";
  config.backends["rewrite"] = rewrite;
  config.backends["validator"] = validator;

  std::string out_path = dir.file("synth.jsonl");
  REQUIRE(cmd_synthesize(config, out_path) == 0);
  std::string text = util::read_file(out_path);
  auto record = nlohmann::ordered_json::parse(util::split_lines(text)[0]);
  CHECK(record["accepted"] == false);
  CHECK(record["records"][0]["attempts_used"] == 5);
}

TEST_CASE("config JSON parses backends, stages and overrides") {
  std::string json = R"({
    "dataset": {"path": "data.jsonl", "format": "canonical"},
    "backends": {
      "interp": {"kind": "scripted_mock", "default_response": "a"},
      "text2sql": {"kind": "http_chat", "endpoint": "http://localhost:9", "model": "m"}
    },
    "generation": {"temperature": 0.25, "max_tokens": 64},
    "sandbox": {"timeout_ms": 1234, "max_rows": 99},
    "comparison": "ordered",
    "concurrency": 3,
    "seed": 11,
    "no_infill": true
  })";
  RunConfig config = parse_run_config(json);
  CHECK(config.dataset_path == "data.jsonl");
  CHECK(config.backends.at("interp").kind == BackendConfig::Kind::scripted_mock);
  CHECK(config.backends.at("text2sql").kind == BackendConfig::Kind::http_chat);
  CHECK(config.backends.at("text2sql").model == "m");
  CHECK(config.gen.temperature == 0.25);
  CHECK(config.gen.max_tokens == 64);
  CHECK(config.limits.timeout_ms == 1234);
  CHECK(config.limits.max_rows == 99);
  CHECK(config.mode == ComparisonMode::ordered);
  CHECK(config.concurrency == 3);
  CHECK(config.seed == 11);
  CHECK(config.no_infill);
}

TEST_CASE("config errors are raised eagerly") {
  CHECK_THROWS_AS(parse_run_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"backends":{"b":{"kind":"http_chat"}}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"backends":{"b":{"kind":"teapot"}}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"comparison":"fuzzy"})"), ConfigError);
}

TEST_CASE("atomic writes leave no temp files behind") {
  testutil::TempDir dir("runner");
  std::string path = dir.file("x.jsonl");
  util::atomic_write_file(path, "line\n");
  CHECK(util::read_file(path) == "line\n");
  std::size_t entries = 0;
  for (const auto& entry : fs::directory_iterator(dir.path())) {
    (void)entry;
    ++entries;
  }
  CHECK(entries == 1);
  CHECK_THROWS_AS(util::atomic_write_file(dir.file("missing_dir/x.jsonl"), "y"), Error);
}
