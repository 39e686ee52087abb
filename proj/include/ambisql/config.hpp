#pragma once

#include "ambisql/dataset.hpp"
#include "ambisql/llm.hpp"
#include "ambisql/pipeline.hpp"
#include "ambisql/sandbox.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace ambisql {

struct RunConfig {
  std::string dataset_path;
  DatasetFormat dataset_format = DatasetFormat::canonical;
  std::map<std::string, BackendConfig> backends;
  StageBackends stages;
  GenerationParams gen;
  SandboxLimits limits;
  ComparisonMode mode = ComparisonMode::multiset;
  int concurrency = 1;
  std::string cache_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool no_infill = false;
  // Drop examples whose golds return empty results before evaluating.
  bool filter_empty = false;
  int interp_cap = 10;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);

// Ensures every stage the command needs is backed; throws ConfigError.
void require_stages(const RunConfig& config, const std::vector<std::string>& stage_ids);

}  // namespace ambisql
