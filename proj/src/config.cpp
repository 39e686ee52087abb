#include "ambisql/config.hpp"

#include "ambisql/errors.hpp"
#include "ambisql/util.hpp"

#include <nlohmann/json.hpp>

namespace ambisql {
namespace {

using ordered_json = nlohmann::ordered_json;

BackendConfig parse_backend(const ordered_json& j, const std::string& id) {
  BackendConfig config;
  std::string kind = j.value("kind", "");
  if (kind == "http_chat") {
    config.kind = BackendConfig::Kind::http_chat;
    config.endpoint = j.value("endpoint", "");
    if (config.endpoint.empty()) {
      throw ConfigError("backend '" + id + "': http_chat requires an endpoint");
    }
    config.path = j.value("path", config.path);
    config.api_key_env = j.value("api_key_env", "");
    config.max_retries = j.value("max_retries", config.max_retries);
    config.retry_backoff_ms = j.value("retry_backoff_ms", config.retry_backoff_ms);
    config.timeout_s = j.value("timeout_s", config.timeout_s);
  } else if (kind == "scripted_mock") {
    config.kind = BackendConfig::Kind::scripted_mock;
    if (auto it = j.find("script"); it != j.end()) {
      for (const auto& ej : *it) {
        ScriptEntry entry;
        entry.pattern = ej.value("pattern", "");
        if (auto rs = ej.find("responses"); rs != ej.end()) {
          for (const auto& r : *rs) entry.responses.push_back(r.get<std::string>());
        } else if (ej.contains("response")) {
          entry.responses.push_back(ej.value("response", ""));
        }
        config.script.push_back(std::move(entry));
      }
    }
    if (j.contains("default_response")) {
      config.default_response = j.value("default_response", "");
    } else if (!j.value("error_on_miss", false) && config.script.empty()) {
      throw ConfigError("backend '" + id +
                        "': scripted_mock needs a script, a default_response, or error_on_miss");
    }
  } else if (kind == "replay_only") {
    config.kind = BackendConfig::Kind::replay_only;
  } else {
    throw ConfigError("backend '" + id + "': unknown kind '" + kind + "'");
  }
  config.model = j.value("model", config.model);
  config.max_in_flight = j.value("max_in_flight", config.max_in_flight);
  return config;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  RunConfig config;
  if (auto it = j.find("dataset"); it != j.end()) {
    config.dataset_path = it->value("path", "");
    config.dataset_format = parse_dataset_format(it->value("format", "canonical"));
  }
  if (auto it = j.find("backends"); it != j.end()) {
    for (const auto& [id, bj] : it->items()) {
      config.backends.emplace(id, parse_backend(bj, id));
    }
  }
  if (auto it = j.find("stages"); it != j.end()) {
    config.stages.interp = it->value("interp", config.stages.interp);
    config.stages.infill = it->value("infill", config.stages.infill);
    config.stages.text2sql = it->value("text2sql", config.stages.text2sql);
    config.stages.rewrite = it->value("rewrite", config.stages.rewrite);
    config.stages.validator = it->value("validator", config.stages.validator);
  }
  if (auto it = j.find("generation"); it != j.end()) {
    config.gen.temperature = it->value("temperature", config.gen.temperature);
    config.gen.max_tokens = it->value("max_tokens", config.gen.max_tokens);
  }
  if (auto it = j.find("sandbox"); it != j.end()) {
    config.limits.timeout_ms = it->value("timeout_ms", config.limits.timeout_ms);
    config.limits.max_rows = it->value("max_rows", config.limits.max_rows);
  }
  config.mode = parse_comparison_mode(j.value("comparison", "multiset"));
  config.concurrency = j.value("concurrency", config.concurrency);
  config.cache_path = j.value("cache_path", config.cache_path);
  config.out_dir = j.value("out_dir", config.out_dir);
  config.seed = j.value("seed", config.seed);
  config.no_infill = j.value("no_infill", config.no_infill);
  config.filter_empty = j.value("filter_empty", config.filter_empty);
  config.interp_cap = j.value("interp_cap", config.interp_cap);
  if (config.concurrency < 1) throw ConfigError("concurrency must be >= 1");
  return config;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(util::read_file(path));
}

void require_stages(const RunConfig& config, const std::vector<std::string>& stage_ids) {
  for (const std::string& id : stage_ids) {
    if (!config.backends.count(id)) {
      throw ConfigError("no backend configured for stage '" + id + "'");
    }
  }
}

}  // namespace ambisql
