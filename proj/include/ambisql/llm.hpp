#pragma once

#include <condition_variable>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ambisql {

enum class PromptKind {
  default_interp,
  infill,
  text2sql,
  self_correct,
  synonym_rewrite,
  end_to_end,
};

// Fills the template for `kind`. Required slots must be present and
// non-empty; throws TemplateError naming the first offender. Slot names:
//   default_interp:  context, question
//   infill:          context, question, existing (may be empty)
//   text2sql:        schema, question
//   self_correct:    context, question, candidates
//   synonym_rewrite: question, synonym
//   end_to_end:      schema, question, demonstrations (may be empty)
std::string render_prompt(PromptKind kind, const std::map<std::string, std::string>& slots);

// The target sentence an infiller emits when nothing is missing.
inline constexpr const char* kCoveredSentinel = "All interpretations are covered.";

struct ParsedInterpretations {
  std::vector<std::string> interps;
  // Raw lines aligned with interps, before enumeration-marker stripping.
  std::vector<std::string> raw_lines;
  bool all_covered = false;
};

// Splits on lines, strips enumeration markers ("1.", "-", "*") and
// whitespace, drops empties. A line equal to either sentinel phrasing (after
// stripping terminal punctuation and case) sets all_covered and is excluded
// from interps.
ParsedInterpretations parse_interpretations(const std::string& text);

// Returns the fenced code block contents when present, otherwise the text
// from the first SELECT/WITH keyword onward, trimming prose after the final
// semicolon. Throws ExtractionError when no SQL-like content exists.
std::string extract_sql(const std::string& text);

struct GenerationRequest {
  std::string backend_id;
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::optional<int> seed;
};

// Stable cache key over (backend_id, model, prompt, temperature, seed,
// max_tokens).
std::string request_cache_key(const GenerationRequest& request);

struct ScriptEntry {
  // Substring matched against the prompt. Responses are consumed in call
  // order per entry, repeating the last one.
  std::string pattern;
  std::vector<std::string> responses;
};

struct BackendConfig {
  enum class Kind { http_chat, scripted_mock, replay_only };
  Kind kind = Kind::scripted_mock;

  // http_chat
  std::string endpoint;                      // e.g. http://localhost:8080
  std::string path = "/v1/chat/completions";
  std::string api_key_env;                   // env var holding the bearer token
  int max_retries = 3;
  int retry_backoff_ms = 500;
  int timeout_s = 60;

  // scripted_mock
  std::vector<ScriptEntry> script;
  std::optional<std::string> default_response;

  std::string model = "mock";
  int max_in_flight = 4;
};

// Uniform access to generation backends with an append-only JSONL replay
// cache. A cache hit never touches the backend.
class LlmGateway {
 public:
  LlmGateway(std::map<std::string, BackendConfig> backends, std::string cache_path);

  std::string generate(const GenerationRequest& request);

  const BackendConfig& backend(const std::string& id) const;
  bool has_backend(const std::string& id) const;
  std::size_t cache_entries() const;
  // Backend invocations that actually reached a backend (cache misses).
  int backend_calls(const std::string& id) const;

 private:
  struct BackendState {
    BackendConfig config;
    std::vector<int> script_counters;
    int calls = 0;
    int in_flight = 0;
    std::mutex mutex;
    std::condition_variable slot_free;
  };

  std::string dispatch(BackendState& state, const GenerationRequest& request);
  std::string call_http(BackendState& state, const GenerationRequest& request);
  std::string call_mock(BackendState& state, const GenerationRequest& request);

  std::map<std::string, std::unique_ptr<BackendState>> backends_;
  std::string cache_path_;
  std::unordered_map<std::string, std::string> cache_;
  mutable std::mutex cache_mutex_;
  std::ofstream cache_out_;
};

}  // namespace ambisql
