#include "ambisql/llm.hpp"

#include "ambisql/errors.hpp"
#include "ambisql/util.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace ambisql {
namespace {

using ordered_json = nlohmann::ordered_json;

const char* kDefaultInterpTemplate =
    "You are tasked with analyzing questions and providing their possible interpretations. The "
    "questions are related to database queries and may be ambiguous or unambiguous.\n"
    "\n"
    "Your task:\n"
    "- List every distinct way the question could be understood\n"
    "- Be thorough and consider all possible meanings\n"
    "- Explore different ways the question could be interpreted\n"
    "- Don't limit yourself to obvious interpretations\n"
    "\n"
    "Important:\n"
    "- List each interpretation on a separate line\n"
    "- Do not include explanations or reasoning\n"
    "- Focus on semantically different interpretations\n"
    "- Be specific and precise in wording\n"
    "\n"
    "Given the following database context:\n"
    "{context}\n"
    "\n"
    "Provide interpretations for this question:\n"
    "{question}";

const char* kInfillTemplate =
    "The task is to review the provided context, question, and existing interpretations, and "
    "determine if any additional interpretations are missing. If there are missing "
    "interpretations, list them on separate lines without explanations. If all interpretations "
    "have already been covered, simply state: \"All possible interpretations are covered.\"\n"
    "\n"
    "Given the following context: {context}\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Existing interpretations: {existing}\n"
    "\n"
    "Provide any missing interpretations or confirm that all possible interpretations are "
    "covered.";

const char* kText2SqlTemplate =
    "The task is to write SQL queries based on the provided questions in English. Questions can "
    "take the form of an instruction or command. Do not include any explanations, and do not "
    "select extra columns beyond those requested in the question.\n"
    "\n"
    "Given the following SQLite database schema: {schema}\n"
    "\n"
    "Answer the following: {question}";

const char* kSelfCorrectTemplate =
    "The task is to review the provided context, question, and candidate interpretations, and "
    "based on this information provide the interpretations that accurately reflect the meaning "
    "(or one of the possible meanings) of the question. If any of the candidate interpretations "
    "are correct, provide them as a list of interpretations. If there are missing "
    "interpretations, provide them as well. Avoid providing interpretations that are incorrect "
    "or duplicates. Do not provide any explanations.\n"
    "\n"
    "Given the following context: {context}\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Candidate interpretations: {candidates}\n"
    "\n"
    "Provide the interpretations that accurately reflect the meaning (or one of the possible "
    "meanings) of the question.";

const char* kSynonymRewriteTemplate =
    "Your task is to rewrite the question using a given word or phrase.\n"
    "\n"
    "Examples:\n"
    "Question: Show titles of songs and names of singers.\n"
    "Please rewrite using \"stage name\":\n"
    "Give me titles of songs and stage names of singers.\n"
    "\n"
    "Question: Show the name of the conductor that has conducted the most number of orchestras.\n"
    "Please rewrite using \"director\":\n"
    "List the name of the director who has conducted the most number of orchestras.\n"
    "\n"
    "Question: Return the id of the document with the fewest paragraphs.\n"
    "Please rewrite using \"passages\":\n"
    "What is the id of the document with the fewest passages?\n"
    "\n"
    "Please provide rewritten question for the following instance. Do not add any explanation or "
    "description, output only the rewritten question.\n"
    "\n"
    "Question:  {question}\n"
    "Please rewrite using \"{synonym}\":";

// Not a published template: end-to-end baselines are prompted to emit every
// reading's SQL directly.
const char* kEndToEndTemplate =
    "The task is to write SQL queries based on the provided questions in English. If the "
    "question is ambiguous, generate multiple SQL queries, one for each possible meaning, each "
    "on a separate line. Do not include any explanations.\n"
    "\n"
    "Given the following SQLite database schema: {schema}\n"
    "\n"
    "{demonstrations}Answer the following: {question}";

struct SlotSpec {
  const char* name;
  bool allow_empty;
};

struct TemplateSpec {
  const char* text;
  std::vector<SlotSpec> slots;
};

const TemplateSpec& template_for(PromptKind kind) {
  static const std::map<PromptKind, TemplateSpec> kTemplates = {
      {PromptKind::default_interp,
       {kDefaultInterpTemplate, {{"context", false}, {"question", false}}}},
      {PromptKind::infill,
       {kInfillTemplate, {{"context", false}, {"question", false}, {"existing", true}}}},
      {PromptKind::text2sql, {kText2SqlTemplate, {{"schema", false}, {"question", false}}}},
      {PromptKind::self_correct,
       {kSelfCorrectTemplate, {{"context", false}, {"question", false}, {"candidates", false}}}},
      {PromptKind::synonym_rewrite,
       {kSynonymRewriteTemplate, {{"question", false}, {"synonym", false}}}},
      {PromptKind::end_to_end,
       {kEndToEndTemplate, {{"schema", false}, {"question", false}, {"demonstrations", true}}}},
  };
  return kTemplates.at(kind);
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

// "1. Foo", "2) Foo", "- Foo", "* Foo" -> "Foo"
std::string strip_enumeration_marker(const std::string& line) {
  std::size_t i = 0;
  const std::size_t n = line.size();
  while (i < n && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
  std::size_t start = i;
  if (i < n && (line[i] == '-' || line[i] == '*')) {
    ++i;
  } else {
    std::size_t digits = i;
    while (digits < n && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
    if (digits > i && digits < n && (line[digits] == '.' || line[digits] == ')')) {
      i = digits + 1;
    } else {
      i = start;
      return util::trim(line);
    }
  }
  if (i < n && !std::isspace(static_cast<unsigned char>(line[i])) ) {
    // "-3" or "*foo" are content, not markers.
    return util::trim(line);
  }
  return util::trim(line.substr(i));
}

bool is_sentinel_line(const std::string& stripped) {
  std::string s = stripped;
  while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?')) s.pop_back();
  s = util::to_lower(util::trim(s));
  return s == "all interpretations are covered" || s == "all possible interpretations are covered";
}

bool is_word_boundary(const std::string& text, std::size_t pos, std::size_t len) {
  auto is_word = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  };
  if (pos > 0 && is_word(text[pos - 1])) return false;
  std::size_t end = pos + len;
  if (end < text.size() && is_word(text[end])) return false;
  return true;
}

std::size_t find_keyword(const std::string& text, const std::string& keyword) {
  std::string lowered = util::to_lower(text);
  std::string needle = util::to_lower(keyword);
  std::size_t pos = 0;
  while ((pos = lowered.find(needle, pos)) != std::string::npos) {
    if (is_word_boundary(text, pos, needle.size())) return pos;
    pos += 1;
  }
  return std::string::npos;
}

}  // namespace

std::string render_prompt(PromptKind kind, const std::map<std::string, std::string>& slots) {
  const TemplateSpec& spec = template_for(kind);
  std::string out = spec.text;
  for (const SlotSpec& slot : spec.slots) {
    auto it = slots.find(slot.name);
    std::string value = it == slots.end() ? "" : it->second;
    if (!slot.allow_empty && util::trim(value).empty()) {
      throw TemplateError(std::string("missing required slot '") + slot.name + "'");
    }
    out = replace_all(out, std::string("{") + slot.name + "}", value);
  }
  return out;
}

ParsedInterpretations parse_interpretations(const std::string& text) {
  ParsedInterpretations parsed;
  for (const std::string& raw : util::split_lines(text)) {
    std::string stripped = strip_enumeration_marker(raw);
    if (stripped.empty()) continue;
    if (is_sentinel_line(stripped)) {
      parsed.all_covered = true;
      continue;
    }
    parsed.interps.push_back(stripped);
    parsed.raw_lines.push_back(raw);
  }
  return parsed;
}

std::string extract_sql(const std::string& text) {
  std::size_t fence = text.find("```");
  if (fence != std::string::npos) {
    std::size_t body_start = text.find('\n', fence);
    if (body_start == std::string::npos) body_start = fence + 3;
    else body_start += 1;
    std::size_t fence_end = text.find("```", body_start);
    if (fence_end != std::string::npos) {
      std::string body = util::trim(text.substr(body_start, fence_end - body_start));
      if (!body.empty()) return body;
    }
  }

  std::size_t select_pos = find_keyword(text, "SELECT");
  std::size_t with_pos = find_keyword(text, "WITH");
  std::size_t start = std::min(select_pos, with_pos);
  if (start == std::string::npos) {
    throw ExtractionError("no SQL content in reply: " + util::trim(text).substr(0, 80));
  }
  std::string sql = text.substr(start);
  std::size_t last_semi = sql.rfind(';');
  if (last_semi != std::string::npos) sql = sql.substr(0, last_semi + 1);
  return util::trim(sql);
}

std::string request_cache_key(const GenerationRequest& request) {
  ordered_json j;
  j["backend_id"] = request.backend_id;
  j["model"] = request.model;
  j["prompt"] = request.prompt;
  j["temperature"] = request.temperature;
  if (request.seed) j["seed"] = *request.seed;
  else j["seed"] = nullptr;
  j["max_tokens"] = request.max_tokens;
  return util::sha256_hex(j.dump());
}

LlmGateway::LlmGateway(std::map<std::string, BackendConfig> backends, std::string cache_path)
    : cache_path_(std::move(cache_path)) {
  for (auto& [id, config] : backends) {
    auto state = std::make_unique<BackendState>();
    state->config = std::move(config);
    state->script_counters.assign(state->config.script.size(), 0);
    backends_.emplace(id, std::move(state));
  }
  if (!cache_path_.empty()) {
    std::ifstream in(cache_path_);
    if (in) {
      std::string line;
      while (std::getline(in, line)) {
        std::string t = util::trim(line);
        if (t.empty()) continue;
        try {
          ordered_json entry = ordered_json::parse(t);
          cache_[entry.at("key").get<std::string>()] = entry.at("response").get<std::string>();
        } catch (const nlohmann::json::exception&) {
          // Skip corrupt lines; the cache is append-only and best-effort.
        }
      }
    }
    cache_out_.open(cache_path_, std::ios::app);
  }
}

const BackendConfig& LlmGateway::backend(const std::string& id) const {
  auto it = backends_.find(id);
  if (it == backends_.end()) throw ConfigError("unknown backend: " + id);
  return it->second->config;
}

bool LlmGateway::has_backend(const std::string& id) const { return backends_.count(id) > 0; }

std::size_t LlmGateway::cache_entries() const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  return cache_.size();
}

int LlmGateway::backend_calls(const std::string& id) const {
  auto it = backends_.find(id);
  if (it == backends_.end()) return 0;
  std::lock_guard<std::mutex> lock(it->second->mutex);
  return it->second->calls;
}

std::string LlmGateway::generate(const GenerationRequest& request) {
  if (request.prompt.empty()) throw ConfigError("generation request with empty prompt");
  if (!std::isfinite(request.temperature) || request.temperature < 0.0) {
    throw ConfigError("generation request with invalid temperature");
  }
  auto it = backends_.find(request.backend_id);
  if (it == backends_.end()) throw ConfigError("unknown backend: " + request.backend_id);
  BackendState& state = *it->second;

  const std::string key = request_cache_key(request);
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto hit = cache_.find(key);
    if (hit != cache_.end()) return hit->second;
  }

  if (state.config.kind == BackendConfig::Kind::replay_only) {
    throw BackendError("replay cache miss for backend '" + request.backend_id + "'");
  }

  std::string response = dispatch(state, request);

  std::lock_guard<std::mutex> lock(cache_mutex_);
  auto [pos, inserted] = cache_.emplace(key, response);
  if (inserted && cache_out_.is_open()) {
    ordered_json entry;
    entry["key"] = key;
    ordered_json req;
    req["backend_id"] = request.backend_id;
    req["model"] = request.model;
    req["prompt"] = request.prompt;
    req["temperature"] = request.temperature;
    if (request.seed) req["seed"] = *request.seed;
    req["max_tokens"] = request.max_tokens;
    entry["request"] = std::move(req);
    entry["response"] = response;
    entry["timestamp"] = util::now_iso8601();
    cache_out_ << entry.dump() << "\n";
    cache_out_.flush();
  }
  return pos->second;
}

std::string LlmGateway::dispatch(BackendState& state, const GenerationRequest& request) {
  {
    std::unique_lock<std::mutex> lock(state.mutex);
    state.slot_free.wait(lock, [&] { return state.in_flight < state.config.max_in_flight; });
    ++state.in_flight;
    ++state.calls;
  }
  std::string response;
  std::exception_ptr error;
  try {
    response = state.config.kind == BackendConfig::Kind::http_chat ? call_http(state, request)
                                                                   : call_mock(state, request);
  } catch (...) {
    error = std::current_exception();
  }
  {
    std::lock_guard<std::mutex> lock(state.mutex);
    --state.in_flight;
  }
  state.slot_free.notify_one();
  if (error) std::rethrow_exception(error);
  return response;
}

std::string LlmGateway::call_mock(BackendState& state, const GenerationRequest& request) {
  std::lock_guard<std::mutex> lock(state.mutex);
  for (std::size_t i = 0; i < state.config.script.size(); ++i) {
    const ScriptEntry& entry = state.config.script[i];
    if (request.prompt.find(entry.pattern) == std::string::npos) continue;
    if (entry.responses.empty()) return "";
    int& counter = state.script_counters[i];
    const std::string& response =
        entry.responses[std::min<std::size_t>(counter, entry.responses.size() - 1)];
    ++counter;
    return response;
  }
  if (state.config.default_response) return *state.config.default_response;
  throw BackendError("scripted backend has no entry matching the prompt");
}

std::string LlmGateway::call_http(BackendState& state, const GenerationRequest& request) {
  const BackendConfig& config = state.config;
  if (config.endpoint.empty()) throw ConfigError("http backend without endpoint");

  ordered_json body;
  body["model"] = request.model.empty() ? config.model : request.model;
  body["messages"] = ordered_json::array({ordered_json{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  if (request.seed) body["seed"] = *request.seed;
  const std::string payload = body.dump();

  std::string bearer;
  if (!config.api_key_env.empty()) {
    if (const char* token = std::getenv(config.api_key_env.c_str())) bearer = token;
  }

  std::string last_error;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) {
      auto delay = std::chrono::milliseconds(config.retry_backoff_ms) * (1 << (attempt - 1));
      std::this_thread::sleep_for(delay);
    }
    httplib::Client client(config.endpoint);
    client.set_connection_timeout(config.timeout_s, 0);
    client.set_read_timeout(config.timeout_s, 0);
    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);

    httplib::Result res = client.Post(config.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 408 || res->status == 429 || res->status >= 500) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw BackendError("http status " + std::to_string(res->status) + ": " + res->body);
    }
    try {
      ordered_json reply = ordered_json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("malformed chat response: ") + e.what());
    }
  }
  throw BackendError("backend '" + request.backend_id + "' failed after " +
                     std::to_string(config.max_retries + 1) + " attempts: " + last_error);
}

}  // namespace ambisql
