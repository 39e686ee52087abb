#include "ambisql/dataset.hpp"

#include "ambisql/errors.hpp"
#include "ambisql/sandbox.hpp"
#include "ambisql/util.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace ambisql {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void load_fail(std::size_t index, const std::string& what) {
  throw LoadError("example " + std::to_string(index) + ": " + what);
}

std::string require_string(const ordered_json& record, const char* field, std::size_t index) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_string()) {
    load_fail(index, std::string("missing required field '") + field + "'");
  }
  return it->get<std::string>();
}

std::vector<std::string> string_list(const ordered_json& value, const char* field,
                                     std::size_t index) {
  if (!value.is_array()) load_fail(index, std::string("field '") + field + "' must be an array");
  std::vector<std::string> out;
  for (const auto& item : value) {
    if (!item.is_string()) {
      load_fail(index, std::string("field '") + field + "' must contain strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

// Shared database registry for one load/write pass: specs are interned by
// db_id so examples over the same database share one DatabaseSpec.
class SpecRegistry {
 public:
  explicit SpecRegistry(fs::path base_dir) : base_dir_(std::move(base_dir)) {}

  std::shared_ptr<const DatabaseSpec> resolve(const ordered_json& record, std::size_t index) {
    std::string db_id = require_string(record, "db_id", index);
    auto dump_it = record.find("db_dump");
    auto path_it = record.find("db_dump_path");

    if (dump_it != record.end()) {
      if (!dump_it->is_string()) load_fail(index, "field 'db_dump' must be a string");
      return intern(db_id, dump_it->get<std::string>(), "", record, index);
    }
    if (path_it != record.end()) {
      if (!path_it->is_string()) load_fail(index, "field 'db_dump_path' must be a string");
      std::string rel = path_it->get<std::string>();
      fs::path full = fs::path(rel).is_absolute() ? fs::path(rel) : base_dir_ / rel;
      std::string text;
      try {
        text = util::read_file(full.string());
      } catch (const Error& e) {
        load_fail(index, std::string("db_dump_path: ") + e.what());
      }
      return intern(db_id, text, rel, record, index);
    }
    auto known = by_id_.find(db_id);
    if (known != by_id_.end()) return known->second;
    // Last resort: sidecar dump next to the dataset file.
    fs::path sidecar = base_dir_ / "db_dumps" / (db_id + ".sql");
    if (fs::exists(sidecar)) {
      return intern(db_id, util::read_file(sidecar.string()),
                    (fs::path("db_dumps") / (db_id + ".sql")).string(), record, index);
    }
    load_fail(index, "missing required field 'db_dump' (or 'db_dump_path') for db_id '" + db_id +
                         "' and no earlier record defines it");
  }

 private:
  std::shared_ptr<const DatabaseSpec> intern(const std::string& db_id, std::string dump_text,
                                             std::string dump_path, const ordered_json& record,
                                             std::size_t index) {
    auto known = by_id_.find(db_id);
    if (known != by_id_.end()) {
      if (known->second->dump_text != dump_text) {
        load_fail(index, "db_id '" + db_id + "' redefined with different dump text");
      }
      return known->second;
    }
    auto spec = std::make_shared<DatabaseSpec>();
    spec->db_id = db_id;
    spec->dump_text = std::move(dump_text);
    spec->dump_path = std::move(dump_path);
    if (auto it = record.find("descriptions"); it != record.end() && it->is_object()) {
      for (const auto& [table, text] : it->items()) {
        if (text.is_string()) spec->descriptions[table] = text.get<std::string>();
      }
    }
    by_id_[db_id] = spec;
    return spec;
  }

  fs::path base_dir_;
  std::unordered_map<std::string, std::shared_ptr<const DatabaseSpec>> by_id_;
};

void finish_example(Example& ex, const ordered_json& record, std::size_t index) {
  if (auto it = record.find("is_ambiguous"); it != record.end() && it->is_boolean()) {
    ex.is_ambiguous = it->get<bool>();
  }
  if (auto it = record.find("tags"); it != record.end()) {
    ex.tags = string_list(*it, "tags", index);
  }
  if (auto it = record.find("synonyms"); it != record.end()) {
    ex.synonyms = string_list(*it, "synonyms", index);
  }
  for (const Violation& v : validate_example(ex)) {
    if (v.severity == Violation::Severity::error) {
      load_fail(index, v.field + ": " + v.message);
    }
    std::cerr << "load warning, example " << index << " (" << ex.example_id << "): " << v.field
              << ": " << v.message << "\n";
  }
}

Example parse_canonical(const ordered_json& record, SpecRegistry& registry, std::size_t index) {
  Example ex;
  ex.example_id = require_string(record, "example_id", index);
  ex.db = registry.resolve(record, index);
  ex.question = require_string(record, "question", index);
  auto gold_it = record.find("gold_sql");
  if (gold_it == record.end()) load_fail(index, "missing required field 'gold_sql'");
  ex.gold_sql = string_list(*gold_it, "gold_sql", index);
  if (auto it = record.find("gold_interpretations"); it != record.end()) {
    ex.gold_interpretations = string_list(*it, "gold_interpretations", index);
  }
  finish_example(ex, record, index);
  return ex;
}

// AmbiQT-style record: two gold queries over synonym column/table names,
// either as "queries": [q1, q2] or as "query1"/"query2".
Example parse_ambiqt(const ordered_json& record, SpecRegistry& registry, std::size_t index) {
  Example ex;
  if (auto it = record.find("example_id"); it != record.end() && it->is_string()) {
    ex.example_id = it->get<std::string>();
  } else {
    ex.example_id = "ambiqt-" + std::to_string(index);
  }
  ex.db = registry.resolve(record, index);
  ex.question = require_string(record, "question", index);

  if (auto it = record.find("queries"); it != record.end()) {
    ex.gold_sql = string_list(*it, "queries", index);
  } else if (record.contains("query1") && record.contains("query2")) {
    ex.gold_sql = {require_string(record, "query1", index), require_string(record, "query2", index)};
  } else {
    load_fail(index, "missing required field 'queries' (or 'query1'/'query2')");
  }
  if (ex.gold_sql.size() != 2) {
    load_fail(index, "ambiqt records carry exactly two gold queries, got " +
                         std::to_string(ex.gold_sql.size()));
  }
  ex.is_ambiguous = true;
  if (auto it = record.find("ambig_type"); it != record.end() && it->is_string()) {
    ex.tags.push_back(it->get<std::string>());
  }
  if (auto it = record.find("synonyms"); it != record.end()) {
    ex.synonyms = string_list(*it, "synonyms", index);
  }
  finish_example(ex, record, index);
  return ex;
}

// Ambrosia-style record: 1..3 gold queries, optional aligned natural-language
// interpretations, ambiguity type tag.
Example parse_ambrosia(const ordered_json& record, SpecRegistry& registry, std::size_t index) {
  Example ex;
  if (auto it = record.find("example_id"); it != record.end() && it->is_string()) {
    ex.example_id = it->get<std::string>();
  } else {
    ex.example_id = "ambrosia-" + std::to_string(index);
  }
  ex.db = registry.resolve(record, index);
  ex.question = require_string(record, "question", index);

  const char* gold_field = record.contains("gold_queries") ? "gold_queries" : "gold_sql";
  auto gold_it = record.find(gold_field);
  if (gold_it == record.end()) load_fail(index, "missing required field 'gold_queries'");
  ex.gold_sql = string_list(*gold_it, gold_field, index);

  if (auto it = record.find("interpretations"); it != record.end()) {
    ex.gold_interpretations = string_list(*it, "interpretations", index);
  }
  if (auto it = record.find("ambig_type"); it != record.end() && it->is_string()) {
    ex.tags.push_back(it->get<std::string>());
  }
  finish_example(ex, record, index);
  return ex;
}

std::vector<ordered_json> read_records(const std::string& path) {
  std::string text = util::read_file(path);
  std::vector<ordered_json> records;
  std::string trimmed = util::trim(text);
  if (trimmed.empty()) return records;
  if (trimmed.front() == '[') {
    ordered_json doc = ordered_json::parse(trimmed);
    for (auto& item : doc) records.push_back(std::move(item));
    return records;
  }
  std::size_t line_no = 0;
  for (const std::string& line : util::split_lines(text)) {
    ++line_no;
    std::string t = util::trim(line);
    if (t.empty()) continue;
    try {
      records.push_back(ordered_json::parse(t));
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "canonical") return DatasetFormat::canonical;
  if (name == "ambiqt") return DatasetFormat::ambiqt;
  if (name == "ambrosia") return DatasetFormat::ambrosia;
  throw ConfigError("unknown dataset format: " + name);
}

std::string dataset_format_name(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::canonical: return "canonical";
    case DatasetFormat::ambiqt: return "ambiqt";
    case DatasetFormat::ambrosia: return "ambrosia";
  }
  return "canonical";
}

std::vector<Violation> validate_example(const Example& example) {
  std::vector<Violation> out;
  if (example.example_id.empty()) {
    out.push_back({"example_id", "must be non-empty", Violation::Severity::error});
  }
  if (!example.db) {
    out.push_back({"db", "missing database spec", Violation::Severity::error});
  }
  if (example.gold_sql.empty()) {
    out.push_back({"gold_sql", "must contain at least one query", Violation::Severity::error});
  }
  for (std::size_t i = 0; i < example.gold_sql.size(); ++i) {
    if (util::trim(example.gold_sql[i]).empty()) {
      out.push_back({"gold_sql", "query " + std::to_string(i) + " is empty",
                     Violation::Severity::error});
    }
  }
  if (example.gold_interpretations &&
      example.gold_interpretations->size() != example.gold_sql.size()) {
    out.push_back({"gold_interpretations",
                   "length " + std::to_string(example.gold_interpretations->size()) +
                       " does not match gold_sql length " + std::to_string(example.gold_sql.size()),
                   Violation::Severity::error});
  }
  if (example.is_ambiguous.value_or(false) && example.gold_sql.size() < 2) {
    out.push_back({"is_ambiguous", "flagged ambiguous with a single gold query",
                   Violation::Severity::warning});
  }
  if (example.synonyms && example.synonyms->size() != 2) {
    out.push_back({"synonyms", "must be a pair", Violation::Severity::error});
  }
  return out;
}

std::vector<Example> load_dataset(const std::string& path, DatasetFormat format) {
  if (!fs::exists(path)) throw LoadError("dataset path does not exist: " + path);
  SpecRegistry registry(fs::path(path).parent_path());
  std::vector<ordered_json> records = read_records(path);
  std::vector<Example> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].is_object()) load_fail(i, "record is not a JSON object");
    switch (format) {
      case DatasetFormat::canonical: out.push_back(parse_canonical(records[i], registry, i)); break;
      case DatasetFormat::ambiqt: out.push_back(parse_ambiqt(records[i], registry, i)); break;
      case DatasetFormat::ambrosia: out.push_back(parse_ambrosia(records[i], registry, i)); break;
    }
  }
  return out;
}

std::string render_canonical(const std::vector<Example>& examples) {
  std::string out;
  std::unordered_map<std::string, bool> dump_written;
  for (const Example& ex : examples) {
    ordered_json record;
    record["example_id"] = ex.example_id;
    record["db_id"] = ex.db ? ex.db->db_id : "";
    if (ex.db) {
      bool first_occurrence = !dump_written[ex.db->db_id];
      if (!ex.db->dump_path.empty()) {
        record["db_dump_path"] = ex.db->dump_path;
      } else if (first_occurrence) {
        record["db_dump"] = ex.db->dump_text;
      }
      dump_written[ex.db->db_id] = true;
      if (first_occurrence && !ex.db->descriptions.empty()) {
        ordered_json desc = ordered_json::object();
        for (const auto& [table, text] : ex.db->descriptions) desc[table] = text;
        record["descriptions"] = std::move(desc);
      }
    }
    record["question"] = ex.question;
    record["gold_sql"] = ex.gold_sql;
    if (ex.gold_interpretations) record["gold_interpretations"] = *ex.gold_interpretations;
    if (ex.is_ambiguous) record["is_ambiguous"] = *ex.is_ambiguous;
    record["tags"] = ex.tags;
    if (ex.synonyms) record["synonyms"] = *ex.synonyms;
    out += record.dump();
    out.push_back('\n');
  }
  return out;
}

void write_canonical(const std::vector<Example>& examples, const std::string& path) {
  util::atomic_write_file(path, render_canonical(examples));
}

std::vector<Example> filter_nonempty(const std::vector<Example>& examples,
                                     const SandboxLimits& limits, FilterStats* stats,
                                     int concurrency) {
  std::vector<char> keep(examples.size(), 0);
  std::mutex handle_mutex;
  // One built handle per db_id, reused across that database's examples.
  // Executions against one handle are serialized; distinct databases run in
  // parallel when concurrency > 1.
  std::unordered_map<const DatabaseSpec*, std::unique_ptr<DatabaseHandle>> handles;
  std::unordered_map<const DatabaseSpec*, std::unique_ptr<std::mutex>> handle_locks;

  util::parallel_for(examples.size(), concurrency, [&](std::size_t i) {
    const Example& ex = examples[i];
    if (!ex.db) return;
    DatabaseHandle* handle = nullptr;
    std::mutex* lock = nullptr;
    {
      std::lock_guard<std::mutex> guard(handle_mutex);
      auto it = handles.find(ex.db.get());
      if (it == handles.end()) {
        auto built = std::make_unique<DatabaseHandle>(build_database(*ex.db));
        it = handles.emplace(ex.db.get(), std::move(built)).first;
        handle_locks.emplace(ex.db.get(), std::make_unique<std::mutex>());
      }
      handle = it->second.get();
      lock = handle_locks.at(ex.db.get()).get();
    }
    std::lock_guard<std::mutex> guard(*lock);
    bool all_nonempty = true;
    for (const std::string& gold : ex.gold_sql) {
      ExecOutcome outcome = execute(*handle, gold, limits);
      if (!is_ok(outcome) || ok_denotation(outcome).rows.empty()) {
        all_nonempty = false;
        break;
      }
    }
    keep[i] = all_nonempty ? 1 : 0;
  });

  std::vector<Example> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (keep[i]) {
      out.push_back(examples[i]);
    } else if (stats) {
      stats->dropped_ids.push_back(examples[i].example_id);
    }
  }
  if (stats) {
    stats->kept = out.size();
    stats->dropped = examples.size() - out.size();
  }
  return out;
}

}  // namespace ambisql
