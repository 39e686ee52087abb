#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ambisql {

struct SandboxLimits;

// Schema plus content as an executable SQL dump. One spec may be shared by
// many examples; compare by content, not identity.
struct DatabaseSpec {
  std::string db_id;
  std::string dump_text;
  std::map<std::string, std::string> descriptions;
  // Non-empty when the dump was loaded from (and should be persisted as) a
  // sidecar file rather than inline text.
  std::string dump_path;

  friend bool operator==(const DatabaseSpec& a, const DatabaseSpec& b) {
    return a.db_id == b.db_id && a.dump_text == b.dump_text && a.descriptions == b.descriptions;
  }
};

struct Example {
  std::string example_id;
  std::shared_ptr<const DatabaseSpec> db;
  std::string question;
  std::vector<std::string> gold_sql;
  std::optional<std::vector<std::string>> gold_interpretations;
  std::optional<bool> is_ambiguous;
  std::vector<std::string> tags;
  // Synonym pair driving interpretation synthesis; carried by ambiqt-style
  // inputs, optional everywhere else.
  std::optional<std::vector<std::string>> synonyms;

  friend bool operator==(const Example& a, const Example& b) {
    auto db_eq = [&] {
      if (!a.db || !b.db) return a.db == b.db;
      return *a.db == *b.db;
    };
    return a.example_id == b.example_id && db_eq() && a.question == b.question &&
           a.gold_sql == b.gold_sql && a.gold_interpretations == b.gold_interpretations &&
           a.is_ambiguous == b.is_ambiguous && a.tags == b.tags && a.synonyms == b.synonyms;
  }
};

enum class DatasetFormat { canonical, ambiqt, ambrosia };

DatasetFormat parse_dataset_format(const std::string& name);
std::string dataset_format_name(DatasetFormat format);

struct Violation {
  enum class Severity { error, warning };
  std::string field;
  std::string message;
  Severity severity = Severity::error;
};

// Returns every invariant violation; empty means valid. An ambiguous-flagged
// example with a single gold is a warning, not an error.
std::vector<Violation> validate_example(const Example& example);

std::vector<Example> load_dataset(const std::string& path, DatasetFormat format);

// One JSON object per line, stable field order. A dump shared by several
// examples is serialized inline only on its first record; later records
// reference it by db_id.
void write_canonical(const std::vector<Example>& examples, const std::string& path);
std::string render_canonical(const std::vector<Example>& examples);

struct FilterStats {
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::vector<std::string> dropped_ids;
};

// Retains exactly the examples whose gold queries all execute without error
// and return at least one row. A failing gold drops the example (logged via
// stats); a database that does not build is a hard error.
std::vector<Example> filter_nonempty(const std::vector<Example>& examples,
                                     const SandboxLimits& limits,
                                     FilterStats* stats = nullptr,
                                     int concurrency = 1);

}  // namespace ambisql
