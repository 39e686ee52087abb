#pragma once

#include "ambisql/dataset.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

struct sqlite3;

namespace ambisql {

struct SandboxLimits {
  int timeout_ms = 5000;
  int max_rows = 10000;
};

// Normalized cell value. Floats are rounded to 6 decimal places and unified
// with integers when integral, NULLs map to a single canonical token, text
// and blobs stay byte-exact.
struct Blob {
  std::string bytes;
  friend bool operator==(const Blob&, const Blob&) = default;
};
using Value = std::variant<std::monostate, std::int64_t, double, std::string, Blob>;
using Row = std::vector<Value>;

Value normalize_value(const Value& raw);
// Documented canonical serialization: type tag ':' payload; cells joined by
// 0x1f within a row. Fingerprints hash the column count, truncation flag and
// the sorted row serializations.
std::string serialize_value(const Value& v);
std::string serialize_row(const Row& row);

struct Denotation {
  int columns = 0;
  std::vector<Row> rows;  // execution order
  bool truncated = false;
  std::string fingerprint;

  std::size_t row_count() const { return rows.size(); }
};

Denotation normalize_result(const std::vector<Row>& raw_rows, int column_count,
                            bool truncated = false);

enum class ComparisonMode { multiset, ordered };

ComparisonMode parse_comparison_mode(const std::string& name);
std::string comparison_mode_name(ComparisonMode mode);

// Multiset mode ignores row order; column positions stay significant.
// Truncated denotations compare equal only to bitwise-identical truncations.
bool denotation_equal(const Denotation& a, const Denotation& b,
                      ComparisonMode mode = ComparisonMode::multiset);

struct SqlSyntaxError {
  std::string message;
};
struct SqlRuntimeError {
  std::string message;
};
struct ExecTimeout {
  int limit_ms = 0;
};
using ExecOutcome = std::variant<Denotation, SqlSyntaxError, SqlRuntimeError, ExecTimeout>;

bool is_ok(const ExecOutcome& outcome);
const Denotation& ok_denotation(const ExecOutcome& outcome);
std::string outcome_kind(const ExecOutcome& outcome);   // ok|syntax_error|runtime_error|timeout
std::string outcome_message(const ExecOutcome& outcome);

// An isolated in-memory database built from a dump. State is a pure function
// of the dump text; handles are disposable and rebuildable. One handle must
// be used by one task at a time.
class DatabaseHandle {
 public:
  DatabaseHandle() = default;
  DatabaseHandle(DatabaseHandle&& other) noexcept;
  DatabaseHandle& operator=(DatabaseHandle&& other) noexcept;
  DatabaseHandle(const DatabaseHandle&) = delete;
  DatabaseHandle& operator=(const DatabaseHandle&) = delete;
  ~DatabaseHandle();

  const std::string& spec_id() const { return spec_id_; }
  sqlite3* raw() const { return db_; }
  bool valid() const { return db_ != nullptr; }

 private:
  friend DatabaseHandle build_database(const DatabaseSpec& spec);
  sqlite3* db_ = nullptr;
  std::string spec_id_;
};

// Throws SandboxError naming the statement index when the dump is malformed.
DatabaseHandle build_database(const DatabaseSpec& spec);

// Executes a single read-only statement. Mutating statements are rejected as
// RuntimeError; results are truncated at limits.max_rows with the truncation
// flag set; wall time beyond limits.timeout_ms yields Timeout.
ExecOutcome execute(const DatabaseHandle& handle, const std::string& sql,
                    const SandboxLimits& limits = {});

}  // namespace ambisql
