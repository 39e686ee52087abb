#include "ambisql/sandbox.hpp"

#include "ambisql/errors.hpp"
#include "ambisql/util.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace ambisql {
namespace {

constexpr char kCellSep = '\x1f';

// Scaled fixed-point bound under which a rounded double is representable as
// an exact integer count of millionths.
constexpr double kScaledLimit = 4.0e18;

bool is_blank(const char* sql) {
  // sqlite3_prepare_v2 returns a null stmt for whitespace- or comment-only input;
  // callers use this to tell "nothing left" apart from a real statement.
  while (*sql) {
    if (!std::isspace(static_cast<unsigned char>(*sql))) return false;
    ++sql;
  }
  return true;
}

bool looks_like_grammar_error(const std::string& message) {
  std::string lowered = util::to_lower(message);
  return lowered.find("syntax error") != std::string::npos ||
         lowered.find("unrecognized token") != std::string::npos ||
         lowered.find("incomplete input") != std::string::npos;
}

struct DeadlineState {
  std::chrono::steady_clock::time_point deadline;
  bool fired = false;
};

int progress_callback(void* ctx) {
  auto* state = static_cast<DeadlineState*>(ctx);
  if (std::chrono::steady_clock::now() >= state->deadline) {
    state->fired = true;
    return 1;
  }
  return 0;
}

Value column_value(sqlite3_stmt* stmt, int col) {
  switch (sqlite3_column_type(stmt, col)) {
    case SQLITE_NULL:
      return std::monostate{};
    case SQLITE_INTEGER:
      return static_cast<std::int64_t>(sqlite3_column_int64(stmt, col));
    case SQLITE_FLOAT:
      return sqlite3_column_double(stmt, col);
    case SQLITE_TEXT: {
      const unsigned char* text = sqlite3_column_text(stmt, col);
      int n = sqlite3_column_bytes(stmt, col);
      return std::string(reinterpret_cast<const char*>(text), static_cast<std::size_t>(n));
    }
    case SQLITE_BLOB: {
      const void* data = sqlite3_column_blob(stmt, col);
      int n = sqlite3_column_bytes(stmt, col);
      return Blob{std::string(static_cast<const char*>(data ? data : ""), static_cast<std::size_t>(n))};
    }
    default:
      return std::monostate{};
  }
}

std::string hex_encode(const std::string& bytes) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 0xf]);
  }
  return out;
}

}  // namespace

Value normalize_value(const Value& raw) {
  if (const double* d = std::get_if<double>(&raw)) {
    double v = *d;
    if (std::isnan(v) || std::isinf(v)) return v;
    double scaled = v * 1e6;
    if (std::fabs(scaled) < kScaledLimit) {
      std::int64_t fixed = std::llround(scaled);
      if (fixed % 1000000 == 0) return static_cast<std::int64_t>(fixed / 1000000);
      return static_cast<double>(fixed) / 1e6;
    }
    // Magnitude beyond 6-decimal resolution; rounding is the identity.
    if (v == std::floor(v) && std::fabs(v) < 9.2e18) return static_cast<std::int64_t>(v);
    return v;
  }
  return raw;
}

std::string serialize_value(const Value& v) {
  struct Visitor {
    std::string operator()(std::monostate) const { return "n:"; }
    std::string operator()(std::int64_t i) const { return "i:" + std::to_string(i); }
    std::string operator()(double d) const {
      if (std::isnan(d)) return "r:nan";
      if (std::isinf(d)) return d > 0 ? "r:inf" : "r:-inf";
      double scaled = d * 1e6;
      if (std::fabs(scaled) < kScaledLimit) {
        return "r:" + std::to_string(std::llround(scaled)) + "e-6";
      }
      char buf[40];
      std::snprintf(buf, sizeof(buf), "r:%.17g", d);
      return buf;
    }
    std::string operator()(const std::string& s) const { return "t:" + s; }
    std::string operator()(const Blob& b) const { return "b:" + hex_encode(b.bytes); }
  };
  return std::visit(Visitor{}, v);
}

std::string serialize_row(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out.push_back(kCellSep);
    out += serialize_value(row[i]);
  }
  return out;
}

Denotation normalize_result(const std::vector<Row>& raw_rows, int column_count, bool truncated) {
  Denotation d;
  d.columns = column_count;
  d.truncated = truncated;
  d.rows.reserve(raw_rows.size());
  for (const Row& raw : raw_rows) {
    if (static_cast<int>(raw.size()) != column_count) {
      throw SandboxError("ragged row: expected " + std::to_string(column_count) + " columns, got " +
                         std::to_string(raw.size()));
    }
    Row normalized;
    normalized.reserve(raw.size());
    for (const Value& v : raw) normalized.push_back(normalize_value(v));
    d.rows.push_back(std::move(normalized));
  }

  std::vector<std::string> serialized;
  serialized.reserve(d.rows.size());
  for (const Row& row : d.rows) serialized.push_back(serialize_row(row));
  // Truncated results are order-dependent prefixes; hash them as-is so equal
  // fingerprints still mean bitwise-identical truncations.
  if (!truncated) std::sort(serialized.begin(), serialized.end());

  std::string canon = "cols=" + std::to_string(column_count) +
                      ";trunc=" + (truncated ? "1" : "0") + ";";
  for (const std::string& row : serialized) {
    canon += row;
    canon.push_back('\x1e');
  }
  d.fingerprint = util::sha256_hex(canon);
  return d;
}

ComparisonMode parse_comparison_mode(const std::string& name) {
  if (name == "multiset") return ComparisonMode::multiset;
  if (name == "ordered") return ComparisonMode::ordered;
  throw ConfigError("unknown comparison mode: " + name);
}

std::string comparison_mode_name(ComparisonMode mode) {
  return mode == ComparisonMode::multiset ? "multiset" : "ordered";
}

bool denotation_equal(const Denotation& a, const Denotation& b, ComparisonMode mode) {
  if (a.columns != b.columns) return false;
  if (a.truncated != b.truncated) return false;
  if (a.rows.size() != b.rows.size()) return false;

  auto rows_of = [](const Denotation& d) {
    std::vector<std::string> out;
    out.reserve(d.rows.size());
    for (const Row& row : d.rows) out.push_back(serialize_row(row));
    return out;
  };
  std::vector<std::string> ra = rows_of(a);
  std::vector<std::string> rb = rows_of(b);
  if (mode == ComparisonMode::multiset && !a.truncated) {
    std::sort(ra.begin(), ra.end());
    std::sort(rb.begin(), rb.end());
  }
  return ra == rb;
}

bool is_ok(const ExecOutcome& outcome) { return std::holds_alternative<Denotation>(outcome); }

const Denotation& ok_denotation(const ExecOutcome& outcome) {
  return std::get<Denotation>(outcome);
}

std::string outcome_kind(const ExecOutcome& outcome) {
  struct Visitor {
    std::string operator()(const Denotation&) const { return "ok"; }
    std::string operator()(const SqlSyntaxError&) const { return "syntax_error"; }
    std::string operator()(const SqlRuntimeError&) const { return "runtime_error"; }
    std::string operator()(const ExecTimeout&) const { return "timeout"; }
  };
  return std::visit(Visitor{}, outcome);
}

std::string outcome_message(const ExecOutcome& outcome) {
  struct Visitor {
    std::string operator()(const Denotation&) const { return ""; }
    std::string operator()(const SqlSyntaxError& e) const { return e.message; }
    std::string operator()(const SqlRuntimeError& e) const { return e.message; }
    std::string operator()(const ExecTimeout& t) const {
      return "timed out after " + std::to_string(t.limit_ms) + " ms";
    }
  };
  return std::visit(Visitor{}, outcome);
}

DatabaseHandle::DatabaseHandle(DatabaseHandle&& other) noexcept
    : db_(other.db_), spec_id_(std::move(other.spec_id_)) {
  other.db_ = nullptr;
}

DatabaseHandle& DatabaseHandle::operator=(DatabaseHandle&& other) noexcept {
  if (this != &other) {
    if (db_) sqlite3_close_v2(db_);
    db_ = other.db_;
    spec_id_ = std::move(other.spec_id_);
    other.db_ = nullptr;
  }
  return *this;
}

DatabaseHandle::~DatabaseHandle() {
  if (db_) sqlite3_close_v2(db_);
}

DatabaseHandle build_database(const DatabaseSpec& spec) {
  sqlite3* db = nullptr;
  if (sqlite3_open_v2(":memory:", &db, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr) !=
      SQLITE_OK) {
    std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
    sqlite3_close_v2(db);
    throw SandboxError("cannot open in-memory database: " + msg);
  }

  DatabaseHandle handle;
  handle.db_ = db;
  handle.spec_id_ = spec.db_id;

  const char* cursor = spec.dump_text.c_str();
  int statement_index = 0;
  while (!is_blank(cursor)) {
    sqlite3_stmt* stmt = nullptr;
    const char* tail = nullptr;
    int rc = sqlite3_prepare_v2(db, cursor, -1, &stmt, &tail);
    if (rc != SQLITE_OK) {
      std::string msg = sqlite3_errmsg(db);
      throw SandboxError("dump statement " + std::to_string(statement_index + 1) + ": " + msg);
    }
    if (!stmt) break;  // trailing whitespace/comments
    ++statement_index;
    rc = sqlite3_step(stmt);
    while (rc == SQLITE_ROW) rc = sqlite3_step(stmt);
    sqlite3_finalize(stmt);
    if (rc != SQLITE_DONE) {
      std::string msg = sqlite3_errmsg(db);
      throw SandboxError("dump statement " + std::to_string(statement_index) + ": " + msg);
    }
    cursor = tail;
  }
  return handle;
}

ExecOutcome execute(const DatabaseHandle& handle, const std::string& sql,
                    const SandboxLimits& limits) {
  if (!handle.valid()) throw SandboxError("execute on an empty DatabaseHandle");
  sqlite3* db = handle.raw();

  sqlite3_stmt* stmt = nullptr;
  const char* tail = nullptr;
  int rc = sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, &tail);
  if (rc != SQLITE_OK) {
    std::string msg = sqlite3_errmsg(db);
    if (looks_like_grammar_error(msg)) return SqlSyntaxError{msg};
    return SqlRuntimeError{msg};
  }
  if (!stmt) return SqlSyntaxError{"empty statement"};
  if (tail && !is_blank(tail)) {
    // The tail may be a second statement or just trailing comments; only a
    // preparable statement counts as "multiple statements".
    sqlite3_stmt* tail_stmt = nullptr;
    int tail_rc = sqlite3_prepare_v2(db, tail, -1, &tail_stmt, nullptr);
    bool has_second = tail_rc == SQLITE_OK && tail_stmt != nullptr;
    if (tail_stmt) sqlite3_finalize(tail_stmt);
    if (tail_rc != SQLITE_OK) {
      std::string msg = sqlite3_errmsg(db);
      sqlite3_finalize(stmt);
      return SqlSyntaxError{msg};
    }
    if (has_second) {
      sqlite3_finalize(stmt);
      return SqlRuntimeError{"multiple statements are not allowed in an evaluation query"};
    }
  }
  if (!sqlite3_stmt_readonly(stmt)) {
    sqlite3_finalize(stmt);
    return SqlRuntimeError{"mutating statement rejected"};
  }

  DeadlineState deadline{std::chrono::steady_clock::now() +
                         std::chrono::milliseconds(limits.timeout_ms)};
  sqlite3_progress_handler(db, 512, progress_callback, &deadline);

  int column_count = sqlite3_column_count(stmt);
  std::vector<Row> rows;
  bool truncated = false;
  while (true) {
    rc = sqlite3_step(stmt);
    if (rc != SQLITE_ROW) break;
    if (static_cast<int>(rows.size()) >= limits.max_rows) {
      truncated = true;
      break;
    }
    Row row;
    row.reserve(static_cast<std::size_t>(column_count));
    for (int c = 0; c < column_count; ++c) row.push_back(column_value(stmt, c));
    rows.push_back(std::move(row));
  }
  sqlite3_finalize(stmt);
  sqlite3_progress_handler(db, 0, nullptr, nullptr);

  if (rc != SQLITE_DONE && rc != SQLITE_ROW) {
    if (deadline.fired || rc == SQLITE_INTERRUPT) return ExecTimeout{limits.timeout_ms};
    return SqlRuntimeError{sqlite3_errmsg(db)};
  }
  return normalize_result(rows, column_count, truncated);
}

}  // namespace ambisql
