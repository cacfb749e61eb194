#pragma once

// Locale-independent CSV output with fixed schemas, atomic file writes, and
// a validator for files produced by the runner.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace scorelab {

/// Shortest round-trip decimal form ("inf", "-inf", "nan" for non-finite).
std::string format_double(double value);

enum class ColumnType { real, integer, text };

struct CsvSchema {
  std::string name;
  std::vector<std::string> columns;
  std::vector<ColumnType> types;
};

/// Schemas keyed by name: sweep, scaling, windows, audit, coupling,
/// separation, infochecks, probe.
const std::map<std::string, CsvSchema>& csv_schemas();
const CsvSchema& csv_schema(const std::string& name);

class CsvWriter {
 public:
  explicit CsvWriter(const CsvSchema& schema);

  CsvWriter& add(double value);
  CsvWriter& add(std::int64_t value);
  CsvWriter& add(std::uint64_t value);
  CsvWriter& add(int value) { return add(static_cast<std::int64_t>(value)); }
  CsvWriter& add(std::string_view text);
  /// Ends the row; throws if the field count does not match the schema.
  void end_row();

  const std::string& str() const { return buffer_; }
  std::size_t rows() const { return rows_; }

 private:
  void separator();

  const CsvSchema& schema_;
  std::string buffer_;
  std::size_t fields_ = 0;
  std::size_t rows_ = 0;
};

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

struct SchemaCheckResult {
  bool ok = false;
  std::string schema;  // detected from the header
  std::size_t rows = 0;
  std::string message;
};

/// Validates a CSV against the schema matching its header.
SchemaCheckResult check_csv(const std::filesystem::path& path);
SchemaCheckResult check_csv_text(std::string_view text);

/// FNV-1a 64 of a byte string, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace scorelab
