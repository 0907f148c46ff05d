#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "zin/data/dataset.hpp"

namespace zin::data {

enum class ColumnRole { kFeature, kLabel, kAuxiliary, kEnv, kGroupKey, kIgnore };
enum class ColumnType { kNumeric, kCategorical };

ColumnRole parse_role(const std::string& s);
ColumnType parse_column_type(const std::string& s);
std::string to_string(ColumnRole r);
std::string to_string(ColumnType t);

struct ColumnSpec {
  std::string name;
  ColumnRole role = ColumnRole::kFeature;
  ColumnType type = ColumnType::kNumeric;
};

/// Column roles for a CSV file. Columns present in the file but not listed are
/// ignored.
struct ColumnSchema {
  std::vector<ColumnSpec> columns;

  /// Exactly one label, at most one env column, unique names.
  void validate() const;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped_missing = 0;
};

/// Reads a comma-separated file with a header row. Categorical feature and
/// auxiliary columns are one-hot encoded (levels in sorted order, named
/// "<col>=<level>"); categorical env/group-key columns become integer codes.
/// Rows with a missing cell ("" or "NA") in a used column are dropped.
Dataset load_csv(const std::string& path, const ColumnSchema& schema, LoadReport* report = nullptr);

/// Writes features, label, auxiliary, env and then key columns, in that order.
void save_csv(const Dataset& ds, const std::string& path);

/// Schema that reads back a file written by save_csv for `ds`.
ColumnSchema schema_for(const Dataset& ds);

/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace zin::data
