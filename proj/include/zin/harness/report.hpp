#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace zin::harness {

using json = nlohmann::json;

/// Mean and sample standard deviation; std is empty below two values.
struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  std::optional<double> std;
};

Summary summarize(const std::vector<double>& values);

struct TableRow {
  std::string experiment;
  std::string setting;
  std::string method;
  std::string metric = "accuracy";
  Summary train;
  Summary test_mean;
  Summary test_worst;
  std::size_t failed = 0;
  std::vector<std::string> errors;
};

struct BenchmarkTable {
  std::vector<TableRow> rows;

  const TableRow* find(const std::string& setting, const std::string& method) const;
  /// Accuracies in percent; MSE as is.
  std::string render_text() const;
  std::string render_csv() const;
};

/// Groups ok and failed records by (experiment, setting, method). Settings keep
/// their first-appearance order; methods follow erm, eiil, group_dro, zin,
/// irm_oracle.
BenchmarkTable aggregate(const std::vector<json>& records);

struct RecordSet {
  std::vector<json> records;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Reads *.jsonl files under a directory (or one file). Lines that are not
/// result records are skipped with a warning. Records are sorted into a
/// canonical order so repeated reports are identical.
RecordSet read_records(const std::string& path);

int method_rank(const std::string& method);

}  // namespace zin::harness
