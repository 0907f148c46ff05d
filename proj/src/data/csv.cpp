#include "zin/data/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "zin/common/errors.hpp"

namespace zin::data {

ColumnRole parse_role(const std::string& s) {
  if (s == "feature") return ColumnRole::kFeature;
  if (s == "label") return ColumnRole::kLabel;
  if (s == "auxiliary") return ColumnRole::kAuxiliary;
  if (s == "env") return ColumnRole::kEnv;
  if (s == "group_key") return ColumnRole::kGroupKey;
  if (s == "ignore") return ColumnRole::kIgnore;
  throw SchemaError("unknown column role '" + s + "'");
}

ColumnType parse_column_type(const std::string& s) {
  if (s == "numeric") return ColumnType::kNumeric;
  if (s == "categorical") return ColumnType::kCategorical;
  throw SchemaError("unknown column type '" + s + "'");
}

std::string to_string(ColumnRole r) {
  switch (r) {
    case ColumnRole::kFeature: return "feature";
    case ColumnRole::kLabel: return "label";
    case ColumnRole::kAuxiliary: return "auxiliary";
    case ColumnRole::kEnv: return "env";
    case ColumnRole::kGroupKey: return "group_key";
    case ColumnRole::kIgnore: return "ignore";
  }
  return "ignore";
}

std::string to_string(ColumnType t) { return t == ColumnType::kNumeric ? "numeric" : "categorical"; }

void ColumnSchema::validate() const {
  int labels = 0;
  int envs = 0;
  std::set<std::string> names;
  for (const ColumnSpec& c : columns) {
    if (!names.insert(c.name).second) throw SchemaError("column '" + c.name + "' listed twice");
    labels += c.role == ColumnRole::kLabel;
    envs += c.role == ColumnRole::kEnv;
  }
  if (labels != 1) throw SchemaError("schema needs exactly one label column, has " + std::to_string(labels));
  if (envs > 1) throw SchemaError("schema allows at most one env column");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

namespace {

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

bool parse_double(const std::string& cell, double& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && *begin == ' ') ++begin;
  while (end > begin && end[-1] == ' ') --end;
  if (begin == end) return false;
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Dataset load_csv(const std::string& path, const ColumnSchema& schema, LoadReport* report) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("'" + path + "' has no header row");
  const std::vector<std::string> header = split_csv_line(line);

  std::vector<std::size_t> file_index(schema.columns.size());
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), schema.columns[c].name);
    if (it == header.end()) {
      throw SchemaError("'" + path + "' has no column named '" + schema.columns[c].name + "'");
    }
    file_index[c] = static_cast<std::size_t>(it - header.begin());
  }

  // First pass: raw cells of used columns for complete rows.
  std::vector<std::vector<std::string>> cells(schema.columns.size());
  std::vector<std::size_t> line_numbers;
  std::size_t line_no = 1;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    bool missing = false;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      if (schema.columns[c].role != ColumnRole::kIgnore && is_missing(fields[file_index[c]])) missing = true;
    }
    if (missing) {
      ++dropped;
      continue;
    }
    for (std::size_t c = 0; c < schema.columns.size(); ++c) cells[c].push_back(fields[file_index[c]]);
    line_numbers.push_back(line_no);
  }
  const std::size_t n = line_numbers.size();
  if (dropped > 0) {
    std::cerr << "load_csv: dropped " << dropped << " row(s) with missing values from " << path << "\n";
  }

  struct Block {
    std::vector<std::vector<double>> cols;
    std::vector<std::string> names;
  };
  Block features, aux, keys;
  std::vector<double> label;
  std::vector<int> env;

  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    const ColumnSpec& spec = schema.columns[c];
    if (spec.role == ColumnRole::kIgnore) continue;
    if (spec.type == ColumnType::kNumeric) {
      std::vector<double> values(n);
      for (std::size_t r = 0; r < n; ++r) {
        if (!parse_double(cells[c][r], values[r])) {
          throw ParseError(path + ":" + std::to_string(line_numbers[r]) + ": column '" + spec.name +
                           "' (row " + std::to_string(r) + "): cannot parse '" + cells[c][r] + "' as a number");
        }
      }
      switch (spec.role) {
        case ColumnRole::kFeature: features.cols.push_back(values); features.names.push_back(spec.name); break;
        case ColumnRole::kAuxiliary: aux.cols.push_back(values); aux.names.push_back(spec.name); break;
        case ColumnRole::kGroupKey: keys.cols.push_back(values); keys.names.push_back(spec.name); break;
        case ColumnRole::kLabel: label = values; break;
        case ColumnRole::kEnv:
          env.resize(n);
          for (std::size_t r = 0; r < n; ++r) env[r] = static_cast<int>(values[r]);
          break;
        case ColumnRole::kIgnore: break;
      }
      continue;
    }
    std::set<std::string> levels(cells[c].begin(), cells[c].end());
    std::map<std::string, int> code;
    int next = 0;
    for (const std::string& l : levels) code[l] = next++;
    if (spec.role == ColumnRole::kFeature || spec.role == ColumnRole::kAuxiliary) {
      Block& target = spec.role == ColumnRole::kFeature ? features : aux;
      for (const std::string& l : levels) {
        std::vector<double> onehot(n);
        for (std::size_t r = 0; r < n; ++r) onehot[r] = cells[c][r] == l ? 1.0 : 0.0;
        target.cols.push_back(std::move(onehot));
        target.names.push_back(spec.name + "=" + l);
      }
    } else if (spec.role == ColumnRole::kEnv) {
      env.resize(n);
      for (std::size_t r = 0; r < n; ++r) env[r] = code[cells[c][r]];
    } else if (spec.role == ColumnRole::kGroupKey) {
      std::vector<double> values(n);
      for (std::size_t r = 0; r < n; ++r) values[r] = code[cells[c][r]];
      keys.cols.push_back(values);
      keys.names.push_back(spec.name);
    } else {
      throw SchemaError("label column '" + spec.name + "' must be numeric");
    }
  }

  auto to_tensor = [n](const Block& b) {
    Tensor t(n, b.cols.size());
    for (std::size_t c = 0; c < b.cols.size(); ++c)
      for (std::size_t r = 0; r < n; ++r) t(r, c) = b.cols[c][r];
    return t;
  };
  Dataset ds;
  ds.x = to_tensor(features);
  ds.x_names = features.names;
  ds.z = to_tensor(aux);
  ds.z_names = aux.names;
  ds.keys = to_tensor(keys);
  ds.key_names = keys.names;
  ds.y = Tensor::column(label);
  for (const ColumnSpec& s : schema.columns)
    if (s.role == ColumnRole::kLabel) ds.y_name = s.name;
  if (!env.empty()) compact_env_ids(env);
  ds.env = std::move(env);
  if (ds.x.cols() == 0) throw SchemaError("schema selects no feature columns");
  ds.validate();
  if (report) {
    report->rows_read = n;
    report->rows_dropped_missing = dropped;
  }
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  std::vector<std::string> header(ds.x_names);
  header.push_back(ds.y_name);
  header.insert(header.end(), ds.z_names.begin(), ds.z_names.end());
  if (ds.has_env()) header.push_back("env");
  header.insert(header.end(), ds.key_names.begin(), ds.key_names.end());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (std::size_t r = 0; r < ds.size(); ++r) {
    std::string row;
    for (std::size_t c = 0; c < ds.x.cols(); ++c) row += format_double(ds.x(r, c)) + ",";
    row += format_double(ds.y[r]);
    for (std::size_t c = 0; c < ds.z.cols(); ++c) row += "," + format_double(ds.z(r, c));
    if (ds.has_env()) row += "," + std::to_string(ds.env[r]);
    for (std::size_t c = 0; c < ds.keys.cols(); ++c) row += "," + format_double(ds.keys(r, c));
    out << row << "\n";
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

ColumnSchema schema_for(const Dataset& ds) {
  ColumnSchema s;
  for (const auto& n : ds.x_names) s.columns.push_back({n, ColumnRole::kFeature, ColumnType::kNumeric});
  s.columns.push_back({ds.y_name, ColumnRole::kLabel, ColumnType::kNumeric});
  for (const auto& n : ds.z_names) s.columns.push_back({n, ColumnRole::kAuxiliary, ColumnType::kNumeric});
  if (ds.has_env()) s.columns.push_back({"env", ColumnRole::kEnv, ColumnType::kNumeric});
  for (const auto& n : ds.key_names) s.columns.push_back({n, ColumnRole::kGroupKey, ColumnType::kNumeric});
  return s;
}

}  // namespace zin::data
