#include "zin/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "zin/common/errors.hpp"
#include "zin/harness/experiment.hpp"

namespace zin::harness {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string>& method_order() {
  static const std::vector<std::string> order = {"erm", "eiil", "group_dro", "zin", "irm_oracle"};
  return order;
}

std::string fmt(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string cell(const Summary& s, bool percent) {
  if (s.count == 0) return "-";
  const double k = percent ? 100.0 : 1.0;
  const int digits = percent ? 2 : 4;
  return fmt(s.mean * k, digits) + " ± " + (s.std ? fmt(*s.std * k, digits) : std::string("n/a"));
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_num(const std::optional<double>& v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}

bool is_result(const json& j, std::string& why) {
  if (!j.is_object()) {
    why = "not a JSON object";
    return false;
  }
  if (j.value("schema", "") != kResultSchema) {
    why = "schema is not " + std::string(kResultSchema);
    return false;
  }
  for (const char* key : {"experiment", "setting", "method", "status"})
    if (!j.contains(key) || !j[key].is_string()) {
      why = std::string("missing field '") + key + "'";
      return false;
    }
  if (!j.contains("seed") || !j["seed"].is_number_unsigned()) {
    why = "missing field 'seed'";
    return false;
  }
  if (j["status"] == "ok") {
    for (const char* part : {"train", "test"})
      if (!j.contains(part) || !j[part].is_object() || !j[part].contains("mean") || !j[part].contains("worst") ||
          !j[part]["mean"].is_number() || !j[part]["worst"].is_number()) {
        why = std::string("malformed '") + part + "' metrics";
        return false;
      }
  }
  return true;
}

}  // namespace

int method_rank(const std::string& method) {
  const auto& o = method_order();
  const auto it = std::find(o.begin(), o.end(), method);
  return static_cast<int>(it - o.begin());
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

const TableRow* BenchmarkTable::find(const std::string& setting, const std::string& method) const {
  for (const auto& r : rows)
    if (r.setting == setting && r.method == method) return &r;
  return nullptr;
}

BenchmarkTable aggregate(const std::vector<json>& records) {
  struct Acc {
    std::string metric = "accuracy";
    std::vector<double> train, mean, worst;
    std::size_t failed = 0;
    std::vector<std::string> errors;
  };
  std::vector<std::pair<std::string, std::string>> settings;
  std::map<std::tuple<std::string, std::string, std::string>, Acc> cells;
  for (const auto& r : records) {
    const std::string exp = r.value("experiment", "");
    const std::string setting = r.value("setting", "");
    const std::string method = r.value("method", "");
    if (std::find(settings.begin(), settings.end(), std::make_pair(exp, setting)) == settings.end())
      settings.emplace_back(exp, setting);
    Acc& a = cells[{exp, setting, method}];
    if (r.value("status", "") == "ok") {
      a.metric = r.value("metric", "accuracy");
      a.train.push_back(r["train"]["mean"].get<double>());
      a.mean.push_back(r["test"]["mean"].get<double>());
      a.worst.push_back(r["test"]["worst"].get<double>());
    } else {
      ++a.failed;
      a.errors.push_back(r.value("error", "unknown error"));
    }
  }
  BenchmarkTable t;
  for (const auto& [exp, setting] : settings) {
    std::vector<std::pair<int, std::string>> methods;
    for (const auto& [key, _] : cells)
      if (std::get<0>(key) == exp && std::get<1>(key) == setting)
        methods.emplace_back(method_rank(std::get<2>(key)), std::get<2>(key));
    std::sort(methods.begin(), methods.end());
    for (const auto& [_, m] : methods) {
      const Acc& a = cells[{exp, setting, m}];
      TableRow row;
      row.experiment = exp;
      row.setting = setting;
      row.method = m;
      row.metric = a.metric;
      row.train = summarize(a.train);
      row.test_mean = summarize(a.mean);
      row.test_worst = summarize(a.worst);
      row.failed = a.failed;
      row.errors = a.errors;
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

std::string BenchmarkTable::render_text() const {
  if (rows.empty()) return "(no results)\n";
  std::vector<std::vector<std::string>> lines;
  lines.push_back({"setting", "method", "seeds", "train", "test mean", "test worst", "failed"});
  for (const auto& r : rows) {
    const bool pct = r.metric == "accuracy";
    lines.push_back({r.setting, r.method, std::to_string(r.test_worst.count), cell(r.train, pct),
                     cell(r.test_mean, pct), cell(r.test_worst, pct), std::to_string(r.failed)});
  }
  std::vector<std::size_t> width(lines[0].size(), 0);
  auto display_len = [](const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s)
      if ((c & 0xC0) != 0x80) ++n;
    return n;
  };
  for (const auto& l : lines)
    for (std::size_t i = 0; i < l.size(); ++i) width[i] = std::max(width[i], display_len(l[i]));
  std::ostringstream os;
  std::string last_setting;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto& l = lines[k];
    if (k > 1 && l[0] != last_setting) os << '\n';
    for (std::size_t i = 0; i < l.size(); ++i) {
      os << l[i];
      if (i + 1 < l.size()) os << std::string(width[i] - display_len(l[i]) + 2, ' ');
    }
    os << '\n';
    if (k == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w + 2;
      os << std::string(total - 2, '-') << '\n';
    }
    if (k > 0) last_setting = l[0];
  }
  return os.str();
}

std::string BenchmarkTable::render_csv() const {
  std::ostringstream os;
  os << "experiment,setting,method,metric,seeds,failed,train_mean,train_std,test_mean_mean,test_mean_std,"
        "test_worst_mean,test_worst_std\n";
  for (const auto& r : rows) {
    auto mean = [](const Summary& s) { return s.count ? std::optional<double>(s.mean) : std::nullopt; };
    os << csv_quote(r.experiment) << ',' << csv_quote(r.setting) << ',' << r.method << ',' << r.metric << ','
       << r.test_worst.count << ',' << r.failed << ',' << csv_num(mean(r.train)) << ',' << csv_num(r.train.std)
       << ',' << csv_num(mean(r.test_mean)) << ',' << csv_num(r.test_mean.std) << ','
       << csv_num(mean(r.test_worst)) << ',' << csv_num(r.test_worst.std) << '\n';
  }
  return os.str();
}

RecordSet read_records(const std::string& path) {
  RecordSet out;
  std::vector<fs::path> files;
  if (fs::is_regular_file(path)) {
    files.emplace_back(path);
  } else if (fs::is_directory(path)) {
    for (const auto& e : fs::recursive_directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    throw IoError("no such file or directory: '" + path + "'");
  }
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw IoError("cannot read '" + f.string() + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::string why;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) {
        why = "invalid JSON";
      } else if (is_result(j, why)) {
        out.records.push_back(std::move(j));
        continue;
      }
      ++out.skipped;
      out.warnings.push_back(f.string() + ":" + std::to_string(lineno) + ": skipped (" + why + ")");
    }
  }
  std::stable_sort(out.records.begin(), out.records.end(), [](const json& a, const json& b) {
    auto key = [](const json& r) {
      return std::make_tuple(r["experiment"].get<std::string>(), r["setting"].get<std::string>(),
                             method_rank(r["method"].get<std::string>()), r["seed"].get<std::uint64_t>());
    };
    return key(a) < key(b);
  });
  return out;
}

}  // namespace zin::harness
