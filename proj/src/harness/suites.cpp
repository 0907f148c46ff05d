#include "zin/harness/suites.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "zin/common/errors.hpp"
#include "zin/harness/svg.hpp"

namespace zin::harness {

namespace {

using inv::Method;

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::string ps_setting(const std::vector<double>& p_s, double p_v) {
  std::ostringstream os;
  os << "p_s=(" << join(p_s) << ") p_v=" << p_v;
  return os.str();
}

RunConfig synthetic(const std::string& name, SourceKind kind, const std::vector<double>& p_s, double p_v,
                    std::size_t n) {
  RunConfig c;
  c.name = name;
  ScmSource s;
  s.kind = kind;
  s.p_v = p_v;
  s.p_s = p_s;
  s.n = n;
  c.data = s;
  c.setting = ps_setting(p_s, p_v);
  c.methods = {Method::kErm, Method::kEiil, Method::kZin, Method::kIrmOracle};
  return c;
}

const std::vector<double> kAblationPs = {0.999, 0.999, 0.8, 0.8};
constexpr double kAblationPv = 0.8;

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"temporal", "spatial", "mcolor", "house", "ablation_z", "ablation_k"};
  return names;
}

RunConfig temporal_config(const std::vector<double>& p_s, double p_v, std::size_t n) {
  return synthetic("temporal", SourceKind::kTemporal, p_s, p_v, n);
}

RunConfig spatial_config(const std::vector<double>& p_s, double p_v, std::size_t n) {
  return synthetic("spatial", SourceKind::kSpatial, p_s, p_v, n);
}

RunConfig feature_level_config(SourceKind kind, std::size_t n_per_env) {
  RunConfig c;
  c.name = "mcolor";
  ScmSource s;
  s.kind = kind;
  s.n = n_per_env;
  if (kind == SourceKind::kCmnist) {
    s.p_v = 0.75;
    s.p_s = {0.8, 0.9};
  } else if (kind == SourceKind::kMcolor) {
    s.p_v = 0.85;
    s.p_s = {0.8, 0.7};
  } else {
    throw ConfigError("feature-level data must be cmnist or mcolor");
  }
  c.data = s;
  c.test.p_s = {0.1};
  c.setting = to_string(kind);
  c.methods = {Method::kErm, Method::kEiil, Method::kIrmOracle};
  return c;
}

RunConfig ablation_z_config(const std::string& z, std::size_t n) {
  RunConfig c = synthetic("ablation_z", SourceKind::kSpatial, kAblationPs, kAblationPv, n);
  auto& s = std::get<ScmSource>(c.data);
  if (z == "r") {
    s.aux = {"z_r1", "z_r2"};
  } else if (z == "r1") {
    s.aux = {"z_r1"};
  } else if (z == "r2") {
    s.aux = {"z_r2"};
  } else if (z == "X") {
    s.aux = {"x_v", "x_s"};
  } else if (z == "(X,Y)") {
    s.aux = {"x_v", "x_s", "y"};
  } else {
    throw ConfigError("unknown Z choice '" + z + "'");
  }
  c.setting = "Z=" + z;
  c.methods = {Method::kZin};
  return c;
}

RunConfig ablation_k_config(int k, std::size_t n) {
  RunConfig c = synthetic("ablation_k", SourceKind::kSpatial, kAblationPs, kAblationPv, n);
  c.train.k = k;
  c.setting = "K=" + std::to_string(k);
  c.methods = {Method::kZin};
  return c;
}

std::vector<RunConfig> build_suite(const std::string& name, const std::vector<std::uint64_t>& seeds,
                                   const std::optional<RunConfig>& base) {
  std::vector<RunConfig> out;
  if (name == "temporal") {
    for (double pv : {0.9, 0.8})
      for (double late : {0.7, 0.8, 0.9}) out.push_back(temporal_config({0.999, late}, pv));
  } else if (name == "spatial") {
    const std::vector<std::vector<double>> settings = {
        {0.999, 0.999, 0.7, 0.7}, {0.999, 0.9, 0.8, 0.7}, {0.999, 0.999, 0.8, 0.8}};
    for (double pv : {0.9, 0.8})
      for (const auto& ps : settings) out.push_back(spatial_config(ps, pv));
  } else if (name == "mcolor") {
    out = {feature_level_config(SourceKind::kCmnist), feature_level_config(SourceKind::kMcolor)};
  } else if (name == "house") {
    if (!base || !std::holds_alternative<CsvSource>(base->data))
      throw ConfigError("the house suite needs --config with a csv data source");
    RunConfig c = *base;
    c.name = "house";
    if (c.setting == "default") c.setting = "house";
    c.methods = {Method::kErm, Method::kEiil, Method::kGroupDro, Method::kZin, Method::kIrmOracle};
    out.push_back(c);
  } else if (name == "ablation_z") {
    for (const char* z : {"r", "r1", "r2", "X", "(X,Y)"}) out.push_back(ablation_z_config(z));
  } else if (name == "ablation_k") {
    for (int k : {2, 3, 4, 6, 8}) out.push_back(ablation_k_config(k));
  } else {
    throw ConfigError("unknown suite '" + name + "'");
  }
  for (auto& c : out) {
    if (base && name != "house") {
      const int k = c.train.k;
      c.train = base->train;
      if (name == "ablation_k") c.train.k = k;
    }
    c.seeds = seeds;
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> suite_charts(const std::string& name, const BenchmarkTable& table) {
  std::vector<std::pair<std::string, std::string>> out;
  if (table.rows.empty()) return out;
  const bool accuracy = table.rows.front().metric == "accuracy";
  const double k = accuracy ? 100.0 : 1.0;
  const std::string unit = accuracy ? "worst test accuracy (%)" : "worst test MSE";
  if (name == "ablation_k") {
    Series s{"zin", {}, {}};
    for (const auto& r : table.rows) {
      if (r.method != "zin") continue;
      s.x.push_back(std::stod(r.setting.substr(r.setting.find('=') + 1)));
      s.y.push_back(r.test_worst.count ? r.test_worst.mean * k : std::numeric_limits<double>::quiet_NaN());
    }
    out.emplace_back("ablation_k.svg", line_chart("Worst test accuracy vs K", "K", unit, {s}));
    return out;
  }
  std::vector<std::string> categories;
  std::vector<std::string> methods;
  for (const auto& r : table.rows) {
    if (std::find(categories.begin(), categories.end(), r.setting) == categories.end())
      categories.push_back(r.setting);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  std::sort(methods.begin(), methods.end(),
            [](const std::string& a, const std::string& b) { return method_rank(a) < method_rank(b); });
  std::vector<Series> series;
  for (const auto& m : methods) {
    Series s{m, {}, {}};
    for (const auto& c : categories) {
      const TableRow* r = table.find(c, m);
      s.y.push_back(r && r->test_worst.count ? r->test_worst.mean * k : std::numeric_limits<double>::quiet_NaN());
    }
    series.push_back(std::move(s));
  }
  out.emplace_back(name + ".svg", bar_chart(name + ": worst test environment", unit, categories, series));
  return out;
}

}  // namespace zin::harness
