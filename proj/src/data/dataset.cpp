#include "zin/data/dataset.hpp"

#include <algorithm>
#include <map>

#include "zin/common/errors.hpp"

namespace zin::data {

namespace {

Tensor take_rows(const Tensor& t, std::span<const std::size_t> rows) {
  Tensor out(rows.size(), t.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < t.cols(); ++c) out(i, c) = t(rows[i], c);
  return out;
}

Tensor stack_rows(const std::vector<const Tensor*>& parts, std::size_t cols) {
  std::size_t total = 0;
  for (const Tensor* p : parts) total += p->rows();
  Tensor out(total, cols);
  std::size_t r = 0;
  for (const Tensor* p : parts) {
    if (p->cols() != cols) throw DimensionError("concat: column counts differ");
    for (std::size_t i = 0; i < p->rows(); ++i, ++r)
      for (std::size_t c = 0; c < cols; ++c) out(r, c) = (*p)(i, c);
  }
  return out;
}

}  // namespace

int Dataset::num_envs() const {
  if (env.empty()) return 0;
  return *std::max_element(env.begin(), env.end()) + 1;
}

void Dataset::validate() const {
  const std::size_t n = y.rows();
  if (y.cols() != 1) throw DimensionError("label must be a single column");
  if (x.rows() != n) throw DimensionError("X has " + std::to_string(x.rows()) + " rows, Y has " + std::to_string(n));
  if (z.rows() != n) throw DimensionError("Z has " + std::to_string(z.rows()) + " rows, Y has " + std::to_string(n));
  if (x.cols() == 0) throw DimensionError("dataset needs at least one feature column");
  if (x_names.size() != x.cols()) throw DimensionError("X column names do not match X width");
  if (z_names.size() != z.cols()) throw DimensionError("Z column names do not match Z width");
  if (!keys.empty() && keys.rows() != n) throw DimensionError("key block row count mismatch");
  if (key_names.size() != keys.cols()) throw DimensionError("key column names do not match key width");
  if (!env.empty()) {
    if (env.size() != n) throw DimensionError("env ids do not cover every row");
    std::vector<char> seen(static_cast<std::size_t>(num_envs()), 0);
    for (int e : env) {
      if (e < 0) throw DomainError("negative environment id");
      seen[static_cast<std::size_t>(e)] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
      throw DomainError("environment ids are not contiguous from 0");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.x = take_rows(x, rows);
  out.y = take_rows(y, rows);
  out.z = take_rows(z, rows);
  out.keys = keys.cols() ? take_rows(keys, rows) : Tensor(rows.size(), 0);
  out.x_names = x_names;
  out.y_name = y_name;
  out.z_names = z_names;
  out.key_names = key_names;
  if (!env.empty()) {
    out.env.reserve(rows.size());
    for (std::size_t r : rows) out.env.push_back(env[r]);
    compact_env_ids(out.env);
  }
  return out;
}

Dataset Dataset::environment(int e) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < env.size(); ++i)
    if (env[i] == e) rows.push_back(i);
  Dataset out = subset(rows);
  std::fill(out.env.begin(), out.env.end(), e);
  return out;
}

std::optional<std::vector<double>> Dataset::column(const std::string& name) const {
  auto grab = [&](const Tensor& t, const std::vector<std::string>& names)
      -> std::optional<std::vector<double>> {
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (names[c] != name) continue;
      std::vector<double> out(t.rows());
      for (std::size_t r = 0; r < t.rows(); ++r) out[r] = t(r, c);
      return out;
    }
    return std::nullopt;
  };
  if (auto c = grab(keys, key_names)) return c;
  if (auto c = grab(z, z_names)) return c;
  if (auto c = grab(x, x_names)) return c;
  if (name == y_name) return std::vector<double>(y.values().begin(), y.values().end());
  return std::nullopt;
}

Dataset Dataset::with_aux(const std::vector<std::string>& names) const {
  Dataset out = *this;
  out.z = Tensor(size(), names.size());
  out.z_names = names;
  for (std::size_t c = 0; c < names.size(); ++c) {
    auto col = column(names[c]);
    if (!col) throw SchemaError("no column named '" + names[c] + "' to use as auxiliary input");
    for (std::size_t r = 0; r < size(); ++r) out.z(r, c) = (*col)[r];
  }
  return out;
}

void compact_env_ids(std::vector<int>& env) {
  std::map<int, int> remap;
  for (int e : env) remap.emplace(e, 0);
  int next = 0;
  for (auto& [from, to] : remap) to = next++;
  for (int& e : env) e = remap[e];
}

Dataset concat(const std::vector<Dataset>& parts) {
  if (parts.empty()) throw DimensionError("concat of zero datasets");
  const Dataset& first = parts.front();
  std::vector<const Tensor*> xs, ys, zs, ks;
  bool with_env = true;
  for (const Dataset& p : parts) {
    if (p.x_names != first.x_names || p.z_names != first.z_names || p.key_names != first.key_names) {
      throw DimensionError("concat: datasets have different column layouts");
    }
    xs.push_back(&p.x);
    ys.push_back(&p.y);
    zs.push_back(&p.z);
    ks.push_back(&p.keys);
    with_env = with_env && p.has_env();
  }
  Dataset out;
  out.x = stack_rows(xs, first.x.cols());
  out.y = stack_rows(ys, 1);
  out.z = stack_rows(zs, first.z.cols());
  out.keys = first.keys.cols() ? stack_rows(ks, first.keys.cols()) : Tensor(out.y.rows(), 0);
  out.x_names = first.x_names;
  out.y_name = first.y_name;
  out.z_names = first.z_names;
  out.key_names = first.key_names;
  if (with_env) {
    for (const Dataset& p : parts) out.env.insert(out.env.end(), p.env.begin(), p.env.end());
  }
  return out;
}

}  // namespace zin::data
