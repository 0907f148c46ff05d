#include "zin/theory/entropy.hpp"

#include <cmath>
#include <sstream>

#include "zin/common/errors.hpp"
#include "zin/theory/table_index.hpp"

namespace zin::theory {

namespace {

double plogp_sum(const std::vector<double>& joint, std::size_t outer, std::size_t inner) {
  // -Σ p(a,b) log(p(a,b)/p(a)) with joint laid out as [outer][inner].
  double h = 0.0;
  for (std::size_t a = 0; a < outer; ++a) {
    double pa = 0.0;
    for (std::size_t b = 0; b < inner; ++b) pa += joint[a * inner + b];
    if (pa <= 0.0) continue;
    for (std::size_t b = 0; b < inner; ++b) {
      const double p = joint[a * inner + b];
      if (p > 0.0) h -= p * std::log(p / pa);
    }
  }
  return h;
}

}  // namespace

double cond_entropy(const JointTable& table, const std::string& target, const std::vector<std::string>& given,
                    EntropyUnit unit) {
  const TableIndex g(table, given);
  const TableIndex y(table, {target});
  std::vector<double> joint(g.size() * y.size(), 0.0);
  std::vector<int> a(table.num_axes(), 0);
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i] != 0.0) joint[g.of(a) * y.size() + y.of(a)] += table[i];
    advance(table, a);
  }
  const double h = plogp_sum(joint, g.size(), y.size());
  return unit == EntropyUnit::kBits ? h / std::log(2.0) : h;
}

std::string HardPartition::to_string() const {
  std::ostringstream os;
  os << "{";
  for (int k = 0; k < num_groups; ++k) {
    if (k) os << " | ";
    bool first = true;
    for (std::size_t v = 0; v < group.size(); ++v) {
      if (group[v] != k) continue;
      os << (first ? "" : ",") << v;
      first = false;
    }
  }
  os << "} over (";
  for (std::size_t i = 0; i < z_vars.size(); ++i) os << (i ? "," : "") << z_vars[i];
  os << ")";
  return os.str();
}

double count_partitions(std::size_t m, int k) {
  if (m == 0) return 1.0;
  // Stirling numbers of the second kind by the standard recurrence.
  std::vector<double> s(static_cast<std::size_t>(k) + 1, 0.0);
  s[0] = 1.0;
  for (std::size_t n = 1; n <= m; ++n) {
    for (std::size_t j = std::min<std::size_t>(n, static_cast<std::size_t>(k)); j >= 1; --j) {
      s[j] = static_cast<double>(j) * s[j] + s[j - 1];
    }
    s[0] = 0.0;
  }
  double total = 0.0;
  for (int j = 1; j <= k; ++j) total += s[static_cast<std::size_t>(j)];
  return total;
}

namespace {

// Joint mass laid out as [mask value][z value][y value].
struct PenaltyCube {
  std::size_t n_phi = 1;
  std::size_t n_z = 1;
  std::size_t n_y = 1;
  std::vector<double> p;
  double h_given_mask = 0.0;
};

PenaltyCube build_cube(const JointTable& table, const std::string& target, const std::vector<std::string>& mask,
                       const std::vector<std::string>& z_vars) {
  const TableIndex phi(table, mask);
  const TableIndex z(table, z_vars);
  const TableIndex y(table, {target});
  PenaltyCube c;
  c.n_phi = phi.size();
  c.n_z = z.size();
  c.n_y = y.size();
  c.p.assign(c.n_phi * c.n_z * c.n_y, 0.0);
  std::vector<int> a(table.num_axes(), 0);
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i] != 0.0) c.p[(phi.of(a) * c.n_z + z.of(a)) * c.n_y + y.of(a)] += table[i];
    advance(table, a);
  }
  std::vector<double> py(c.n_phi * c.n_y, 0.0);
  for (std::size_t f = 0; f < c.n_phi; ++f)
    for (std::size_t v = 0; v < c.n_z; ++v)
      for (std::size_t t = 0; t < c.n_y; ++t) py[f * c.n_y + t] += c.p[(f * c.n_z + v) * c.n_y + t];
  c.h_given_mask = plogp_sum(py, c.n_phi, c.n_y);
  return c;
}

double cube_penalty(const PenaltyCube& c, const std::vector<int>& group, int num_groups, std::vector<double>& scratch) {
  const auto kg = static_cast<std::size_t>(num_groups);
  scratch.assign(c.n_phi * kg * c.n_y, 0.0);
  for (std::size_t f = 0; f < c.n_phi; ++f)
    for (std::size_t v = 0; v < c.n_z; ++v) {
      const std::size_t g = c.n_z == 1 && group.empty() ? 0 : static_cast<std::size_t>(group[v]);
      for (std::size_t t = 0; t < c.n_y; ++t) scratch[(f * kg + g) * c.n_y + t] += c.p[(f * c.n_z + v) * c.n_y + t];
    }
  const double h = plogp_sum(scratch, c.n_phi * kg, c.n_y);
  return std::max(0.0, c.h_given_mask - h);
}

}  // namespace

double partition_penalty(const JointTable& table, const std::string& target, const std::vector<std::string>& mask,
                         const HardPartition& partition) {
  const PenaltyCube c = build_cube(table, target, mask, partition.z_vars);
  if (partition.group.size() != c.n_z) throw DimensionError("partition does not cover Z's support");
  for (int g : partition.group)
    if (g < 0 || g >= partition.num_groups) throw DomainError("partition group id out of range");
  std::vector<double> scratch;
  return cube_penalty(c, partition.group, partition.num_groups, scratch);
}

PenaltyResult max_penalty(const JointTable& table, const std::string& target, const std::vector<std::string>& mask,
                          const std::vector<std::string>& z_vars, int k) {
  if (k < 1) throw ConfigError("K must be at least 1");
  const PenaltyCube c = build_cube(table, target, mask, z_vars);
  const double count = count_partitions(c.n_z, k);
  if (count > kMaxPartitions) {
    throw CapacityError("max_penalty would enumerate " + std::to_string(static_cast<long long>(count)) +
                        " partitions (limit 10^6); reduce K or the support of Z");
  }
  PenaltyResult best;
  best.witness.z_vars = z_vars;
  best.witness.group.assign(c.n_z, 0);
  best.witness.num_groups = 1;
  best.value = -1.0;
  std::vector<double> scratch;
  const int groups = std::max(1, std::min<int>(k, static_cast<int>(c.n_z)));
  for_each_partition(c.n_z, groups, [&](const std::vector<int>& g) {
    int used = 1;
    for (int v : g) used = std::max(used, v + 1);
    const double pen = cube_penalty(c, g, used, scratch);
    if (pen > best.value + 1e-15) {
      best.value = pen;
      best.witness.group = g;
      best.witness.num_groups = used;
    }
  });
  best.value = std::max(0.0, best.value);
  return best;
}

}  // namespace zin::theory
