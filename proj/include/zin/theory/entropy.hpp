#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "zin/scm/joint_table.hpp"

namespace zin::theory {

using scm::JointTable;

enum class EntropyUnit { kNats, kBits };

/// Plug-in H(target | given) from the table; 0·log 0 = 0 and zero-mass
/// conditioning cells contribute nothing. `given` may overlap the target.
double cond_entropy(const JointTable& table, const std::string& target, const std::vector<std::string>& given,
                    EntropyUnit unit = EntropyUnit::kNats);

/// Assignment of every value in the joint support of the Z variables (mixed
/// radix, first variable most significant) to one of `num_groups` groups.
struct HardPartition {
  std::vector<std::string> z_vars;
  std::vector<int> group;
  int num_groups = 1;

  std::string to_string() const;
};

struct PenaltyResult {
  double value = 0.0;
  HardPartition witness;
};

/// Limit on the number of enumerated partitions.
inline constexpr double kMaxPartitions = 1e6;

/// Number of set partitions of m items into at most k blocks.
double count_partitions(std::size_t m, int k);

/// Calls `visit(group)` for every set partition of {0..m-1} into at most k
/// blocks, each labelled canonically by first occurrence.
template <typename Visit>
void for_each_partition(std::size_t m, int k, Visit&& visit);

/// H(Y | mask) - H(Y | mask, ρ(Z)) for one hard partition.
double partition_penalty(const JointTable& table, const std::string& target, const std::vector<std::string>& mask,
                         const HardPartition& partition);

/// Exact maximum of the penalty over all partitions of Z's support into at
/// most K groups. CapacityError beyond kMaxPartitions.
PenaltyResult max_penalty(const JointTable& table, const std::string& target, const std::vector<std::string>& mask,
                          const std::vector<std::string>& z_vars, int k);

template <typename Visit>
void for_each_partition(std::size_t m, int k, Visit&& visit) {
  if (m == 0) {
    std::vector<int> empty;
    visit(empty);
    return;
  }
  std::vector<int> g(m, 0);
  std::vector<int> prefix_max(m, 0);
  while (true) {
    visit(static_cast<const std::vector<int>&>(g));
    // Next restricted growth string with values < k.
    std::size_t i = m;
    while (i-- > 1) {
      const int limit = std::min(prefix_max[i - 1] + 1, k - 1);
      if (g[i] < limit) {
        ++g[i];
        prefix_max[i] = std::max(prefix_max[i - 1], g[i]);
        for (std::size_t j = i + 1; j < m; ++j) {
          g[j] = 0;
          prefix_max[j] = prefix_max[i];
        }
        break;
      }
    }
    if (i == 0) return;
  }
}

}  // namespace zin::theory
