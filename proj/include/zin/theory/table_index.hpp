#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "zin/scm/joint_table.hpp"

namespace zin::theory {

/// Mixed-radix index of a subset of a table's axes (first listed most
/// significant). Listing an axis twice is allowed.
class TableIndex {
 public:
  TableIndex(const scm::JointTable& table, const std::vector<std::string>& vars) {
    for (const auto& v : vars) {
      axes_.push_back(table.axis(v));
      cards_.push_back(static_cast<std::size_t>(table.cards()[axes_.back()]));
      size_ *= cards_.back();
    }
  }
  std::size_t size() const { return size_; }
  std::size_t of(const std::vector<int>& assignment) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < axes_.size(); ++i) idx = idx * cards_[i] + static_cast<std::size_t>(assignment[axes_[i]]);
    return idx;
  }

 private:
  std::vector<std::size_t> axes_;
  std::vector<std::size_t> cards_;
  std::size_t size_ = 1;
};

/// Steps a full assignment to the next cell in storage order.
inline void advance(const scm::JointTable& table, std::vector<int>& a) {
  for (std::size_t d = a.size(); d-- > 0;) {
    if (++a[d] < table.cards()[d]) return;
    a[d] = 0;
  }
}

}  // namespace zin::theory
