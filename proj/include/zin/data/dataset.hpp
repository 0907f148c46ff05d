#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zin/autodiff/tensor.hpp"

namespace zin::data {

using ad::Tensor;

/// Samples (X, Y, Z) with optional ground-truth environment ids.
///
/// Z may have zero columns, meaning no auxiliary information. Group-key
/// columns (used only for preprocessing, never for learning) live in `keys`.
struct Dataset {
  Tensor x;
  Tensor y;
  Tensor z;
  std::vector<int> env;
  Tensor keys;
  std::vector<std::string> x_names;
  std::string y_name = "y";
  std::vector<std::string> z_names;
  std::vector<std::string> key_names;

  std::size_t size() const { return y.rows(); }
  std::size_t feature_dim() const { return x.cols(); }
  std::size_t aux_dim() const { return z.cols(); }
  bool has_env() const { return !env.empty(); }
  int num_envs() const;

  /// Throws DimensionError / DomainError when an invariant is broken.
  void validate() const;

  /// Rows in the given order. Environment ids are re-compacted.
  Dataset subset(std::span<const std::size_t> rows) const;
  /// Rows whose environment id equals `e` (ids are kept as-is).
  Dataset environment(int e) const;

  /// Named numeric column from X, Z or the key block; nullopt if absent.
  std::optional<std::vector<double>> column(const std::string& name) const;

  /// Replaces Z with the named columns of X/Z/keys, or with "y" for the label.
  Dataset with_aux(const std::vector<std::string>& names) const;
};

/// Renumbers ids to 0..k-1 preserving the order of first value.
void compact_env_ids(std::vector<int>& env);

/// Concatenates datasets with identical column layouts.
Dataset concat(const std::vector<Dataset>& parts);

}  // namespace zin::data
