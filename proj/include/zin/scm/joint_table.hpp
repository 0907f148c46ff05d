#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace zin::scm {

/// Dense probability table over a finite product space with named axes.
/// Cells are stored row-major: the last axis varies fastest.
class JointTable {
 public:
  JointTable() = default;
  JointTable(std::vector<std::string> names, std::vector<int> cards);
  JointTable(std::vector<std::string> names, std::vector<int> cards, std::vector<double> probs);

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<int>& cards() const { return cards_; }
  std::size_t num_axes() const { return names_.size(); }
  std::size_t size() const { return probs_.size(); }
  std::span<const double> probs() const { return probs_; }
  std::span<double> probs() { return probs_; }

  /// Axis position of `name`; SchemaError if absent.
  std::size_t axis(const std::string& name) const;
  bool has_axis(const std::string& name) const;

  std::size_t index(std::span<const int> assignment) const;
  std::vector<int> assignment(std::size_t index) const;
  double operator[](std::size_t i) const { return probs_[i]; }
  double& operator[](std::size_t i) { return probs_[i]; }
  double at(std::span<const int> assignment) const { return probs_[index(assignment)]; }
  double& at(std::span<const int> assignment) { return probs_[index(assignment)]; }

  double total() const;
  /// Throws DomainError unless entries are >= 0 and sum to 1 within `tol`.
  void validate(double tol = 1e-12) const;

  /// Sums out every axis not listed; result axes follow the order of `keep`.
  JointTable marginal(const std::vector<std::string>& keep) const;

  /// One row per cell: axis values then probability.
  void save_csv(const std::string& path) const;
  static JointTable load_csv(const std::string& path);

 private:
  std::vector<std::string> names_;
  std::vector<int> cards_;
  std::vector<std::size_t> strides_;
  std::vector<double> probs_;

  void init_strides();
};

/// Largest cell-wise difference; DimensionError when layouts differ.
double max_abs_diff(const JointTable& a, const JointTable& b);

}  // namespace zin::scm
