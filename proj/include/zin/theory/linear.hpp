#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "zin/data/dataset.hpp"
#include "zin/scm/samplers.hpp"

namespace zin::theory {

using ad::Tensor;

/// Second moments of one environment: E[XXᵀ] (d x d) and E[Xε] (d).
struct EnvMoments {
  Tensor xx;
  std::vector<double> xe;
};

struct GeneralPositionReport {
  bool holds = false;
  bool enough_envs = false;
  std::size_t num_envs = 0;
  std::size_t d = 0;
  std::size_t r = 0;
  std::size_t min_span_dim = 0;
  std::size_t probes = 0;
};

/// K > d - r + d/r, and dim span{E[XXᵀ]x - E[Xε]} > d - r over every probe
/// (unit vectors plus random directions). Rank threshold 1e-9·σ_max.
GeneralPositionReport linear_general_position(const std::vector<EnvMoments>& envs, std::size_t r,
                                              std::size_t random_probes = 64, std::uint64_t seed = 0);

struct LinearZinConfig {
  /// Dimension of the invariant subspace.
  std::size_t r = 1;
  std::size_t restarts = 20;
  std::size_t max_iter = 500;
  std::uint64_t seed = 0;
  double ridge = 1e-8;
};

struct LinearZinResult {
  Tensor phi;                     // d x d, first r rows span the invariant subspace
  std::vector<double> omega;      // d
  std::vector<double> predictor;  // Φᵀω
  std::vector<double> env_residuals;
  double constraint_residual = 0.0;
  std::size_t num_groups = 0;
  bool identifiable = false;
  GeneralPositionReport general_position;
  bool has_truth = false;
  double predictor_error = 0.0;       // ‖Φᵀω - W̃ᵀβ‖
  double spurious_coefficient = 0.0;  // max |spurious coordinate| of Φᵀω in the latent basis
};

/// Per-group moments over the finest partition of Z (one group if Z is empty).
/// E[Xε] uses residuals of `theta`.
std::vector<EnvMoments> group_moments(const data::Dataset& ds, const std::vector<double>& theta,
                                      std::vector<std::size_t>* group_sizes = nullptr);

/// Solves min R(θ) s.t. every group's normal equations hold on an r-dim
/// projection, by a damped Gauss-Newton solve over (θ, subspace) with
/// restarts. Falls back to pooled least squares when the groups cannot
/// identify the solution.
LinearZinResult train_linear_zin(const data::Dataset& ds, const LinearZinConfig& config);

/// Fills the ground-truth diagnostics of `result`.
void score_against_truth(LinearZinResult& result, const scm::LinearScmSpec& spec);

}  // namespace zin::theory
