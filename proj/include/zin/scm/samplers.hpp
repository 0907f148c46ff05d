#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "zin/autodiff/tensor.hpp"
#include "zin/data/dataset.hpp"

namespace zin::scm {

using ad::Tensor;
using data::Dataset;

/// p_s on the time interval [lo, hi); the interval ending at 1 is closed.
struct TimeSegment {
  double lo = 0.0;
  double hi = 1.0;
  double p_s = 0.5;
};

struct TemporalSpec {
  double p_v = 0.9;
  std::vector<TimeSegment> segments;
  double sigma = 0.5;
  std::size_t n = 1000;
  std::uint64_t seed = 0;

  /// Segments must tile [0,1] in order; probabilities in [0,1], p_v in (0.5,1].
  void validate() const;
  /// Two environments split at t = 0.5.
  static TemporalSpec two_env(double ps_early, double ps_late, double p_v, std::size_t n, std::uint64_t seed,
                              double sigma = 0.5);
};

/// Axis-aligned rectangle [r1_lo, r1_hi) x [r2_lo, r2_hi); edges at 1 are closed.
struct SpatialBlock {
  double r1_lo = 0.0;
  double r1_hi = 1.0;
  double r2_lo = 0.0;
  double r2_hi = 1.0;
  double p_s = 0.5;

  bool contains(double r1, double r2) const;
};

struct SpatialSpec {
  double p_v = 0.9;
  std::vector<SpatialBlock> blocks;
  double sigma = 0.5;
  std::size_t n = 1000;
  std::uint64_t seed = 0;

  /// Blocks must tile [0,1]^2 without overlap.
  void validate() const;
  /// Four equal quadrants; block index = 2*[r2 >= 0.5] + [r1 >= 0.5].
  static SpatialSpec four_blocks(const std::vector<double>& p_s, double p_v, std::size_t n, std::uint64_t seed,
                                 double sigma = 0.5);
};

/// Temporal generator: t ~ U[0,1], X_v ~ N(±1, σ²), Y' = ±sign(X_v) with
/// probability p_v / 1-p_v, X_s ~ N(±Y', σ²) with probability p_s(t) / 1-p_s(t).
/// Features (x_v, x_s), label (Y'+1)/2, Z = z_t, env = segment index.
Dataset sample_temporal(const TemporalSpec& spec);

/// Same mechanism with Z = (z_r1, z_r2) uniform on the unit square, env = block index.
Dataset sample_spatial(const SpatialSpec& spec);

/// Test environment with a constant p_s (t uniform, single env id 0).
Dataset sample_fixed_ps(double p_v, double p_s, double sigma, std::size_t n, std::uint64_t seed);

/// Accuracy of the best classifier that uses X_v only: predict sign(X_v).
double bayes_invariant_accuracy(double p_v);

/// Accuracy of sign(X_v) when Y follows the mixture component instead of
/// sign(X_v): Φ(1/σ)p_v + (1-Φ(1/σ))(1-p_v).
double component_label_accuracy(double p_v, double sigma);

/// Environment of a linear SCM: X_v ~ N(mean, diag(scale²)), X_s = γ·Y + N(0, xs_noise²).
struct LinearEnvSpec {
  double alpha = 1.0;
  std::vector<double> xv_mean;
  std::vector<double> xv_scale;
  std::vector<double> gamma;
  double xs_noise = 0.1;
};

struct LinearScmSpec {
  std::vector<double> beta;
  Tensor w;
  double eps_std = 0.5;
  std::vector<LinearEnvSpec> envs;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  /// Makes ε_v exactly orthogonal to (1, X_v) within every environment sample.
  bool orthogonal_noise = true;

  std::size_t d_v() const { return beta.size(); }
  std::size_t d_s() const { return envs.empty() ? 0 : envs.front().gamma.size(); }
  void validate() const;
};

/// Left unscrambler W̃ (d_v x d) with W̃·W = [I 0]; ConstructionError if W
/// lacks full column rank.
Tensor unscrambler(const LinearScmSpec& spec);

/// X = [X_v, X_s]·Wᵀ, Y = X_v·β + ε_v; Z = z_env (environment code); env ids.
/// Environment sizes are round(α_e·n) with the remainder on the last one.
Dataset sample_linear(const LinearScmSpec& spec);

/// Random linear SCM with `k` environments of distinct moments and a random
/// well-conditioned square scramble.
LinearScmSpec random_linear_spec(std::size_t d_v, std::size_t d_s, std::size_t k, std::size_t n,
                                 std::uint64_t seed);

enum class FeatureLevel { kCmnist, kMcolor };

struct FeatureLevelPair {
  Dataset train;
  Dataset test;
  double invariant_accuracy = 0.0;
};

/// Binary (shape, color) datasets. CMNIST: shape invariant, label copies shape
/// w.p. 0.75, color copies label w.p. p_s. MCOLOR: color invariant (0.85),
/// shape copies label w.p. p_s. One train environment per p_s value.
FeatureLevelPair sample_feature_level(FeatureLevel kind, const std::vector<double>& p_s_train, double p_s_test,
                                      std::size_t n_per_env, std::uint64_t seed);

/// MCOLOR-roles pair.
FeatureLevelPair sample_mcolor_pair(const std::vector<double>& p_s_train, double p_s_test, std::size_t n_per_env,
                                    std::uint64_t seed);

}  // namespace zin::scm
