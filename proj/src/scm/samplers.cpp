#include "zin/scm/samplers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "zin/common/errors.hpp"

namespace zin::scm {

namespace {

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(what + " must lie in [0,1], got " + std::to_string(p));
}

void check_p_v(double p_v) {
  if (!(p_v > 0.5 && p_v <= 1.0)) throw ConfigError("p_v must lie in (0.5,1], got " + std::to_string(p_v));
}

double sign_of(double v) { return v >= 0.0 ? 1.0 : -1.0; }

struct MixtureDraw {
  double x_v;
  double x_s;
  double y;
};

// One draw of the shared Gaussian-mixture mechanism; y is in {-1,+1}.
MixtureDraw draw_mixture(double p_v, double p_s, double sigma, std::mt19937_64& rng) {
  std::bernoulli_distribution half(0.5);
  std::bernoulli_distribution keep_v(p_v);
  std::bernoulli_distribution keep_s(p_s);
  std::normal_distribution<double> noise(0.0, 1.0);
  MixtureDraw d{};
  const double component = half(rng) ? 1.0 : -1.0;
  d.x_v = component + sigma * noise(rng);
  d.y = keep_v(rng) ? sign_of(d.x_v) : -sign_of(d.x_v);
  const double centre = keep_s(rng) ? d.y : -d.y;
  d.x_s = centre + sigma * noise(rng);
  return d;
}

Dataset mixture_dataset(std::size_t n, std::size_t dz) {
  Dataset ds;
  ds.x = Tensor(n, 2);
  ds.x_names = {"x_v", "x_s"};
  ds.y = Tensor(n, 1);
  ds.z = Tensor(n, dz);
  ds.keys = Tensor(n, 0);
  ds.env.assign(n, 0);
  return ds;
}

void store(Dataset& ds, std::size_t i, const MixtureDraw& d) {
  ds.x(i, 0) = d.x_v;
  ds.x(i, 1) = d.x_s;
  ds.y[i] = (d.y + 1.0) / 2.0;
}

}  // namespace

void TemporalSpec::validate() const {
  check_p_v(p_v);
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
  if (segments.empty()) throw ConfigError("temporal spec needs at least one segment");
  double expected = 0.0;
  for (const auto& s : segments) {
    if (std::abs(s.lo - expected) > 1e-12 || !(s.hi > s.lo)) {
      throw ConfigError("time segments must tile [0,1] in increasing order");
    }
    check_probability(s.p_s, "p_s");
    expected = s.hi;
  }
  if (std::abs(expected - 1.0) > 1e-12) throw ConfigError("time segments must end at 1");
}

TemporalSpec TemporalSpec::two_env(double ps_early, double ps_late, double p_v, std::size_t n, std::uint64_t seed,
                                   double sigma) {
  TemporalSpec s;
  s.p_v = p_v;
  s.segments = {{0.0, 0.5, ps_early}, {0.5, 1.0, ps_late}};
  s.sigma = sigma;
  s.n = n;
  s.seed = seed;
  return s;
}

bool SpatialBlock::contains(double r1, double r2) const {
  const bool in1 = r1 >= r1_lo && (r1 < r1_hi || (r1_hi >= 1.0 && r1 <= 1.0));
  const bool in2 = r2 >= r2_lo && (r2 < r2_hi || (r2_hi >= 1.0 && r2 <= 1.0));
  return in1 && in2;
}

void SpatialSpec::validate() const {
  check_p_v(p_v);
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
  if (blocks.empty()) throw ConfigError("spatial spec needs at least one block");
  double area = 0.0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (!(b.r1_lo >= 0.0 && b.r1_hi <= 1.0 && b.r2_lo >= 0.0 && b.r2_hi <= 1.0 && b.r1_lo < b.r1_hi &&
          b.r2_lo < b.r2_hi)) {
      throw ConfigError("spatial block " + std::to_string(i) + " is not a rectangle inside the unit square");
    }
    check_probability(b.p_s, "p_s");
    area += (b.r1_hi - b.r1_lo) * (b.r2_hi - b.r2_lo);
    for (std::size_t j = 0; j < i; ++j) {
      const auto& c = blocks[j];
      const bool apart = b.r1_hi <= c.r1_lo || c.r1_hi <= b.r1_lo || b.r2_hi <= c.r2_lo || c.r2_hi <= b.r2_lo;
      if (!apart) throw ConfigError("spatial blocks " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
    }
  }
  if (std::abs(area - 1.0) > 1e-12) throw ConfigError("spatial blocks must cover the unit square");
}

SpatialSpec SpatialSpec::four_blocks(const std::vector<double>& p_s, double p_v, std::size_t n, std::uint64_t seed,
                                     double sigma) {
  if (p_s.size() != 4) throw ConfigError("four_blocks needs exactly four p_s values");
  SpatialSpec s;
  s.p_v = p_v;
  s.sigma = sigma;
  s.n = n;
  s.seed = seed;
  for (int b = 0; b < 4; ++b) {
    const double r1 = (b % 2) * 0.5;
    const double r2 = (b / 2) * 0.5;
    s.blocks.push_back({r1, r1 + 0.5, r2, r2 + 0.5, p_s[static_cast<std::size_t>(b)]});
  }
  return s;
}

Dataset sample_temporal(const TemporalSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset ds = mixture_dataset(spec.n, 1);
  ds.z_names = {"z_t"};
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double t = unit(rng);
    std::size_t seg = 0;
    while (seg + 1 < spec.segments.size() && t >= spec.segments[seg].hi) ++seg;
    store(ds, i, draw_mixture(spec.p_v, spec.segments[seg].p_s, spec.sigma, rng));
    ds.z(i, 0) = t;
    ds.env[i] = static_cast<int>(seg);
  }
  data::compact_env_ids(ds.env);
  return ds;
}

Dataset sample_spatial(const SpatialSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset ds = mixture_dataset(spec.n, 2);
  ds.z_names = {"z_r1", "z_r2"};
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double r1 = unit(rng);
    const double r2 = unit(rng);
    std::size_t block = 0;
    while (block + 1 < spec.blocks.size() && !spec.blocks[block].contains(r1, r2)) ++block;
    store(ds, i, draw_mixture(spec.p_v, spec.blocks[block].p_s, spec.sigma, rng));
    ds.z(i, 0) = r1;
    ds.z(i, 1) = r2;
    ds.env[i] = static_cast<int>(block);
  }
  data::compact_env_ids(ds.env);
  return ds;
}

Dataset sample_fixed_ps(double p_v, double p_s, double sigma, std::size_t n, std::uint64_t seed) {
  TemporalSpec spec;
  spec.p_v = p_v;
  spec.segments = {{0.0, 1.0, p_s}};
  spec.sigma = sigma;
  spec.n = n;
  spec.seed = seed;
  return sample_temporal(spec);
}

double bayes_invariant_accuracy(double p_v) {
  check_p_v(p_v);
  return p_v;
}

double component_label_accuracy(double p_v, double sigma) {
  if (!(sigma > 0.0)) return p_v;
  const double phi = 0.5 * std::erfc(-(1.0 / sigma) / std::sqrt(2.0));
  return phi * p_v + (1.0 - phi) * (1.0 - p_v);
}

void LinearScmSpec::validate() const {
  if (beta.empty()) throw ConfigError("linear SCM needs at least one invariant coordinate");
  if (envs.empty()) throw ConfigError("linear SCM needs at least one environment");
  const std::size_t dv = d_v();
  const std::size_t ds = d_s();
  if (w.cols() != dv + ds || w.rows() < dv + ds) {
    throw ConfigError("scramble W must be d x (d_v + d_s) with d >= d_v + d_s");
  }
  double mass = 0.0;
  for (const auto& e : envs) {
    if (!(e.alpha > 0.0)) throw ConfigError("environment weights must be positive");
    if (e.xv_mean.size() != dv || e.xv_scale.size() != dv || e.gamma.size() != ds) {
      throw ConfigError("environment parameter lengths do not match d_v/d_s");
    }
    mass += e.alpha;
  }
  if (std::abs(mass - 1.0) > 1e-12) throw ConfigError("environment weights must sum to 1");
  if (!(eps_std >= 0.0)) throw ConfigError("eps_std must be non-negative");
}

Tensor unscrambler(const LinearScmSpec& spec) {
  const std::size_t d = spec.w.rows();
  const std::size_t m = spec.w.cols();
  Eigen::MatrixXd w(d, m);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < m; ++j) w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = spec.w(i, j);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 1e-10 * s(0)) {
    throw ConstructionError("scramble W is not of full column rank");
  }
  const Eigen::MatrixXd pinv = svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
  const std::size_t dv = spec.d_v();
  Tensor out(dv, d);
  for (std::size_t i = 0; i < dv; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = pinv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  const Eigen::MatrixXd check = pinv * w - Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  if (check.cwiseAbs().maxCoeff() > 1e-9) throw ConstructionError("scramble W has no accurate left inverse");
  return out;
}

Dataset sample_linear(const LinearScmSpec& spec) {
  spec.validate();
  unscrambler(spec);
  const std::size_t dv = spec.d_v();
  const std::size_t dsp = spec.d_s();
  const std::size_t d = spec.w.rows();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::size_t> counts;
  std::size_t assigned = 0;
  for (std::size_t e = 0; e < spec.envs.size(); ++e) {
    std::size_t c = e + 1 == spec.envs.size()
                        ? spec.n - assigned
                        : static_cast<std::size_t>(std::llround(spec.envs[e].alpha * static_cast<double>(spec.n)));
    c = std::min(c, spec.n - assigned);
    counts.push_back(c);
    assigned += c;
  }

  Dataset ds;
  ds.x = Tensor(spec.n, d);
  ds.y = Tensor(spec.n, 1);
  ds.z = Tensor(spec.n, 1);
  ds.keys = Tensor(spec.n, 0);
  ds.z_names = {"z_env"};
  for (std::size_t j = 0; j < d; ++j) ds.x_names.push_back("x" + std::to_string(j));
  ds.env.resize(spec.n);

  std::size_t row = 0;
  for (std::size_t e = 0; e < spec.envs.size(); ++e) {
    const LinearEnvSpec& env = spec.envs[e];
    const auto ne = static_cast<Eigen::Index>(counts[e]);
    Eigen::MatrixXd xv(ne, static_cast<Eigen::Index>(dv));
    Eigen::VectorXd eps(ne);
    for (Eigen::Index i = 0; i < ne; ++i) {
      for (std::size_t j = 0; j < dv; ++j) {
        xv(i, static_cast<Eigen::Index>(j)) = env.xv_mean[j] + env.xv_scale[j] * gauss(rng);
      }
      eps(i) = spec.eps_std * gauss(rng);
    }
    if (spec.orthogonal_noise && ne > static_cast<Eigen::Index>(dv) + 1) {
      Eigen::MatrixXd design(ne, static_cast<Eigen::Index>(dv) + 1);
      design.col(0).setOnes();
      design.rightCols(static_cast<Eigen::Index>(dv)) = xv;
      const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(eps);
      eps -= design * coef;
      const Eigen::VectorXd again = design.colPivHouseholderQr().solve(eps);
      eps -= design * again;
    }
    for (Eigen::Index i = 0; i < ne; ++i, ++row) {
      double y = eps(i);
      for (std::size_t j = 0; j < dv; ++j) y += xv(i, static_cast<Eigen::Index>(j)) * spec.beta[j];
      std::vector<double> latent(dv + dsp);
      for (std::size_t j = 0; j < dv; ++j) latent[j] = xv(i, static_cast<Eigen::Index>(j));
      for (std::size_t j = 0; j < dsp; ++j) latent[dv + j] = env.gamma[j] * y + env.xs_noise * gauss(rng);
      for (std::size_t r = 0; r < d; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < dv + dsp; ++c) acc += spec.w(r, c) * latent[c];
        ds.x(row, r) = acc;
      }
      ds.y[row] = y;
      ds.z(row, 0) = static_cast<double>(e);
      ds.env[row] = static_cast<int>(e);
    }
  }
  data::compact_env_ids(ds.env);
  return ds;
}

LinearScmSpec random_linear_spec(std::size_t d_v, std::size_t d_s, std::size_t k, std::size_t n,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.5, 2.0);
  const std::size_t d = d_v + d_s;
  LinearScmSpec spec;
  spec.n = n;
  spec.seed = seed + 1;
  spec.eps_std = 0.5;
  for (std::size_t j = 0; j < d_v; ++j) spec.beta.push_back(gauss(rng));
  for (int attempt = 0;; ++attempt) {
    spec.w = Tensor(d, d);
    for (double& v : spec.w.values()) v = gauss(rng);
    for (std::size_t j = 0; j < d; ++j) spec.w(j, j) += 2.0;
    Eigen::MatrixXd w = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        spec.w.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);
    const auto& s = svd.singularValues();
    if (s(s.size() - 1) > s(0) / 50.0 || attempt > 100) break;
  }
  for (std::size_t e = 0; e < k; ++e) {
    LinearEnvSpec env;
    env.alpha = 1.0 / static_cast<double>(k);
    for (std::size_t j = 0; j < d_v; ++j) {
      env.xv_mean.push_back(gauss(rng));
      env.xv_scale.push_back(scale(rng));
    }
    for (std::size_t j = 0; j < d_s; ++j) env.gamma.push_back(2.0 * gauss(rng));
    env.xs_noise = 0.3;
    spec.envs.push_back(std::move(env));
  }
  double mass = 0.0;
  for (std::size_t e = 0; e + 1 < k; ++e) mass += spec.envs[e].alpha;
  spec.envs.back().alpha = 1.0 - mass;
  return spec;
}

FeatureLevelPair sample_feature_level(FeatureLevel kind, const std::vector<double>& p_s_train, double p_s_test,
                                      std::size_t n_per_env, std::uint64_t seed) {
  if (p_s_train.empty()) throw ConfigError("feature-level data needs at least one train environment");
  for (double p : p_s_train) check_probability(p, "p_s");
  check_probability(p_s_test, "p_s");
  const double p_v = kind == FeatureLevel::kCmnist ? 0.75 : 0.85;
  std::mt19937_64 rng(seed);

  auto make = [&](const std::vector<double>& ps) {
    std::bernoulli_distribution fair(0.5);
    std::bernoulli_distribution keep_v(p_v);
    Dataset ds;
    const std::size_t n = n_per_env * ps.size();
    ds.x = Tensor(n, 2);
    ds.x_names = {"shape", "color"};
    ds.y = Tensor(n, 1);
    ds.z = Tensor(n, 0);
    ds.keys = Tensor(n, 0);
    ds.env.resize(n);
    std::size_t row = 0;
    for (std::size_t e = 0; e < ps.size(); ++e) {
      std::bernoulli_distribution keep_s(ps[e]);
      for (std::size_t i = 0; i < n_per_env; ++i, ++row) {
        const int inv = fair(rng) ? 1 : 0;
        const int y = keep_v(rng) ? inv : 1 - inv;
        const int spur = keep_s(rng) ? y : 1 - y;
        const int shape = kind == FeatureLevel::kCmnist ? inv : spur;
        const int color = kind == FeatureLevel::kCmnist ? spur : inv;
        ds.x(row, 0) = shape;
        ds.x(row, 1) = color;
        ds.y[row] = y;
        ds.env[row] = static_cast<int>(e);
      }
    }
    return ds;
  };

  FeatureLevelPair out;
  out.train = make(p_s_train);
  out.test = make({p_s_test});
  out.invariant_accuracy = p_v;
  return out;
}

FeatureLevelPair sample_mcolor_pair(const std::vector<double>& p_s_train, double p_s_test, std::size_t n_per_env,
                                    std::uint64_t seed) {
  return sample_feature_level(FeatureLevel::kMcolor, p_s_train, p_s_test, n_per_env, seed);
}

}  // namespace zin::scm
