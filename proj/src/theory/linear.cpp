#include "zin/theory/linear.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <random>

#include "zin/common/errors.hpp"

namespace zin::theory {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index ix(std::size_t i) { return static_cast<Index>(i); }

std::size_t span_rank(const MatrixXd& m) {
  if (m.size() == 0) return 0;
  const Eigen::JacobiSVD<MatrixXd> svd(m);
  const VectorXd s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  std::size_t rank = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > 1e-9 * s(0)) ++rank;
  return rank;
}

struct Groups {
  std::vector<MatrixXd> a;  // E_k[XXᵀ]
  std::vector<VectorXd> b;  // E_k[XY]
  std::vector<std::size_t> sizes;
  MatrixXd pooled_a;
  VectorXd pooled_b;
};

Groups build_groups(const data::Dataset& ds, double ridge, bool warn) {
  const std::size_t n = ds.size();
  const std::size_t d = ds.feature_dim();
  if (n == 0 || d == 0) throw DimensionError("linear ZIN needs a non-empty dataset with features");
  std::map<std::vector<double>, std::size_t> ids;
  std::vector<std::size_t> group(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> key(ds.aux_dim());
    for (std::size_t j = 0; j < key.size(); ++j) key[j] = ds.z(i, j);
    group[i] = ids.try_emplace(std::move(key), ids.size()).first->second;
  }
  Groups g;
  const std::size_t k = ids.size();
  g.a.assign(k, MatrixXd::Zero(ix(d), ix(d)));
  g.b.assign(k, VectorXd::Zero(ix(d)));
  g.sizes.assign(k, 0);
  VectorXd x(ix(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(ix(j)) = ds.x(i, j);
    g.a[group[i]].noalias() += x * x.transpose();
    g.b[group[i]] += x * ds.y[i];
    ++g.sizes[group[i]];
  }
  g.pooled_a = MatrixXd::Zero(ix(d), ix(d));
  g.pooled_b = VectorXd::Zero(ix(d));
  for (std::size_t e = 0; e < k; ++e) {
    g.pooled_a += g.a[e];
    g.pooled_b += g.b[e];
    g.a[e] /= static_cast<double>(g.sizes[e]);
    g.b[e] /= static_cast<double>(g.sizes[e]);
    if (span_rank(g.a[e]) < d) {
      if (warn) std::cerr << "warning: group " << e << " has a singular second moment; adding ridge " << ridge << "\n";
      g.a[e] += ridge * MatrixXd::Identity(ix(d), ix(d));
    }
  }
  g.pooled_a /= static_cast<double>(n);
  g.pooled_b /= static_cast<double>(n);
  if (span_rank(g.pooled_a) < d) g.pooled_a += ridge * MatrixXd::Identity(ix(d), ix(d));
  return g;
}

MatrixXd gradient_matrix(const Groups& g, const VectorXd& theta) {
  MatrixXd out(theta.size(), ix(g.a.size()));
  for (std::size_t k = 0; k < g.a.size(); ++k) out.col(ix(k)) = g.a[k] * theta - g.b[k];
  return out;
}

MatrixXd complement(const MatrixXd& u) {
  const Index d = u.rows();
  const Eigen::HouseholderQR<MatrixXd> qr(u);
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(d, d);
  return q.rightCols(d - u.cols());
}

MatrixXd orthonormalize(const MatrixXd& u) {
  const Eigen::HouseholderQR<MatrixXd> qr(u);
  return qr.householderQ() * MatrixXd::Identity(u.rows(), u.cols());
}

struct Fit {
  VectorXd theta;
  MatrixXd u;
  double residual = std::numeric_limits<double>::infinity();
};

double objective(const Groups& g, const VectorXd& theta, const MatrixXd& u) {
  return (u.transpose() * gradient_matrix(g, theta)).squaredNorm();
}

Fit levenberg_marquardt(const Groups& g, VectorXd theta, std::size_t r, std::size_t max_iter) {
  const Index d = theta.size();
  const Index k = ix(g.a.size());
  const Index rr = ix(r);
  const Eigen::JacobiSVD<MatrixXd> svd0(gradient_matrix(g, theta), Eigen::ComputeFullU);
  MatrixXd u = svd0.matrixU().rightCols(rr);
  double f = objective(g, theta, u);
  double mu = 1e-6;
  const Index n_par = d + (d - rr) * rr;
  for (std::size_t it = 0; it < max_iter && f >= 1e-30; ++it) {
    const MatrixXd uc = complement(u);
    const MatrixXd grad = gradient_matrix(g, theta);
    MatrixXd jac = MatrixXd::Zero(rr * k, n_par);
    MatrixXd cols(d, k);
    for (Index j = 0; j < d; ++j) {
      for (Index e = 0; e < k; ++e) cols.col(e) = g.a[static_cast<std::size_t>(e)].col(j);
      const MatrixXd block = u.transpose() * cols;
      for (Index b = 0; b < rr; ++b) jac.block(b * k, j, k, 1) = block.row(b).transpose();
    }
    for (Index a = 0; a < d - rr; ++a) {
      const Eigen::RowVectorXd row = uc.col(a).transpose() * grad;
      for (Index b = 0; b < rr; ++b) jac.block(b * k, d + a * rr + b, k, 1) = row.transpose();
    }
    const MatrixXd res_m = u.transpose() * grad;
    VectorXd res(rr * k);
    for (Index b = 0; b < rr; ++b) res.segment(b * k, k) = res_m.row(b).transpose();

    bool accepted = false;
    while (!accepted) {
      MatrixXd stacked(rr * k + n_par, n_par);
      stacked << jac, std::sqrt(mu) * MatrixXd::Identity(n_par, n_par);
      VectorXd rhs = VectorXd::Zero(rr * k + n_par);
      rhs.head(rr * k) = res;
      const VectorXd step = stacked.colPivHouseholderQr().solve(rhs);
      const VectorXd theta2 = theta - step.head(d);
      MatrixXd p(d - rr, rr);
      for (Index a = 0; a < d - rr; ++a)
        for (Index b = 0; b < rr; ++b) p(a, b) = step(d + a * rr + b);
      const MatrixXd u2 = orthonormalize(u - uc * p);
      const double f2 = objective(g, theta2, u2);
      if (f2 < f) {
        theta = theta2;
        u = u2;
        f = f2;
        mu = std::max(mu / 10.0, 1e-15);
        accepted = true;
      } else {
        mu *= 10.0;
        if (mu > 1e10) return {theta, u, std::sqrt(f)};
      }
    }
  }
  return {theta, u, std::sqrt(f)};
}

std::vector<double> to_vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

GeneralPositionReport linear_general_position(const std::vector<EnvMoments>& envs, std::size_t r,
                                              std::size_t random_probes, std::uint64_t seed) {
  if (envs.empty()) throw ConfigError("at least one environment is required");
  GeneralPositionReport rep;
  rep.d = envs.front().xx.rows();
  rep.r = r;
  rep.num_envs = envs.size();
  const std::size_t d = rep.d;
  if (r < 1 || r > d) throw ConfigError("r must lie in [1, d]");
  std::vector<MatrixXd> a;
  std::vector<VectorXd> e;
  for (const auto& m : envs) {
    if (m.xx.rows() != d || m.xx.cols() != d || m.xe.size() != d) throw DimensionError("inconsistent moment shapes");
    MatrixXd am(ix(d), ix(d));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) am(ix(i), ix(j)) = m.xx(i, j);
    a.push_back(am);
    e.push_back(Eigen::Map<const VectorXd>(m.xe.data(), ix(d)));
  }
  rep.enough_envs = static_cast<double>(envs.size()) >
                    static_cast<double>(d) - static_cast<double>(r) + static_cast<double>(d) / static_cast<double>(r);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  rep.min_span_dim = d;
  auto probe = [&](const VectorXd& x) {
    MatrixXd span(ix(d), ix(envs.size()));
    for (std::size_t k = 0; k < envs.size(); ++k) span.col(ix(k)) = a[k] * x - e[k];
    rep.min_span_dim = std::min(rep.min_span_dim, span_rank(span));
    ++rep.probes;
  };
  for (std::size_t j = 0; j < d; ++j) probe(VectorXd::Unit(ix(d), ix(j)));
  for (std::size_t p = 0; p < random_probes; ++p) {
    VectorXd x(ix(d));
    for (Index j = 0; j < x.size(); ++j) x(j) = gauss(rng);
    probe(x);
  }
  rep.holds = rep.enough_envs && rep.min_span_dim > d - r;
  return rep;
}

std::vector<EnvMoments> group_moments(const data::Dataset& ds, const std::vector<double>& theta,
                                      std::vector<std::size_t>* group_sizes) {
  const Groups g = build_groups(ds, 0.0, false);
  if (theta.size() != ds.feature_dim()) throw DimensionError("theta must have one entry per feature");
  const VectorXd t = Eigen::Map<const VectorXd>(theta.data(), ix(theta.size()));
  std::vector<EnvMoments> out;
  const std::size_t d = ds.feature_dim();
  for (std::size_t k = 0; k < g.a.size(); ++k) {
    EnvMoments m;
    m.xx = Tensor(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) m.xx(i, j) = g.a[k](ix(i), ix(j));
    m.xe = to_vec(g.b[k] - g.a[k] * t);
    out.push_back(std::move(m));
  }
  if (group_sizes) *group_sizes = g.sizes;
  return out;
}

LinearZinResult train_linear_zin(const data::Dataset& ds, const LinearZinConfig& config) {
  ds.validate();
  const std::size_t d = ds.feature_dim();
  if (config.r < 1 || config.r > d) throw ConfigError("r must lie in [1, d]");
  const Groups g = build_groups(ds, config.ridge, true);
  const Index dd = ix(d);
  const Index rr = ix(config.r);
  const VectorXd ols = g.pooled_a.ldlt().solve(g.pooled_b);

  LinearZinResult res;
  res.num_groups = g.a.size();
  Fit best{ols, MatrixXd::Identity(dd, dd), 0.0};
  std::vector<EnvMoments> moments;
  for (std::size_t k = 0; k < g.a.size(); ++k) {
    EnvMoments m;
    m.xx = Tensor(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) m.xx(i, j) = g.a[k](ix(i), ix(j));
    m.xe = to_vec(g.b[k] - g.a[k] * ols);
    moments.push_back(std::move(m));
  }
  res.general_position = linear_general_position(moments, config.r, 64, config.seed);

  if (res.general_position.enough_envs) {
    best = levenberg_marquardt(g, ols, config.r, config.max_iter);
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss;
    const double scale = std::max(ols.norm(), 1.0);
    for (std::size_t s = 0; s < config.restarts && best.residual > 1e-12; ++s) {
      VectorXd start(dd);
      for (Index j = 0; j < dd; ++j) start(j) = gauss(rng) * scale;
      Fit f = levenberg_marquardt(g, start, config.r, config.max_iter);
      if (f.residual < best.residual) best = std::move(f);
    }
    for (std::size_t k = 0; k < g.a.size(); ++k) moments[k].xe = to_vec(g.b[k] - g.a[k] * best.theta);
    res.general_position = linear_general_position(moments, config.r, 64, config.seed);
  } else {
    std::cerr << "warning: " << g.a.size() << " group(s) cannot identify an invariant predictor with r = " << config.r
              << "; returning pooled least squares\n";
  }

  MatrixXd phi = MatrixXd::Zero(dd, dd);
  VectorXd omega = VectorXd::Zero(dd);
  if (res.general_position.enough_envs) {
    phi.topRows(rr) = best.u.transpose();
    omega.head(rr) = best.u.transpose() * best.theta;
  } else {
    phi = MatrixXd::Identity(dd, dd);
    omega = ols;
  }
  const VectorXd pred = phi.transpose() * omega;
  res.phi = Tensor(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) res.phi(i, j) = phi(ix(i), ix(j));
  res.omega = to_vec(omega);
  res.predictor = to_vec(pred);
  res.constraint_residual = best.residual;
  for (std::size_t k = 0; k < g.a.size(); ++k) {
    res.env_residuals.push_back((phi * g.a[k] * phi.transpose() * omega - phi * g.b[k]).norm());
  }
  res.identifiable = res.general_position.holds && best.residual < 1e-6;
  return res;
}

void score_against_truth(LinearZinResult& result, const scm::LinearScmSpec& spec) {
  const Tensor wt = scm::unscrambler(spec);
  const std::size_t d = wt.cols();
  if (result.predictor.size() != d) throw DimensionError("predictor and SCM dimensions differ");
  double err = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double truth = 0.0;
    for (std::size_t i = 0; i < spec.d_v(); ++i) truth += wt(i, j) * spec.beta[i];
    err += (result.predictor[j] - truth) * (result.predictor[j] - truth);
  }
  result.predictor_error = std::sqrt(err);
  double worst = 0.0;
  for (std::size_t c = spec.d_v(); c < spec.w.cols(); ++c) {
    double coef = 0.0;
    for (std::size_t j = 0; j < d; ++j) coef += spec.w(j, c) * result.predictor[j];
    worst = std::max(worst, std::abs(coef));
  }
  result.spurious_coefficient = worst;
  result.has_truth = true;
}

}  // namespace zin::theory
