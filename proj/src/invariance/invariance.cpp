#include "zin/invariance/invariance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>

#include "zin/autodiff/adam.hpp"
#include "zin/common/errors.hpp"

namespace zin::inv {

using ad::Tape;
using ad::Var;

Method parse_method(const std::string& name) {
  if (name == "erm") return Method::kErm;
  if (name == "irm_oracle" || name == "irm") return Method::kIrmOracle;
  if (name == "group_dro") return Method::kGroupDro;
  if (name == "eiil") return Method::kEiil;
  if (name == "zin") return Method::kZin;
  throw ConfigError("unknown method '" + name + "' (expected erm, irm_oracle, group_dro, eiil or zin)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kErm: return "erm";
    case Method::kIrmOracle: return "irm_oracle";
    case Method::kGroupDro: return "group_dro";
    case Method::kEiil: return "eiil";
    case Method::kZin: return "zin";
  }
  return "?";
}

PartitionModel::PartitionModel(const Tensor& z, int k, const std::vector<std::size_t>& hidden, ad::Activation act,
                               std::mt19937_64& rng)
    : k_(k) {
  if (k < 1) throw ConfigError("K must be at least 1");
  if (z.cols() == 0) throw ConfigError("a partition model needs at least one auxiliary column");
  const std::size_t n = z.rows();
  mean_.assign(z.cols(), 0.0);
  scale_.assign(z.cols(), 1.0);
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += z(i, j);
    mean_[j] = n ? s / static_cast<double>(n) : 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (z(i, j) - mean_[j]) * (z(i, j) - mean_[j]);
    const double sd = n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
    scale_[j] = sd > 0.0 ? sd : 1.0;
  }
  std::vector<std::size_t> widths{z.cols()};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(static_cast<std::size_t>(k));
  net_ = Mlp(widths, act, rng);
}

Tensor PartitionModel::standardize(const Tensor& z) const {
  if (z.cols() != mean_.size()) throw DimensionError("Z has " + std::to_string(z.cols()) + " columns, expected " +
                                                     std::to_string(mean_.size()));
  Tensor out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) out(i, j) = (z(i, j) - mean_[j]) / scale_[j];
  return out;
}

Tensor PartitionModel::weights(const Tensor& z) const {
  Tape tape;
  std::vector<Var> params;
  const Var w = forward(tape, tape.constant(standardize(z)), params);
  return tape.value(w);
}

std::vector<int> PartitionModel::assign(const Tensor& z) const {
  const Tensor w = weights(z);
  std::vector<int> out(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < w.cols(); ++k)
      if (w(i, k) > w(i, best)) best = k;
    out[i] = static_cast<int>(best);
  }
  return out;
}

Var PartitionModel::forward(Tape& tape, Var z_standardized, std::vector<Var>& params) const {
  return tape.softmax(net_.forward(tape, z_standardized, params));
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if (k < 2) throw ConfigError("K must be at least 2");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (anneal_epochs < 0 || anneal_epochs > epochs) throw ConfigError("anneal_epochs must lie in [0, epochs]");
  if (!(lr > 0.0) || !(rho_lr > 0.0) || !(eiil_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(dro_eta > 0.0)) throw ConfigError("dro_eta must be positive");
  if (rho_warmup < 0) throw ConfigError("rho_warmup must be >= 0");
  if (rho_restarts < 1) throw ConfigError("rho_restarts must be at least 1");
  if (eiil_steps < 0) throw ConfigError("eiil_steps must be >= 0");
  if (log_every < 1) throw ConfigError("log_every must be positive");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("hidden widths must be positive");
  for (std::size_t h : rho_hidden)
    if (h == 0) throw ConfigError("rho hidden widths must be positive");
}

namespace {

// Per-sample ∂ℓ_i/∂s at s = 1 when the output is scaled by s.
Var dummy_terms(Tape& tape, Var out, Var y, LossKind loss) {
  if (loss == LossKind::kCrossEntropy) return tape.mul(tape.sub(tape.sigmoid(out), y), out);
  return tape.scale(tape.mul(tape.sub(out, y), out), 2.0);
}

// Σ_k ((1/n) Σ_i w_ik g_i)².
Var penalty_on_tape(Tape& tape, Var weights, Var g, std::size_t k) {
  Var total;
  for (std::size_t j = 0; j < k; ++j) {
    const Var d = tape.mean(tape.mul(tape.column(weights, j), g));
    const Var p = tape.square(d);
    total = total.valid() ? tape.add(total, p) : p;
  }
  return total;
}

void check_weights(std::span<const double> w, std::size_t n) {
  if (w.size() != n) throw DimensionError("weights must have one entry per sample");
  for (double v : w)
    if (!(v >= 0.0)) throw DomainError("weights must be non-negative");
}

void check_labels(const Dataset& ds, LossKind loss) {
  ds.validate();
  if (ds.size() == 0) throw ConfigError("training set is empty");
  if (ds.y.cols() != 1) throw DimensionError("labels must be a single column");
  if (loss == LossKind::kCrossEntropy) ad::check_binary_targets(ds.y);
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows) {
  Tensor out(rows.size(), t.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) out(i, j) = t(rows[i], j);
  return out;
}

Tensor one_hot(const std::vector<int>& ids, std::size_t k) {
  Tensor out(ids.size(), k);
  for (std::size_t i = 0; i < ids.size(); ++i) out(i, static_cast<std::size_t>(ids[i])) = 1.0;
  return out;
}

Mlp make_model(const Dataset& ds, const TrainConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> widths{ds.feature_dim()};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  return Mlp(widths, cfg.activation, rng);
}

Evaluation train_evaluation(const Mlp& model, const Dataset& ds, LossKind loss) {
  if (ds.has_env()) return evaluate(model, split_by_env(ds), loss);
  return evaluate(model, {ds}, loss);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Batch {
  std::vector<std::size_t> rows;
  bool full = true;
};

class BatchPlan {
 public:
  BatchPlan(std::size_t n, std::size_t batch, std::uint64_t seed) : n_(n), batch_(batch), rng_(seed ^ 0x9e3779b97f4a7c15ULL) {}

  std::vector<Batch> epoch() {
    if (batch_ == 0 || batch_ >= n_) return {Batch{{}, true}};
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    std::vector<Batch> out;
    for (std::size_t s = 0; s < n_; s += batch_) {
      out.push_back({std::vector<std::size_t>(order.begin() + static_cast<long>(s),
                                              order.begin() + static_cast<long>(std::min(n_, s + batch_))),
                     false});
    }
    return out;
  }

 private:
  std::size_t n_;
  std::size_t batch_;
  std::mt19937_64 rng_;
};

struct Schedule {
  // λ at an epoch; zero disables the penalty entirely.
  std::function<double(long)> lambda;
  // Fixed n x K penalty weights (used when no adversary is active).
  const Tensor* weights = nullptr;
  // Adversarial ρ candidates trained by ascent for epochs < adversary_until; the best is kept in rho[0].
  std::vector<PartitionModel>* rho = nullptr;
  long adversary_until = 0;
  // Group DRO state.
  bool dro = false;
};

void record(RunResult& res, long epoch, double risk, double penalty, double lambda, const TrainConfig& cfg) {
  if (epoch % cfg.log_every == 0 || epoch == cfg.epochs - 1) res.history.push_back({epoch, risk, penalty, lambda});
}

double candidate_penalty(const PartitionModel& rho, const Tensor& z_standardized, const Tensor& g) {
  Tape tape;
  std::vector<Var> unused;
  const Var w = rho.forward(tape, tape.constant(z_standardized), unused);
  return tape.value(penalty_on_tape(tape, w, tape.constant(g), static_cast<std::size_t>(rho.k()))).item();
}

// Moves the candidate with the largest full-data penalty to the front.
void select_partition(const Mlp& model, const Dataset& ds, LossKind loss, std::vector<PartitionModel>& rho) {
  if (rho.size() < 2) return;
  Tape tape;
  const Tensor g = tape.value(dummy_terms(tape, tape.constant(model.forward(ds.x)), tape.constant(ds.y), loss));
  const Tensor zs = rho.front().standardize(ds.z);
  std::size_t best = 0;
  double best_pen = -1.0;
  for (std::size_t c = 0; c < rho.size(); ++c) {
    const double p = candidate_penalty(rho[c], zs, g);
    if (p > best_pen) best_pen = p, best = c;
  }
  std::swap(rho.front(), rho[best]);
}

// Model updates see R + λ_t·P only; the adversary steps on ρ alone.
void descend(Mlp& model, const Dataset& ds, const TrainConfig& cfg, long epochs, const Schedule& sched,
             RunResult& res) {
  const std::size_t n = ds.size();
  ad::AdamState model_state;
  std::vector<ad::AdamState> rho_state(sched.rho ? sched.rho->size() : 0);
  BatchPlan plan(n, cfg.batch_size, cfg.seed);
  std::optional<Tensor> rho_z;
  if (sched.rho) rho_z = sched.rho->front().standardize(ds.z);
  std::optional<Tensor> frozen;

  std::vector<int> group;
  std::vector<double> group_size;
  std::vector<double> q;
  if (sched.dro) {
    group = ds.env;
    const auto g = static_cast<std::size_t>(*std::max_element(group.begin(), group.end()) + 1);
    group_size.assign(g, 0.0);
    for (int e : group) group_size[static_cast<std::size_t>(e)] += 1.0;
    q.assign(g, 1.0 / static_cast<double>(g));
  }

  for (long epoch = 0; epoch < epochs; ++epoch) {
    const double lambda = sched.lambda ? sched.lambda(epoch) : 0.0;
    const bool adversary = sched.rho && epoch < sched.adversary_until;
    if (sched.rho && !adversary && !frozen) {
      select_partition(model, ds, cfg.loss, *sched.rho);
      frozen = sched.rho->front().weights(ds.z);
    }
    const Tensor* fixed = sched.rho ? (frozen ? &*frozen : nullptr) : sched.weights;

    double last_risk = 0.0, last_pen = 0.0;
    for (const Batch& b : plan.epoch()) {
      Tape tape;
      const Var x = tape.constant(b.full ? ds.x : gather_rows(ds.x, b.rows));
      const Var y = tape.constant(b.full ? ds.y : gather_rows(ds.y, b.rows));
      std::vector<Var> params;
      const Var out = model.forward(tape, x, params);
      const Var losses = ad::per_sample_loss(tape, out, y, cfg.loss);
      Var risk;
      if (sched.dro) {
        const std::size_t m = tape.value(losses).rows();
        std::vector<double> gr(q.size(), 0.0), gc(q.size(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
          const auto e = static_cast<std::size_t>(group[b.full ? i : b.rows[i]]);
          gr[e] += tape.value(losses)[i];
          gc[e] += 1.0;
        }
        double z = 0.0;
        for (std::size_t e = 0; e < q.size(); ++e) {
          if (gc[e] > 0.0) q[e] *= std::exp(cfg.dro_eta * gr[e] / gc[e]);
          z += q[e];
        }
        for (double& v : q) v /= z;
        Tensor w(m, 1);
        for (std::size_t i = 0; i < m; ++i) {
          const auto e = static_cast<std::size_t>(group[b.full ? i : b.rows[i]]);
          w[i] = q[e] * static_cast<double>(m) / gc[e];
        }
        risk = tape.mean(tape.mul(tape.constant(std::move(w)), losses));
      } else {
        risk = tape.mean(losses);
      }

      Var objective = risk;
      Var pen;
      if (lambda > 0.0 && fixed && !adversary) {
        const Var w = tape.constant(b.full ? *fixed : gather_rows(*fixed, b.rows));
        pen = penalty_on_tape(tape, w, dummy_terms(tape, out, y, cfg.loss), fixed->cols());
        objective = tape.add(risk, tape.scale(pen, lambda));
      }
      Tensor g_terms;
      if (adversary) {
        Tape gt;
        g_terms = gt.value(dummy_terms(gt, gt.constant(tape.value(out)), gt.constant(tape.value(y)), cfg.loss));
      }

      last_risk = tape.value(risk).item();
      last_pen = pen.valid() ? tape.value(pen).item() : 0.0;
      if (!std::isfinite(last_risk) || !std::isfinite(last_pen)) {
        throw TrainingError("non-finite " + std::string(std::isfinite(last_risk) ? "penalty" : "risk"), epoch);
      }

      tape.backward(objective);
      const ad::GradientBundle model_grads = Mlp::collect(tape, params);
      if (adversary && epoch >= cfg.rho_warmup) {
        const Tensor zc = b.full ? *rho_z : gather_rows(*rho_z, b.rows);
        double best_before = -1.0, best_after = 0.0;
        for (std::size_t c = 0; c < sched.rho->size(); ++c) {
          PartitionModel& rho = (*sched.rho)[c];
          Tape at;
          std::vector<Var> rho_params;
          const Var w = rho.forward(at, at.constant(zc), rho_params);
          const Var p = penalty_on_tape(at, w, at.constant(g_terms), static_cast<std::size_t>(rho.k()));
          const double before = at.value(p).item();
          if (!std::isfinite(before)) throw TrainingError("non-finite penalty", epoch);
          at.backward(p);
          adam_step(rho.net(), Mlp::collect(at, rho_params), rho_state[c], cfg.rho_lr, true);
          if (before > best_before) {
            best_before = before;
            if (cfg.track_adversary) best_after = candidate_penalty(rho, zc, g_terms);
          }
        }
        last_pen = best_before;
        if (cfg.track_adversary) res.adversary.emplace_back(best_before, best_after);
      }
      adam_step(model, model_grads, model_state, cfg.lr);
    }
    record(res, epoch, last_risk, last_pen, adversary ? 0.0 : lambda, cfg);
  }
  if (sched.dro) res.group_weights = q;
}

std::function<double(long)> ramp(double lambda, long anneal) {
  return [lambda, anneal](long epoch) {
    if (anneal <= 0 || epoch >= anneal) return lambda;
    return lambda * static_cast<double>(epoch) / static_cast<double>(anneal);
  };
}

RunResult finish(RunResult res, const Dataset& ds, const TrainConfig& cfg, std::chrono::steady_clock::time_point t0) {
  res.seed = cfg.seed;
  res.train = train_evaluation(res.model, ds, cfg.loss);
  res.wall_seconds = seconds_since(t0);
  return res;
}

void require_env(const Dataset& ds, Method m) {
  if (!ds.has_env()) throw ConfigError(to_string(m) + " needs ground-truth environment ids");
}

}  // namespace

double weighted_risk(const Mlp& model, const Dataset& ds, std::span<const double> weights, LossKind loss) {
  check_weights(weights, ds.size());
  if (ds.size() == 0) return 0.0;
  Tape tape;
  std::vector<Var> params;
  const Var out = model.forward(tape, tape.constant(ds.x), params);
  const Var l = ad::per_sample_loss(tape, out, tape.constant(ds.y), loss);
  double s = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) s += weights[i] * tape.value(l)[i];
  return s / static_cast<double>(ds.size());
}

PenaltyValue irm_penalty(const Mlp& model, const Dataset& ds, std::span<const double> weights, LossKind loss,
                         bool with_grad) {
  check_weights(weights, ds.size());
  PenaltyValue pv;
  const std::size_t n = ds.size();
  if (n == 0) return pv;
  const Tensor f = model.forward(ds.x);
  if (f.cols() != 1) throw DimensionError("the penalty needs a single output column");
  std::vector<double> g(n), dg(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = f[i], y = ds.y[i];
    if (loss == LossKind::kCrossEntropy) {
      const double s = 1.0 / (1.0 + std::exp(-z));
      g[i] = (s - y) * z;
      dg[i] = s * (1.0 - s) * z + s - y;
    } else {
      g[i] = 2.0 * (z - y) * z;
      dg[i] = 2.0 * (2.0 * z - y);
    }
  }
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) d += weights[i] * g[i];
  d /= static_cast<double>(n);
  pv.value = d * d;
  if (with_grad) {
    pv.output_grad = Tensor(n, 1);
    for (std::size_t i = 0; i < n; ++i) pv.output_grad[i] = 2.0 * d * weights[i] * dg[i] / static_cast<double>(n);
  }
  return pv;
}

double zin_objective(const Mlp& model, const PartitionModel& rho, const Dataset& ds, double lambda, LossKind loss) {
  if (ds.aux_dim() == 0) throw ConfigError("ZIN needs auxiliary information (Z has no columns)");
  const std::vector<double> ones(ds.size(), 1.0);
  double obj = weighted_risk(model, ds, ones, loss);
  const Tensor w = rho.weights(ds.z);
  std::vector<double> col(ds.size());
  for (std::size_t k = 0; k < w.cols(); ++k) {
    for (std::size_t i = 0; i < ds.size(); ++i) col[i] = w(i, k);
    obj += lambda * irm_penalty(model, ds, col, loss).value;
  }
  return obj;
}

RunResult train_erm(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  check_labels(ds, cfg.loss);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.method = Method::kErm;
  res.model = make_model(ds, cfg);
  descend(res.model, ds, cfg, cfg.epochs, Schedule{}, res);
  return finish(std::move(res), ds, cfg, t0);
}

RunResult train_zin(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  check_labels(ds, cfg.loss);
  if (ds.aux_dim() == 0) throw ConfigError("ZIN needs auxiliary information (Z has no columns)");
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.method = Method::kZin;
  res.model = make_model(ds, cfg);
  std::mt19937_64 rho_rng(cfg.seed * 2654435761ULL + 17);
  std::vector<PartitionModel> candidates;
  for (int c = 0; c < cfg.rho_restarts; ++c)
    candidates.emplace_back(ds.z, cfg.k, cfg.rho_hidden, cfg.activation, rho_rng);
  Schedule s;
  const double lambda = cfg.lambda;
  s.lambda = [lambda](long) { return lambda; };
  s.rho = &candidates;
  s.adversary_until = cfg.anneal_epochs;
  descend(res.model, ds, cfg, cfg.epochs, s, res);
  if (cfg.anneal_epochs >= cfg.epochs) select_partition(res.model, ds, cfg.loss, candidates);
  res.rho = std::move(candidates.front());
  res.inferred_env = res.rho->assign(ds.z);
  return finish(std::move(res), ds, cfg, t0);
}

RunResult train_irm_oracle(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  check_labels(ds, cfg.loss);
  require_env(ds, Method::kIrmOracle);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.method = Method::kIrmOracle;
  res.model = make_model(ds, cfg);
  const Tensor w = one_hot(ds.env, static_cast<std::size_t>(ds.num_envs()));
  Schedule s;
  s.lambda = ramp(cfg.lambda, cfg.anneal_epochs);
  s.weights = &w;
  descend(res.model, ds, cfg, cfg.epochs, s, res);
  res.inferred_env = ds.env;
  return finish(std::move(res), ds, cfg, t0);
}

RunResult train_group_dro(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  check_labels(ds, cfg.loss);
  require_env(ds, Method::kGroupDro);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.method = Method::kGroupDro;
  res.model = make_model(ds, cfg);
  Schedule s;
  s.dro = true;
  descend(res.model, ds, cfg, cfg.epochs, s, res);
  return finish(std::move(res), ds, cfg, t0);
}

Tensor infer_assignments(const Mlp& reference, const Dataset& ds, const TrainConfig& cfg) {
  const std::size_t n = ds.size();
  const auto k = static_cast<std::size_t>(cfg.k);
  const Tensor f = reference.forward(ds.x);
  Tensor g(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = f[i], y = ds.y[i];
    g[i] = cfg.loss == LossKind::kCrossEntropy ? (1.0 / (1.0 + std::exp(-z)) - y) * z : 2.0 * (z - y) * z;
  }
  std::mt19937_64 rng(cfg.seed * 6364136223846793005ULL + 1442695040888963407ULL);
  std::normal_distribution<double> gauss;
  std::vector<Tensor> logits{Tensor(n, k)};
  for (double& v : logits[0].values()) v = gauss(rng);
  ad::AdamState state;
  for (long step = 0; step < cfg.eiil_steps; ++step) {
    Tape tape;
    const Var l = tape.parameter(logits[0]);
    const Var pen = penalty_on_tape(tape, tape.softmax(l), tape.constant(g), k);
    if (!std::isfinite(tape.value(pen).item())) throw TrainingError("non-finite EIIL penalty", step);
    tape.backward(pen);
    ad::adam_step(logits, ad::GradientBundle{{tape.grad(l)}}, state, cfg.eiil_lr, true);
  }
  Tape tape;
  return tape.value(tape.softmax(tape.constant(logits[0])));
}

RunResult train_eiil(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  check_labels(ds, cfg.loss);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.method = Method::kEiil;

  TrainConfig half = cfg;
  half.epochs = std::max(1L, cfg.epochs / 2);
  half.anneal_epochs = std::min(half.epochs, cfg.anneal_epochs / 2);
  RunResult reference;
  reference.model = make_model(ds, half);
  descend(reference.model, ds, half, half.epochs, Schedule{}, reference);

  const Tensor soft = infer_assignments(reference.model, ds, cfg);
  res.inferred_env.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < soft.cols(); ++k)
      if (soft(i, k) > soft(i, best)) best = k;
    res.inferred_env[i] = static_cast<int>(best);
  }
  const Tensor w = one_hot(res.inferred_env, static_cast<std::size_t>(cfg.k));

  res.model = make_model(ds, half);
  Schedule s;
  s.lambda = ramp(cfg.lambda, half.anneal_epochs);
  s.weights = &w;
  descend(res.model, ds, half, half.epochs, s, res);
  return finish(std::move(res), ds, cfg, t0);
}

RunResult train(Method method, const Dataset& ds, const TrainConfig& config) {
  switch (method) {
    case Method::kErm: return train_erm(ds, config);
    case Method::kIrmOracle: return train_irm_oracle(ds, config);
    case Method::kGroupDro: return train_group_dro(ds, config);
    case Method::kEiil: return train_eiil(ds, config);
    case Method::kZin: return train_zin(ds, config);
  }
  throw ConfigError("unknown method");
}

Evaluation evaluate(const Mlp& model, const std::vector<Dataset>& test_envs, LossKind loss) {
  if (test_envs.empty()) throw EvaluationError("no test environments");
  Evaluation ev;
  ev.accuracy = loss == LossKind::kCrossEntropy;
  for (std::size_t e = 0; e < test_envs.size(); ++e) {
    const Dataset& d = test_envs[e];
    if (d.size() == 0) throw EvaluationError("test environment " + std::to_string(e) + " is empty");
    const Tensor f = model.forward(d.x);
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (ev.accuracy) {
        s += ((f[i] >= 0.0 ? 1.0 : 0.0) == d.y[i]) ? 1.0 : 0.0;
      } else {
        s += (f[i] - d.y[i]) * (f[i] - d.y[i]);
      }
    }
    ev.per_env.push_back(s / static_cast<double>(d.size()));
  }
  ev.mean = std::accumulate(ev.per_env.begin(), ev.per_env.end(), 0.0) / static_cast<double>(ev.per_env.size());
  ev.worst = ev.accuracy ? *std::min_element(ev.per_env.begin(), ev.per_env.end())
                         : *std::max_element(ev.per_env.begin(), ev.per_env.end());
  return ev;
}

std::vector<Dataset> split_by_env(const Dataset& ds) {
  if (!ds.has_env()) return {ds};
  std::vector<Dataset> out;
  for (int e = 0; e < ds.num_envs(); ++e) out.push_back(ds.environment(e));
  return out;
}

}  // namespace zin::inv
