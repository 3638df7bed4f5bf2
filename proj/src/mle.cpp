#include "dynlogit/mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include "dynlogit/numeric.hpp"

namespace dynlogit {

void MixtureSpec::validate() const {
  if (types.empty()) throw std::invalid_argument("MixtureSpec: K must be >= 1");
  if (weights.size() != types.size()) throw std::invalid_argument("MixtureSpec: one weight per type");
  double s = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("MixtureSpec: weights must lie in [0,1]");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-10) throw std::invalid_argument("MixtureSpec: weights must sum to 1");
}

WeightedHistories aggregate(const std::vector<ChoiceHistory>& data) {
  std::map<ChoiceHistory, double> m;
  for (const auto& h : data) m[h] += 1.0;
  WeightedHistories out;
  for (const auto& [h, w] : m) {
    out.h.push_back(h);
    out.w.push_back(w);
  }
  return out;
}

namespace {

const double kNegInf = -std::numeric_limits<double>::infinity();

// Per-history mixture log-likelihood. iters[k] > 0 fixes the sweep count of
// type k; on return iters holds the sweeps actually used.
std::vector<double> history_terms(const MixtureSpec& spec, const WeightedHistories& data, std::vector<int>& iters,
                                  double tol) {
  const int K = spec.K();
  iters.resize(K, 0);
  std::vector<std::vector<double>> lp(K);
  for (int k = 0; k < K; ++k) {
    const SolvedModel m = iters[k] > 0 ? solve_bellman_fixed(spec.types[k], iters[k]) : solve_bellman(spec.types[k], tol);
    iters[k] = m.iterations;
    lp[k].reserve(data.h.size());
    for (const auto& h : data.h) lp[k].push_back(history_log_prob(m, h));
  }
  std::vector<double> out(data.h.size());
  std::vector<double> w(K);
  for (std::size_t i = 0; i < data.h.size(); ++i) {
    for (int k = 0; k < K; ++k) w[k] = spec.weights[k] > 0.0 ? std::log(spec.weights[k]) + lp[k][i] : kNegInf;
    out[i] = logsumexp(w);
  }
  return out;
}

double weighted_sum(const std::vector<double>& l, const WeightedHistories& data) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) s += data.w[i] * l[i];
  return s;
}

struct Local {
  double value = kNegInf;
  Eigen::VectorXd grad;
  Eigen::MatrixXd scores;  // distinct histories x parameters
  std::vector<int> iters;
};

double value_at(const MleProblem& p, const Eigen::VectorXd& theta, const WeightedHistories& data, double tol,
                int& solves) {
  try {
    const auto spec = p.build(theta);
    spec.validate();
    std::vector<int> it;
    solves += spec.K();
    const double v = weighted_sum(history_terms(spec, data, it, tol), data);
    return std::isfinite(v) ? v : kNegInf;
  } catch (const std::exception&) {
    return kNegInf;
  }
}

Local local_at(const MleProblem& p, const Eigen::VectorXd& theta, const WeightedHistories& data, const MleOptions& opt,
               int& solves) {
  Local L;
  const auto spec = p.build(theta);
  spec.validate();
  const auto l0 = history_terms(spec, data, L.iters, opt.inner_tol);
  solves += spec.K();
  L.value = weighted_sum(l0, data);
  const Eigen::Index n = static_cast<Eigen::Index>(data.h.size()), q = theta.size();
  L.scores.resize(n, q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const double h = opt.fd_step * std::max(1.0, std::abs(theta(j)));
    Eigen::VectorXd tp = theta, tm = theta;
    tp(j) += h;
    tm(j) -= h;
    std::vector<int> ip = L.iters, im = L.iters;
    const auto lp = history_terms(p.build(tp), data, ip, opt.inner_tol);
    const auto lm = history_terms(p.build(tm), data, im, opt.inner_tol);
    solves += 2 * spec.K();
    for (Eigen::Index i = 0; i < n; ++i) L.scores(i, j) = (lp[i] - lm[i]) / (2.0 * h);
  }
  const Eigen::Map<const Eigen::VectorXd> w(data.w.data(), n);
  L.grad = L.scores.transpose() * w;
  return L;
}

Eigen::MatrixXd bhhh(const Local& L, const WeightedHistories& data) {
  const Eigen::Map<const Eigen::VectorXd> w(data.w.data(), static_cast<Eigen::Index>(data.w.size()));
  return L.scores.transpose() * w.asDiagonal() * L.scores;
}

Eigen::MatrixXd safe_inverse(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  Eigen::VectorXd ev = es.eigenvalues();
  const double top = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = ev(i) > 1e-12 * top ? 1.0 / ev(i) : 0.0;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

MleFit fit_one(const WeightedHistories& data, const MleProblem& p, const Eigen::VectorXd& start, const MleOptions& opt) {
  MleFit fit;
  fit.names = p.names;
  int solves = 0;
  Eigen::VectorXd theta = start;
  Local L = local_at(p, theta, data, opt, solves);
  if (!std::isfinite(L.value)) throw std::runtime_error("fit_mle_nfxp: log-likelihood not finite at the start");
  Eigen::MatrixXd Hinv = safe_inverse(bhhh(L, data));
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    if (L.grad.lpNorm<Eigen::Infinity>() <= opt.grad_tol) break;
    if (L.grad.dot(safe_inverse(bhhh(L, data)) * L.grad) <= opt.decrement_tol) break;
    bool accepted = false;
    Eigen::VectorXd step;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        // quasi-Newton direction failed: fall back to a BHHH step
        fit.bhhh_used = true;
        Hinv = safe_inverse(bhhh(L, data));
      }
      Eigen::VectorXd dir = Hinv * L.grad;
      double slope = L.grad.dot(dir);
      if (!(slope > 0.0)) {
        dir = L.grad;
        slope = L.grad.squaredNorm();
      }
      double t = 1.0;
      while (t > 1e-12) {
        const double v = value_at(p, theta + t * dir, data, opt.inner_tol, solves);
        if (v >= L.value + 1e-4 * t * slope) {
          accepted = true;
          step = t * dir;
          break;
        }
        t *= 0.5;
      }
    }
    if (!accepted) break;
    Local Ln = local_at(p, theta + step, data, opt, solves);
    const Eigen::VectorXd y = -(Ln.grad - L.grad);
    const double sy = step.dot(y);
    if (sy > 1e-12 * step.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(step.size(), step.size());
      Hinv = (I - rho * step * y.transpose()) * Hinv * (I - rho * y * step.transpose()) + rho * step * step.transpose();
    }
    const double gain = Ln.value - L.value;
    theta += step;
    L = std::move(Ln);
    if (gain < 1e-13 * std::max(1.0, std::abs(L.value)) && step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  fit.iterations = it;
  fit.theta = theta;
  fit.loglik = L.value;
  fit.grad_norm = L.grad.lpNorm<Eigen::Infinity>();
  const Eigen::MatrixXd V = safe_inverse(bhhh(L, data));
  fit.converged = fit.grad_norm <= opt.grad_tol || L.grad.dot(V * L.grad) <= opt.decrement_tol;
  fit.inner_solves = solves;
  return fit;
}

// Fills cov_bhhh, cov_hessian and cov at fit.theta. The Hessian is a central
// difference of the score vector; it is used only when negative definite.
void set_covariance(MleFit& fit, const MleProblem& p, const WeightedHistories& data, const MleOptions& opt) {
  int solves = 0;
  const Local L = local_at(p, fit.theta, data, opt, solves);
  fit.cov_bhhh = safe_inverse(bhhh(L, data));
  const Eigen::Index q = fit.theta.size();
  Eigen::MatrixXd H(q, q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const double h = opt.hessian_step * std::max(1.0, std::abs(fit.theta(j)));
    Eigen::VectorXd tp = fit.theta, tm = fit.theta;
    tp(j) += h;
    tm(j) -= h;
    H.col(j) = (local_at(p, tp, data, opt, solves).grad - local_at(p, tm, data, opt, solves).grad) / (2.0 * h);
  }
  H = 0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-H);
  fit.hessian_ok = H.allFinite() && es.eigenvalues().minCoeff() > 0.0;
  fit.cov_hessian = fit.hessian_ok ? Eigen::MatrixXd(es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                                                     es.eigenvectors().transpose())
                                   : Eigen::MatrixXd::Constant(q, q, std::numeric_limits<double>::quiet_NaN());
  fit.cov_used = opt.covariance == MleCovariance::Hessian && fit.hessian_ok ? MleCovariance::Hessian : MleCovariance::Bhhh;
  fit.cov = fit.cov_used == MleCovariance::Hessian ? fit.cov_hessian : fit.cov_bhhh;
  fit.inner_solves += solves;
}

void fill_structural(MleFit& fit, const MleProblem& p) {
  const auto spec = p.build(fit.theta);
  fit.rc.clear();
  for (int k = 0; k < p.K; ++k) fit.rc.push_back(fit.theta(p.rc_index[k]));
  fit.weights = spec.weights;
  fit.beta = fit.theta(p.beta_index);
}

}  // namespace

double mixture_loglik(const MixtureSpec& spec, const WeightedHistories& data) {
  spec.validate();
  std::vector<int> it;
  return weighted_sum(history_terms(spec, data, it, 1e-13), data);
}

double mixture_loglik(const MixtureSpec& spec, const std::vector<ChoiceHistory>& data) {
  return mixture_loglik(spec, aggregate(data));
}

MleProblem replacement_problem(int K, CostShape shape, int dstar, double delta) {
  if (K < 1) throw std::invalid_argument("replacement_problem: K must be >= 1");
  MleProblem p;
  p.K = K;
  p.shape = shape;
  p.dstar = dstar;
  for (int k = 0; k < K; ++k) {
    p.rc_index.push_back(static_cast<int>(p.names.size()));
    p.names.push_back(K == 1 ? "RC" : "RC" + std::to_string(k + 1));
  }
  p.beta_index = static_cast<int>(p.names.size());
  p.names.push_back("beta");
  for (int k = 0; k + 1 < K; ++k) {
    p.weight_index.push_back(static_cast<int>(p.names.size()));
    p.names.push_back("logit_lambda" + std::to_string(k + 1));
  }
  p.build = [K, shape, dstar, delta, p](const Eigen::VectorXd& th) {
    MixtureSpec m;
    std::vector<double> a(K, 0.0);
    for (int k = 0; k + 1 < K; ++k) a[k] = th(p.weight_index[k]);
    const double mx = *std::max_element(a.begin(), a.end());
    double s = 0.0;
    for (double& v : a) s += (v = std::exp(v - mx));
    for (int k = 0; k < K; ++k) {
      m.types.push_back(replacement_spec(th(p.rc_index[k]), th(p.beta_index), dstar, delta, shape));
      m.weights.push_back(a[k] / s);
    }
    return m;
  };
  return p;
}

std::pair<double, Eigen::VectorXd> mixture_loglik_grad(const MleProblem& p, const Eigen::VectorXd& theta,
                                                       const WeightedHistories& data, const MleOptions& opt) {
  int solves = 0;
  Local L = local_at(p, theta, data, opt, solves);
  return {L.value, L.grad};
}

std::string to_string(MleCovariance c) { return c == MleCovariance::Hessian ? "hessian" : "bhhh"; }

MleCovariance mle_covariance_from_string(const std::string& s) {
  if (s == "hessian") return MleCovariance::Hessian;
  if (s == "bhhh") return MleCovariance::Bhhh;
  throw std::invalid_argument("unknown covariance estimator: " + s);
}

int MleFit::index(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("MleFit: no parameter " + name);
  return static_cast<int>(it - names.begin());
}

MleFit fit_mle_nfxp(const std::vector<ChoiceHistory>& data, const MleProblem& p, const Eigen::VectorXd& start,
                    const MleOptions& opt) {
  if (!start.allFinite()) throw std::invalid_argument("fit_mle_nfxp: start must be finite");
  if (start.size() != static_cast<Eigen::Index>(p.names.size()))
    throw std::invalid_argument("fit_mle_nfxp: start has the wrong length");
  const auto agg = aggregate(data);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  MleFit best;
  bool have = false;
  int total_solves = 0;
  for (int s = 0; s < std::max(1, opt.n_starts); ++s) {
    Eigen::VectorXd th = start;
    if (s > 0)
      for (Eigen::Index j = 0; j < th.size(); ++j) th(j) += opt.start_spread * nd(rng);
    MleFit f;
    try {
      f = fit_one(agg, p, th, opt);
    } catch (const std::exception&) {
      if (s == 0 && opt.n_starts <= 1) throw;
      continue;
    }
    total_solves += f.inner_solves;
    if (!have || f.loglik > best.loglik) {
      best = std::move(f);
      have = true;
    }
  }
  if (!have) throw std::runtime_error("fit_mle_nfxp: no start produced a finite log-likelihood");
  best.inner_solves = total_solves;

  if (p.K > 1) {
    // order types by RC to remove label switching
    const auto spec = p.build(best.theta);
    std::vector<int> ord(p.K);
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(),
                     [&](int a, int b) { return best.theta(p.rc_index[a]) < best.theta(p.rc_index[b]); });
    if (!std::is_sorted(ord.begin(), ord.end())) {
      Eigen::VectorXd th = best.theta;
      const double last = spec.weights[ord[p.K - 1]];
      for (int k = 0; k < p.K; ++k) th(p.rc_index[k]) = best.theta(p.rc_index[ord[k]]);
      for (int k = 0; k + 1 < p.K; ++k)
        th(p.weight_index[k]) = std::log(std::max(spec.weights[ord[k]], 1e-300) / std::max(last, 1e-300));
      int solves = 0;
      const Local L = local_at(p, th, agg, opt, solves);
      best.theta = th;
      best.loglik = L.value;
      best.grad_norm = L.grad.lpNorm<Eigen::Infinity>();
    }
  }
  set_covariance(best, p, agg, opt);
  fill_structural(best, p);
  return best;
}

Estimate duration_slope(const MleFit& fit, const MleProblem& p, int at) {
  if (at < 1) throw std::invalid_argument("duration_slope: duration must be >= 1");
  const double f = cost_shape(p.shape, std::min(at, p.dstar)) - cost_shape(p.shape, std::min(at - 1, p.dstar));
  return {fit.theta(p.beta_index) * f, fit.se()(p.beta_index) * std::abs(f)};
}

TypeRecovery recover_type_distribution(const std::vector<ModelSpec>& grid, const std::vector<ChoiceHistory>& support,
                                       const Eigen::VectorXd& p_hat) {
  if (grid.empty()) throw std::invalid_argument("recover_type_distribution: empty grid");
  if (static_cast<Eigen::Index>(support.size()) != p_hat.size())
    throw std::invalid_argument("recover_type_distribution: support and probability vector differ in length");
  if (grid.size() > support.size())
    throw std::invalid_argument("recover_type_distribution: more grid points than support histories");
  const Eigen::Index n = p_hat.size(), K = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd L(n, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto m = solve_bellman(grid[k], 1e-13);
    for (Eigen::Index i = 0; i < n; ++i) L(i, k) = std::exp(history_log_prob(m, support[i]));
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(L);
  qr.setThreshold(1e-10);
  TypeRecovery r;
  r.rank = static_cast<int>(qr.rank());
  if (r.rank < K)
    throw std::runtime_error("recover_type_distribution: rank-deficient design, numerical rank " +
                             std::to_string(r.rank) + " < " + std::to_string(K));
  r.weights = qr.solve(p_hat);
  r.residual_norm = (L * r.weights - p_hat).norm();
  for (Eigen::Index k = 0; k < K; ++k)
    if (r.weights(k) < 0.0 || r.weights(k) > 1.0) r.in_unit_interval = false;
  return r;
}

}  // namespace dynlogit
