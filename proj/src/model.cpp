#include "dynlogit/model.hpp"

#include <algorithm>
#include <cmath>

#include "dynlogit/numeric.hpp"

namespace dynlogit {

ModelSpec ModelSpec::zeros(int J, std::vector<int> dstar) {
  ModelSpec s;
  s.J = J;
  s.alpha.assign(J + 1, 0.0);
  s.beta_y.assign((J + 1) * (J + 1), 0.0);
  if (static_cast<int>(dstar.size()) != J + 1) throw std::invalid_argument("ModelSpec: dstar needs J+1 entries");
  dstar[0] = 0;
  s.dstar = dstar;
  s.beta_d.resize(J + 1);
  for (int y = 0; y <= J; ++y) s.beta_d[y].assign(std::max(dstar[y], 0) + 1, 0.0);
  return s;
}

double ModelSpec::bd(int y, int d) const {
  if (!duration_on || y == 0) return 0.0;
  return beta_d[y][std::min(d, dstar[y])];
}

int ModelSpec::dmax() const {
  int m = 1;
  for (int y = 1; y <= J; ++y) m = std::max(m, dstar[y]);
  return m;
}

void ModelSpec::validate() const {
  if (J < 1) throw std::invalid_argument("ModelSpec: J must be >= 1");
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("ModelSpec: delta must lie in [0,1)");
  if (static_cast<int>(alpha.size()) != J + 1) throw std::invalid_argument("ModelSpec: alpha needs J+1 entries");
  if (static_cast<int>(beta_y.size()) != (J + 1) * (J + 1)) throw std::invalid_argument("ModelSpec: beta_y size");
  if (static_cast<int>(dstar.size()) != J + 1 || static_cast<int>(beta_d.size()) != J + 1)
    throw std::invalid_argument("ModelSpec: dstar/beta_d need J+1 entries");
  for (int y = 0; y <= J; ++y)
    if (by(y, y) != 0.0) throw std::invalid_argument("ModelSpec: beta_y(y,y) must be 0");
  for (int y = 1; y <= J; ++y) {
    if (dstar[y] < 1) throw std::invalid_argument("ModelSpec: dstar[y] must be >= 1");
    if (static_cast<int>(beta_d[y].size()) != dstar[y] + 1) throw std::invalid_argument("ModelSpec: beta_d[y] size");
  }
  for (double v : alpha) if (!std::isfinite(v)) throw std::invalid_argument("ModelSpec: non-finite alpha");
  for (double v : beta_y) if (!std::isfinite(v)) throw std::invalid_argument("ModelSpec: non-finite beta_y");
  for (const auto& row : beta_d)
    for (double v : row) if (!std::isfinite(v)) throw std::invalid_argument("ModelSpec: non-finite beta_d");
}

double flow_payoff(const ModelSpec& s, int j, int prev, int d) {
  return s.alpha[j] + (j == prev ? s.bd(j, d) : s.by(j, prev));
}

int SolvedModel::state_index(int prev, int d) const {
  if (prev == 0) return 0;
  const int dc = std::clamp(d, 1, dmax);
  return 1 + (prev - 1) * dmax + (dc - 1);
}

int SolvedModel::next_state(int j, int prev, int d) const {
  if (j == 0) return 0;
  return state_index(j, j == prev ? d + 1 : 1);
}

double SolvedModel::v(int y, int d) const {
  const double df = spec.forward_looking ? spec.delta : 0.0;
  return df * V[state_index(y, y == 0 ? 0 : d)];
}

double SolvedModel::ccp(int j, int prev, int d) const { return std::exp(log_ccp(j, prev, d)); }

namespace {

SolvedModel solve_impl(const ModelSpec& spec, double tol, int max_iter, bool fixed) {
  spec.validate();
  SolvedModel m;
  m.spec = spec;
  m.dmax = spec.dmax();
  const int J = spec.J, D = m.dmax;
  const int S = 1 + J * D;
  const double df = spec.forward_looking ? spec.delta : 0.0;

  // state -> (prev, d) and the per-choice flow payoff and successor
  std::vector<double> flow(S * (J + 1));
  std::vector<int> succ(S * (J + 1));
  for (int s = 0; s < S; ++s) {
    const int prev = s == 0 ? 0 : 1 + (s - 1) / D;
    const int d = s == 0 ? 0 : 1 + (s - 1) % D;
    for (int j = 0; j <= J; ++j) {
      flow[s * (J + 1) + j] = flow_payoff(spec, j, prev, d);
      succ[s * (J + 1) + j] = m.next_state(j, prev, d);
    }
  }

  std::vector<double> V(S, 0.0), Vn(S), w(J + 1);
  double res = 0.0;
  int it = 0;
  for (;;) {
    res = 0.0;
    for (int s = 0; s < S; ++s) {
      for (int j = 0; j <= J; ++j) w[j] = flow[s * (J + 1) + j] + df * V[succ[s * (J + 1) + j]];
      Vn[s] = logsumexp(w);
      res = std::max(res, std::abs(Vn[s] - V[s]));
    }
    V.swap(Vn);
    ++it;
    if (df == 0.0) break;
    if (fixed) {
      if (it >= max_iter) break;
      continue;
    }
    if (res <= tol) break;
    if (it >= max_iter)
      throw ConvergenceError("solve_bellman: no convergence after " + std::to_string(it) +
                             " iterations, residual " + std::to_string(res), res);
  }

  m.V = V;
  m.residual = df == 0.0 ? 0.0 : res;
  m.iterations = it;
  m.logccp.resize(S * (J + 1));
  for (int s = 0; s < S; ++s) {
    for (int j = 0; j <= J; ++j) w[j] = flow[s * (J + 1) + j] + df * V[succ[s * (J + 1) + j]];
    const double lse = logsumexp(w);
    for (int j = 0; j <= J; ++j) m.logccp[s * (J + 1) + j] = w[j] - lse;
  }
  return m;
}

}  // namespace

SolvedModel solve_bellman(const ModelSpec& spec, double tol, int max_iter) {
  return solve_impl(spec, tol, max_iter, false);
}

SolvedModel solve_bellman_fixed(const ModelSpec& spec, int iterations) {
  return solve_impl(spec, 0.0, std::max(iterations, 1), true);
}

double history_log_prob(const SolvedModel& m, const ChoiceHistory& h) {
  if (h.J != m.spec.J) throw std::invalid_argument("history_log_prob: J mismatch");
  double lp = 0.0;
  int prev = h.y0, d = h.d1;
  for (int c : h.y) {
    lp += m.log_ccp(c, prev, d);
    d = c == 0 ? 0 : (c == prev ? d + 1 : 1);
    prev = c;
  }
  return lp;
}

double cost_shape(CostShape shape, double d) {
  switch (shape) {
    case CostShape::Linear: return d;
    case CostShape::Sqrt: return std::sqrt(d);
    case CostShape::Square: return d * d;
  }
  return d;
}

std::string to_string(CostShape shape) {
  switch (shape) {
    case CostShape::Linear: return "linear";
    case CostShape::Sqrt: return "sqrt";
    case CostShape::Square: return "square";
  }
  return {};
}

CostShape cost_shape_from_string(const std::string& s) {
  if (s == "linear") return CostShape::Linear;
  if (s == "sqrt") return CostShape::Sqrt;
  if (s == "square") return CostShape::Square;
  throw std::invalid_argument("unknown cost shape: " + s);
}

ModelSpec replacement_spec(double rc, double beta, int dstar, double delta, CostShape shape) {
  ModelSpec s = ModelSpec::zeros(1, {0, dstar});
  s.delta = delta;
  s.forward_looking = delta > 0.0;
  s.alpha[0] = -rc;
  for (int d = 1; d <= dstar; ++d) s.beta_d[1][d] = -beta * cost_shape(shape, d);
  return s;
}

}  // namespace dynlogit
