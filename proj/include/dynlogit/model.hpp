#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dynlogit/histories.hpp"

namespace dynlogit {

// Payoffs for one unobserved type. The flow utility of choosing j at state
// (y_{t-1}, d_t) is alpha[j] + beta_y(j, y_{t-1}) when j != y_{t-1}, and
// alpha[j] + beta_d(j, d_t) when j == y_{t-1}.
struct ModelSpec {
  int J = 1;
  double delta = 0.0;
  std::vector<double> alpha;                 // J+1
  std::vector<double> beta_y;                // (J+1)^2, entry [j*(J+1) + prev]
  std::vector<std::vector<double>> beta_d;   // beta_d[y][d] for d = 0..dstar[y]
  std::vector<int> dstar;                    // J+1, dstar[0] unused
  bool forward_looking = true;
  bool duration_on = true;

  // Zero payoffs with the given cutoffs (dstar[y] >= 1 for y >= 1).
  static ModelSpec zeros(int J, std::vector<int> dstar);

  double by(int j, int prev) const { return beta_y[j * (J + 1) + prev]; }
  double& by(int j, int prev) { return beta_y[j * (J + 1) + prev]; }
  // beta_d(y, d), flat beyond dstar[y]; identically zero when duration is off
  double bd(int y, int d) const;
  // Largest cutoff; durations above it are payoff-equivalent.
  int dmax() const;
  void validate() const;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual(residual) {}
  double residual;
};

// Fixed-point solution on the states (0,0) and (y,d), y = 1..J, d = 1..dmax.
struct SolvedModel {
  ModelSpec spec;
  int dmax = 1;
  std::vector<double> V;        // integrated value per state (the log-denominator sigma)
  std::vector<double> logccp;   // [state * (J+1) + j]
  double residual = 0.0;
  int iterations = 0;

  int state_index(int prev, int d) const;
  int next_state(int j, int prev, int d) const;
  // v(y, d) = delta * V at state (y, d); y = 0 uses d = 0.
  double v(int y, int d) const;
  double sigma(int prev, int d) const { return V[state_index(prev, d)]; }
  double log_ccp(int j, int prev, int d) const { return logccp[state_index(prev, d) * (spec.J + 1) + j]; }
  double ccp(int j, int prev, int d) const;
};

SolvedModel solve_bellman(const ModelSpec& spec, double tol = 1e-10, int max_iter = 10000);
// Exactly `iterations` sweeps from V = 0. The result is a smooth function of
// the payoffs, which keeps finite-difference derivatives clean.
SolvedModel solve_bellman_fixed(const ModelSpec& spec, int iterations);

double history_log_prob(const SolvedModel& m, const ChoiceHistory& h);

// Utility of each alternative at a state given a value table, shared by the
// infinite and finite horizon solvers.
double flow_payoff(const ModelSpec& s, int j, int prev, int d);

// Binary replacement model: y = 1 keeps the engine, y = 0 replaces it.
// alpha(0) = -rc, beta_d(1, d) = -beta * f(min(d, dstar)).
enum class CostShape { Linear, Sqrt, Square };
double cost_shape(CostShape shape, double d);
std::string to_string(CostShape shape);
CostShape cost_shape_from_string(const std::string& s);
ModelSpec replacement_spec(double rc, double beta, int dstar, double delta, CostShape shape = CostShape::Linear);

}  // namespace dynlogit
