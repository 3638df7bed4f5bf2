#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynlogit/histories.hpp"
#include "dynlogit/model.hpp"

namespace dynlogit {

struct MixtureSpec {
  std::vector<ModelSpec> types;
  std::vector<double> weights;

  int K() const { return static_cast<int>(types.size()); }
  void validate() const;
};

// Distinct histories with multiplicities.
struct WeightedHistories {
  std::vector<ChoiceHistory> h;
  std::vector<double> w;
};
WeightedHistories aggregate(const std::vector<ChoiceHistory>& data);

double mixture_loglik(const MixtureSpec& spec, const std::vector<ChoiceHistory>& data);
double mixture_loglik(const MixtureSpec& spec, const WeightedHistories& data);

// Maps an unrestricted parameter vector to a mixture. `iterations`, when
// positive, fixes the number of Bellman sweeps (used for derivatives).
struct MleProblem {
  std::vector<std::string> names;
  std::function<MixtureSpec(const Eigen::VectorXd&)> build;
  int K = 1;
  int beta_index = -1;
  std::vector<int> rc_index;
  std::vector<int> weight_index;  // logit of lambda_k / lambda_K, k < K
  CostShape shape = CostShape::Linear;
  int dstar = 1;
};

// Parameters rc_1..rc_K, beta, a_1..a_{K-1}.
MleProblem replacement_problem(int K, CostShape shape, int dstar, double delta);

// Inverse observed information (central differences of the score) or the
// inverse outer product of scores. Hessian falls back to BHHH when the
// numerical Hessian is not negative definite.
enum class MleCovariance { Hessian, Bhhh };
std::string to_string(MleCovariance c);
MleCovariance mle_covariance_from_string(const std::string& s);

struct MleOptions {
  double grad_tol = 1e-6;
  double decrement_tol = 1e-9;  // g' V g with V the inverse outer product of scores
  int max_iter = 500;
  int n_starts = 1;         // extra starts are drawn around `start`
  double start_spread = 1.0;
  std::uint64_t seed = 1;
  double fd_step = 1e-5;
  double inner_tol = 1e-13;
  double hessian_step = 1e-4;
  MleCovariance covariance = MleCovariance::Hessian;
};

// Value and central-difference gradient with re-solved inner fixed points.
std::pair<double, Eigen::VectorXd> mixture_loglik_grad(const MleProblem& p, const Eigen::VectorXd& theta,
                                                       const WeightedHistories& data, const MleOptions& opt = {});

struct MleFit {
  std::vector<std::string> names;
  Eigen::VectorXd theta;
  Eigen::MatrixXd cov;  // the estimator selected in MleOptions
  Eigen::MatrixXd cov_bhhh;
  Eigen::MatrixXd cov_hessian;  // NaN when the Hessian is not negative definite
  bool hessian_ok = false;
  MleCovariance cov_used = MleCovariance::Bhhh;
  double loglik = 0.0;
  int iterations = 0;
  int inner_solves = 0;
  double grad_norm = 0.0;
  bool converged = false;
  bool bhhh_used = false;
  std::vector<double> rc;
  std::vector<double> weights;
  double beta = 0.0;

  Eigen::VectorXd se() const { return cov.diagonal().cwiseMax(0.0).cwiseSqrt(); }
  int index(const std::string& name) const;
};

MleFit fit_mle_nfxp(const std::vector<ChoiceHistory>& data, const MleProblem& p, const Eigen::VectorXd& start,
                    const MleOptions& opt = {});

// beta * (f(at) - f(at - 1)) with its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};
Estimate duration_slope(const MleFit& fit, const MleProblem& p, int at);

struct TypeRecovery {
  Eigen::VectorXd weights;
  double residual_norm = 0.0;
  bool in_unit_interval = true;
  int rank = 0;
};

// Least-squares weights f = (L'L)^{-1} L'P where column k of L holds the
// probabilities of the support histories under grid[k].
TypeRecovery recover_type_distribution(const std::vector<ModelSpec>& grid, const std::vector<ChoiceHistory>& support,
                                       const Eigen::VectorXd& p_hat);

}  // namespace dynlogit
