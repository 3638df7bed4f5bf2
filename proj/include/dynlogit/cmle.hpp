#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynlogit/histories.hpp"
#include "dynlogit/suffstats.hpp"

namespace dynlogit {

struct CmleOptions {
  double grad_tol = 1e-8;
  int max_iter = 200;
  std::uint64_t enum_cap = 10'000'000;
};

// One U-class that has at least one observation and within-class variation
// in S. Rows of S are the class members; count holds the number of
// observations on each member.
struct ClassBlock {
  Eigen::MatrixXd S;
  Eigen::VectorXd count;
  double n = 0.0;
};

struct CondLikData {
  std::vector<std::string> names;       // S components kept
  std::vector<std::string> unidentified;  // S components with no within-class variation
  std::vector<ClassBlock> blocks;
  int n_obs = 0;
  int n_informative = 0;
  int n_degenerate = 0;  // observations in classes without S variation
  double constant = 0.0;  // their log-likelihood, sum of -ln(class size)
};

// Classes are formed within (T, y0, d1) strata by full enumeration.
CondLikData build_conditional_data(const std::vector<ChoiceHistory>& data, const Variant& v,
                                   const CmleOptions& opt = {});

struct LikEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

// Sum over informative observations of S_i'b - ln sum_{j in class} exp(S_j'b).
LikEval conditional_loglik(const Eigen::VectorXd& b, const CondLikData& d, bool hessian = true);
// Outer product of per-observation scores.
Eigen::MatrixXd conditional_bhhh(const Eigen::VectorXd& b, const CondLikData& d);

struct CmleFit {
  std::vector<std::string> names;
  std::vector<std::string> unidentified;
  Eigen::VectorXd beta_star;
  Eigen::MatrixXd cov;
  double loglik = 0.0;           // informative observations only
  double loglik_constant = 0.0;  // degenerate classes, independent of beta
  int n_obs = 0;
  int n_informative = 0;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  bool bhhh_used = false;
  bool boundary = false;  // curvature vanishes: the supremum is approached at infinity

  Eigen::VectorXd se() const { return cov.diagonal().cwiseMax(0.0).cwiseSqrt(); }
  int index(const std::string& name) const;
};

CmleFit fit_cmle(const CondLikData& d, const CmleOptions& opt = {});
CmleFit fit_cmle(const std::vector<ChoiceHistory>& data, const Variant& v, const CmleOptions& opt = {});

// Duration-cutoff selection for binary data. For each n = 2..L the term
// uses classes with tail cutoff n and the single identifying statistic
// X(1, n-1); its coefficient estimates -Delta beta_d(n).
struct ConcentratedTerm {
  int n = 0;
  double coef = 0.0;   // -nu(n)
  double se = 0.0;
  double loglik_free = 0.0;
  double loglik_zero = 0.0;
  bool informative = false;
  bool boundary = false;
  double nu() const { return -coef; }
};

std::vector<ConcentratedTerm> concentrated_terms(const std::vector<ChoiceHistory>& data, int L,
                                                 const CmleOptions& opt = {});
// Free coefficients for n <= dstar, zero for n > dstar.
double concentrated_loglik(const std::vector<ConcentratedTerm>& terms, int dstar);
double concentrated_loglik(const std::vector<ChoiceHistory>& data, int dstar, int L, const CmleOptions& opt = {});

struct DstarSelection {
  int N = 0;
  int L = 0;
  std::vector<int> candidates;
  std::vector<double> loglik;
  std::vector<double> bic;
  std::vector<ConcentratedTerm> terms;
  int selected = 0;
  double beta_star = 0.0;
  double se = 0.0;
};

double bic_value(double loglik, int dstar, int N);
// Argmax of BIC over 2..L, ties to the smaller cutoff.
DstarSelection select_dstar_bic(const std::vector<ChoiceHistory>& data, int L, const CmleOptions& opt = {});
DstarSelection select_dstar_bic(const std::vector<ConcentratedTerm>& terms, int N);
// floor((max T - 1) / 2)
int default_max_cutoff(const std::vector<ChoiceHistory>& data);

}  // namespace dynlogit
