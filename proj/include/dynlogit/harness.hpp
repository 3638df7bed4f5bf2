#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dynlogit/cmle.hpp"
#include "dynlogit/config.hpp"
#include "dynlogit/mle.hpp"
#include "dynlogit/simulate.hpp"

namespace dynlogit {

// Worker count from DYNLOGIT_THREADS, else the hardware concurrency.
int thread_count();
// Runs f(0..n-1) on a small pool. Results must be written to per-index slots.
void parallel_for(int n, const std::function<void(int)>& f, int threads = 0);

struct HausmanResult {
  double H = 0.0;
  int df = 1;
  double p_value = 1.0;
  double var_diff = 0.0;
  bool nonpositive_variance = false;
};

// H = (b_r - b_e)^2 / (V_r - V_e); H = 0 and a flag when V_r - V_e <= 0.
HausmanResult hausman_test(double b_robust, double var_robust, double b_efficient, double var_efficient);
HausmanResult hausman_test(const CmleFit& robust, const std::string& component, const Estimate& efficient);
double chi2_1_sf(double x);
// Two-sided normal p-value of a Wald ratio.
double wald_p_value(double est, double se);

struct McConfig {
  int dgp = 1;
  std::string window = "A";
  std::vector<std::string> estimators{"cmle_true", "mle_nouh"};
  std::vector<std::string> tests{};
  int replications = 200;
  int N = 1000;
  std::uint64_t seed = 20240601;
  std::string output;  // summary CSV path, empty for none
  std::string replications_output;
  int mle_starts_2types = 3;

  static McConfig from(const Config& c);
  void validate() const;
};

struct McEstimatorSummary {
  std::string name;
  double mean = 0.0, median = 0.0, sd = 0.0;
  int n_ok = 0, n_failed = 0;
};

struct McTestSummary {
  std::string name;
  double rej01 = 0.0, rej05 = 0.0, rej10 = 0.0;
  int n_ok = 0, n_failed = 0, n_nonpositive = 0;
};

struct McReplication {
  std::vector<double> estimate;  // per estimator, NaN on failure
  std::vector<double> se;
  std::vector<double> p_value;   // per test, NaN on failure
  int dstar_selected = 0;
};

struct McSummary {
  McConfig cfg;
  std::vector<McEstimatorSummary> estimators;
  std::vector<McTestSummary> tests;
  std::vector<int> dstar_counts;  // index = selected cutoff, when cmle_bic runs
  std::vector<McReplication> reps;
};

std::uint64_t replication_seed(std::uint64_t seed, int rep);
McSummary run_monte_carlo(const McConfig& cfg);
void write_mc_csv(std::ostream& out, const McSummary& s);
void write_mc_replications_csv(std::ostream& out, const McSummary& s);

// The 59 buses with at least one replacement, annual histories, new engines.
std::vector<ChoiceHistory> load_bus_histories();
// The 59 plus 45 buses never replaced: 21 over 6 years, 5 over 10, 15 over 3
// and 4 over 5.
std::vector<ChoiceHistory> load_bus_histories_all();

struct BusMleRow {
  CostShape shape;
  int dstar;
  MleFit fit;
  Estimate slope;  // -Delta beta_d(dstar)
  Estimate slope_bhhh;
};

struct BusHausmanRow {
  CostShape shape;
  int mle_dstar;
  Estimate mle;   // -Delta beta_d at the CMLE cutoff, from the best MLE cutoff
  Estimate mle_bhhh;
  Estimate cmle;
  HausmanResult test;
  HausmanResult test_bhhh;
};

struct BusReport {
  double delta = 0.95;
  MleCovariance covariance = MleCovariance::Hessian;
  int n_cmle = 0, n_mle = 0;
  std::vector<BusMleRow> mle;
  DstarSelection selection;
  std::vector<BusHausmanRow> hausman;
};

struct BusOptions {
  double delta = 0.95;
  int dstar_min = 3, dstar_max = 9;
  int L = -1;  // default floor((max T - 1) / 2)
  MleCovariance covariance = MleCovariance::Hessian;
};

BusReport bus_replication(const BusOptions& opt = {});
void write_bus_report(std::ostream& out, const BusReport& r);

}  // namespace dynlogit
