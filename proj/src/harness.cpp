#include "dynlogit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace dynlogit {

int thread_count() {
  if (const char* s = std::getenv("DYNLOGIT_THREADS")) {
    const int n = std::atoi(s);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, const std::function<void(int)>& f, int threads) {
  if (threads <= 0) threads = thread_count();
  threads = std::min(threads, std::max(n, 1));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) {
        if (failed) return;
        try {
          f(i);
        } catch (...) {
          if (!failed.exchange(true)) err = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

double chi2_1_sf(double x) { return x <= 0.0 ? 1.0 : std::erfc(std::sqrt(x / 2.0)); }

double wald_p_value(double est, double se) {
  if (!(se > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::erfc(std::abs(est / se) / std::sqrt(2.0));
}

HausmanResult hausman_test(double b_robust, double var_robust, double b_efficient, double var_efficient) {
  HausmanResult r;
  r.var_diff = var_robust - var_efficient;
  if (!(r.var_diff > 0.0)) {
    r.nonpositive_variance = true;
    r.H = 0.0;
    r.p_value = 1.0;
    return r;
  }
  const double diff = b_robust - b_efficient;
  r.H = diff * diff / r.var_diff;
  r.p_value = chi2_1_sf(r.H);
  return r;
}

HausmanResult hausman_test(const CmleFit& robust, const std::string& component, const Estimate& efficient) {
  const int i = robust.index(component);
  return hausman_test(robust.beta_star(i), robust.cov(i, i), efficient.value, efficient.se * efficient.se);
}

McConfig McConfig::from(const Config& c) {
  McConfig m;
  m.dgp = c.get_int("dgp", m.dgp);
  m.window = c.get("window", m.window);
  m.estimators = c.get_list("estimators", m.estimators);
  m.tests = c.get_list("tests", m.tests);
  m.replications = c.get_int("replications", m.replications);
  m.N = c.get_int("N", m.N);
  if (c.has("seed")) m.seed = std::stoull(c.get("seed"));
  m.output = c.get("output", m.output);
  m.replications_output = c.get("replications_output", m.replications_output);
  m.mle_starts_2types = c.get_int("mle_starts_2types", m.mle_starts_2types);
  return m;
}

void McConfig::validate() const {
  if (replications < 1) throw std::invalid_argument("McConfig: replications must be >= 1");
  if (N < 1) throw std::invalid_argument("McConfig: N must be >= 1");
  table_dgp(dgp);
  sample_window(window);
  for (const auto& e : estimators)
    if (e != "cmle_true" && e != "cmle_bic" && e != "mle_nouh" && e != "mle_2types")
      throw std::invalid_argument("McConfig: unknown estimator " + e);
  for (const auto& t : tests)
    if (t != "hausman_nouh" && t != "hausman_2types") throw std::invalid_argument("McConfig: unknown test " + t);
}

std::uint64_t replication_seed(std::uint64_t seed, int rep) {
  // splitmix64 finalizer over (seed, rep)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(rep) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr int kTrueDstar = 3;

McReplication run_replication(const McConfig& cfg, const std::vector<std::string>& est, int rep) {
  DgpSpec dgp = table_dgp(cfg.dgp);
  dgp.N = cfg.N;
  dgp.seed = replication_seed(cfg.seed, rep);
  const auto w = sample_window(cfg.window);
  const auto panel = window_sample(simulate_panel(dgp), w.t_start, w.t_end);
  const auto& data = panel.histories;

  McReplication r;
  r.estimate.assign(est.size(), kNaN);
  r.se.assign(est.size(), kNaN);
  r.p_value.assign(cfg.tests.size(), kNaN);
  CmleFit cmle_true;
  bool have_cmle = false;
  Estimate nouh{kNaN, kNaN}, two{kNaN, kNaN};

  for (std::size_t e = 0; e < est.size(); ++e) {
    try {
      if (est[e] == "cmle_true") {
        cmle_true = fit_cmle(data, Variant::make(VariantKind::ForwardDurFlat, 1, {0, kTrueDstar}));
        const int i = cmle_true.index("X(1," + std::to_string(kTrueDstar - 1) + ")");
        if (!cmle_true.converged) continue;
        have_cmle = true;
        r.estimate[e] = cmle_true.beta_star(i);
        r.se[e] = std::sqrt(cmle_true.cov(i, i));
      } else if (est[e] == "cmle_bic") {
        const auto sel = select_dstar_bic(data, default_max_cutoff(data));
        r.dstar_selected = sel.selected;
        r.estimate[e] = sel.beta_star;
        r.se[e] = sel.se;
      } else if (est[e] == "mle_nouh") {
        const auto p = replacement_problem(1, dgp.shape, dgp.dstar, dgp.delta);
        Eigen::VectorXd start(2);
        start << 6.0, 0.5;
        const auto f = fit_mle_nfxp(data, p, start);
        if (!f.converged) continue;
        nouh = duration_slope(f, p, dgp.dstar);
        r.estimate[e] = nouh.value;
        r.se[e] = nouh.se;
      } else if (est[e] == "mle_2types") {
        const auto p = replacement_problem(2, dgp.shape, dgp.dstar, dgp.delta);
        Eigen::VectorXd start(4);
        start << 4.0, 10.0, 0.8, 0.0;
        MleOptions o;
        o.n_starts = cfg.mle_starts_2types;
        o.seed = dgp.seed;
        const auto f = fit_mle_nfxp(data, p, start, o);
        if (!f.converged) continue;
        two = duration_slope(f, p, dgp.dstar);
        r.estimate[e] = two.value;
        r.se[e] = two.se;
      }
    } catch (const std::exception&) {
      // recorded as a failure
    }
  }

  for (std::size_t t = 0; t < cfg.tests.size(); ++t) {
    const Estimate& eff = cfg.tests[t] == "hausman_nouh" ? nouh : two;
    if (!have_cmle || !std::isfinite(eff.value)) continue;
    const int i = cmle_true.index("X(1," + std::to_string(kTrueDstar - 1) + ")");
    const auto h = hausman_test(cmle_true.beta_star(i), cmle_true.cov(i, i), eff.value, eff.se * eff.se);
    r.p_value[t] = h.nonpositive_variance ? -1.0 : h.p_value;
  }
  return r;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

McSummary run_monte_carlo(const McConfig& cfg) {
  cfg.validate();
  McSummary s;
  s.cfg = cfg;
  std::vector<std::string> est = cfg.estimators;
  auto need = [&](const std::string& e) {
    if (std::find(est.begin(), est.end(), e) == est.end()) est.push_back(e);
  };
  for (const auto& t : cfg.tests) {
    need("cmle_true");
    need(t == "hausman_nouh" ? "mle_nouh" : "mle_2types");
  }
  s.cfg.estimators = est;
  s.reps.resize(cfg.replications);
  parallel_for(cfg.replications, [&](int r) { s.reps[r] = run_replication(cfg, est, r); });

  for (std::size_t e = 0; e < est.size(); ++e) {
    McEstimatorSummary m;
    m.name = est[e];
    std::vector<double> ok;
    for (const auto& r : s.reps) {
      if (std::isfinite(r.estimate[e])) ok.push_back(r.estimate[e]);
      else ++m.n_failed;
    }
    m.n_ok = static_cast<int>(ok.size());
    if (!ok.empty()) {
      double sum = 0.0;
      for (double v : ok) sum += v;
      m.mean = sum / ok.size();
      double ss = 0.0;
      for (double v : ok) ss += (v - m.mean) * (v - m.mean);
      m.sd = ok.size() > 1 ? std::sqrt(ss / (ok.size() - 1)) : kNaN;
      m.median = median(ok);
    } else {
      m.mean = m.median = m.sd = kNaN;
    }
    s.estimators.push_back(m);
  }
  for (std::size_t t = 0; t < cfg.tests.size(); ++t) {
    McTestSummary m;
    m.name = cfg.tests[t];
    int r01 = 0, r05 = 0, r10 = 0;
    for (const auto& r : s.reps) {
      const double p = r.p_value[t];
      if (std::isnan(p)) {
        ++m.n_failed;
        continue;
      }
      ++m.n_ok;
      if (p < 0.0) {
        ++m.n_nonpositive;
        continue;
      }
      r01 += p < 0.01;
      r05 += p < 0.05;
      r10 += p < 0.10;
    }
    const double n = std::max(m.n_ok, 1);
    m.rej01 = r01 / n;
    m.rej05 = r05 / n;
    m.rej10 = r10 / n;
    s.tests.push_back(m);
  }
  if (std::find(est.begin(), est.end(), "cmle_bic") != est.end()) {
    for (const auto& r : s.reps) {
      if (r.dstar_selected >= static_cast<int>(s.dstar_counts.size())) s.dstar_counts.resize(r.dstar_selected + 1, 0);
      if (r.dstar_selected > 0) ++s.dstar_counts[r.dstar_selected];
    }
  }
  return s;
}

namespace {

void put(std::ostream& o, double v) {
  if (std::isfinite(v)) o << v;
}

}  // namespace

void write_mc_csv(std::ostream& out, const McSummary& s) {
  out << std::setprecision(10);
  out << "section,name,mean,median,sd,rej_01,rej_05,rej_10,n_ok,n_failed\n";
  for (const auto& e : s.estimators) {
    out << "estimator," << e.name << ',';
    put(out, e.mean);
    out << ',';
    put(out, e.median);
    out << ',';
    put(out, e.sd);
    out << ",,,," << e.n_ok << ',' << e.n_failed << '\n';
  }
  for (const auto& t : s.tests)
    out << "test," << t.name << ",,,," << t.rej01 << ',' << t.rej05 << ',' << t.rej10 << ',' << t.n_ok << ','
        << t.n_failed << '\n';
  int total = 0;
  for (int c : s.dstar_counts) total += c;
  for (std::size_t d = 0; d < s.dstar_counts.size(); ++d)
    if (s.dstar_counts[d] > 0)
      out << "dstar_selected," << d << ',' << static_cast<double>(s.dstar_counts[d]) / total << ",,,,,,"
          << s.dstar_counts[d] << ",0\n";
}

void write_mc_replications_csv(std::ostream& out, const McSummary& s) {
  out << std::setprecision(12) << "rep";
  for (const auto& e : s.cfg.estimators) out << ',' << e << ',' << e << "_se";
  for (const auto& t : s.cfg.tests) out << ',' << t << "_p";
  out << ",dstar_selected\n";
  for (std::size_t r = 0; r < s.reps.size(); ++r) {
    out << r;
    for (std::size_t e = 0; e < s.cfg.estimators.size(); ++e) {
      out << ',';
      put(out, s.reps[r].estimate[e]);
      out << ',';
      put(out, s.reps[r].se[e]);
    }
    for (double p : s.reps[r].p_value) {
      out << ',';
      put(out, p);
    }
    out << ',' << s.reps[r].dstar_selected << '\n';
  }
}

std::vector<ChoiceHistory> load_bus_histories() {
  static const std::pair<const char*, int> rows[] = {
      {"110111", 2},     {"111011", 7},     {"111101", 7},     {"111110", 11},    {"1101111111", 1},
      {"1110111111", 4}, {"1111011111", 2}, {"1111101111", 7}, {"1111110111", 7}, {"1111111011", 5},
      {"1111111101", 3}, {"1111111110", 2}, {"1101110111", 1},
  };
  std::vector<ChoiceHistory> out;
  for (const auto& [s, n] : rows)
    for (int i = 0; i < n; ++i) out.push_back(from_string(s));
  return out;
}

std::vector<ChoiceHistory> load_bus_histories_all() {
  auto out = load_bus_histories();
  // buses never replaced: (count, years observed)
  static const std::pair<int, int> never[] = {{21, 6}, {5, 10}, {15, 3}, {4, 5}};
  for (const auto& [n, T] : never)
    for (int i = 0; i < n; ++i) out.push_back(make_history(1, 0, 0, std::vector<int>(T, 1)));
  return out;
}

namespace {

Estimate bhhh_slope(const MleFit& f, const MleProblem& p, int at) {
  MleFit g = f;
  g.cov = f.cov_bhhh;
  return duration_slope(g, p, at);
}

}  // namespace

BusReport bus_replication(const BusOptions& opt) {
  const auto cmle_data = load_bus_histories();
  const auto mle_data = load_bus_histories_all();
  BusReport r;
  r.delta = opt.delta;
  r.covariance = opt.covariance;
  r.n_cmle = static_cast<int>(cmle_data.size());
  r.n_mle = static_cast<int>(mle_data.size());
  const int L = opt.L > 0 ? opt.L : default_max_cutoff(cmle_data);
  r.selection = select_dstar_bic(cmle_data, L);

  const std::vector<CostShape> shapes{CostShape::Sqrt, CostShape::Linear, CostShape::Square};
  struct Job {
    CostShape shape;
    int dstar;
  };
  std::vector<Job> jobs;
  for (auto sh : shapes)
    for (int d = opt.dstar_min; d <= opt.dstar_max; ++d) jobs.push_back({sh, d});
  r.mle.resize(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), [&](int j) {
    const auto p = replacement_problem(1, jobs[j].shape, jobs[j].dstar, opt.delta);
    Eigen::VectorXd start(2);
    start << 8.0, 0.5;
    MleOptions o;
    o.n_starts = 3;
    o.covariance = opt.covariance;
    const auto f = fit_mle_nfxp(mle_data, p, start, o);
    r.mle[j] = BusMleRow{jobs[j].shape, jobs[j].dstar, f, duration_slope(f, p, jobs[j].dstar),
                         bhhh_slope(f, p, jobs[j].dstar)};
  });

  const int dsel = r.selection.selected;
  for (auto sh : shapes) {
    const BusMleRow* best = nullptr;
    for (const auto& row : r.mle)
      if (row.shape == sh && (!best || row.fit.loglik > best->fit.loglik)) best = &row;
    if (!best) continue;
    const auto p = replacement_problem(1, sh, best->dstar, opt.delta);
    BusHausmanRow h;
    h.shape = sh;
    h.mle_dstar = best->dstar;
    h.mle = duration_slope(best->fit, p, dsel);
    h.mle_bhhh = bhhh_slope(best->fit, p, dsel);
    h.cmle = {r.selection.beta_star, r.selection.se};
    const double vr = h.cmle.se * h.cmle.se;
    h.test = hausman_test(h.cmle.value, vr, h.mle.value, h.mle.se * h.mle.se);
    h.test_bhhh = hausman_test(h.cmle.value, vr, h.mle_bhhh.value, h.mle_bhhh.se * h.mle_bhhh.se);
    r.hausman.push_back(h);
  }
  return r;
}

void write_bus_report(std::ostream& out, const BusReport& r) {
  out << std::setprecision(10);
  out << "# mle on " << r.n_mle << " buses, delta " << r.delta << ", " << to_string(r.covariance)
      << " standard errors; cmle on " << r.n_cmle << " buses\n";
  out << "table,shape,dstar,rc,rc_se,beta_dstar,beta_dstar_se,loglik,converged,rc_se_bhhh,beta_dstar_se_bhhh\n";
  for (const auto& m : r.mle) {
    const int irc = m.fit.index("RC");
    out << "mle," << to_string(m.shape) << ',' << m.dstar << ',' << m.fit.theta(irc) << ',' << m.fit.se()(irc) << ','
        << m.slope.value << ',' << m.slope.se << ',' << m.fit.loglik << ',' << (m.fit.converged ? 1 : 0) << ','
        << std::sqrt(m.fit.cov_bhhh(irc, irc)) << ',' << m.slope_bhhh.se << '\n';
  }
  out << "\ntable,dstar,beta_dstar,se,p_value,concentrated_loglik,bic,informative\n";
  for (std::size_t i = 0; i < r.selection.candidates.size(); ++i) {
    const auto& t = r.selection.terms[i];
    out << "cmle," << t.n << ',';
    if (t.informative) out << t.coef << ',' << t.se << ',' << wald_p_value(t.coef, t.se);
    else out << ",,";
    out << ',' << r.selection.loglik[i] << ',' << r.selection.bic[i] << ',' << (t.informative ? 1 : 0) << '\n';
  }
  out << "selected," << r.selection.selected << ',' << r.selection.beta_star << ',' << r.selection.se << ",,,,\n";
  out << "\ntable,shape,mle_dstar,mle_beta,mle_se,cmle_beta,cmle_se,hausman,p_value,nonpositive_variance,"
         "mle_se_bhhh,hausman_bhhh,p_value_bhhh\n";
  for (const auto& h : r.hausman)
    out << "hausman," << to_string(h.shape) << ',' << h.mle_dstar << ',' << h.mle.value << ',' << h.mle.se << ','
        << h.cmle.value << ',' << h.cmle.se << ',' << h.test.H << ',' << h.test.p_value << ','
        << (h.test.nonpositive_variance ? 1 : 0) << ',' << h.mle_bhhh.se << ',' << h.test_bhhh.H << ','
        << h.test_bhhh.p_value << '\n';
}

}  // namespace dynlogit
