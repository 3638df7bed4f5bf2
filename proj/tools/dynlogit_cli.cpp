#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dynlogit/cmle.hpp"
#include "dynlogit/config.hpp"
#include "dynlogit/harness.hpp"
#include "dynlogit/mle.hpp"
#include "dynlogit/simulate.hpp"
#include "dynlogit/suffstats.hpp"

using namespace dynlogit;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string out;
  long long seed = -1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key = value configuration file");
  sub->add_option("--seed", c.seed, "RNG seed, overrides the config");
  sub->add_option("--out", c.out, "output path (default stdout)");
}

Config load(const Common& c) {
  Config cfg = c.config.empty() ? Config{} : Config::load(c.config);
  if (c.seed >= 0) cfg.set("seed", std::to_string(c.seed));
  return cfg;
}

template <class F>
void emit(const Common& c, F&& write) {
  if (c.out.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw std::runtime_error("cannot open " + c.out);
  write(f);
}

// "bus" is the 59 buses with a replacement, "bus-all" adds the 45 never replaced
std::vector<ChoiceHistory> load_panel(const Config& cfg, const std::string& key = "panel",
                                      const std::string& fallback = "bus") {
  const std::string path = cfg.get(key, fallback);
  if (path.empty() || path == "bus") return load_bus_histories();
  if (path == "bus-all") return load_bus_histories_all();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open panel " + path);
  return read_panel_csv(in, cfg.get_int("J", -1));
}

std::vector<int> int_list(const Config& cfg, const std::string& key, std::vector<int> fallback) {
  if (!cfg.has(key)) return fallback;
  std::vector<int> v;
  for (const auto& s : cfg.get_list(key)) v.push_back(std::stoi(s));
  return v;
}

json cmle_json(const CmleFit& f) {
  json j;
  const auto se = f.se();
  for (std::size_t i = 0; i < f.names.size(); ++i)
    j["estimates"].push_back({{"name", f.names[i]}, {"estimate", f.beta_star(i)}, {"se", se(i)}});
  j["unidentified"] = f.unidentified;
  j["loglik"] = f.loglik;
  j["loglik_constant"] = f.loglik_constant;
  j["n_obs"] = f.n_obs;
  j["n_informative"] = f.n_informative;
  j["iterations"] = f.iterations;
  j["grad_norm"] = f.grad_norm;
  j["converged"] = f.converged;
  j["bhhh_used"] = f.bhhh_used;
  j["boundary"] = f.boundary;
  return j;
}

json mle_json(const MleFit& f) {
  json j;
  const auto se = f.se();
  for (std::size_t i = 0; i < f.names.size(); ++i)
    j["estimates"].push_back({{"name", f.names[i]}, {"estimate", f.theta(i)}, {"se", se(i)}});
  j["weights"] = f.weights;
  j["loglik"] = f.loglik;
  j["iterations"] = f.iterations;
  j["inner_solves"] = f.inner_solves;
  j["grad_norm"] = f.grad_norm;
  j["converged"] = f.converged;
  j["bhhh_used"] = f.bhhh_used;
  j["covariance"] = to_string(f.cov_used);
  j["se_bhhh"] = json::array();
  for (Eigen::Index i = 0; i < f.cov_bhhh.rows(); ++i) j["se_bhhh"].push_back(std::sqrt(f.cov_bhhh(i, i)));
  return j;
}

MleProblem mle_problem(const Config& cfg) {
  return replacement_problem(cfg.get_int("types", 1), cost_shape_from_string(cfg.get("shape", "linear")),
                             cfg.get_int("mle_dstar", cfg.get_int("dstar", 3)), cfg.get_double("delta", 0.95));
}

MleFit run_mle(const Config& cfg, const std::vector<ChoiceHistory>& data, const MleProblem& p) {
  Eigen::VectorXd start(static_cast<Eigen::Index>(p.names.size()));
  const auto given = cfg.get_list("start");
  for (Eigen::Index i = 0; i < start.size(); ++i) {
    if (i < static_cast<Eigen::Index>(given.size())) start(i) = std::stod(given[i]);
    else if (i == p.beta_index) start(i) = 0.5;
    else if (std::find(p.rc_index.begin(), p.rc_index.end(), i) != p.rc_index.end()) start(i) = 4.0 + 4.0 * i;
    else start(i) = 0.0;
  }
  MleOptions o;
  o.n_starts = cfg.get_int("starts", 1);
  o.covariance = mle_covariance_from_string(cfg.get("covariance", "hessian"));
  if (cfg.has("seed")) o.seed = std::stoull(cfg.get("seed"));
  return fit_mle_nfxp(data, p, start, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-effects conditional and full maximum likelihood for dynamic logit models"};
  app.require_subcommand(1);

  Common c_sim, c_cmle, c_mle, c_sel, c_haus, c_mc, c_bus;
  auto* sim = app.add_subcommand("simulate", "simulate a panel from one of the four designs");
  auto* fc = app.add_subcommand("fit-cmle", "conditional maximum likelihood");
  auto* fm = app.add_subcommand("fit-mle", "nested fixed point maximum likelihood");
  auto* sd = app.add_subcommand("select-dstar", "concentrated likelihood and BIC over duration cutoffs");
  auto* hs = app.add_subcommand("hausman", "compare conditional and full maximum likelihood");
  auto* mc = app.add_subcommand("montecarlo", "Monte Carlo experiment");
  auto* bus = app.add_subcommand("bus-replication", "bus engine replacement tables");
  add_common(sim, c_sim);
  add_common(fc, c_cmle);
  add_common(fm, c_mle);
  add_common(sd, c_sel);
  add_common(hs, c_haus);
  add_common(mc, c_mc);
  add_common(bus, c_bus);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const auto cfg = load(c_sim);
      DgpSpec d = table_dgp(cfg.get_int("dgp", 1));
      d.N = cfg.get_int("N", d.N);
      d.T = cfg.get_int("T", d.T);
      if (cfg.has("seed")) d.seed = std::stoull(cfg.get("seed"));
      auto panel = simulate_panel(d);
      if (cfg.has("window")) {
        const auto w = sample_window(cfg.get("window"));
        panel = window_sample(panel, w.t_start, w.t_end);
      }
      emit(c_sim, [&](std::ostream& o) { write_panel_csv(o, panel.histories); });
    } else if (*fc) {
      const auto cfg = load(c_cmle);
      const auto data = load_panel(cfg);
      const int J = data.empty() ? 1 : data.front().J;
      const auto kind = variant_from_string(cfg.get("variant", "forward-dur-flat"));
      std::vector<int> ds;
      if (kind == VariantKind::ForwardDurFlat) {
        auto given = int_list(cfg, "dstar", {3});
        ds.assign(J + 1, 0);
        for (int y = 1; y <= J; ++y) ds[y] = given[std::min<std::size_t>(y - 1, given.size() - 1)];
      }
      const auto fit = fit_cmle(data, Variant::make(kind, J, ds));
      emit(c_cmle, [&](std::ostream& o) { o << cmle_json(fit).dump(2) << '\n'; });
    } else if (*fm) {
      const auto cfg = load(c_mle);
      const auto data = load_panel(cfg, "panel", "bus-all");
      const auto p = mle_problem(cfg);
      const auto fit = run_mle(cfg, data, p);
      auto j = mle_json(fit);
      const auto s = duration_slope(fit, p, p.dstar);
      j["beta_dstar"] = {{"estimate", s.value}, {"se", s.se}};
      emit(c_mle, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
    } else if (*sd) {
      const auto cfg = load(c_sel);
      const auto data = load_panel(cfg);
      const auto sel = select_dstar_bic(data, cfg.get_int("L", default_max_cutoff(data)));
      emit(c_sel, [&](std::ostream& o) {
        o << std::setprecision(10) << "dstar,beta_dstar,se,concentrated_loglik,bic\n";
        for (std::size_t i = 0; i < sel.candidates.size(); ++i) {
          const auto& t = sel.terms[i];
          o << t.n << ',';
          if (t.informative) o << t.coef << ',' << t.se;
          else o << ',';
          o << ',' << sel.loglik[i] << ',' << sel.bic[i] << '\n';
        }
        o << "selected," << sel.selected << ",N," << sel.N << ",\n";
      });
    } else if (*hs) {
      const auto cfg = load(c_haus);
      const auto data = load_panel(cfg);
      const int dstar = cfg.get_int("dstar", 3);
      const auto cm = fit_cmle(data, Variant::make(VariantKind::ForwardDurFlat, 1, {0, dstar}));
      const auto p = mle_problem(cfg);
      const std::string cpanel = cfg.get("panel", "bus");
      const auto mdata = load_panel(cfg, "mle_panel", cpanel == "bus" ? "bus-all" : cpanel);
      const auto fm_fit = run_mle(cfg, mdata, p);
      const auto eff = duration_slope(fm_fit, p, dstar);
      const auto h = hausman_test(cm, "X(1," + std::to_string(dstar - 1) + ")", eff);
      json j;
      j["cmle"] = cmle_json(cm);
      j["mle"] = mle_json(fm_fit);
      j["mle_beta_dstar"] = {{"estimate", eff.value}, {"se", eff.se}};
      j["hausman"] = {{"H", h.H}, {"df", h.df}, {"p_value", h.p_value}, {"var_diff", h.var_diff},
                      {"nonpositive_variance", h.nonpositive_variance}};
      emit(c_haus, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
    } else if (*mc) {
      const auto cfg = load(c_mc);
      auto m = McConfig::from(cfg);
      if (!c_mc.out.empty()) m.output = c_mc.out;
      const auto s = run_monte_carlo(m);
      if (m.output.empty()) write_mc_csv(std::cout, s);
      else {
        std::ofstream f(m.output);
        write_mc_csv(f, s);
      }
      if (!m.replications_output.empty()) {
        std::ofstream f(m.replications_output);
        write_mc_replications_csv(f, s);
      }
      for (const auto& e : s.estimators)
        if (e.n_ok == 0) return 2;
    } else if (*bus) {
      const auto cfg = load(c_bus);
      BusOptions o;
      o.delta = cfg.get_double("delta", o.delta);
      o.dstar_min = cfg.get_int("dstar_min", o.dstar_min);
      o.dstar_max = cfg.get_int("dstar_max", o.dstar_max);
      o.L = cfg.get_int("L", o.L);
      o.covariance = mle_covariance_from_string(cfg.get("covariance", "hessian"));
      const auto r = bus_replication(o);
      emit(c_bus, [&](std::ostream& os) { write_bus_report(os, r); });
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
