#include "dynlogit/cmle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace dynlogit {

namespace {

// Enumerated classes for one stratum, shared across fits.
struct StratumTable {
  std::vector<std::vector<int>> S;           // per enumerated history
  std::vector<int> class_of;                 // per enumerated history
  std::vector<std::vector<int>> members;     // per class, enumeration indices
  std::map<std::vector<int>, int> class_by_u;
};

using TableKey = std::tuple<int, int, std::vector<int>, int, int, int, int>;

std::shared_ptr<const StratumTable> stratum_table(const Variant& v, int dcap, int T, int y0, int d1,
                                                  std::uint64_t cap) {
  static std::mutex mu;
  static std::map<TableKey, std::shared_ptr<const StratumTable>> cache;
  const TableKey key{static_cast<int>(v.kind), v.J, v.dstar, dcap, T, y0, d1};
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto tab = std::make_shared<StratumTable>();
  const auto all = enumerate_histories(v.J, T, y0, d1, cap);
  tab->S.reserve(all.size());
  tab->class_of.reserve(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto u = u_vector(v, all[i], dcap);
    auto [it, fresh] = tab->class_by_u.try_emplace(std::move(u), static_cast<int>(tab->members.size()));
    if (fresh) tab->members.emplace_back();
    tab->members[it->second].push_back(static_cast<int>(i));
    tab->class_of.push_back(it->second);
    tab->S.push_back(s_vector(v, all[i], dcap));
  }
  std::lock_guard<std::mutex> lock(mu);
  auto [it, fresh] = cache.try_emplace(key, std::move(tab));
  return it->second;
}

std::size_t lex_index(const ChoiceHistory& h) {
  std::size_t k = 0;
  for (int c : h.y) k = k * static_cast<std::size_t>(h.J + 1) + static_cast<std::size_t>(c);
  return k;
}

struct RawBlock {
  std::vector<const std::vector<int>*> rows;
  std::vector<double> count;
  double n = 0.0;
};

}  // namespace

CondLikData build_conditional_data(const std::vector<ChoiceHistory>& data, const Variant& v,
                                   const CmleOptions& opt) {
  v.validate();
  CondLikData out;
  if (data.empty()) return out;
  int dcap = 0;
  for (const auto& h : data) {
    validate(h);
    if (h.J != v.J) throw std::invalid_argument("build_conditional_data: variant J does not match data");
    dcap = std::max(dcap, history_dcap(h));
  }
  const Layout layout = make_layout(v, dcap);
  const int k = static_cast<int>(layout.s_names.size());

  // strata by (T, y0, d1)
  std::map<std::tuple<int, int, int>, std::vector<const ChoiceHistory*>> strata;
  for (const auto& h : data) strata[{h.T(), h.y0, h.d1}].push_back(&h);

  std::vector<RawBlock> raw;
  std::vector<std::shared_ptr<const StratumTable>> keep;
  for (const auto& [key, hs] : strata) {
    const auto [T, y0, d1] = key;
    auto tab = stratum_table(v, dcap, T, y0, d1, opt.enum_cap);
    keep.push_back(tab);
    std::map<int, std::map<int, double>> obs;  // class -> member position -> count
    for (const auto* h : hs) {
      const int e = static_cast<int>(lex_index(*h));
      const int c = tab->class_of[e];
      const auto& mem = tab->members[c];
      const int pos = static_cast<int>(std::lower_bound(mem.begin(), mem.end(), e) - mem.begin());
      obs[c][pos] += 1.0;
    }
    for (const auto& [c, byPos] : obs) {
      RawBlock b;
      const auto& mem = tab->members[c];
      b.count.assign(mem.size(), 0.0);
      for (int e : mem) b.rows.push_back(&tab->S[e]);
      for (const auto& [pos, cnt] : byPos) {
        b.count[pos] = cnt;
        b.n += cnt;
      }
      raw.push_back(std::move(b));
    }
  }

  // keep the S columns that vary inside at least one observed class
  std::vector<bool> varies(k, false);
  for (const auto& b : raw)
    for (int j = 0; j < k; ++j)
      for (const auto* r : b.rows)
        if ((*r)[j] != (*b.rows[0])[j]) {
          varies[j] = true;
          break;
        }
  std::vector<int> cols;
  for (int j = 0; j < k; ++j) {
    if (varies[j]) {
      cols.push_back(j);
      out.names.push_back(layout.s_names[j]);
    } else {
      out.unidentified.push_back(layout.s_names[j]);
    }
  }

  out.n_obs = static_cast<int>(data.size());
  for (const auto& b : raw) {
    bool informative = false;
    for (int j : cols) {
      for (const auto* r : b.rows)
        if ((*r)[j] != (*b.rows[0])[j]) {
          informative = true;
          break;
        }
      if (informative) break;
    }
    const double m = static_cast<double>(b.rows.size());
    if (!informative) {
      out.n_degenerate += static_cast<int>(b.n);
      out.constant -= b.n * std::log(m);
      continue;
    }
    ClassBlock cb;
    cb.S.resize(static_cast<Eigen::Index>(b.rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < b.rows.size(); ++r)
      for (std::size_t j = 0; j < cols.size(); ++j) cb.S(r, j) = (*b.rows[r])[cols[j]];
    cb.count = Eigen::Map<const Eigen::VectorXd>(b.count.data(), static_cast<Eigen::Index>(b.count.size()));
    cb.n = b.n;
    out.n_informative += static_cast<int>(b.n);
    out.blocks.push_back(std::move(cb));
  }
  return out;
}

LikEval conditional_loglik(const Eigen::VectorXd& b, const CondLikData& d, bool hessian) {
  const Eigen::Index k = static_cast<Eigen::Index>(d.names.size());
  LikEval e;
  e.grad = Eigen::VectorXd::Zero(k);
  if (hessian) e.hess = Eigen::MatrixXd::Zero(k, k);
  for (const auto& blk : d.blocks) {
    const Eigen::VectorXd z = blk.S * b;
    const double mx = z.maxCoeff();
    const Eigen::VectorXd w = (z.array() - mx).exp();
    const double sw = w.sum();
    const Eigen::VectorXd p = w / sw;
    const double lse = mx + std::log(sw);
    e.value += blk.count.dot(z) - blk.n * lse;
    const Eigen::VectorXd mean = blk.S.transpose() * p;
    e.grad += blk.S.transpose() * blk.count - blk.n * mean;
    if (hessian) {
      const Eigen::MatrixXd C = blk.S.rowwise() - mean.transpose();
      e.hess -= blk.n * (C.transpose() * p.asDiagonal() * C);
    }
  }
  return e;
}

Eigen::MatrixXd conditional_bhhh(const Eigen::VectorXd& b, const CondLikData& d) {
  const Eigen::Index k = static_cast<Eigen::Index>(d.names.size());
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(k, k);
  for (const auto& blk : d.blocks) {
    const Eigen::VectorXd z = blk.S * b;
    const Eigen::VectorXd w = (z.array() - z.maxCoeff()).exp();
    const Eigen::VectorXd p = w / w.sum();
    const Eigen::VectorXd mean = blk.S.transpose() * p;
    const Eigen::MatrixXd C = blk.S.rowwise() - mean.transpose();
    B += C.transpose() * blk.count.asDiagonal() * C;
  }
  return B;
}

int CmleFit::index(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("CmleFit: no component " + name);
  return static_cast<int>(it - names.begin());
}

CmleFit fit_cmle(const CondLikData& d, const CmleOptions& opt) {
  if (d.blocks.empty() || d.names.empty()) throw std::runtime_error("fit_cmle: no identifying variation in the data");
  const Eigen::Index k = static_cast<Eigen::Index>(d.names.size());
  CmleFit fit;
  fit.names = d.names;
  fit.unidentified = d.unidentified;
  fit.n_obs = d.n_obs;
  fit.n_informative = d.n_informative;
  fit.loglik_constant = d.constant;

  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  LikEval e = conditional_loglik(b, d);
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    if (e.grad.lpNorm<Eigen::Infinity>() <= opt.grad_tol) break;
    Eigen::VectorXd dir;
    Eigen::LLT<Eigen::MatrixXd> llt(-e.hess);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
      dir = llt.solve(e.grad);
      ok = dir.allFinite() && e.grad.dot(dir) > 0.0;
    }
    if (!ok) {
      fit.bhhh_used = true;
      const Eigen::MatrixXd B = conditional_bhhh(b, d);
      dir = B.completeOrthogonalDecomposition().solve(e.grad);
      if (!(e.grad.dot(dir) > 0.0)) dir = e.grad;
    }
    double t = 1.0;
    const double slope = e.grad.dot(dir);
    LikEval en;
    bool accepted = false;
    if (!fit.bhhh_used && slope < 1e-10 * std::max(1.0, std::abs(e.value))) {
      // gain below the rounding of the objective: take the Newton step
      en = conditional_loglik(b + dir, d);
      accepted = en.grad.allFinite();
    }
    while (!accepted && t > 1e-14) {
      en = conditional_loglik(b + t * dir, d);
      if (std::isfinite(en.value) && en.value >= e.value + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    b += t * dir;
    e = std::move(en);
  }
  fit.iterations = it;
  fit.beta_star = b;
  fit.loglik = e.value;
  fit.grad_norm = e.grad.lpNorm<Eigen::Infinity>();
  fit.converged = fit.grad_norm <= opt.grad_tol;

  const Eigen::MatrixXd A = -e.hess;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const double lo = es.eigenvalues().minCoeff();
  fit.boundary = lo <= 1e-7 * std::max(1.0, static_cast<double>(d.n_informative));
  if (lo > 0.0) {
    fit.cov = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  } else {
    fit.bhhh_used = true;
    fit.cov = conditional_bhhh(b, d).completeOrthogonalDecomposition().pseudoInverse();
  }
  return fit;
}

CmleFit fit_cmle(const std::vector<ChoiceHistory>& data, const Variant& v, const CmleOptions& opt) {
  return fit_cmle(build_conditional_data(data, v, opt), opt);
}

int default_max_cutoff(const std::vector<ChoiceHistory>& data) {
  int T = 0;
  for (const auto& h : data) T = std::max(T, h.T());
  return (T - 1) / 2;
}

std::vector<ConcentratedTerm> concentrated_terms(const std::vector<ChoiceHistory>& data, int L,
                                                 const CmleOptions& opt) {
  if (L < 2) throw std::invalid_argument("concentrated_terms: L must be >= 2");
  std::vector<ConcentratedTerm> out;
  for (int n = 2; n <= L; ++n) {
    const auto v = Variant::make(VariantKind::ForwardDurFlat, 1, {0, n});
    const auto d = build_conditional_data(data, v, opt);
    ConcentratedTerm t;
    t.n = n;
    double zero = d.constant;
    for (const auto& blk : d.blocks) zero -= blk.n * std::log(static_cast<double>(blk.S.rows()));
    t.loglik_zero = zero;
    t.loglik_free = zero;
    if (!d.blocks.empty() && !d.names.empty()) {
      const auto f = fit_cmle(d, opt);
      t.informative = true;
      t.coef = f.beta_star(0);
      t.se = f.se()(0);
      t.boundary = f.boundary;
      t.loglik_free = f.loglik + f.loglik_constant;
    }
    out.push_back(t);
  }
  return out;
}

double concentrated_loglik(const std::vector<ConcentratedTerm>& terms, int dstar) {
  double l = 0.0;
  for (const auto& t : terms) l += t.n <= dstar ? t.loglik_free : t.loglik_zero;
  return l;
}

double concentrated_loglik(const std::vector<ChoiceHistory>& data, int dstar, int L, const CmleOptions& opt) {
  return concentrated_loglik(concentrated_terms(data, L, opt), dstar);
}

double bic_value(double loglik, int dstar, int N) {
  return loglik - (static_cast<double>(dstar) / 2.0) * std::log(static_cast<double>(N));
}

DstarSelection select_dstar_bic(const std::vector<ConcentratedTerm>& terms, int N) {
  if (terms.empty()) throw std::invalid_argument("select_dstar_bic: no candidates");
  DstarSelection s;
  s.N = N;
  s.terms = terms;
  s.L = terms.back().n;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& t : terms) {
    const double l = concentrated_loglik(terms, t.n);
    const double b = bic_value(l, t.n, N);
    s.candidates.push_back(t.n);
    s.loglik.push_back(l);
    s.bic.push_back(b);
    if (b > best) {
      best = b;
      s.selected = t.n;
      s.beta_star = t.coef;
      s.se = t.se;
    }
  }
  return s;
}

DstarSelection select_dstar_bic(const std::vector<ChoiceHistory>& data, int L, const CmleOptions& opt) {
  return select_dstar_bic(concentrated_terms(data, L, opt), static_cast<int>(data.size()));
}

}  // namespace dynlogit
