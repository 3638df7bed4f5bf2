#include "dynlogit/suffstats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "dynlogit/numeric.hpp"

namespace dynlogit {

namespace {

enum class C { Hits, DeltaChoice, H, DeltaState, HTail, DeltaTail, Dyad, X };

struct Comp {
  C c;
  int a, b;
};

int eval(const Comp& k, const Statistics& s) {
  switch (k.c) {
    case C::Hits: return s.T(k.a);
    case C::DeltaChoice: return s.Delta(k.a);
    case C::H: return s.H(k.a, k.b);
    case C::DeltaState: return s.Delta(k.a, k.b);
    case C::HTail: {
      int t = 0;
      for (int d = k.b; d <= s.dcap; ++d) t += s.H(k.a, d);
      return t;
    }
    case C::DeltaTail: {
      int t = 0;
      for (int d = k.b; d <= s.dcap; ++d) t += s.Delta(k.a, d);
      return t;
    }
    case C::Dyad: return s.D(k.a, k.b);
    case C::X: return s.X(k.a, k.b);
  }
  return 0;
}

std::string name(const Comp& k) {
  const std::string a = std::to_string(k.a), b = std::to_string(k.b);
  switch (k.c) {
    case C::Hits: return "T(" + a + ")";
    case C::DeltaChoice: return "Delta(" + a + ")";
    case C::H: return "H(" + a + "," + b + ")";
    case C::DeltaState: return "Delta(" + a + "," + b + ")";
    case C::HTail: return "H(" + a + ",>=" + b + ")";
    case C::DeltaTail: return "Delta(" + a + ",>=" + b + ")";
    case C::Dyad: return "D(" + a + "," + b + ")";
    case C::X: return "X(" + a + "," + b + ")";
  }
  return {};
}

struct Comps {
  std::vector<Comp> u, s;
};

Comps components(const Variant& v, int dcap) {
  const int J = v.J;
  Comps out;
  auto dyads = [&](bool diagonal) {
    for (int a = 1; a <= J; ++a)
      for (int b = 1; b <= J; ++b)
        if (diagonal || a != b) out.s.push_back({C::Dyad, a, b});
  };
  switch (v.kind) {
    case VariantKind::MyopicNoDur:
    case VariantKind::ForwardNoDur:
      for (int y = 1; y <= J; ++y) out.u.push_back({C::Hits, y, 0});
      for (int y = 1; y <= J; ++y) out.u.push_back({C::DeltaChoice, y, 0});
      dyads(true);
      break;
    case VariantKind::MyopicDur:
      for (int y = 1; y <= J; ++y) out.u.push_back({C::DeltaChoice, y, 0});
      for (int y = 1; y <= J; ++y)
        for (int d = 1; d <= dcap; ++d) out.u.push_back({C::H, y, d});
      dyads(false);
      for (int y = 1; y <= J; ++y)
        for (int d = 2; d <= dcap; ++d) out.s.push_back({C::DeltaState, y, d});
      break;
    case VariantKind::ForwardDurUnrestricted:
      for (int y = 1; y <= J; ++y)
        for (int d = 1; d <= dcap; ++d) out.u.push_back({C::H, y, d});
      for (int y = 1; y <= J; ++y)
        for (int d = 1; d <= dcap; ++d) out.u.push_back({C::DeltaState, y, d});
      dyads(false);
      for (int y = 1; y <= J; ++y)
        for (int d = 2; d <= dcap; ++d) out.s.push_back({C::DeltaState, y, d});
      break;
    case VariantKind::ForwardDurFlat:
      for (int y = 1; y <= J; ++y)
        for (int d = 1; d < v.dstar[y]; ++d) out.u.push_back({C::H, y, d});
      for (int y = 1; y <= J; ++y)
        for (int d = 1; d < v.dstar[y]; ++d) out.u.push_back({C::DeltaState, y, d});
      for (int y = 1; y <= J; ++y) out.u.push_back({C::HTail, y, v.dstar[y]});
      for (int y = 1; y <= J; ++y) out.u.push_back({C::DeltaTail, y, v.dstar[y]});
      dyads(false);
      // X(y, d*-1) = H(y, d*) + Delta(y, d*) is the part of the duration
      // profile that the tail aggregates in U do not pin down
      for (int y = 1; y <= J; ++y)
        if (v.dstar[y] >= 2) out.s.push_back({C::X, y, v.dstar[y] - 1});
      break;
  }
  return out;
}

bool uses_dcap(VariantKind k) {
  return k == VariantKind::MyopicDur || k == VariantKind::ForwardDurUnrestricted;
}

void check_inputs(const Variant& v, const ChoiceHistory& h, int dcap) {
  if (h.J != v.J) throw std::invalid_argument("suffstats: variant J does not match history J");
  if (uses_dcap(v.kind) && dcap < history_dcap(h))
    throw std::invalid_argument("suffstats: dcap smaller than the history's reachable duration");
}

}  // namespace

std::string to_string(VariantKind k) {
  switch (k) {
    case VariantKind::MyopicNoDur: return "myopic-nodur";
    case VariantKind::ForwardNoDur: return "forward-nodur";
    case VariantKind::MyopicDur: return "myopic-dur";
    case VariantKind::ForwardDurUnrestricted: return "forward-dur-unrestricted";
    case VariantKind::ForwardDurFlat: return "forward-dur-flat";
  }
  return {};
}

VariantKind variant_from_string(const std::string& s) {
  for (auto k : {VariantKind::MyopicNoDur, VariantKind::ForwardNoDur, VariantKind::MyopicDur,
                 VariantKind::ForwardDurUnrestricted, VariantKind::ForwardDurFlat})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown variant: " + s);
}

Variant Variant::make(VariantKind kind, int J, std::vector<int> dstar) {
  Variant v{kind, J, std::move(dstar)};
  v.validate();
  return v;
}

void Variant::validate() const {
  if (J < 1) throw std::invalid_argument("Variant: J must be >= 1");
  if (needs_dstar()) {
    if (static_cast<int>(dstar.size()) != J + 1) throw std::invalid_argument("Variant: dstar needs J+1 entries");
    for (int y = 1; y <= J; ++y)
      if (dstar[y] < 1) throw std::invalid_argument("Variant: dstar[y] must be >= 1");
  } else if (!dstar.empty()) {
    throw std::invalid_argument("Variant: dstar given for a variant that does not use it");
  }
}

int history_dcap(const ChoiceHistory& h) { return h.d1 + h.T(); }

Layout make_layout(const Variant& v, int dcap) {
  v.validate();
  const auto c = components(v, dcap);
  Layout l;
  l.dcap = dcap;
  for (const auto& k : c.u) l.u_names.push_back(name(k));
  for (const auto& k : c.s) l.s_names.push_back(name(k));
  return l;
}

std::vector<int> u_vector(const Variant& v, const ChoiceHistory& h, int dcap) {
  check_inputs(v, h, dcap);
  const auto s = compute_statistics(h);
  std::vector<int> out;
  for (const auto& k : components(v, dcap).u) out.push_back(eval(k, s));
  return out;
}

std::vector<int> s_vector(const Variant& v, const ChoiceHistory& h, int dcap) {
  check_inputs(v, h, dcap);
  const auto s = compute_statistics(h);
  std::vector<int> out;
  for (const auto& k : components(v, dcap).s) out.push_back(eval(k, s));
  return out;
}

std::vector<double> structural_beta_star(const Variant& v, const ModelSpec& m, int dcap) {
  if (m.J != v.J) throw std::invalid_argument("structural_beta_star: J mismatch");
  std::vector<double> b;
  for (const auto& k : components(v, dcap).s) {
    switch (k.c) {
      case C::Dyad:  // a = y_{t-1}, b = y_t
        b.push_back(m.by(k.b, k.a) - m.by(0, k.a) - m.by(k.b, 0));
        break;
      case C::DeltaState:
        b.push_back(m.bd(k.a, k.b - 1) - m.by(0, k.a) - m.by(k.a, 0));
        break;
      case C::X:
        b.push_back(m.bd(k.a, k.b) - m.bd(k.a, k.b + 1));
        break;
      default:
        throw std::logic_error("structural_beta_star: unexpected S component");
    }
  }
  return b;
}

std::vector<HistoryClass> group_histories(const Variant& v, const std::vector<ChoiceHistory>& hs, int dcap) {
  std::vector<HistoryClass> out;
  if (hs.empty()) return out;
  const auto& f = hs.front();
  if (dcap < 0) dcap = history_dcap(f);
  std::map<std::vector<int>, std::size_t> index;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const auto& h = hs[i];
    if (h.J != f.J || h.T() != f.T() || h.y0 != f.y0 || h.d1 != f.d1)
      throw std::invalid_argument("group_histories: histories must share J, T and the initial condition");
    auto u = u_vector(v, h, dcap);
    auto [it, fresh] = index.try_emplace(u, out.size());
    if (fresh) out.push_back(HistoryClass{std::move(u), {}});
    out[it->second].members.push_back(i);
  }
  return out;
}

double check_sufficiency(const std::vector<ChoiceHistory>& cls, const ModelSpec& theta1, const ModelSpec& theta2) {
  const auto m1 = solve_bellman(theta1);
  const auto m2 = solve_bellman(theta2);
  std::vector<double> l1, l2;
  for (const auto& h : cls) {
    l1.push_back(history_log_prob(m1, h));
    l2.push_back(history_log_prob(m2, h));
  }
  const double n1 = logsumexp(l1), n2 = logsumexp(l2);
  double dev = 0.0;
  for (std::size_t i = 0; i < cls.size(); ++i)
    dev = std::max(dev, std::abs(std::exp(l1[i] - n1) - std::exp(l2[i] - n2)));
  return dev;
}

std::pair<ChoiceHistory, ChoiceHistory> dstar_probe_pairs(int n, int T) {
  if (n < 1) throw std::invalid_argument("dstar_probe_pairs: n must be >= 1");
  if (2 * n + 1 > T)
    throw std::invalid_argument("dstar_probe_pairs: horizon too short, need 2n+1 <= T (n=" + std::to_string(n) +
                                ", T=" + std::to_string(T) + ")");
  std::vector<int> a(T, 1), b(T, 1);
  a[n - 1] = 0;
  b[n] = 0;
  return {make_history(1, 0, 0, a), make_history(1, 0, 0, b)};
}

}  // namespace dynlogit
