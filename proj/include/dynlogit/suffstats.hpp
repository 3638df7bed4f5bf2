#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dynlogit/histories.hpp"
#include "dynlogit/model.hpp"

namespace dynlogit {

enum class VariantKind {
  MyopicNoDur,
  ForwardNoDur,
  MyopicDur,
  ForwardDurUnrestricted,
  ForwardDurFlat,
};

std::string to_string(VariantKind k);
VariantKind variant_from_string(const std::string& s);

// Binary vs multinomial is carried by J.
struct Variant {
  VariantKind kind = VariantKind::MyopicNoDur;
  int J = 1;
  std::vector<int> dstar;  // J+1 entries, only for ForwardDurFlat

  static Variant make(VariantKind kind, int J, std::vector<int> dstar = {});
  bool needs_dstar() const { return kind == VariantKind::ForwardDurFlat; }
  void validate() const;
};

// Component names for U and S. dcap is the largest duration index used by
// the duration-indexed components; it must be common to all histories that
// are compared or pooled.
struct Layout {
  std::vector<std::string> u_names;
  std::vector<std::string> s_names;
  int dcap = 0;
};

Layout make_layout(const Variant& v, int dcap);
// dcap = d1 + T, the smallest admissible value for one history
int history_dcap(const ChoiceHistory& h);

std::vector<int> u_vector(const Variant& v, const ChoiceHistory& h, int dcap);
std::vector<int> s_vector(const Variant& v, const ChoiceHistory& h, int dcap);
inline std::vector<int> u_vector(const Variant& v, const ChoiceHistory& h) { return u_vector(v, h, history_dcap(h)); }
inline std::vector<int> s_vector(const Variant& v, const ChoiceHistory& h) { return s_vector(v, h, history_dcap(h)); }

// Structural value of each S coefficient, so that within a U-class
// log P(h) - S(h)'beta_star does not depend on h.
std::vector<double> structural_beta_star(const Variant& v, const ModelSpec& m, int dcap);

struct HistoryClass {
  std::vector<int> u;
  std::vector<std::size_t> members;  // indices into the input
};

// Classes in order of first appearance. All histories must share (J, T, y0, d1).
std::vector<HistoryClass> group_histories(const Variant& v, const std::vector<ChoiceHistory>& hs, int dcap = -1);

// max_h |P(h | U, theta1) - P(h | U, theta2)| over the class members
double check_sufficiency(const std::vector<ChoiceHistory>& cls, const ModelSpec& theta1, const ModelSpec& theta2);

// A_n = {0,0 | 1_{n-1}, 0, 1_{T-n}}, B_n = {0,0 | 1_n, 0, 1_{T-n-1}}; needs 2n+1 <= T.
std::pair<ChoiceHistory, ChoiceHistory> dstar_probe_pairs(int n, int T);

}  // namespace dynlogit
