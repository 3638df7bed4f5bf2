#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dynlogit {

// Initial condition (y0, d1) plus the observed choices y_1..y_T.
// Choice 0 is the baseline alternative; its duration is always 0.
struct ChoiceHistory {
  int J = 1;
  int y0 = 0;
  int d1 = 0;
  std::vector<int> y;

  int T() const { return static_cast<int>(y.size()); }
  bool operator==(const ChoiceHistory&) const = default;
  auto operator<=>(const ChoiceHistory&) const = default;
};

// Throws std::invalid_argument when the invariants fail.
ChoiceHistory make_history(int J, int y0, int d1, std::vector<int> y);
void validate(const ChoiceHistory& h);

// d_1..d_{T+1}, with d_{t+1} = 1{y_t = y_{t-1}} d_t + 1 if y_t > 0, else 0.
std::vector<int> duration_path(const ChoiceHistory& h);

// Counts over t = 1..T for one history. Duration indices run 0..dcap,
// where dcap = d1 + T bounds every duration the history can reach.
struct Statistics {
  int J = 1;
  int dcap = 0;
  std::vector<int> hits;          // T^(y)
  std::vector<int> dyads;         // D^(a,b), row a = y_{t-1}, column b = y_t
  std::vector<int> state_hist;    // H^(y)(d)
  std::vector<int> ext_hist;      // X^(y)(d)
  std::vector<int> delta_state;   // Delta^(y)(d)
  std::vector<int> delta_choice;  // Delta^(y)

  int T(int y) const { return hits[y]; }
  int D(int a, int b) const { return dyads[a * (J + 1) + b]; }
  int H(int y, int d) const { return at(state_hist, y, d); }
  int X(int y, int d) const { return at(ext_hist, y, d); }
  int Delta(int y, int d) const { return at(delta_state, y, d); }
  int Delta(int y) const { return delta_choice[y]; }

 private:
  int at(const std::vector<int>& v, int y, int d) const {
    if (d < 0 || d > dcap) return 0;
    return v[y * (dcap + 1) + d];
  }
};

Statistics compute_statistics(const ChoiceHistory& h);

// All (J+1)^T histories with the given initial condition, lexicographic.
std::vector<ChoiceHistory> enumerate_histories(int J, int T, int y0, int d1,
                                               std::uint64_t cap = 10'000'000);

// Compact digit form, e.g. "110111".
ChoiceHistory from_string(const std::string& s, int J = 1, int y0 = 0, int d1 = 0);
std::string to_string(const ChoiceHistory& h);

// Long CSV panels: header "id,t,y" or "id,t,y,d". A row with t = 0 carries
// (y0, d1) in its y and d columns; without one the default is (0, 0).
std::vector<ChoiceHistory> read_panel_csv(std::istream& in, int J = -1);
void write_panel_csv(std::ostream& out, const std::vector<ChoiceHistory>& panel);

}  // namespace dynlogit
