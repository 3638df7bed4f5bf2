#include "dynlogit/histories.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dynlogit {

void validate(const ChoiceHistory& h) {
  if (h.J < 1) throw std::invalid_argument("history: J must be >= 1");
  if (h.y.empty()) throw std::invalid_argument("history: T must be >= 1");
  if (h.y0 < 0 || h.y0 > h.J) throw std::invalid_argument("history: y0 out of range");
  if (h.y0 == 0 && h.d1 != 0) throw std::invalid_argument("history: y0 = 0 requires d1 = 0");
  if (h.y0 > 0 && h.d1 < 1) throw std::invalid_argument("history: y0 > 0 requires d1 >= 1");
  for (int c : h.y)
    if (c < 0 || c > h.J) throw std::invalid_argument("history: choice out of range");
}

ChoiceHistory make_history(int J, int y0, int d1, std::vector<int> y) {
  ChoiceHistory h{J, y0, d1, std::move(y)};
  validate(h);
  return h;
}

std::vector<int> duration_path(const ChoiceHistory& h) {
  std::vector<int> d(h.y.size() + 1);
  d[0] = h.d1;
  int prev = h.y0;
  for (std::size_t t = 0; t < h.y.size(); ++t) {
    const int cur = h.y[t];
    d[t + 1] = cur > 0 ? (cur == prev ? d[t] : 0) + 1 : 0;
    prev = cur;
  }
  return d;
}

Statistics compute_statistics(const ChoiceHistory& h) {
  Statistics s;
  const int J = h.J, T = h.T();
  s.J = J;
  s.dcap = h.d1 + T;
  const int W = s.dcap + 1;
  s.hits.assign(J + 1, 0);
  s.dyads.assign((J + 1) * (J + 1), 0);
  s.state_hist.assign((J + 1) * W, 0);
  s.ext_hist.assign((J + 1) * W, 0);
  s.delta_state.assign((J + 1) * W, 0);
  s.delta_choice.assign(J + 1, 0);

  const auto d = duration_path(h);
  int prev = h.y0;
  for (int t = 0; t < T; ++t) {
    const int cur = h.y[t];
    s.hits[cur] += 1;
    s.dyads[prev * (J + 1) + cur] += 1;
    s.state_hist[prev * W + d[t]] += 1;
    if (prev == cur) s.ext_hist[prev * W + d[t]] += 1;
    prev = cur;
  }
  s.delta_state[h.y[T - 1] * W + d[T]] += 1;
  s.delta_state[h.y0 * W + h.d1] -= 1;
  s.delta_choice[h.y[T - 1]] += 1;
  s.delta_choice[h.y0] -= 1;
  return s;
}

std::vector<ChoiceHistory> enumerate_histories(int J, int T, int y0, int d1, std::uint64_t cap) {
  if (J < 1 || T < 1) throw std::invalid_argument("enumerate_histories: need J >= 1, T >= 1");
  std::uint64_t count = 1;
  for (int t = 0; t < T; ++t) {
    count *= static_cast<std::uint64_t>(J + 1);
    if (count > cap)
      throw std::length_error("enumeration too large: (J+1)^T = " + std::to_string(J + 1) + "^" +
                              std::to_string(T) + " exceeds cap " + std::to_string(cap));
  }
  ChoiceHistory base{J, y0, d1, std::vector<int>(T, 0)};
  validate(base);
  std::vector<ChoiceHistory> out;
  out.reserve(count);
  std::vector<int> y(T, 0);
  for (std::uint64_t k = 0; k < count; ++k) {
    out.push_back(ChoiceHistory{J, y0, d1, y});
    // odometer increment, last position fastest
    for (int t = T - 1; t >= 0; --t) {
      if (++y[t] <= J) break;
      y[t] = 0;
    }
  }
  return out;
}

ChoiceHistory from_string(const std::string& s, int J, int y0, int d1) {
  std::vector<int> y;
  y.reserve(s.size());
  for (char c : s) {
    if (c < '0' || c > '9') throw std::invalid_argument("history string: bad character");
    y.push_back(c - '0');
  }
  return make_history(J, y0, d1, std::move(y));
}

std::string to_string(const ChoiceHistory& h) {
  std::string s;
  s.reserve(h.y.size());
  for (int c : h.y) s.push_back(static_cast<char>('0' + c));
  return s;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" \t\r"));
    tok.erase(tok.find_last_not_of(" \t\r") + 1);
    f.push_back(tok);
  }
  return f;
}

}  // namespace

std::vector<ChoiceHistory> read_panel_csv(std::istream& in, int J) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("panel csv: empty input");
  const auto header = split_csv(line);
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int cid = col("id"), ct = col("t"), cy = col("y"), cd = col("d");
  if (cid < 0 || ct < 0 || cy < 0) throw std::invalid_argument("panel csv: need columns id,t,y");

  struct Rows {
    int y0 = 0, d1 = 0;
    std::map<int, std::pair<int, int>> obs;  // t -> (y, d or -1)
  };
  std::map<std::string, Rows> byid;
  std::vector<std::string> order;
  int maxy = 1;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv(line);
    if (static_cast<int>(f.size()) < static_cast<int>(header.size()))
      throw std::invalid_argument("panel csv: short row: " + line);
    const std::string& id = f[cid];
    if (!byid.count(id)) order.push_back(id);
    Rows& r = byid[id];
    const int t = std::stoi(f[ct]);
    const int y = std::stoi(f[cy]);
    const int d = (cd >= 0 && !f[cd].empty()) ? std::stoi(f[cd]) : -1;
    if (t == 0) {
      r.y0 = y;
      r.d1 = d < 0 ? (y > 0 ? 1 : 0) : d;
    } else {
      if (r.obs.count(t)) throw std::invalid_argument("panel csv: duplicate (id,t)");
      r.obs[t] = {y, d};
      maxy = std::max(maxy, y);
    }
  }
  if (J < 0) J = maxy;

  std::vector<ChoiceHistory> out;
  for (const auto& id : order) {
    const Rows& r = byid[id];
    std::vector<int> y;
    int expect = 1;
    for (const auto& [t, yd] : r.obs) {
      if (t != expect) throw std::invalid_argument("panel csv: gap in periods for id " + id);
      ++expect;
      y.push_back(yd.first);
    }
    ChoiceHistory h = make_history(J, r.y0, r.d1, std::move(y));
    const auto dp = duration_path(h);
    for (const auto& [t, yd] : r.obs)
      if (yd.second >= 0 && yd.second != dp[t - 1])
        throw std::invalid_argument("panel csv: duration inconsistent with choices for id " + id);
    out.push_back(std::move(h));
  }
  return out;
}

void write_panel_csv(std::ostream& out, const std::vector<ChoiceHistory>& panel) {
  out << "id,t,y,d\n";
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto& h = panel[i];
    const auto d = duration_path(h);
    out << i + 1 << ",0," << h.y0 << ',' << h.d1 << '\n';
    for (int t = 0; t < h.T(); ++t) out << i + 1 << ',' << t + 1 << ',' << h.y[t] << ',' << d[t] << '\n';
  }
}

}  // namespace dynlogit
