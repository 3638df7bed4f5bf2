#include <cmath>
#include <map>

#include "doctest.h"
#include "dynlogit/simulate.hpp"

using namespace dynlogit;

TEST_CASE("philox streams") {
  Philox a(42, 0), b(42, 0), c(42, 1), d(43, 0);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
  double mean = 0.0, var = 0.0;
  Philox g(7, 3);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = g.normal();
    mean += z / n;
    var += z * z / n;
  }
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
  for (int i = 0; i < 1000; ++i) {
    const double u = g.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("designs") {
  CHECK(table_dgp(1).rc_sd == 2.0);
  CHECK(table_dgp(2).rc_values == std::vector<double>{4.5, 9.0});
  CHECK(table_dgp(3).rc_values == std::vector<double>{8.0, 9.0});
  CHECK(table_dgp(4).rc_values == std::vector<double>{8.0});
  CHECK_THROWS_AS(table_dgp(5), std::invalid_argument);
  auto bad = table_dgp(2);
  bad.rc_weights = {0.5, 0.4};
  CHECK_THROWS_AS(simulate_panel(bad), std::invalid_argument);
}

TEST_CASE("simulation is deterministic and individual streams are independent of N") {
  auto d = table_dgp(1);
  d.N = 300;
  d.seed = 99;
  const auto p1 = simulate_panel(d);
  const auto p2 = simulate_panel(d);
  CHECK(p1.histories == p2.histories);
  CHECK(p1.rc == p2.rc);
  d.N = 100;
  const auto p3 = simulate_panel(d);
  for (int i = 0; i < 100; ++i) CHECK(p3.histories[i] == p1.histories[i]);
  d.seed = 100;
  CHECK(simulate_panel(d).histories != p3.histories);
}

TEST_CASE("durations follow the transition rule") {
  auto d = table_dgp(2);
  d.N = 200;
  const auto p = simulate_panel(d);
  for (std::size_t i = 0; i < p.histories.size(); ++i) {
    const auto path = duration_path(p.histories[i]);
    CHECK(path == p.durations[i]);
  }
}

TEST_CASE("empirical choice frequencies match the ccps") {
  auto d = table_dgp(4);
  d.N = 20000;
  d.T = 10;
  d.seed = 5;
  const auto p = simulate_panel(d);
  const auto m = solve_bellman(replacement_spec(8.0, 1.0, 3, 0.95));
  std::map<std::pair<int, int>, std::pair<double, double>> cnt;  // state -> (replacements, visits)
  for (std::size_t i = 0; i < p.histories.size(); ++i) {
    const auto& h = p.histories[i];
    int prev = h.y0;
    for (int t = 0; t < h.T(); ++t) {
      const int dc = std::min(p.durations[i][t], 3);
      auto& c = cnt[{prev, dc}];
      c.second += 1;
      if (h.y[t] == 0) c.first += 1;
      prev = h.y[t];
    }
  }
  for (const auto& [state, c] : cnt) {
    if (c.second < 2000) continue;
    const double pr = m.ccp(0, state.first, state.second);
    const double sd = std::sqrt(pr * (1 - pr) / c.second);
    CHECK(std::abs(c.first / c.second - pr) < 4.0 * sd);
  }
}

TEST_CASE("sample windows") {
  CHECK(sample_window("A").t_end == 7);
  CHECK(sample_window("B").t_end == 14);
  CHECK(sample_window("C").t_start == 8);
  CHECK_THROWS_AS(sample_window("D"), std::invalid_argument);

  auto d = table_dgp(1);
  d.N = 200;
  const auto full = simulate_panel(d);
  const auto b = window_sample(full, 1, 14);
  for (const auto& h : b.histories) {
    CHECK(h.y0 == 0);
    CHECK(h.d1 == 0);
    CHECK(h.T() == 14);
  }
  const auto c = window_sample(full, 8, 21);
  for (std::size_t i = 0; i < full.histories.size(); ++i) {
    const auto& h = c.histories[i];
    CHECK(h.y0 == full.histories[i].y[6]);
    CHECK(h.d1 == full.durations[i][7]);
    CHECK(std::equal(h.y.begin(), h.y.end(), full.histories[i].y.begin() + 7));
  }
  CHECK(window_sample(full, 1, d.T).histories == full.histories);
  CHECK_THROWS_AS(window_sample(full, 3, 2), std::invalid_argument);
  CHECK_THROWS_AS(window_sample(full, 1, d.T + 1), std::invalid_argument);
}

TEST_CASE("late windows start in states that depend on the type") {
  auto d = table_dgp(1);
  d.N = 3000;
  const auto full = simulate_panel(d);
  const auto c = window_sample(full, 8, 21);
  double mr = 0.0, md = 0.0;
  const double n = static_cast<double>(c.histories.size());
  for (std::size_t i = 0; i < c.histories.size(); ++i) {
    mr += c.rc[i] / n;
    md += c.histories[i].d1 / n;
  }
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < c.histories.size(); ++i) {
    const double x = c.rc[i] - mr, y = c.histories[i].d1 - md;
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  // higher replacement cost, longer running engines at the start of the window
  CHECK(sxy / std::sqrt(sxx * syy) > 0.1);
}
