#include <cmath>
#include <random>

#include "doctest.h"
#include "dynlogit/model.hpp"
#include "oracles.hpp"

using namespace dynlogit;

namespace {

double pair_contrast(const SolvedModel& m, const ChoiceHistory& a, const ChoiceHistory& b) {
  return history_log_prob(m, a) - history_log_prob(m, b);
}

ChoiceHistory runs(int J, std::initializer_list<std::pair<int, int>> parts) {
  std::vector<int> y;
  for (auto [c, n] : parts) y.insert(y.end(), n, c);
  return make_history(J, 0, 0, y);
}

}  // namespace

TEST_CASE("myopic ccps are a softmax of current payoffs") {
  std::mt19937_64 rng(3);
  auto s = oracle::with_random_type(oracle::random_structure(rng, 2, {0, 2, 3}, false, true), rng);
  s.delta = 0.0;
  const auto m = solve_bellman(s);
  for (int prev = 0; prev <= 2; ++prev)
    for (int d = prev == 0 ? 0 : 1; d <= (prev == 0 ? 0 : m.dmax); ++d) {
      double den = 0.0;
      for (int j = 0; j <= 2; ++j) den += std::exp(flow_payoff(s, j, prev, d));
      for (int j = 0; j <= 2; ++j) CHECK(m.ccp(j, prev, d) == doctest::Approx(std::exp(flow_payoff(s, j, prev, d)) / den).epsilon(1e-13));
      CHECK(m.v(prev, d) == 0.0);
    }
}

TEST_CASE("binary logistic closed form") {
  ModelSpec s = ModelSpec::zeros(1, {0, 1});
  s.forward_looking = false;
  s.alpha[1] = 0.25;
  s.beta_d[1][1] = 0.75;
  const auto m = solve_bellman(s);
  CHECK(m.ccp(1, 1, 1) == doctest::Approx(0.7310585786300049).epsilon(1e-14));
  ModelSpec z = ModelSpec::zeros(1, {0, 1});
  z.forward_looking = false;
  const auto mz = solve_bellman(z);
  CHECK(mz.ccp(1, 0, 0) == doctest::Approx(0.5));
  CHECK(mz.ccp(1, 1, 1) == doctest::Approx(0.5));
}

TEST_CASE("symmetric binary model") {
  ModelSpec s = ModelSpec::zeros(1, {0, 2});
  s.delta = 0.95;
  const auto m = solve_bellman(s);
  for (std::size_t i = 0; i < m.V.size(); ++i) CHECK(m.V[i] == doctest::Approx(std::log(2.0) / 0.05).epsilon(1e-9));
  CHECK(m.ccp(0, 1, 2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ccps sum to one and are interior") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const int J = 1 + rep % 3;
    std::vector<int> ds(J + 1, 0);
    for (int y = 1; y <= J; ++y) ds[y] = 1 + static_cast<int>(rng() % 4);
    const auto s = oracle::with_random_type(oracle::random_structure(rng, J, ds, rep % 2 == 0, true), rng);
    const auto m = solve_bellman(s);
    for (int prev = 0; prev <= J; ++prev)
      for (int d = prev == 0 ? 0 : 1; d <= (prev == 0 ? 0 : m.dmax); ++d) {
        double sum = 0.0;
        for (int j = 0; j <= J; ++j) {
          const double p = m.ccp(j, prev, d);
          CHECK(p > 0.0);
          CHECK(p < 1.0);
          sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
      }
  }
}

TEST_CASE("history probabilities sum to one over an enumeration") {
  std::mt19937_64 rng(9);
  for (int J : {1, 2}) {
    const auto s = oracle::with_random_type(oracle::random_structure(rng, J, J == 1 ? std::vector<int>{0, 3} : std::vector<int>{0, 2, 3}, true, true), rng);
    const auto m = solve_bellman(s, 1e-13);
    const int T = J == 1 ? 8 : 5;
    double total = 0.0;
    for (const auto& h : enumerate_histories(J, T, J, 2)) total += std::exp(history_log_prob(m, h));
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  const auto m = solve_bellman(replacement_spec(8.0, 1.0, 3, 0.95));
  const auto h = make_history(1, 1, 2, {0});
  CHECK(history_log_prob(m, h) == doctest::Approx(m.log_ccp(0, 1, 2)));
}

TEST_CASE("value iteration agrees with long backward induction") {
  std::mt19937_64 rng(13);
  std::vector<ModelSpec> specs{replacement_spec(8.0, 1.0, 3, 0.95)};
  for (int i = 0; i < 4; ++i)
    specs.push_back(oracle::with_random_type(oracle::random_structure(rng, 1 + i % 2, i % 2 ? std::vector<int>{0, 2, 4} : std::vector<int>{0, 3}, true, true), rng));
  for (auto& s : specs) {
    if (s.delta > 0.95) s.delta = 0.95;
    const auto m = solve_bellman(s, 1e-13);
    const auto bi = oracle::finite_horizon_logccp(s, 500);
    double worst = 0.0;
    for (std::size_t i = 0; i < bi.size(); ++i) worst = std::max(worst, std::abs(std::exp(bi[i]) - std::exp(m.logccp[i])));
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("non-convergence is reported with the residual") {
  const auto s = replacement_spec(8.0, 1.0, 3, 0.999);
  try {
    solve_bellman(s, 1e-12, 5);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual > 1e-12);
  }
}

TEST_CASE("continuation values") {
  std::mt19937_64 rng(17);
  SUBCASE("no duration: v depends on the choice only") {
    auto s = oracle::with_random_type(oracle::random_structure(rng, 2, {0, 3, 2}, true, false), rng);
    const auto m = solve_bellman(s);
    for (int y = 1; y <= 2; ++y)
      for (int d = 1; d <= m.dmax; ++d) CHECK(m.v(y, d) == doctest::Approx(m.v(y, 1)).epsilon(1e-12));
  }
  SUBCASE("flat beyond the cutoff") {
    const auto s = oracle::with_random_type(oracle::random_structure(rng, 2, {0, 2, 4}, true, true), rng);
    const auto m = solve_bellman(s);
    for (int d = 2; d <= m.dmax; ++d) CHECK(m.v(1, d) == doctest::Approx(m.v(1, 2)).epsilon(1e-12));
    CHECK(m.v(2, 4) != doctest::Approx(m.v(2, 3)));
  }
}

TEST_CASE("raising the replacement payoff raises replacement probabilities") {
  const auto lo = solve_bellman(replacement_spec(9.0, 1.0, 3, 0.95));
  const auto hi = solve_bellman(replacement_spec(8.0, 1.0, 3, 0.95));
  for (int d = 1; d <= 3; ++d) CHECK(hi.ccp(0, 1, d) >= lo.ccp(0, 1, d));
  CHECK(hi.ccp(0, 0, 0) >= lo.ccp(0, 0, 0));
}

TEST_CASE("pair contrasts recover the structural quantities") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    SUBCASE("myopic duration: switching plus duration payoff") {
      const int n = 1 + rep % 4;
      const auto s = oracle::with_random_type(oracle::random_structure(rng, 1, {0, n + 1}, false, true), rng);
      const auto m = solve_bellman(s);
      const auto a = runs(1, {{0, 1}, {1, n + 1}});
      const auto b = runs(1, {{1, n}, {0, 1}, {1, 1}});
      CHECK(pair_contrast(m, a, b) == doctest::Approx(s.bd(1, n) - s.by(0, 1) - s.by(1, 0)).epsilon(1e-11));
    }
    SUBCASE("forward duration: change at the cutoff") {
      const int ds = 2 + rep % 3;
      const auto s = oracle::with_random_type(oracle::random_structure(rng, 1, {0, ds}, true, true), rng);
      const auto m = solve_bellman(s, 1e-13);
      const auto a = runs(1, {{1, ds - 1}, {0, 1}, {1, ds + 1}});
      const auto b = runs(1, {{1, ds}, {0, 1}, {1, ds}});
      CHECK(std::abs(pair_contrast(m, a, b) - (s.bd(1, ds) - s.bd(1, ds - 1))) < 1e-9);
    }
    SUBCASE("multinomial switching costs") {
      for (bool forward : {false, true}) {
        const auto s = oracle::with_random_type(oracle::random_structure(rng, 3, {0, 1, 1, 1}, forward, false), rng);
        const auto m = solve_bellman(s, 1e-13);
        for (int j = 1; j <= 3; ++j)
          for (int k = 1; k <= 3; ++k) {
            if (j == k) continue;
            const auto a = make_history(3, 0, 0, {0, j, k});
            const auto b = make_history(3, 0, 0, {j, 0, k});
            CHECK(std::abs(pair_contrast(m, a, b) - (s.by(k, j) - s.by(0, j) - s.by(k, 0))) < 1e-9);
          }
      }
    }
    SUBCASE("multinomial myopic duration") {
      const int n = 1 + rep % 3;
      const auto s = oracle::with_random_type(oracle::random_structure(rng, 2, {0, n + 1, n + 2}, false, true), rng);
      const auto m = solve_bellman(s);
      for (int y = 1; y <= 2; ++y) {
        const auto a = runs(2, {{0, 1}, {y, n + 1}});
        const auto b = runs(2, {{y, n}, {0, 1}, {y, 1}});
        CHECK(std::abs(pair_contrast(m, a, b) - (s.bd(y, n) - s.by(0, y) - s.by(y, 0))) < 1e-9);
      }
    }
    SUBCASE("multinomial forward duration at each cutoff") {
      const std::vector<int> ds{0, 2 + rep % 2, 3};
      const auto s = oracle::with_random_type(oracle::random_structure(rng, 2, ds, true, true), rng);
      const auto m = solve_bellman(s, 1e-13);
      for (int y = 1; y <= 2; ++y) {
        const auto a = runs(2, {{y, ds[y] - 1}, {0, 1}, {y, ds[y] + 1}});
        const auto b = runs(2, {{y, ds[y]}, {0, 1}, {y, ds[y]}});
        CHECK(std::abs(pair_contrast(m, a, b) - (s.bd(y, ds[y]) - s.bd(y, ds[y] - 1))) < 1e-9);
      }
    }
  }
}

TEST_CASE("the cutoff contrast does not depend on the type") {
  std::mt19937_64 rng(29);
  const auto base = oracle::random_structure(rng, 1, {0, 3}, true, true);
  const auto a = runs(1, {{1, 2}, {0, 1}, {1, 4}});
  const auto b = runs(1, {{1, 3}, {0, 1}, {1, 3}});
  std::vector<double> c;
  for (int i = 0; i < 20; ++i) c.push_back(pair_contrast(solve_bellman(oracle::with_random_type(base, rng), 1e-13), a, b));
  double mean = 0.0, ss = 0.0;
  for (double x : c) mean += x / c.size();
  for (double x : c) ss += (x - mean) * (x - mean);
  CHECK(std::sqrt(ss / (c.size() - 1)) < 1e-9);
}

TEST_CASE("replacement specification") {
  const auto s = replacement_spec(10.0, 0.5, 4, 0.9, CostShape::Sqrt);
  CHECK(s.alpha[0] == -10.0);
  CHECK(s.bd(1, 2) == doctest::Approx(-0.5 * std::sqrt(2.0)));
  CHECK(s.bd(1, 7) == s.bd(1, 4));
  CHECK(cost_shape_from_string("square") == CostShape::Square);
  CHECK_THROWS_AS(cost_shape_from_string("cubic"), std::invalid_argument);
  CHECK_FALSE(replacement_spec(10.0, 0.5, 4, 0.0).forward_looking);
}
