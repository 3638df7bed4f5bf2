#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dynlogit/histories.hpp"
#include "dynlogit/model.hpp"

namespace dynlogit {

// Philox4x32-10 counter-based generator. The key is the seed; the counter
// holds (stream, draw index), so every individual gets its own stream and
// results do not depend on the order in which individuals are simulated.
class Philox {
 public:
  using result_type = std::uint64_t;
  Philox(std::uint64_t seed, std::uint64_t stream) : key_(seed), stream_(stream) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();
  double uniform();  // in (0, 1)
  double normal();

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t ctr) const;
  std::uint64_t key_, stream_, ctr_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int left_ = 0;
};

struct DgpSpec {
  std::string name;
  // RC law: normal(rc_mean, rc_sd) when rc_sd > 0, otherwise the discrete
  // points rc_values with probabilities rc_weights.
  double rc_mean = 8.0;
  double rc_sd = 0.0;
  std::vector<double> rc_values{8.0};
  std::vector<double> rc_weights{1.0};
  double beta = 1.0;
  int dstar = 3;
  double delta = 0.95;
  CostShape shape = CostShape::Linear;
  int N = 1000;
  int T = 25;
  int y0 = 0;
  int d1 = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

// The four designs of the Monte Carlo study (id 1..4).
DgpSpec table_dgp(int id);

struct SimPanel {
  std::vector<ChoiceHistory> histories;
  std::vector<double> rc;                  // type draw per individual
  std::vector<std::vector<int>> durations;  // d_1..d_{T+1}, uncapped
  std::uint64_t seed = 0;
};

SimPanel simulate_panel(const DgpSpec& dgp);

// Periods t_start..t_end (1-based, inclusive); the new initial condition is
// (y_{t_start-1}, d_{t_start}) from the simulated path.
SimPanel window_sample(const SimPanel& p, int t_start, int t_end);

struct SampleWindow {
  int t_start, t_end;
};
// "A" = 1..7, "B" = 1..14, "C" = 8..21
SampleWindow sample_window(const std::string& name);

}  // namespace dynlogit
