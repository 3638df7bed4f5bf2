#include "dynlogit/simulate.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace dynlogit {

std::array<std::uint32_t, 4> Philox::block(std::uint64_t ctr) const {
  std::array<std::uint32_t, 4> c{static_cast<std::uint32_t>(ctr), static_cast<std::uint32_t>(ctr >> 32),
                                 static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  std::uint32_t k0 = static_cast<std::uint32_t>(key_), k1 = static_cast<std::uint32_t>(key_ >> 32);
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t p0 = std::uint64_t{0xD2511F53} * c[0];
    const std::uint64_t p1 = std::uint64_t{0xCD9E8D57} * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0, static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1, static_cast<std::uint32_t>(p0)};
    k0 += 0x9E3779B9;
    k1 += 0xBB67AE85;
  }
  return c;
}

Philox::result_type Philox::operator()() {
  if (left_ == 0) {
    buf_ = block(ctr_++);
    left_ = 2;
  }
  const int i = 2 - left_;
  --left_;
  return (std::uint64_t{buf_[2 * i]} << 32) | buf_[2 * i + 1];
}

double Philox::uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

double Philox::normal() {
  const double u1 = uniform(), u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void DgpSpec::validate() const {
  if (N < 1 || T < 1) throw std::invalid_argument("DgpSpec: N and T must be >= 1");
  if (rc_sd < 0.0) throw std::invalid_argument("DgpSpec: rc_sd must be >= 0");
  if (rc_sd == 0.0) {
    if (rc_values.empty() || rc_values.size() != rc_weights.size())
      throw std::invalid_argument("DgpSpec: rc_values and rc_weights must match");
    double s = 0.0;
    for (double w : rc_weights) s += w;
    if (std::abs(s - 1.0) > 1e-10) throw std::invalid_argument("DgpSpec: rc_weights must sum to 1");
  }
  if (dstar < 1) throw std::invalid_argument("DgpSpec: dstar must be >= 1");
}

DgpSpec table_dgp(int id) {
  DgpSpec d;
  d.name = "dgp" + std::to_string(id);
  switch (id) {
    case 1:
      d.rc_mean = 8.0;
      d.rc_sd = 2.0;
      break;
    case 2:
      d.rc_values = {4.5, 9.0};
      d.rc_weights = {0.5, 0.5};
      break;
    case 3:
      d.rc_values = {8.0, 9.0};
      d.rc_weights = {0.5, 0.5};
      break;
    case 4:
      d.rc_values = {8.0};
      d.rc_weights = {1.0};
      break;
    default:
      throw std::invalid_argument("table_dgp: id must be 1..4");
  }
  return d;
}

SimPanel simulate_panel(const DgpSpec& dgp) {
  dgp.validate();
  SimPanel out;
  out.seed = dgp.seed;
  out.histories.reserve(dgp.N);
  out.rc.reserve(dgp.N);
  out.durations.reserve(dgp.N);
  std::map<long long, SolvedModel> cache;  // keyed on RC rounded to 1e-6
  for (int i = 0; i < dgp.N; ++i) {
    Philox rng(dgp.seed, static_cast<std::uint64_t>(i));
    double rc;
    if (dgp.rc_sd > 0.0) {
      rc = dgp.rc_mean + dgp.rc_sd * rng.normal();
    } else {
      const double u = rng.uniform();
      std::size_t k = 0;
      double acc = dgp.rc_weights[0];
      while (u > acc && k + 1 < dgp.rc_values.size()) acc += dgp.rc_weights[++k];
      rc = dgp.rc_values[k];
    }
    const long long key = std::llround(rc * 1e6);
    auto it = cache.find(key);
    if (it == cache.end())
      it = cache.emplace(key, solve_bellman(replacement_spec(static_cast<double>(key) * 1e-6, dgp.beta, dgp.dstar,
                                                             dgp.delta, dgp.shape)))
               .first;
    const SolvedModel& m = it->second;

    std::vector<int> y(dgp.T), d(dgp.T + 1);
    int prev = dgp.y0;
    d[0] = dgp.d1;
    for (int t = 0; t < dgp.T; ++t) {
      const double p0 = m.ccp(0, prev, d[t]);
      const int c = rng.uniform() < p0 ? 0 : 1;
      y[t] = c;
      d[t + 1] = c == 0 ? 0 : (c == prev ? d[t] + 1 : 1);
      prev = c;
    }
    out.histories.push_back(make_history(1, dgp.y0, dgp.d1, std::move(y)));
    out.rc.push_back(rc);
    out.durations.push_back(std::move(d));
  }
  return out;
}

SimPanel window_sample(const SimPanel& p, int t_start, int t_end) {
  SimPanel out;
  out.seed = p.seed;
  out.rc = p.rc;
  for (std::size_t i = 0; i < p.histories.size(); ++i) {
    const auto& h = p.histories[i];
    if (t_start < 1 || t_start > t_end || t_end > h.T())
      throw std::invalid_argument("window_sample: need 1 <= t_start <= t_end <= T");
    const auto& d = p.durations[i];
    const int y0 = t_start == 1 ? h.y0 : h.y[t_start - 2];
    std::vector<int> y(h.y.begin() + (t_start - 1), h.y.begin() + t_end);
    out.histories.push_back(make_history(h.J, y0, d[t_start - 1], std::move(y)));
    out.durations.emplace_back(d.begin() + (t_start - 1), d.begin() + t_end + 1);
  }
  return out;
}

SampleWindow sample_window(const std::string& name) {
  if (name == "A") return {1, 7};
  if (name == "B") return {1, 14};
  if (name == "C") return {8, 21};
  throw std::invalid_argument("sample_window: expected A, B or C");
}

}  // namespace dynlogit
