#pragma once

#include <charconv>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace srla {

// Shortest decimal string that round-trips the exact double value.  All
// numeric text output (CSV, logs) goes through this so reruns are
// byte-identical.
inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Lightweight "a=" << x << " b=" << y message builder for error strings.
template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

// Independent deterministic stream derived from (seed, stream_id).  Used so
// restarts / rollouts get uncorrelated generators that do not depend on
// execution order.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream_id = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
  return std::mt19937_64(seq);
}

// Compensated (Kahan) accumulator; keeps reductions stable and
// order-insensitive at the 1e-15 level.
class KahanSum {
 public:
  void add(double v) {
    double y = v - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

inline double kahan_mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  KahanSum s;
  for (double x : xs) s.add(x);
  return s.value() / static_cast<double>(xs.size());
}

}  // namespace srla
