#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tae {

// Deterministic random source. Every draw is derived from raw engine words,
// so streams are reproducible across platforms and the state round-trips
// through checkpoints as text.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in the open interval (0, 1) with 53-bit resolution.
  double uniform01() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * kInv53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard Gumbel(0, 1) draw: -log(-log(U)).
  // Returns exactly 0 while the zero-noise test hook is active.
  double gumbel() {
    if (zero_gumbel_) {
      return 0.0;
    }
    return -std::log(-std::log(uniform01()));
  }

  // Unbiased integer in [0, n), by rejection on a power-of-two mask.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) {
      throw std::invalid_argument("Rng::below: n must be positive");
    }
    std::uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    std::uint64_t r;
    do {
      r = engine_() & mask;
    } while (r >= n);
    return r;
  }

  // Test hook: forces gumbel() to 0 so sample-mode selection degenerates to
  // argmax. Never serialized.
  void set_zero_gumbel(bool on) { zero_gumbel_ = on; }

  std::string save_state() const {
    std::ostringstream out;
    out << engine_;
    return out.str();
  }

  void load_state(const std::string& state) {
    std::istringstream in(state);
    in >> engine_;
    if (in.fail()) {
      throw std::runtime_error("Rng::load_state: malformed state string");
    }
  }

 private:
  static constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53

  std::mt19937_64 engine_;
  bool zero_gumbel_ = false;
};

}  // namespace tae
