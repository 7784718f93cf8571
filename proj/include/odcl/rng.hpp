#pragma once

// Counter-based random numbers with per-entity substreams.
//
// Every random quantity in the library is drawn from a Philox4x32-10 stream
// keyed by (seed, stream id). The stream id encodes which entity consumes it
// (a user shard, a cluster model, a K-means++ restart, ...), so the output of
// a generator does not depend on the order in which entities are processed.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace odcl {

inline constexpr int kRngVersion = 1;
inline constexpr const char* kRngName = "philox4x32-10";

// Consumer domains. Values are part of the stream format; append only.
enum class Domain : std::uint32_t {
  kClusterModel = 1,
  kUserShard = 2,
  kTestSet = 3,
  kSharding = 4,
  kSgd = 5,
  kKmeansRestart = 6,
  kLambdaPick = 7,
  kIfcaInit = 8,
  kIfcaLocal = 9,
  kMisc = 10,
};

struct StreamId {
  Domain domain;
  std::uint64_t index = 0;
};

class Philox {
 public:
  using result_type = std::uint32_t;

  Philox(std::uint64_t seed, StreamId stream) {
    key_[0] = static_cast<std::uint32_t>(seed);
    key_[1] = static_cast<std::uint32_t>(seed >> 32);
    // counter words 2,3 hold the stream, words 0,1 the block index
    const std::uint64_t s =
        (static_cast<std::uint64_t>(stream.domain) << 48) ^ stream.index;
    ctr_hi_ = s;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    if (pos_ == 4) {
      refill();
    }
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = (*this)();
    const std::uint64_t lo = (*this)();
    return (hi << 32) | lo;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one normal per call, the sine branch is discarded so the
  // stream position after each draw is fixed.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) {
      u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t index(std::uint64_t n) {
    if (n <= 1) {
      return 0;
    }
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r = next_u64();
    while (r >= limit) {
      r = next_u64();
    }
    return r % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Position-independent access: the raw 4-word block at a given counter.
  static std::array<std::uint32_t, 4> block(std::uint64_t seed,
                                            StreamId stream,
                                            std::uint64_t counter) {
    Philox g(seed, stream);
    g.ctr_lo_ = counter;
    g.refill();
    return g.buf_;
  }

 private:
  void refill() {
    std::array<std::uint32_t, 4> c = {
        static_cast<std::uint32_t>(ctr_lo_),
        static_cast<std::uint32_t>(ctr_lo_ >> 32),
        static_cast<std::uint32_t>(ctr_hi_),
        static_cast<std::uint32_t>(ctr_hi_ >> 32)};
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    buf_ = c;
    pos_ = 0;
    ++ctr_lo_;
  }

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t ctr_lo_ = 0;
  std::uint64_t ctr_hi_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
};

using Rng = Philox;

// Mixes a parent seed with a tag, for deriving child seeds (e.g. per sweep cell).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace odcl
