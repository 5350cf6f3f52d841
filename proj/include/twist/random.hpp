#pragma once

// Counter-based random streams and a deterministic block-parallel driver.
//
// A stream is fully determined by (master seed, index, lane): the index is the
// trajectory or replica number and the lane separates independent uses within
// one trajectory (initial point vs. noise path). No state is shared between
// streams, so results never depend on how work is split across threads.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>

namespace twist {

class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t key, std::uint64_t counter = 0) noexcept : key_(key), counter_(counter) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on (0, 1); never returns 0.
  double uniform_open() noexcept;
  /// Standard normal draw.
  double normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
  std::normal_distribution<double> normal_;
};

struct SeedPlan {
  std::uint64_t master_seed = 0;

  /// Substream for (index, lane). Pure: equal arguments give equal streams.
  Stream stream(std::uint64_t index, std::uint64_t lane = 0) const noexcept;
};

inline constexpr std::uint64_t kLaneInitial = 0;
inline constexpr std::uint64_t kLaneNoise = 1;

/// Number of worker threads to use: `requested` if positive, else hardware
/// concurrency (at least 1).
unsigned resolve_threads(int requested) noexcept;

/// Calls body(begin, end, block_index) for the blocks of [0, count) of size
/// `block`, spread over `threads` workers. Block boundaries depend only on
/// `count` and `block`; callers store per-block results and merge them in
/// block order to keep reductions independent of the thread count.
void parallel_for_blocks(std::size_t count, std::size_t block, unsigned threads,
                         const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

inline std::size_t block_count(std::size_t count, std::size_t block) noexcept {
  return block == 0 ? 0 : (count + block - 1) / block;
}

}  // namespace twist
