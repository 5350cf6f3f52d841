#include "twist/random.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace twist {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Stream::result_type Stream::operator()() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double Stream::uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double Stream::uniform_open() noexcept {
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() { return normal_(*this); }

Stream SeedPlan::stream(std::uint64_t index, std::uint64_t lane) const noexcept {
  std::uint64_t key = mix64(master_seed ^ 0x6a09e667f3bcc908ULL);
  key = mix64(key ^ mix64(index + kGolden));
  key = mix64(key ^ mix64(lane * 0xd1b54a32d192ed03ULL + 0x3c6ef372fe94f82bULL));
  return Stream(key);
}

unsigned resolve_threads(int requested) noexcept {
  if (requested > 0) return static_cast<unsigned>(requested);
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for_blocks(std::size_t count, std::size_t block, unsigned threads,
                         const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  if (count == 0) return;
  if (block == 0) block = count;
  const std::size_t blocks = block_count(count, block);
  auto run_block = [&](std::size_t b) {
    const std::size_t begin = b * block;
    body(begin, std::min(count, begin + block), b);
  };
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), blocks));
  if (threads == 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t b = next++; b < blocks && !failed; b = next++) {
          try {
            run_block(b);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace twist
