#include <doctest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "twist/random.hpp"

using namespace twist;

TEST_CASE("streams are pure functions of (seed, index, lane)") {
  const SeedPlan plan{42};
  auto a = plan.stream(5, kLaneNoise);
  auto b = plan.stream(5, kLaneNoise);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  auto c = plan.stream(5, kLaneInitial);
  auto d = plan.stream(6, kLaneNoise);
  auto e = SeedPlan{43}.stream(5, kLaneNoise);
  auto f = plan.stream(5, kLaneNoise);
  const auto first = f();
  CHECK(c() != first);
  CHECK(d() != first);
  CHECK(e() != first);
}

TEST_CASE("uniform and normal draws have the right moments") {
  auto s = SeedPlan{1}.stream(0);
  const int n = 200000;
  double su = 0, su2 = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    su += u;
    su2 += u * u;
    const double z = s.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(std::abs(su / n - 0.5) < 4 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(su2 / n - 1.0 / 3) < 0.005);
  CHECK(std::abs(sn / n) < 4 / std::sqrt(double(n)));
  CHECK(std::abs(sn2 / n - 1.0) < 4 * std::sqrt(2.0 / n));
  for (int i = 0; i < 1000; ++i) CHECK(s.uniform_open() > 0.0);
}

TEST_CASE("adjacent substreams are uncorrelated") {
  const SeedPlan plan{9};
  const int n = 50000;
  double sxy = 0;
  for (int i = 0; i < n; ++i) {
    auto a = plan.stream(i, 0), b = plan.stream(i + 1, 0);
    sxy += (a.uniform() - 0.5) * (b.uniform() - 0.5);
  }
  CHECK(std::abs(sxy / n) < 4 * (1.0 / 12) / std::sqrt(double(n)));
}

TEST_CASE("parallel_for_blocks covers every block once for any thread count") {
  for (unsigned threads : {1u, 2u, 5u}) {
    std::vector<std::atomic<int>> hits(103);
    parallel_for_blocks(103, 10, threads, [&](std::size_t lo, std::size_t hi, std::size_t b) {
      CHECK(lo == b * 10);
      for (std::size_t i = lo; i < hi; ++i) hits[i]++;
    });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  CHECK(block_count(103, 10) == 11);
  CHECK(block_count(0, 10) == 0);
}

TEST_CASE("worker exceptions reach the caller") {
  CHECK_THROWS_AS(parallel_for_blocks(100, 10, 3,
                                      [](std::size_t lo, std::size_t, std::size_t) {
                                        if (lo == 50) throw std::runtime_error("boom");
                                      }),
                  std::runtime_error);
}

TEST_CASE("resolve_threads") {
  CHECK(resolve_threads(3) == 3);
  CHECK(resolve_threads(0) >= 1);
}
