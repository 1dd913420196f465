#include <set>
#include <vector>

#include "convrank/rng.hpp"
#include "doctest.h"

using convrank::Rng;

TEST_CASE("rng is deterministic per seed") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(43);
  Rng d(42);
  bool differs = false;
  for (int i = 0; i < 10; ++i) differs |= c.next_u64() != d.next_u64();
  CHECK(differs);
}

TEST_CASE("next_double lies in [0,1)") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double x = rng.next_double();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("bounded stays in range and hits every value") {
  Rng rng(11);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 500; ++i) {
    const auto v = rng.bounded(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("shuffle permutes") {
  Rng rng(3);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto sorted = v;
  rng.shuffle(v);
  auto resorted = v;
  std::sort(resorted.begin(), resorted.end());
  CHECK(resorted == sorted);
}

TEST_CASE("forked streams are independent of later parent draws") {
  Rng a(5);
  Rng fork_a = a.fork(1);
  const auto x = fork_a.next_u64();
  Rng b(5);
  Rng fork_b = b.fork(1);
  CHECK(fork_b.next_u64() == x);
}
