#include <doctest.h>

#include <set>

#include "scenequal/rng.hpp"

using namespace scenequal;

TEST_CASE("same seed gives the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform draws stay in range") {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const int k = rng.between(3, 7);
    CHECK(k >= 3);
    CHECK(k <= 7);
  }
}

TEST_CASE("between covers both endpoints") {
  Rng rng(2);
  std::set<int> seen;
  for (int i = 0; i < 2000; ++i) seen.insert(rng.between(-2, 2));
  CHECK(seen == std::set<int>{-2, -1, 0, 1, 2});
}

TEST_CASE("normal draws have unit moments") {
  Rng rng(3);
  double s = 0.0, ss = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
  }
  CHECK(s / n == doctest::Approx(0.0).epsilon(0.01));
  CHECK(ss / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("state serializes and restores") {
  Rng rng(9);
  for (int i = 0; i < 17; ++i) rng.next_u64();
  const auto state = rng.serialize();
  Rng copy;
  copy.deserialize(state);
  CHECK(copy == rng);
  CHECK(copy.next_u64() == rng.next_u64());
}

TEST_CASE("mix_seed separates streams") {
  CHECK(mix_seed(1, 2) != mix_seed(1, 3));
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(5, 5) == mix_seed(5, 5));
}
