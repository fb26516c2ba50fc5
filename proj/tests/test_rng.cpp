#include <doctest.h>

#include <cmath>
#include <set>

#include "mrphe/rng.hpp"

using namespace mrphe;

TEST_SUITE("rng") {
  TEST_CASE("philox4x32-10 known answers") {
    CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == PhiloxBlock{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          PhiloxBlock{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          PhiloxBlock{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
  }

  TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  }

  TEST_CASE("streams are pure functions of seed, id and position") {
    auto a = RandomStream::keyed(7, "images/x.png");
    auto b = RandomStream::keyed(7, "images/x.png");
    for (int i = 0; i < 100; ++i) CHECK(a.next_u32() == b.next_u32());
    CHECK(a.position() == 100);

    auto c = RandomStream::keyed(8, "images/x.png");
    auto d = RandomStream::keyed(7, "images/y.png");
    auto e = RandomStream::keyed(7, "images/x.png");
    const auto first = e.next_u64();
    CHECK(c.next_u64() != first);
    CHECK(d.next_u64() != first);
  }

  TEST_CASE("below stays in range and hits every value") {
    RandomStream s(1, 2);
    std::set<std::uint32_t> seen;
    for (int i = 0; i < 2000; ++i) {
      const auto v = s.below(7);
      CHECK(v < 7);
      seen.insert(v);
    }
    CHECK(seen.size() == 7);
    for (int i = 0; i < 10; ++i) CHECK(s.below(1) == 0);
  }

  TEST_CASE("uniform01 and gaussian moments") {
    RandomStream s(3, 4);
    double sum = 0, sum2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = s.uniform01();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
    }
    for (int i = 0; i < n; ++i) {
      const double g = s.gaussian();
      sum += g;
      sum2 += g * g;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sum2 / n - 1.0) < 0.02);
  }
}
