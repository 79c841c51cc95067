#include "mfmlmc/random.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace mfmlmc;

TEST_CASE("philox4x32-10 known-answer vectors") {
    using Block = std::array<std::uint32_t, 4>;
    CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams replay and separate by every id field") {
    const StreamId base{42, 0, 3, 17, StreamRole::brownian};
    RandomStream a(base), b(base);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    std::set<std::uint64_t> keys;
    keys.insert(stream_key(base));
    keys.insert(stream_key({43, 0, 3, 17, StreamRole::brownian}));
    keys.insert(stream_key({42, 1, 3, 17, StreamRole::brownian}));
    keys.insert(stream_key({42, 0, 4, 17, StreamRole::brownian}));
    keys.insert(stream_key({42, 0, 3, 18, StreamRole::brownian}));
    keys.insert(stream_key({42, 0, 3, 17, StreamRole::initial}));
    keys.insert(stream_key({42, 0, 3, 17, StreamRole::independent_brownian}));
    CHECK(keys.size() == 7);
}

TEST_CASE("uniform draws stay in range") {
    RandomStream s(7);
    for (int i = 0; i < 100000; ++i) {
        const double u = s.uniform();
        const double v = s.uniform_open_left();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        REQUIRE(v > 0.0);
        REQUIRE(v <= 1.0);
    }
}

TEST_CASE("normal variates have unit moments") {
    RandomStream s(11);
    const int n = 200000;
    double sum = 0, sq = 0, cube = 0;
    for (int i = 0; i < n; ++i) {
        const double z = s.normal();
        sum += z;
        sq += z * z;
        cube += z * z * z;
    }
    // Tolerances are about 5 standard errors.
    CHECK(std::abs(sum / n) < 5.0 / std::sqrt(n));
    CHECK(std::abs(sq / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(cube / n) < 5.0 * std::sqrt(15.0 / n));
}

TEST_CASE("normal with mean and variance") {
    RandomStream s(3);
    const int n = 100000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double z = s.normal(2.0, 9.0);
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    CHECK(mean == doctest::Approx(2.0).epsilon(0.05));
    CHECK(sq / n - mean * mean == doctest::Approx(9.0).epsilon(0.03));
}

TEST_CASE("derive_seed is stable and index-sensitive") {
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}
