#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "chanest/rng.hpp"

using namespace chanest;

TEST_CASE("rng is deterministic for equal seeds") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        REQUIRE(a.next_u64() == b.next_u64());
        REQUIRE(a.gaussian() == b.gaussian());
    }
}

TEST_CASE("different seeds give different streams") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    REQUIRE(same == 0);
}

TEST_CASE("uniform stays within bounds") {
    Rng r(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        const double v = r.uniform(-3.0, 5.0);
        REQUIRE(v >= -3.0);
        REQUIRE(v < 5.0);
    }
}

TEST_CASE("uniform_index covers the whole range") {
    Rng r(9);
    std::set<std::size_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t k = r.uniform_index(7);
        REQUIRE(k < 7);
        seen.insert(k);
    }
    REQUIRE(seen.size() == 7);
}

TEST_CASE("gaussian has standard moments") {
    Rng r(123);
    const int n = 200000;
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = r.gaussian();
        mean += g / n;
        var += g * g / n;
    }
    REQUIRE(std::abs(mean) < 0.01);
    REQUIRE(var == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("derive_seed separates named substreams") {
    const std::uint64_t base = 99;
    std::set<std::uint64_t> seeds;
    seeds.insert(derive_seed(base, "alpha"));
    seeds.insert(derive_seed(base, "beta"));
    seeds.insert(derive_seed(base, "alpha", 1));
    seeds.insert(derive_seed(base + 1, "alpha"));
    REQUIRE(seeds.size() == 4);
    // Omitting the index is the same as index 0.
    REQUIRE(derive_seed(base, "alpha") == derive_seed(base, "alpha", 0));
    REQUIRE(derive_seed(base, "alpha", 3) == derive_seed(base, "alpha", 3));
}
