#include "vine/kernels.hpp"

#include <doctest.h>

#include <bit>
#include <random>
#include <vector>

using namespace vine::kernels;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

}  // namespace

TEST_CASE("scalar dot matches a long-double naive sum") {
    std::mt19937_64 rng(3);
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 16u, 17u, 386u, 2000u}) {
        const auto x = random_vector(rng, n);
        const auto y = random_vector(rng, n);
        long double ref = 0.0L;
        for (std::size_t i = 0; i < n; ++i) ref += static_cast<long double>(x[i]) * y[i];
        CHECK(scalar_table().dot(x.data(), y.data(), n) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
    }
}

TEST_CASE("avx2 kernels are bit-identical to the scalar reference") {
    const KernelTable* simd = avx2_table();
    if (simd == nullptr) {
        MESSAGE("AVX2 variant unavailable on this machine; equivalence not exercised");
        return;
    }
    const KernelTable& ref = scalar_table();
    std::mt19937_64 rng(11);
    for (std::size_t n = 0; n < 70; ++n) {
        const auto x = random_vector(rng, n);
        const auto y = random_vector(rng, n);
        CHECK(same_bits(ref.dot(x.data(), y.data(), n), simd->dot(x.data(), y.data(), n)));
        CHECK(same_bits(ref.squared_distance(x.data(), y.data(), n), simd->squared_distance(x.data(), y.data(), n)));

        auto y1 = y, y2 = y;
        ref.axpy(0.37, x.data(), y1.data(), n);
        simd->axpy(0.37, x.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(same_bits(y1[i], y2[i]));

        auto a1 = x, b1 = y, a2 = x, b2 = y;
        ref.rotate(a1.data(), b1.data(), 0.8, 0.6, n);
        simd->rotate(a2.data(), b2.data(), 0.8, 0.6, n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(same_bits(a1[i], a2[i]));
            CHECK(same_bits(b1[i], b2[i]));
        }
    }
}

TEST_CASE("squared distance and rotation semantics") {
    const std::vector<double> a{1, 2, 3, 4, 5};
    const std::vector<double> b{0, 0, 0, 0, 0};
    CHECK(squared_distance(a, b) == 55.0);
    CHECK(dot(a, a) == 55.0);

    std::vector<double> x{1.0, 0.0}, y{0.0, 1.0};
    rotate(x, y, 0.0, 1.0);  // (x, y) -> (-y, x)
    CHECK(x == std::vector<double>{0.0, -1.0});
    CHECK(y == std::vector<double>{1.0, 0.0});
}

TEST_CASE("active table honours the scalar override") {
    const char* forced = std::getenv("VINE_SIMD");
    if (forced != nullptr && std::string_view(forced) == "scalar") {
        CHECK(active().isa == Isa::scalar);
    } else if (avx2_table() != nullptr) {
        CHECK(active().isa == Isa::avx2);
    }
}
