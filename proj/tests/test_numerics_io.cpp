#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>

#include "hmf/io.hpp"
#include "hmf/numerics.hpp"
#include "support.hpp"

using namespace hmf;

TEST_CASE("gauss rules integrate polynomials of degree 2n-1 exactly")
{
    for (int n : {7, 10, 15, 20, 25, 30}) {
        REQUIRE(gauss_order_supported(n));
        const auto& g = gauss_rule(n);
        REQUIRE(g.nodes.size() == std::size_t(n));
        for (int k = 0; k <= 2 * n - 1; ++k) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += g.weights[i] * std::pow(g.nodes[i], k);
            const double exact = k % 2 ? 0.0 : 2.0 / (k + 1);
            CHECK(s == doctest::Approx(exact).epsilon(1e-13).scale(1.0));
        }
    }
    CHECK_FALSE(gauss_order_supported(8));
    CHECK_THROWS(gauss_rule(8));
}

TEST_CASE("pairwise sum is accurate and order-fixed")
{
    std::vector<double> v(1000000, 0.1);
    const double s = pairwise_sum(v);
    CHECK(std::abs(s - 1e5) < 1e-7);
    CHECK(pairwise_sum(v) == s);
    CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
}

TEST_CASE("compensated sum keeps small increments")
{
    KahanSum k;
    k.add(1.0);
    for (int i = 0; i < 10000; ++i) k.add(1e-16);
    CHECK(std::abs(k.value() - (1.0 + 1e-12)) < 1e-15);
}

TEST_CASE("linear fit recovers a line")
{
    std::vector<double> x{0, 1, 2, 3, 4}, y;
    for (double v : x) y.push_back(3.0 - 0.5 * v);
    const auto f = linear_fit(x, y);
    CHECK(f.slope == doctest::Approx(-0.5));
    CHECK(f.intercept == doctest::Approx(3.0));
}

TEST_CASE("log panels cover the interval and honour breaks")
{
    const std::vector<double> br{0.3};
    const auto p = log_panels(1e-3, 10.0, 0.5, br);
    REQUIRE(p.size() >= 2);
    CHECK(p.front() == doctest::Approx(1e-3));
    CHECK(p.back() == doctest::Approx(10.0));
    bool has_break = false;
    for (std::size_t k = 1; k < p.size(); ++k) {
        CHECK(p[k] > p[k - 1]);
        CHECK(std::log(p[k] / p[k - 1]) <= 0.5 + 1e-12);
        has_break = has_break || std::abs(p[k] - 0.3) < 1e-14;
    }
    CHECK(has_break);
}

TEST_CASE("fmt is the shortest round-trip decimal")
{
    CHECK(fmt(0.1) == "0.1");
    CHECK(fmt(-2.0) == "-2");
    CHECK(fmt(1e-300) == "1e-300");
    CHECK(fmt(std::nan("")) == "nan");
    CHECK(fmt(-INFINITY) == "-inf");
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    for (int k = 0; k < 2000; ++k) {
        const double v = std::pow(10.0, u(rng)) * (k % 2 ? -1.0 : 1.0);
        CHECK(std::stod(fmt(v)) == v);
    }
}

TEST_CASE("fnv1a64 reference digests")
{
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(hex64(0xabcull) == "0000000000000abc");
}

TEST_CASE("csv writer emits header and round-trip rows")
{
    test::TempDir dir("csv");
    {
        CsvWriter w(dir.path() / "a.csv", {"x", "y"});
        w.row({0.1, 1.0 / 3.0});
        w.row(std::vector<double>{-1.0, 2e-9});
    }
    CHECK(read_file(dir.path() / "a.csv") == "x,y\n0.1,0.3333333333333333\n-1,2e-09\n");
}
