#include <cmath>
#include <random>

#include <doctest.h>

#include "hmf/ansatz.hpp"
#include "hmf/errors.hpp"
#include "hmf/modulation.hpp"
#include "hmf/profiles.hpp"

using namespace hmf;

TEST_CASE("cubic Hermite path reproduces cubic polynomials")
{
    auto lam = [](double t) { return 1.0 + 0.2 * t - 0.1 * t * t + 0.05 * t * t * t; };
    auto lamd = [](double t) { return 0.2 - 0.2 * t + 0.15 * t * t; };
    auto xi = [](double t) { return 0.3 * t; };
    auto xid = [](double) { return 0.3; };
    const auto p = ModulationPath::from_functions(1.0, lam, lamd, xi, xid, {-1.0, -0.4, 0.0, 0.3, 0.9});
    for (double t : {-0.8, -0.1, 0.2, 0.5, 0.85}) {
        CHECK(p.lambda(t) == doctest::Approx(lam(t)).epsilon(1e-13));
        CHECK(p.lambda_dot(t) == doctest::Approx(lamd(t)).epsilon(1e-13));
        CHECK(p.xi(t) == doctest::Approx(xi(t)).epsilon(1e-13));
    }
    // p = -2 lambda' for t >= 0, frozen at its t = 0 value before
    CHECK(p.p(0.5) == doctest::Approx(-2.0 * lamd(0.5)));
    CHECK(p.p(-0.5) == doctest::Approx(-2.0 * lamd(0.0)));
}

TEST_CASE("path validation")
{
    CHECK_THROWS_AS(ModulationPath(0.0, {-1, 0}, {1, 1}, {0, 0}, {0, 0}, {0, 0}), DomainError);
    CHECK_THROWS_AS(ModulationPath(1.0, {-1, -1}, {1, 1}, {0, 0}, {0, 0}, {0, 0}), DomainError);
    CHECK_THROWS_AS(ModulationPath(1.0, {-0.5, 0}, {1, 1}, {0, 0}, {0, 0}, {0, 0}), DomainError);
    CHECK_THROWS_AS(ModulationPath(1.0, {-1, 0}, {1, -1}, {0, 0}, {0, 0}, {0, 0}), DomainError);
    const auto c = ModulationPath::constant(0.5, 0.2, 0.1);
    CHECK(c.lambda(0.3) == 0.2);
    CHECK(c.lambda_dot(0.3) == 0.0);
    CHECK(c.p(0.1) == 0.0);
}

TEST_CASE("Duhamel kernel closed form and limits")
{
    CHECK(duhamel_kernel(1.0, 0.25) == doctest::Approx(1.0 - std::exp(-1.0)));
    CHECK(duhamel_kernel(1e-6, 2.0) == doctest::Approx(1.0 / 8.0).epsilon(1e-8));
    CHECK(duhamel_kernel(100.0, 1e-3) == doctest::Approx(1e-4));
    CHECK_THROWS_AS(duhamel_kernel(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(duhamel_kernel(1.0, 0.0), DomainError);
}

TEST_CASE("psi solves the radial heat equation with source p/z^2")
{
    const auto p1 = ModulationPath::from_functions(
        1.0, [](double t) { return 1.0 - 0.5 * t; }, [](double) { return -0.5; }, [](double) { return 0.0; },
        [](double) { return 0.0; }, {-1.0, 0.0, 0.9});
    for (double z : {0.5, 1.0, 2.0})
        for (double t : {0.2, 0.5}) {
            const double hz = 1e-3 * z, ht = 1e-4;
            const double pz = (psi(p1, z + hz, t) - psi(p1, z - hz, t)) / (2 * hz);
            const double pzz = (psi(p1, z + hz, t) - 2 * psi(p1, z, t) + psi(p1, z - hz, t)) / (hz * hz);
            const double pt = (psi(p1, z, t + ht) - psi(p1, z, t - ht)) / (2 * ht);
            CHECK(std::abs(pt - pzz - 3 * pz / z - 1.0 / (z * z)) < 1e-4);
        }
    // far field: psi ~ int p / z^2 = 1.5 / z^2 at t = 0.5
    CHECK(psi(p1, 100.0, 0.5) * 1e4 == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("phi0 has the displayed form")
{
    const auto path = lambda0_path(0.05, 0.4);
    const double t = 0.01, x = 0.003, y = 0.002;
    const double lam = path.lambda(t);
    const double r = std::sqrt(x * x + y * y + lam * lam);
    const Vec2 v = phi0(path, x, y, t);
    CHECK(v.x == doctest::Approx(x * psi(path, r, t)));
    CHECK(v.y == doctest::Approx(-y * psi(path, r, t)));
    CHECK_THROWS_AS(phi0(path, x, -y, t), DomainError);
}

TEST_CASE("bubble time derivative matches finite differences")
{
    const auto path = ModulationPath::from_functions(
        1.0, [](double t) { return 0.3 - 0.1 * t; }, [](double) { return -0.1; }, [](double t) { return 0.2 * t; },
        [](double) { return 0.2; }, {-1.0, 0.0, 0.9});
    const double ht = 1e-5;
    for (double x : {-0.4, 0.1, 0.5})
        for (double y : {0.0, 0.2}) {
            const Vec2 fd = (bubble_field(path, x, y, 0.3 + ht) - bubble_field(path, x, y, 0.3 - ht)) * (0.5 / ht);
            CHECK(norm(fd - bubble_time_derivative(path, x, y, 0.3)) < 1e-7);
        }
}

TEST_CASE("analytic inner error agrees with finite differences")
{
    const double T = 0.05;
    const auto path = lambda0_path(T, 0.4);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 25; ++k) {
        const double t = -0.5 * T + 1.3 * T * U(rng);
        const double r = path.lambda(t) * std::pow(10.0, -1.0 + 3.0 * U(rng)), th = 3.14159 * U(rng);
        const double x = path.xi(t) + r * std::cos(th), y = r * std::sin(th);
        const Vec2 a = inner_error(path, BackgroundField::zero(), x, y, t), f = inner_error_fd(path, x, y, t);
        worst = std::max(worst, norm(a - f) / norm(f));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("inner error vanishes for a frozen path")
{
    const auto path = ModulationPath::constant(0.05, 0.01, 0.2);
    for (double x : {0.15, 0.2, 0.3})
        for (double y : {0.001, 0.02}) CHECK(norm(inner_error(path, BackgroundField::zero(), x, y, 0.01)) == 0.0);
}

TEST_CASE("background datum and its heat flow")
{
    const BackgroundSpec s{0.1, 0.2, 3.0, INFINITY};
    const Vec2 v = s.initial({0.5, 0.7});
    CHECK(v.x == doctest::Approx(-0.1 * 3.0 * 0.3));
    CHECK(v.y == doctest::Approx(-0.1 * 0.3));
    CHECK(s.b2() == -0.1);
    // without cutoff the datum is harmonic and stays put
    const auto bg = solve_background(s, {}, 0.1);
    CHECK(norm(bg.eval({0.5, 0.7}, 0.05) - v) < 1e-15);

    BackgroundSpec cut{0.1, 0.0, 0.0, 1.0};
    const auto f = solve_background(cut, BackgroundGrid{2.0, 2.0, 0.05, 0.2}, 0.05);
    CHECK(f.snapshots() >= 2);
    // zero Neumann data on y = 0
    CHECK(norm(f.normal_derivative(0.3, 0.04)) < 1e-10);
    // maximum principle
    CHECK(f.sup_norm(f.snapshots() - 1) <= f.sup_norm(0) + 1e-15);

    CHECK_THROWS_AS(solve_background(BackgroundSpec{0.0, 0.0, 0.0, 1.0}, {}, 0.1), DomainError);
    CHECK_THROWS_AS(solve_background(cut, BackgroundGrid{2.0, 2.0, 0.05, 0.3}, 0.05), CflError);
}

TEST_CASE("assembled field has a unit boundary trace")
{
    const auto path = lambda0_path(0.05, 0.4);
    const BackgroundSpec s{0.1, 0.0, 0.0, INFINITY};
    const AssembledField u({path}, solve_background(s, {}, 0.1),
                           [](double x, double y, double) { return Vec2{0.01 * std::sin(x), 0.0 * y}; });
    for (double x : {-0.3, 0.0, 0.01, 0.4}) CHECK(norm(u.boundary(x, 0.0)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(AssembledField({}, BackgroundField::zero()), DomainError);
}
