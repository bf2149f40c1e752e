#include <cmath>
#include <vector>

#include <doctest.h>

#include "hmf/errors.hpp"
#include "hmf/nonlocal.hpp"
#include "hmf/profiles.hpp"

using namespace hmf;

namespace {

TraceHistory static_omega(double t_end = 0.0)
{
    std::vector<double> ts;
    for (int k = 0; k <= 10; ++k) ts.push_back(t_end - 10.0 + k);
    return TraceHistory::sample([](double x, double) { return omega(x); }, -200.0, 0.02, 20001, ts);
}

}  // namespace

TEST_CASE("stationary coefficient of omega is 2/(1+x^2)")
{
    for (double x : {-3.0, -1.0, 0.0, 0.5, 1.0, 3.0}) {
        const double c = stationary_coeff(omega, x);
        CHECK(c == doctest::Approx(2.0 / (1.0 + x * x)).epsilon(1e-6));
    }
    CHECK(stationary_coeff([](double) { return kFarValue; }, 0.3) == 0.0);
}

TEST_CASE("stationary coefficient is invariant under dilation, translation and rotation")
{
    const double lam = 0.3, xi = 1.1, th = 0.7;
    auto rot = [&](Vec2 v) { return Vec2{std::cos(th) * v.x - std::sin(th) * v.y, std::sin(th) * v.x + std::cos(th) * v.y}; };
    for (double x : {0.5, 1.1, 2.0, -4.2}) {
        const double c = stationary_coeff([&](double s) { return rot(bubble(s, lam, xi)); }, x);
        const double X = (x - xi) / lam;
        CHECK(c == doctest::Approx(2.0 / (lam * (1.0 + X * X))).epsilon(1e-5));
    }
}

TEST_CASE("space-time coefficient reduces to the stationary one on static traces")
{
    const auto h = static_omega();
    for (double x : {-2.0, 0.0, 1.0, 3.0}) {
        CHECK(spacetime_coeff(h, x, 0.0) == doctest::Approx(stationary_coeff(omega, x)).epsilon(1e-3));
    }
}

TEST_CASE("omega solves the boundary equation")
{
    const auto h = static_omega();
    for (double x = -10.0; x <= 10.0; x += 2.5) CHECK(norm(S2_residual(h, omega_dy, x, 0.0)) < 1e-3);
}

TEST_CASE("kernel modes solve the linearised boundary equation")
{
    for (int i = 1; i <= 3; ++i)
        for (double x = -10.0; x <= 10.0; x += 2.0) {
            const auto r = linearized_boundary([i](double s) { return eval_Z(i, s); },
                                               [i](double s) { return eval_Z_dy(i, s); }, x);
            CHECK(norm(r) < 1e-3);
        }
}

TEST_CASE("tangent projection and lift")
{
    const Vec2 U = omega(0.7), phi{0.3, -0.2};
    const Vec2 t = project_tangent(phi, U);
    CHECK(std::abs(dot(t, U)) < 1e-16);
    CHECK(lift_amplitude({0.0, 0.0}) == 0.0);
    CHECK(lift_amplitude({0.6, 0.0}) == doctest::Approx(-0.2));
    CHECK(norm(U + perturbation(phi, U)) == doctest::Approx(1.0));
    CHECK(norm(lift(U, phi)) == doctest::Approx(1.0));
    CHECK_THROWS_AS(lift_amplitude({1.0, 0.0}), DomainError);
    const std::vector<Vec2> a{U, U}, b{phi};
    CHECK_THROWS_AS(project_tangent(b, a), DomainError);
}

TEST_CASE("trace history bookkeeping")
{
    TraceHistory h(-1.0, 0.5, 5);
    CHECK_THROWS_AS(h.slice(0.0), HistoryTooShort);
    std::vector<Vec2> a(5, Vec2{0.0, 1.0}), b(5, Vec2{1.0, 0.0});
    h.append(0.0, a);
    h.append(1.0, b);
    CHECK_THROWS_AS(h.append(1.0, b), DomainError);
    std::vector<Vec2> bad(5, Vec2{2.0, 0.0});
    CHECK_THROWS_AS(h.append(2.0, bad), DomainError);
    CHECK_THROWS_AS(h.append(2.0, std::vector<Vec2>(4, kFarValue)), DomainError);

    const Vec2 mid = h.at(0.0, 0.25);
    CHECK(mid.x == doctest::Approx(0.25));
    CHECK(mid.y == doctest::Approx(0.75));
    // frozen tails in space and time
    CHECK(norm(h.at(100.0, 0.5) - kFarValue) == 0.0);
    CHECK(norm(h.at(0.0, -5.0) - a[0]) == 0.0);
    CHECK(norm(h.at(0.0, 9.0) - b[0]) == 0.0);
    CHECK(h.x_end() == 1.0);
}

TEST_CASE("thinning keeps the earliest and the recent samples")
{
    TraceHistory h(0.0, 1.0, 4);
    std::vector<Vec2> v(4, kFarValue);
    for (int k = 0; k <= 100; ++k) h.append(0.01 * k, v);
    h.thin(0.1, 5);
    CHECK(h.earliest() == 0.0);
    CHECK(h.latest() == doctest::Approx(1.0));
    CHECK(h.size() < 101);
    const auto& t = h.times();
    for (std::size_t k = t.size() - 5; k < t.size(); ++k) CHECK(t[k] == doctest::Approx(0.01 * double(100 - (t.size() - 1 - k))));
}

TEST_CASE("quadrature settings validation")
{
    QuadratureSpec q;
    CHECK_NOTHROW(q.validate());
    q.points = 8;
    CHECK_THROWS_AS(q.validate(), DomainError);
    q = {};
    q.tau_min = 100.0;
    CHECK_THROWS_AS(q.validate(), DomainError);
    q = {};
    q.tol = 0.0;
    CHECK_THROWS_AS(q.validate(), DomainError);
}
