#pragma once

// Three-panel space-time quadrature shared by the nonlocal evaluators.
//
// A sampler provides
//   slice(t)       -> object with at(x) returning a Sample
//   far()          -> Sample at spatial infinity
//   lo(), hi()     -> spatial support of stored data
//   earliest()     -> earliest stored time
// and a pair function F(here, there) -> double that vanishes quadratically
// when there -> here in space at equal times.

#include <algorithm>
#include <cmath>
#include <limits>

#include "hmf/errors.hpp"
#include "hmf/nonlocal.hpp"
#include "hmf/numerics.hpp"

namespace hmf::detail {

struct TwoLevel {
    KahanSum fine;    // step dz
    KahanSum coarse;  // step 2 dz on the even nodes
    double magnitude = 0.0;

    void add_node(long j, double w_end, double dz, double v)
    {
        fine.add(w_end * dz * v);
        magnitude += std::abs(w_end * dz * v);
        if (j % 2 == 0) coarse.add(w_end * 2.0 * dz * v);
    }
};

struct Extent {
    long jp = 0;  // nodes with z > 0 reach x - z >= lo
    long jm = 0;  // nodes with z < 0 reach x - z <= hi
    double dz = 0.0;
    double zp() const { return double(jp) * dz; }
    double zm() const { return double(jm) * dz; }
};

inline Extent make_extent(double x, double lo, double hi, double z_cut, double dz)
{
    auto even_floor = [](double r) {
        long j = long(std::floor(r + 1e-9));
        return j - (j % 2);
    };
    Extent e;
    e.dz = dz;
    e.jp = even_floor(std::min(z_cut, x - lo) / dz);
    e.jm = even_floor(std::min(z_cut, hi - x) / dz);
    if (e.jp < 4 || e.jm < 4) throw DomainError("evaluation point too close to the edge of the trace");
    return e;
}

// Sum over z_j = j dz, -cap_m <= j <= cap_p, of value(j) with the trapezoid
// half weight at a true end of the support.
template <class Value>
void line_sum(TwoLevel& acc, const Extent& e, long cap, Value&& value)
{
    const long cp = std::min(e.jp, cap);
    const long cm = std::min(e.jm, cap);
    for (long j = -cm; j <= cp; ++j) {
        double w = 1.0;
        if ((j == e.jp && cp == e.jp) || (j == -e.jm && cm == e.jm)) w = 0.5;
        acc.add_node(j, w, e.dz, value(j));
    }
}

inline void certify(const TwoLevel& acc, double extra, const QuadratureSpec& q, const char* what)
{
    if (!q.check) return;
    const double f = acc.fine.value() + extra;
    const double c = acc.coarse.value() + extra;
    // relative to the size of the contributions, not of a possibly cancelling sum
    const double scale = acc.magnitude + std::abs(extra) + 1e-300;
    if (!(std::abs(f - c) <= q.tol * scale)) {
        throw ToleranceError(std::string(what) + ": step-doubling estimate " + std::to_string(std::abs(f - c) / scale) +
                             " exceeds tolerance");
    }
}

// z = 0 limit of F(here, at(x - z)) / z^2 by Richardson extrapolation of the
// symmetric quotient at dz and 2 dz.
template <class Slice, class Sample, class Pair>
double origin_limit(const Slice& sl, const Sample& here, Pair& pair, double x, double dz)
{
    auto g = [&](double e) { return 0.5 * (pair(here, sl.at(x - e)) + pair(here, sl.at(x + e))) / (e * e); };
    return (4.0 * g(dz) - g(2.0 * dz)) / 3.0;
}

// int_R F(here, at(x - z)) / z^2 dz for time-independent traces
// far_left is the trace value as x - z -> -inf, far_right as x - z -> +inf.
template <class At, class Sample, class Pair>
double line_integral(const At& at, const Sample& far_left, const Sample& far_right, Pair&& pair, double x,
                     const Extent& e, const QuadratureSpec& q, const char* what)
{
    const auto here = at.at(x);
    const double lim = origin_limit(at, here, pair, x, e.dz);
    TwoLevel acc;
    line_sum(acc, e, std::numeric_limits<long>::max(), [&](long j) {
        if (j == 0) return lim;
        const double z = double(j) * e.dz;
        return pair(here, at.at(x - z)) / (z * z);
    });
    const double far_part = pair(here, far_left) / e.zp() + pair(here, far_right) / e.zm();
    certify(acc, far_part, q, what);
    return acc.fine.value() + far_part;
}

// int_0^inf int_R F(u(x,t), u(x-z,t-tau)) e^{-z^2/4tau} / tau^2 dz dtau
template <class Sampler, class Pair>
double spacetime_integral(const Sampler& s, Pair&& pair, double x, double t, const QuadratureSpec& q,
                          double dz, const char* what)
{
    if (t < s.earliest() - 1e-12 * (1.0 + std::abs(t)))
        throw HistoryTooShort(std::string(what) + ": no trace sample at or before the query time");

    const Extent e = make_extent(x, s.lo(), s.hi(), q.z_cut, dz);
    const auto now = s.slice(t);
    const auto here = now.at(x);
    const double lim = origin_limit(now, here, pair, x, dz);

    auto gauss_cap = [&](double tau) {
        const long c = long(std::ceil(12.0 * std::sqrt(tau) / dz));
        return c + (c % 2);
    };

    TwoLevel acc;

    // tau < tau_min: trace frozen at t
    {
        const double a4 = 1.0 / (4.0 * q.tau_min);
        line_sum(acc, e, gauss_cap(q.tau_min), [&](long j) {
            if (j == 0) return 4.0 * lim;
            const double z = double(j) * dz;
            return pair(here, now.at(x - z)) * 4.0 / (z * z) * std::exp(-z * z * a4);
        });
    }

    // resolved middle panel in log tau
    const double tau_end = std::min(t - s.earliest(), q.tau_cut);
    if (tau_end > q.tau_min * (1.0 + 1e-12)) {
        const auto& rule = gauss_rule(q.points);
        const auto knots = log_panels(q.tau_min, tau_end, q.panel_width);
        for (std::size_t p = 0; p + 1 < knots.size(); ++p) {
            const double la = std::log(knots[p]);
            const double lb = std::log(knots[p + 1]);
            const double half = 0.5 * (lb - la);
            for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
                const double tau = std::exp(0.5 * (la + lb) + half * rule.nodes[g]);
                const double wt = rule.weights[g] * half * tau / (tau * tau);
                const double a4 = 1.0 / (4.0 * tau);
                const auto then = s.slice(t - tau);
                line_sum(acc, e, gauss_cap(tau), [&](long j) {
                    const double z = double(j) * dz;
                    return wt * pair(here, then.at(x - z)) * std::exp(-z * z * a4);
                });
            }
        }
    }

    // tau beyond the resolved range: trace frozen at t - tau_split
    {
        const double tau_s = std::max(q.tau_min, tau_end);
        const auto then = s.slice(t - tau_s);
        const double a4 = 1.0 / (4.0 * tau_s);
        line_sum(acc, e, std::numeric_limits<long>::max(), [&](long j) {
            if (j == 0) return pair(here, then.at(x)) / tau_s;
            const double z = double(j) * dz;
            return -pair(here, then.at(x - z)) * 4.0 / (z * z) * std::expm1(-z * z * a4);
        });
    }

    // |z| beyond the data: value at infinity for all tau, kernel mass 4/z^2
    const double far_part = 4.0 * pair(here, s.far()) * (1.0 / e.zp() + 1.0 / e.zm());
    certify(acc, far_part, q, what);
    return acc.fine.value() + far_part;
}

}  // namespace hmf::detail
