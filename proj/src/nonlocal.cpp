#include "hmf/nonlocal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hmf/errors.hpp"
#include "hmf/profiles.hpp"
#include "kernel_quadrature.hpp"

namespace hmf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sq_diff(const Vec2& a, const Vec2& b) { return norm2(a - b); }

struct FunctionTrace {
    const BoundaryFunction& u;
    Vec2 at(double x) const { return u(x); }
};

struct HistorySampler {
    const TraceHistory& h;
    TraceHistory::Slice slice(double t) const { return h.slice(t); }
    Vec2 far() const { return h.far(); }
    double lo() const { return h.x0(); }
    double hi() const { return h.x_end(); }
    double earliest() const { return h.earliest(); }
};

// Point sample of (U, Pi phi, a(Pi phi)).
struct Lifted {
    Vec2 U;
    Vec2 P;
    double a = 0.0;
};

Lifted make_lifted(Vec2 U, Vec2 phi)
{
    Lifted s;
    s.U = U;
    s.P = project_tangent(phi, U);
    s.a = lift_amplitude(s.P);
    return s;
}

struct LiftedSampler {
    const TraceHistory& U;
    const TraceHistory& phi;

    struct Slice {
        TraceHistory::Slice u, p;
        Lifted at(double x) const { return make_lifted(u.at(x), p.at(x)); }
    };
    Slice slice(double t) const { return {U.slice(t), phi.slice(t)}; }
    Lifted far() const { return make_lifted(U.far(), phi.far()); }
    double lo() const { return U.x0(); }
    double hi() const { return U.x_end(); }
    double earliest() const { return std::max(U.earliest(), phi.earliest()); }
};

void check_compatible(const TraceHistory& U, const TraceHistory& phi)
{
    if (U.nx() != phi.nx() || std::abs(U.dx() - phi.dx()) > 1e-12 * U.dx() ||
        std::abs(U.x0() - phi.x0()) > 1e-12 * (1.0 + std::abs(U.x0())))
        throw DomainError("map and perturbation histories use different grids");
}

}  // namespace

void QuadratureSpec::validate() const
{
    if (!(tau_min > 0.0 && tau_min < tau_cut)) throw DomainError("quadrature needs 0 < tau_min < tau_cut");
    if (!(z_cut > 0.0) || !(dz > 0.0)) throw DomainError("quadrature needs z_cut > 0 and dz > 0");
    if (!(tol > 0.0)) throw DomainError("quadrature needs tol > 0");
    if (!gauss_order_supported(points)) throw DomainError("unsupported Gauss-Legendre node count");
    if (!(panel_width > 0.0)) throw DomainError("quadrature needs panel_width > 0");
}

// ---------------------------------------------------------------- TraceHistory

TraceHistory::TraceHistory(double x0, double dx, std::size_t nx, Vec2 far, bool unit_valued)
    : x0_(x0), dx_(dx), nx_(nx), far_(far), unit_(unit_valued)
{
    if (!(dx > 0.0) || nx < 4) throw DomainError("trace grid needs dx > 0 and at least 4 nodes");
}

void TraceHistory::append(double t, std::span<const Vec2> values)
{
    if (values.size() != nx_) throw DomainError("trace row has the wrong length");
    if (!times_.empty() && !(t > times_.back())) throw DomainError("trace times must increase strictly");
    if (unit_) {
        for (const Vec2& v : values)
            if (!(std::abs(norm(v) - 1.0) <= 1e-9)) throw DomainError("trace value is not unit-norm");
    }
    times_.push_back(t);
    values_.emplace_back(values.begin(), values.end());
}

void TraceHistory::thin(double ratio, std::size_t keep_recent)
{
    if (times_.size() <= keep_recent + 1) return;
    const double now = times_.back();
    std::vector<char> keep(times_.size(), 0);
    const std::size_t n = times_.size();
    for (std::size_t k = n - keep_recent; k < n; ++k) keep[k] = 1;
    keep[0] = 1;
    double last = times_[n - keep_recent];
    for (std::size_t k = n - keep_recent; k-- > 1;) {
        if (last - times_[k] >= ratio * (now - times_[k])) {
            keep[k] = 1;
            last = times_[k];
        }
    }
    std::size_t w = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!keep[k]) continue;
        if (w != k) {
            times_[w] = times_[k];
            values_[w] = std::move(values_[k]);
        }
        ++w;
    }
    times_.resize(w);
    values_.resize(w);
}

TraceHistory::Slice TraceHistory::slice(double t) const
{
    if (times_.empty()) throw HistoryTooShort("empty trace history");
    Slice s;
    s.h_ = this;
    if (t <= times_.front()) {
        s.a_ = s.b_ = values_.front().data();
        return s;
    }
    if (t >= times_.back()) {
        s.a_ = s.b_ = values_.back().data();
        return s;
    }
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t k = std::size_t(it - times_.begin()) - 1;
    s.a_ = values_[k].data();
    s.b_ = values_[k + 1].data();
    s.w1_ = (t - times_[k]) / (times_[k + 1] - times_[k]);
    return s;
}

Vec2 TraceHistory::Slice::node(long i) const
{
    if (w1_ == 0.0) return a_[i];
    return a_[i] * (1.0 - w1_) + b_[i] * w1_;
}

Vec2 TraceHistory::Slice::at(double x) const
{
    const double s = (x - h_->x0_) / h_->dx_;
    const double last = double(h_->nx_ - 1);
    if (s < -1e-9 || s > last + 1e-9) return h_->far_;
    const double r = std::nearbyint(s);
    if (std::abs(s - r) < 1e-9) return node(long(r));

    // cubic Lagrange on four neighbouring nodes
    long i0 = long(std::floor(s)) - 1;
    i0 = std::clamp(i0, 0L, long(h_->nx_) - 4);
    const double u = s - double(i0);
    const double l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
    const double l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
    const double l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
    const double l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
    return node(i0) * l0 + node(i0 + 1) * l1 + node(i0 + 2) * l2 + node(i0 + 3) * l3;
}

TraceHistory TraceHistory::sample(const std::function<Vec2(double, double)>& u, double x0, double dx,
                                  std::size_t nx, std::span<const double> times, Vec2 far, bool unit_valued)
{
    TraceHistory h(x0, dx, nx, far, unit_valued);
    std::vector<Vec2> row(nx);
    for (double t : times) {
        for (std::size_t i = 0; i < nx; ++i) row[i] = u(x0 + dx * double(i), t);
        h.append(t, row);
    }
    return h;
}

// ---------------------------------------------------------------- coefficients

double stationary_coeff(const BoundaryFunction& u, double x, const QuadratureSpec& q)
{
    q.validate();
    const FunctionTrace tr{u};
    const auto e = detail::make_extent(x, -kInf, kInf, q.z_cut, q.dz);
    constexpr double big = 1e12;
    return detail::line_integral(tr, u(-big), u(big), sq_diff, x, e, q, "stationary_coeff") / (2.0 * std::numbers::pi);
}

double spacetime_coeff(const TraceHistory& h, double x, double t, const QuadratureSpec& q)
{
    q.validate();
    const HistorySampler s{h};
    return detail::spacetime_integral(s, sq_diff, x, t, q, h.dx(), "spacetime_coeff") / (8.0 * std::numbers::pi);
}

Vec2 S2_residual(const TraceHistory& h, const BoundaryFunction& dudy, double x, double t, const QuadratureSpec& q)
{
    const double c = spacetime_coeff(h, x, t, q);
    return dudy(x) + h.at(x, t) * c;
}

Vec2 linearized_boundary(const BoundaryFunction& phi, const BoundaryFunction& dphi_dy, double x,
                         const QuadratureSpec& q)
{
    q.validate();
    struct Pair {
        Vec2 w, f;
    };
    struct Trace {
        const BoundaryFunction& phi;
        Pair at(double s) const { return {omega(s), phi(s)}; }
    };
    const Trace tr{phi};
    auto pair = [](const Pair& a, const Pair& b) { return dot(a.w - b.w, a.f - b.f); };
    const auto e = detail::make_extent(x, -kInf, kInf, q.z_cut, q.dz);
    // phi need not vanish at infinity (the rotation mode does not)
    constexpr double big = 1e12;
    const double A = detail::line_integral(tr, Pair{kFarValue, phi(-big)}, Pair{kFarValue, phi(big)}, pair, x, e, q,
                                           "linearized_boundary") /
                     std::numbers::pi;
    const Vec2 w = omega(x);
    return dphi_dy(x) + phi(x) * (2.0 / (1.0 + x * x)) + w * A;
}

// ---------------------------------------------------------------- projection algebra

Vec2 project_tangent(Vec2 phi, Vec2 U) { return phi - U * dot(phi, U); }

double lift_amplitude(Vec2 tangent)
{
    const double n2 = norm2(tangent);
    if (!(n2 < 1.0)) throw DomainError("tangent perturbation has norm >= 1");
    // sqrt(1 - n2) - 1 without cancellation
    return -n2 / (std::sqrt(1.0 - n2) + 1.0);
}

Vec2 perturbation(Vec2 phi, Vec2 U)
{
    const Vec2 P = project_tangent(phi, U);
    return P + U * lift_amplitude(P);
}

Vec2 lift(Vec2 U, Vec2 phi) { return U + perturbation(phi, U); }

std::vector<Vec2> project_tangent(std::span<const Vec2> phi, std::span<const Vec2> U)
{
    if (phi.size() != U.size()) throw DomainError("field length mismatch");
    std::vector<Vec2> out(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) out[i] = project_tangent(phi[i], U[i]);
    return out;
}

std::vector<Vec2> lift(std::span<const Vec2> U, std::span<const Vec2> phi)
{
    if (phi.size() != U.size()) throw DomainError("field length mismatch");
    std::vector<Vec2> out(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) out[i] = lift(U[i], phi[i]);
    return out;
}

// ---------------------------------------------------------------- remainder terms

Vec2 nonlinear_remainder(const TraceHistory& U, const TraceHistory& phi, double x, double t,
                         const QuadratureSpec& q)
{
    q.validate();
    check_compatible(U, phi);
    const LiftedSampler s{U, phi};
    constexpr double pi = std::numbers::pi;
    auto pair = [](const Lifted& h, const Lifted& o) {
        const Vec2 dA = h.U * h.a - o.U * o.a;
        const Vec2 dU = h.U - o.U;
        const Vec2 dP = h.P - o.P;
        return dot(dA, dU + dP) / (4.0 * pi) + dot(dU, dP) / (4.0 * pi) + norm2(dP) / (8.0 * pi) +
               norm2(dA) / (8.0 * pi);
    };
    const double scalar = detail::spacetime_integral(s, pair, x, t, q, U.dx(), "nonlinear_remainder");
    return s.slice(t).at(x).P * scalar;
}

double scalar_b(const TraceHistory& U, const TraceHistory& phi, double x, double t, const QuadratureSpec& q)
{
    q.validate();
    check_compatible(U, phi);
    const LiftedSampler s{U, phi};
    constexpr double pi = std::numbers::pi;
    const Lifted here = s.slice(t).at(x);

    // full map u = U + Pi phi + a U
    auto full = [](const Lifted& h, const Lifted& o) {
        return norm2((h.U * (1.0 + h.a) + h.P) - (o.U * (1.0 + o.a) + o.P));
    };
    auto cross = [](const Lifted& h, const Lifted& o) { return dot(h.U - o.U, h.P - o.P); };
    const double I_full = detail::spacetime_integral(s, full, x, t, q, U.dx(), "scalar_b");
    const double I_cross = detail::spacetime_integral(s, cross, x, t, q, U.dx(), "scalar_b");

    // same kernel with U frozen at time t: reduces to the stationary form
    TraceHistory frozen(U.x0(), U.dx(), U.nx(), U.far(), false);
    {
        const auto sl = U.slice(t);
        std::vector<Vec2> row(U.nx());
        for (std::size_t i = 0; i < U.nx(); ++i) row[i] = sl.node(long(i));
        frozen.append(t, row);
    }
    const HistorySampler fs{frozen};
    const double I_static = detail::spacetime_integral(fs, sq_diff, x, t, q, U.dx(), "scalar_b");

    return I_full * (1.0 + here.a) / (8.0 * pi) - I_cross / (4.0 * pi) - I_static / (8.0 * pi);
}

}  // namespace hmf
