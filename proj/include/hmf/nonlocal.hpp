#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hmf/vec2.hpp"

namespace hmf {

struct QuadratureSpec {
    double z_cut = 200.0;      // spatial truncation; beyond it traces take their value at infinity
    double dz = 0.02;          // z step for function traces (grid traces use their own spacing)
    double tau_min = 1e-3;     // below: trace frozen at time t, closed-form kernel mass
    double tau_cut = 50.0;     // above: trace frozen, closed-form kernel mass
    int points = 10;           // Gauss-Legendre nodes per log-tau panel
    double panel_width = 0.5;  // log-tau panel width
    double tol = 1e-4;         // relative tolerance on the step-doubling estimate
    bool check = true;

    void validate() const;
};

using BoundaryFunction = std::function<Vec2(double)>;

// Boundary trace u(x, 0, t) sampled on a uniform grid x0 + i dx, i < nx.
// Values outside the grid, or before the earliest sample in time, follow the
// frozen-tail convention: spatially the value at infinity, temporally the earliest sample.
class TraceHistory {
public:
    TraceHistory(double x0, double dx, std::size_t nx, Vec2 far = kFarValue, bool unit_valued = true);

    void append(double t, std::span<const Vec2> values);
    // Drop old samples so that consecutive kept samples are spaced by at least
    // ratio * age; the earliest and the newest `keep_recent` samples are always kept.
    void thin(double ratio, std::size_t keep_recent = 4);

    std::size_t size() const { return times_.size(); }
    bool empty() const { return times_.empty(); }
    double earliest() const { return times_.front(); }
    double latest() const { return times_.back(); }
    const std::vector<double>& times() const { return times_; }
    std::span<const Vec2> row(std::size_t k) const { return values_[k]; }

    double x0() const { return x0_; }
    double dx() const { return dx_; }
    std::size_t nx() const { return nx_; }
    double x_end() const { return x0_ + dx_ * double(nx_ - 1); }
    Vec2 far() const { return far_; }
    bool unit_valued() const { return unit_; }

    class Slice {
    public:
        Vec2 at(double x) const;
        Vec2 node(long i) const;
        double time_weight() const { return w1_; }

    private:
        friend class TraceHistory;
        const TraceHistory* h_ = nullptr;
        const Vec2* a_ = nullptr;
        const Vec2* b_ = nullptr;
        double w1_ = 0.0;
    };

    // Linear interpolation in time; t beyond the newest sample uses the newest.
    Slice slice(double t) const;
    Vec2 at(double x, double t) const { return slice(t).at(x); }

    // Sample a space-time function on the given times.
    static TraceHistory sample(const std::function<Vec2(double, double)>& u, double x0, double dx,
                               std::size_t nx, std::span<const double> times, Vec2 far = kFarValue,
                               bool unit_valued = true);

private:
    double x0_, dx_;
    std::size_t nx_;
    Vec2 far_;
    bool unit_;
    std::vector<double> times_;
    std::vector<std::vector<Vec2>> values_;
};

// (1/2pi) int |u(x) - u(y)|^2 / |x - y|^2 dy
double stationary_coeff(const BoundaryFunction& u, double x, const QuadratureSpec& q = {});

// (1/8pi) int_0^inf int |u(x,t) - u(x-z,t-tau)|^2 e^{-z^2/4tau} / tau^2 dz dtau
double spacetime_coeff(const TraceHistory& h, double x, double t, const QuadratureSpec& q = {});

// du/dy + coeff u
Vec2 S2_residual(const TraceHistory& h, const BoundaryFunction& dudy, double x, double t,
                 const QuadratureSpec& q = {});

// dphi/dy + 2/(1+x^2) phi + A[phi], the linearisation of S2 at omega
Vec2 linearized_boundary(const BoundaryFunction& phi, const BoundaryFunction& dphi_dy, double x,
                         const QuadratureSpec& q = {});

Vec2 project_tangent(Vec2 phi, Vec2 U);
// a(v) = sqrt(1 - |v|^2) - 1 for tangent v
double lift_amplitude(Vec2 tangent);
// p(phi) = Pi phi + a(Pi phi) U
Vec2 perturbation(Vec2 phi, Vec2 U);
Vec2 lift(Vec2 U, Vec2 phi);

std::vector<Vec2> project_tangent(std::span<const Vec2> phi, std::span<const Vec2> U);
std::vector<Vec2> lift(std::span<const Vec2> U, std::span<const Vec2> phi);

// N_U(Pi phi) and b(Pi phi) at (x, t). `phi` stores the raw perturbation;
// projection onto the tangent space of U happens pointwise inside the integrals.
Vec2 nonlinear_remainder(const TraceHistory& U, const TraceHistory& phi, double x, double t,
                         const QuadratureSpec& q = {});
double scalar_b(const TraceHistory& U, const TraceHistory& phi, double x, double t,
                const QuadratureSpec& q = {});

}  // namespace hmf
