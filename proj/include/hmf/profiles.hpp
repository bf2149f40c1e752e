#pragma once

#include <functional>
#include <vector>

#include "hmf/vec2.hpp"

namespace hmf {

// Canonical least-energy half-harmonic map and its harmonic extension.
Vec2 omega(double x);
Vec2 omega_ext(PlanePoint p);
// d/dy of the extension on y = 0
Vec2 omega_dy(double x);

// Bubble with scale lambda centred at xi.
Vec2 bubble(double x, double lambda, double xi);
Vec2 bubble_ext(PlanePoint p, double lambda, double xi);

struct MoebiusProfile {
    double theta = 0.0;
    std::vector<double> scales;
    std::vector<double> centers;
    bool conjugate = false;

    int degree() const { return int(scales.size()); }
    void validate() const;

    static MoebiusProfile canonical() { return {0.0, {1.0}, {0.0}, false}; }
};

Vec2 eval_moebius(const MoebiusProfile& m, double x);
Vec2 eval_moebius_ext(const MoebiusProfile& m, PlanePoint p);

// Kernel of the linearisation at omega: rotation, translation and dilation modes.
Vec2 eval_Z(int i, double x);
Vec2 eval_Z_ext(int i, PlanePoint p);
Vec2 eval_Z_dy(int i, double x);

using FieldEvaluator = std::function<Vec2(PlanePoint)>;
using DensityEvaluator = std::function<double(PlanePoint)>;

struct HalfDiskIntegral {
    double value = 0.0;       // trapezoid sum over the half disk of radius L
    double tail = 0.0;        // fitted r^-4 tail beyond L
    double tail_bound = 0.0;  // analytic bound, when known
    double corrected() const { return value + tail; }
};

// Trapezoid rule over {x^2 + y^2 <= L^2, y >= 0} on a uniform grid of step h.
HalfDiskIntegral integrate_half_disk(const DensityEvaluator& density, double L, double h,
                                     PlanePoint center = {});

// Half Dirichlet energy 1/2 int |grad u|^2, gradient by central differences.
HalfDiskIntegral energy(const FieldEvaluator& u, double L, double h, PlanePoint center = {});
HalfDiskIntegral moebius_energy(const MoebiusProfile& m, double L, double h);

}  // namespace hmf
