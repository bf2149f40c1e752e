#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hmf/path.hpp"
#include "hmf/vec2.hpp"

namespace hmf {

// k(z, t) = (1 - e^{-z^2/4t}) / z^2
double duhamel_kernel(double z, double t);

// Weighted time integrals of the Duhamel kernel against p(s) on [-T, t]:
//   k0 = int p k,   m1 = int p z k_z,   m2 = int p (z k_z - z^2 k_zz).
struct DuhamelMoments {
    double k0 = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
};
DuhamelMoments duhamel_moments(const ModulationPath& path, double z, double t);
double psi(const ModulationPath& path, double z, double t);

// (x - xi, -y) psi(sqrt((x-xi)^2 + y^2 + lambda^2), t)
Vec2 phi0(const ModulationPath& path, double x, double y, double t);

// Bubble field U = omega((x - xi)/lambda, y/lambda) and its exact time derivative.
Vec2 bubble_field(const ModulationPath& path, double x, double y, double t);
Vec2 bubble_time_derivative(const ModulationPath& path, double x, double y, double t);

// Initial background datum Z0 = delta * Z~0 with
//   Z~0 = -(x - q) (twist, 1) chi(|(x - q, y)| / radius).
// chi is a smooth bump equal to 1 near the origin; radius = inf means no cutoff.
struct BackgroundSpec {
    double delta = 0.1;
    double q = 0.0;
    double twist = 0.0;
    double radius = 1.0;

    Vec2 initial(PlanePoint p) const;
    double b2() const { return -delta; }
};

struct BackgroundGrid {
    double half_width = 3.0;  // x in [q - half_width, q + half_width]
    double height = 3.0;
    double h = 0.02;
    double dt_factor = 0.2;   // dt = dt_factor h^2
};

// Heat flow with zero Neumann data on y = 0 and the initial values pinned on
// the other edges. Evaluation outside the grid returns the initial datum.
class BackgroundField {
public:
    static BackgroundField zero();

    Vec2 eval(PlanePoint p, double t) const;
    // centred difference across y = 0 through the reflected ghost row
    Vec2 normal_derivative(double x, double t) const;
    double sup_norm(std::size_t snapshot) const;

    double b2() const { return b2_; }
    double delta() const { return delta_; }
    std::size_t snapshots() const { return times_.size(); }
    const std::vector<double>& times() const { return times_; }

private:
    friend BackgroundField solve_background(const std::function<Vec2(PlanePoint)>&, double, double, double,
                                            const BackgroundGrid&, double);
    friend BackgroundField solve_background(const BackgroundSpec&, const BackgroundGrid&, double);
    std::function<Vec2(PlanePoint)> init_;
    double b2_ = 0.0, delta_ = 0.0, x0_ = 0.0, h_ = 1.0;
    std::size_t nx_ = 0, ny_ = 0;
    bool zero_ = false;
    bool stationary_ = false;
    std::vector<double> times_;
    std::vector<std::shared_ptr<const std::vector<Vec2>>> frames_;
};

// General heat solve; no sign conditions on the datum.
BackgroundField solve_background(const std::function<Vec2(PlanePoint)>& initial, double q, double delta,
                                 double b2, const BackgroundGrid& grid, double horizon);
// Checks Z~0(q,0) = 0 and d/dx z~02(q,0) < 0 before solving. A datum without
// cutoff is harmonic with zero normal derivative and is kept exactly stationary.
BackgroundField solve_background(const BackgroundSpec& spec, const BackgroundGrid& grid, double horizon);

// Closed-form inner error -Phi*_t + Delta Phi* - U_t (the heat-solving background drops out).
Vec2 inner_error(const ModulationPath& path, const BackgroundField& bg, double x, double y, double t);
// The same quantity by finite differences of U and Phi0 in x, y and t.
Vec2 inner_error_fd(const ModulationPath& path, double x, double y, double t);

// Leading-order boundary error: the displayed terms only. With project = true
// the component along U is removed.
Vec2 boundary_error(const ModulationPath& path, const BackgroundField& bg, double x, double t,
                    bool project = false);

// u = U + Phi0 + Z* (+ perturbation), with U the product of the bubbles.
class AssembledField {
public:
    using Perturbation = std::function<Vec2(double x, double y, double t)>;

    AssembledField(std::vector<ModulationPath> paths, BackgroundField bg, Perturbation perturbation = {},
                   bool include_phi0 = true);

    Vec2 base(double x, double y, double t) const;        // product of bubbles
    Vec2 correction(double x, double y, double t) const;  // Phi0 + Z* + perturbation
    Vec2 interior(double x, double y, double t) const { return base(x, y, t) + correction(x, y, t); }
    // unit-norm boundary value U + p(correction)
    Vec2 boundary(double x, double t) const;

    const std::vector<ModulationPath>& paths() const { return paths_; }
    const BackgroundField& background() const { return bg_; }

private:
    std::vector<ModulationPath> paths_;
    BackgroundField bg_;
    Perturbation pert_;
    bool phi0_;
};

// CSV export (x, y, t, component1, component2).
struct ErrorSample {
    double x, y, t;
    Vec2 value;
};
void write_error_csv(const std::string& path, const std::vector<ErrorSample>& rows);

}  // namespace hmf
