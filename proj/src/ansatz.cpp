#include "hmf/ansatz.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hmf/errors.hpp"
#include "hmf/io.hpp"
#include "hmf/nonlocal.hpp"
#include "hmf/numerics.hpp"
#include "hmf/profiles.hpp"

namespace hmf {

namespace {

struct KernelParts {
    double k;    // k
    double zkz;  // z k_z
    double m2;   // z k_z - z^2 k_zz
};

KernelParts kernel_parts(double z, double sigma)
{
    const double w = z * z / (4.0 * sigma);
    const double iz2 = 1.0 / (z * z);
    const double one_minus = -std::expm1(-w);
    double q, r;
    if (w < 0.5) {
        // q = w e^-w - (1 - e^-w),  r = 2q + w^2 e^-w, both O(w^2) and O(w^3)
        q = 0.0;
        r = 0.0;
        double term = w;  // w^n / n!
        for (int n = 2; n < 30; ++n) {
            term *= w / n;
            const double sgn = (n % 2 == 0) ? 1.0 : -1.0;
            q -= sgn * (n - 1) * term;
            if (n >= 3) r += sgn * (n - 1) * (n - 2) * term;
        }
    } else {
        const double e = std::exp(-w);
        q = w * e - one_minus;
        r = 2.0 * q + w * w * e;
    }
    return {one_minus * iz2, 2.0 * q * iz2, 4.0 * r * iz2};
}

Vec2 phi0_unchecked(const ModulationPath& path, double x, double y, double t)
{
    const double X = x - path.xi(t);
    const double lam = path.lambda(t);
    const double s = psi(path, std::sqrt(X * X + y * y + lam * lam), t);
    return {X * s, -y * s};
}

Vec2 bubble_unchecked(const ModulationPath& path, double x, double y, double t)
{
    const double lam = path.lambda(t);
    const double X = (x - path.xi(t)) / lam, Y = y / lam;
    const double d = X * X + (Y + 1.0) * (Y + 1.0);
    return {2.0 * X / d, (X * X + Y * Y - 1.0) / d};
}

double smooth_step(double s)
{
    // 1 for s <= 1/2, 0 for s >= 1
    auto f = [](double v) { return v > 0.0 ? std::exp(-1.0 / v) : 0.0; };
    const double a = f(1.0 - s), b = f(s - 0.5);
    return a / (a + b);
}

}  // namespace

double duhamel_kernel(double z, double t)
{
    if (!(z > 0.0) || !(t > 0.0)) throw DomainError("duhamel_kernel needs z > 0 and t > 0");
    return kernel_parts(z, t).k;
}

DuhamelMoments duhamel_moments(const ModulationPath& path, double z, double t)
{
    const double T = path.T();
    if (!(t < T)) throw DomainError("Duhamel integral requested at t >= T");
    if (!(t > -T)) return {};
    if (!(z > 0.0)) throw DomainError("Duhamel integral needs z > 0");

    const double lam = path.lambda(t);
    const double sig_lo = 1e-12 * lam * lam;
    const double sig_hi = t + T;
    DuhamelMoments out;
    if (sig_hi <= sig_lo) return out;

    const double brk[] = {t, z * z};
    const auto knots = log_panels(sig_lo, sig_hi, 0.25, brk);
    const auto& rule = gauss_rule(10);
    KahanSum a0, a1, a2;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const double la = std::log(knots[k]), lb = std::log(knots[k + 1]);
        const double half = 0.5 * (lb - la);
        for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
            const double sigma = std::exp(0.5 * (la + lb) + half * rule.nodes[g]);
            const double w = rule.weights[g] * half * sigma * path.p(t - sigma);
            const auto kp = kernel_parts(z, sigma);
            a0.add(w * kp.k);
            a1.add(w * kp.zkz);
            a2.add(w * kp.m2);
        }
    }
    // sigma < sig_lo: kernel at its small-time limit
    const double pt = path.p(t) * sig_lo / (z * z);
    out.k0 = a0.value() + pt;
    out.m1 = a1.value() - 2.0 * pt;
    out.m2 = a2.value() - 8.0 * pt;
    return out;
}

double psi(const ModulationPath& path, double z, double t) { return duhamel_moments(path, z, t).k0; }

Vec2 phi0(const ModulationPath& path, double x, double y, double t)
{
    if (!(y >= 0.0)) throw DomainError("phi0 requested at y < 0");
    return phi0_unchecked(path, x, y, t);
}

Vec2 bubble_field(const ModulationPath& path, double x, double y, double t)
{
    if (!(y >= 0.0)) throw DomainError("bubble requested at y < 0");
    return bubble_unchecked(path, x, y, t);
}

Vec2 bubble_time_derivative(const ModulationPath& path, double x, double y, double t)
{
    const double lam = path.lambda(t), ld = path.lambda_dot(t), xd = path.xi_dot(t);
    const double X = x - path.xi(t);
    const double D = X * X + (y + lam) * (y + lam);
    const double D2 = D * D;
    const Vec2 e0{2.0 * X * (X * X + y * y - lam * lam) / D2,
                  (-2.0 * y * (y + lam) * (y + lam) - 2.0 * X * X * (y + 2.0 * lam)) / D2};
    const Vec2 e1{2.0 * lam * (X + y + lam) * (X - y - lam) / D2, -4.0 * lam * X * (y + lam) / D2};
    return e0 * ld + e1 * xd;
}

// ---------------------------------------------------------------- background

Vec2 BackgroundSpec::initial(PlanePoint p) const
{
    const double X = p.x - q;
    double chi = 1.0;
    if (std::isfinite(radius)) chi = smooth_step(std::hypot(X, p.y) / radius);
    return Vec2{-twist * X, -X} * (delta * chi);
}

BackgroundField BackgroundField::zero()
{
    BackgroundField f;
    f.zero_ = true;
    return f;
}

Vec2 BackgroundField::eval(PlanePoint p, double t) const
{
    if (zero_) return {};
    if (stationary_ || times_.empty() || t <= 0.0) return init_(p);
    const double s = (p.x - x0_) / h_, r = p.y / h_;
    if (s < 0.0 || r < 0.0 || s > double(nx_ - 1) || r > double(ny_ - 1)) return init_(p);

    std::size_t k = 0;
    double w = 0.0;
    if (t >= times_.back()) {
        k = times_.size() - 1;
    } else {
        k = std::size_t(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin()) - 1;
        w = (t - times_[k]) / (times_[k + 1] - times_[k]);
    }
    const std::size_t i = std::min(std::size_t(s), nx_ - 2), j = std::min(std::size_t(r), ny_ - 2);
    const double a = s - double(i), b = r - double(j);
    auto bilinear = [&](const std::vector<Vec2>& f) {
        auto at = [&](std::size_t ii, std::size_t jj) { return f[jj * nx_ + ii]; };
        return at(i, j) * ((1 - a) * (1 - b)) + at(i + 1, j) * (a * (1 - b)) + at(i, j + 1) * ((1 - a) * b) +
               at(i + 1, j + 1) * (a * b);
    };
    Vec2 v = bilinear(*frames_[k]);
    if (w > 0.0) v = v * (1.0 - w) + bilinear(*frames_[k + 1]) * w;
    return v;
}

Vec2 BackgroundField::normal_derivative(double x, double t) const
{
    if (zero_ || stationary_) return {};
    // the ghost row below y = 0 mirrors the first interior row
    const Vec2 up = eval({x, h_}, t);
    const Vec2 ghost = up;
    return (up - ghost) * (0.5 / h_);
}

double BackgroundField::sup_norm(std::size_t snapshot) const
{
    if (zero_ || frames_.empty()) return 0.0;
    double m = 0.0;
    for (const Vec2& v : *frames_.at(snapshot)) m = std::max(m, norm(v));
    return m;
}

BackgroundField solve_background(const std::function<Vec2(PlanePoint)>& initial, double q, double delta, double b2,
                                 const BackgroundGrid& grid, double horizon)
{
    if (grid.dt_factor > 0.25) throw CflError("background heat step violates dt <= h^2/4");
    if (!(grid.h > 0.0) || !(grid.half_width > 0.0) || !(grid.height > 0.0))
        throw DomainError("background grid needs positive extents");
    BackgroundField f;
    f.init_ = initial;
    f.b2_ = b2;
    f.delta_ = delta;
    f.h_ = grid.h;
    f.x0_ = q - grid.half_width;
    f.nx_ = std::size_t(std::llround(2.0 * grid.half_width / grid.h)) + 1;
    f.ny_ = std::size_t(std::llround(grid.height / grid.h)) + 1;
    const std::size_t nx = f.nx_, ny = f.ny_;

    std::vector<Vec2> u(nx * ny), v(nx * ny);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) u[j * nx + i] = initial({f.x0_ + grid.h * double(i), grid.h * double(j)});
    v = u;

    const double dt = grid.dt_factor * grid.h * grid.h;
    const double r = grid.dt_factor;
    const long steps = std::max(1L, long(std::ceil(horizon / dt)));
    const long stride = std::max(1L, steps / 200);
    f.times_.push_back(0.0);
    f.frames_.push_back(std::make_shared<const std::vector<Vec2>>(u));

    for (long n = 1; n <= steps; ++n) {
#pragma omp parallel for schedule(static)
        for (long jj = 0; jj < long(ny) - 1; ++jj) {
            const std::size_t j = std::size_t(jj);
            for (std::size_t i = 1; i + 1 < nx; ++i) {
                const std::size_t c = j * nx + i;
                const Vec2 below = j == 0 ? u[c + nx] : u[c - nx];
                v[c] = u[c] + (u[c + 1] + u[c - 1] + u[c + nx] + below - u[c] * 4.0) * r;
            }
        }
        std::swap(u, v);
        if (n % stride == 0 || n == steps) {
            f.times_.push_back(double(n) * dt);
            f.frames_.push_back(std::make_shared<const std::vector<Vec2>>(u));
        }
    }
    return f;
}

BackgroundField solve_background(const BackgroundSpec& spec, const BackgroundGrid& grid, double horizon)
{
    if (!(spec.delta > 0.0)) throw DomainError("background amplitude delta must be positive");
    if (!(spec.radius > 0.0)) throw DomainError("background cutoff radius must be positive");
    auto init = [spec](PlanePoint p) { return spec.initial(p); };
    const Vec2 at_q = init({spec.q, 0.0});
    const double eps = 1e-5;
    const double slope = (init({spec.q + eps, 0.0}).y - init({spec.q - eps, 0.0}).y) / (2.0 * eps) / spec.delta;
    if (norm(at_q) > 1e-10 || !(slope < 0.0)) throw DomainError("background datum violates the sign conditions at q");
    if (!std::isfinite(spec.radius)) {
        BackgroundField f;
        f.init_ = init;
        f.b2_ = spec.b2();
        f.delta_ = spec.delta;
        f.stationary_ = true;
        return f;
    }
    return solve_background(init, spec.q, spec.delta, spec.b2(), grid, horizon);
}

// ---------------------------------------------------------------- error fields

Vec2 inner_error(const ModulationPath& path, const BackgroundField&, double x, double y, double t)
{
    const double lam = path.lambda(t), ld = path.lambda_dot(t), xd = path.xi_dot(t);
    const double X = x - path.xi(t);
    const double z2 = X * X + y * y + lam * lam;
    const double D = X * X + (y + lam) * (y + lam);
    const double D2 = D * D;
    const auto m = duhamel_moments(path, std::sqrt(z2), t);

    // -p(t)/2 equals lambda'(t) for t >= 0; before 0, p is frozen at -2 lambda'(0)
    const double lp = -0.5 * path.p(t);
    const Vec2 src{2.0 * X / z2, -2.0 * y / z2};
    const Vec2 dil{-2.0 * X * (X * X + y * y - lam * lam) / D2,
                   (2.0 * y * (y + lam) * (y + lam) + 2.0 * X * X * (y + 2.0 * lam)) / D2};
    const Vec2 tr{2.0 * lam * (X + y + lam) * (X - y - lam) / D2, -4.0 * lam * X * (y + lam) / D2};
    const Vec2 radial{X, -y};
    return src * lp + dil * ld - tr * xd + radial * (lam * lam / (z2 * z2) * m.m2) + radial * ((X * xd - ld * lam) / z2 * m.m1) +
           Vec2{xd, 0.0} * m.k0;
}

Vec2 inner_error_fd(const ModulationPath& path, double x, double y, double t)
{
    const double lam = path.lambda(t);
    const double X = x - path.xi(t);
    const double ell = std::sqrt(X * X + y * y + lam * lam);
    const double hs = 0.02 * ell;
    const double ht = 2e-3 * std::min({ell * ell, path.T() - t, t + path.T()});

    auto lap = [&](double xx, double yy) {
        auto f = [&](double a, double b) { return phi0_unchecked(path, a, b, t); };
        const Vec2 c = f(xx, yy) * 30.0;
        const Vec2 dxx = (f(xx + hs, yy) * 16.0 + f(xx - hs, yy) * 16.0 - f(xx + 2 * hs, yy) - f(xx - 2 * hs, yy) - c);
        const Vec2 dyy = (f(xx, yy + hs) * 16.0 + f(xx, yy - hs) * 16.0 - f(xx, yy + 2 * hs) - f(xx, yy - 2 * hs) - c);
        return (dxx + dyy) * (1.0 / (12.0 * hs * hs));
    };
    auto ddt = [&](auto&& g) {
        return (g(t - 2 * ht) - g(t + 2 * ht) + (g(t + ht) - g(t - ht)) * 8.0) * (1.0 / (12.0 * ht));
    };
    const Vec2 phit = ddt([&](double s) { return phi0_unchecked(path, x, y, s); });
    const Vec2 ut = ddt([&](double s) { return bubble_unchecked(path, x, y, s); });
    return lap(x, y) - phit - ut;
}

Vec2 boundary_error(const ModulationPath& path, const BackgroundField& bg, double x, double t, bool project)
{
    const double lam = path.lambda(t);
    const double X = x - path.xi(t);
    const double u = X / lam;
    const double pb = psi(path, std::sqrt(X * X + lam * lam), t);
    const double pot = 2.0 / (1.0 + u * u);
    Vec2 e = Vec2{0.0, -pb} + Vec2{u * pb, 0.0} * pot + bg.eval({x, 0.0}, t) * (pot / lam);
    if (project) e = project_tangent(e, omega(u));
    return e;
}

// ---------------------------------------------------------------- assembly

AssembledField::AssembledField(std::vector<ModulationPath> paths, BackgroundField bg, Perturbation perturbation,
                               bool include_phi0)
    : paths_(std::move(paths)), bg_(std::move(bg)), pert_(std::move(perturbation)), phi0_(include_phi0)
{
    if (paths_.empty()) throw DomainError("assembly needs at least one bubble");
}

Vec2 AssembledField::base(double x, double y, double t) const
{
    if (paths_.size() == 1) return bubble_field(paths_[0], x, y, t);
    MoebiusProfile m;
    for (const auto& p : paths_) {
        m.scales.push_back(1.0 / p.lambda(t));
        m.centers.push_back(p.xi(t));
    }
    return eval_moebius_ext(m, {x, y});
}

Vec2 AssembledField::correction(double x, double y, double t) const
{
    Vec2 c = bg_.eval({x, y}, t);
    if (phi0_)
        for (const auto& p : paths_) c += phi0(p, x, y, t);
    if (pert_) c += pert_(x, y, t);
    return c;
}

Vec2 AssembledField::boundary(double x, double t) const
{
    Vec2 U = base(x, 0.0, t);
    U = U * (1.0 / norm(U));
    return lift(U, correction(x, 0.0, t));
}

void write_error_csv(const std::string& path, const std::vector<ErrorSample>& rows)
{
    CsvWriter w(path, {"x", "y", "t", "component1", "component2"});
    for (const auto& r : rows) w.row({r.x, r.y, r.t, r.value.x, r.value.y});
}

}  // namespace hmf
