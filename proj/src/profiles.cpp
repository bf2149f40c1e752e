#include "hmf/profiles.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "hmf/errors.hpp"
#include "hmf/numerics.hpp"

namespace hmf {

using cplx = std::complex<double>;

namespace {

constexpr cplx I{0.0, 1.0};

// a + bi  ->  (-b, a)
Vec2 to_plane(cplx w) { return {-w.imag(), w.real()}; }

void require_upper(const PlanePoint& p)
{
    if (!(p.y >= 0.0)) throw DomainError("extension requested at y < 0");
}

// (z - i)/(z + i) and its first two derivatives
cplx f0(cplx z) { return (z - I) / (z + I); }
cplx f1(cplx z) { return 2.0 * I / ((z + I) * (z + I)); }
cplx f2(cplx z) { return -4.0 * I / ((z + I) * (z + I) * (z + I)); }

void check_index(int i)
{
    if (i < 1 || i > 3) throw DomainError("kernel index must be 1, 2 or 3, got " + std::to_string(i));
}

}  // namespace

Vec2 omega(double x)
{
    const double d = x * x + 1.0;
    if (!std::isfinite(d)) return kFarValue;
    return {2.0 * x / d, (x * x - 1.0) / d};
}

Vec2 omega_ext(PlanePoint p)
{
    require_upper(p);
    const double d = p.x * p.x + (p.y + 1.0) * (p.y + 1.0);
    return {2.0 * p.x / d, (p.x * p.x + p.y * p.y - 1.0) / d};
}

Vec2 omega_dy(double x)
{
    // d/dy g = i g' for holomorphic g
    const cplx w = I * f1(cplx(x, 0.0));
    return to_plane(w);
}

Vec2 bubble(double x, double lambda, double xi) { return omega((x - xi) / lambda); }

Vec2 bubble_ext(PlanePoint p, double lambda, double xi)
{
    return omega_ext({(p.x - xi) / lambda, p.y / lambda});
}

void MoebiusProfile::validate() const
{
    if (scales.empty()) throw DomainError("Moebius profile needs degree >= 1");
    if (scales.size() != centers.size()) throw DomainError("scales and centers differ in length");
    for (double s : scales)
        if (!(s > 0.0)) throw DomainError("Moebius scales must be positive");
}

Vec2 eval_moebius_ext(const MoebiusProfile& m, PlanePoint p)
{
    require_upper(p);
    const cplx z(p.x, p.y);
    cplx w = std::polar(1.0, m.theta);
    for (std::size_t k = 0; k < m.scales.size(); ++k) {
        const cplx s = m.scales[k] * (z - m.centers[k]);
        w *= (s - I) / (s + I);
    }
    if (m.conjugate) w = std::conj(w);
    return to_plane(w);
}

Vec2 eval_moebius(const MoebiusProfile& m, double x)
{
    const Vec2 v = eval_moebius_ext(m, {x, 0.0});
    // remove the rounding drift accumulated over the product
    return v * (1.0 / norm(v));
}

Vec2 eval_Z(int i, double x)
{
    check_index(i);
    if (i == 1) return perp(omega(x));
    return eval_Z_ext(i, {x, 0.0});
}

Vec2 eval_Z_ext(int i, PlanePoint p)
{
    check_index(i);
    require_upper(p);
    const cplx z(p.x, p.y);
    switch (i) {
    case 1: return perp(to_plane(f0(z)));
    case 2: return -to_plane(f1(z));
    default: return -to_plane(z * f1(z));
    }
}

Vec2 eval_Z_dy(int i, double x)
{
    check_index(i);
    const cplx z(x, 0.0);
    switch (i) {
    case 1: return perp(omega_dy(x));
    case 2: return -to_plane(I * f2(z));
    default: return -to_plane(I * (f1(z) + z * f2(z)));
    }
}

HalfDiskIntegral integrate_half_disk(const DensityEvaluator& density, double L, double h, PlanePoint c)
{
    if (!(L > 0.0) || !(h > 0.0)) throw DomainError("half-disk integration needs L > 0 and h > 0");
    const int n = int(std::floor(L / h));
    std::vector<double> rows(std::size_t(n) + 1, 0.0);
    std::vector<double> band_sum(std::size_t(n) + 1, 0.0), band_cnt(std::size_t(n) + 1, 0.0);
    const double band_r = 0.8 * L;

#pragma omp parallel for schedule(dynamic, 4)
    for (int j = 0; j <= n; ++j) {
        const double y = j * h;
        const double half = std::sqrt(std::max(0.0, L * L - y * y));
        const int m = int(std::floor(half / h));
        KahanSum acc;
        double bs = 0.0, bc = 0.0;
        for (int i = -m; i <= m; ++i) {
            const double x = i * h;
            const double f = density({c.x + x, c.y + y});
            acc.add(f);
            const double r2 = x * x + y * y;
            if (r2 >= band_r * band_r) {
                bs += f * r2 * r2;
                bc += 1.0;
            }
        }
        rows[std::size_t(j)] = acc.value() * h * h * (j == 0 ? 0.5 : 1.0);
        band_sum[std::size_t(j)] = bs;
        band_cnt[std::size_t(j)] = bc;
    }

    HalfDiskIntegral out;
    out.value = pairwise_sum(rows);
    const double cnt = pairwise_sum(band_cnt);
    if (cnt > 0.0) {
        // density ~ C r^-4 beyond the band; int_L^inf C r^-4 pi r dr
        const double C = pairwise_sum(band_sum) / cnt;
        out.tail = std::numbers::pi * C / (2.0 * L * L);
    }
    return out;
}

HalfDiskIntegral energy(const FieldEvaluator& u, double L, double h, PlanePoint c)
{
    const double eps = 1e-3 * h;
    auto density = [&](PlanePoint p) {
        const Vec2 ux = (u({p.x + eps, p.y}) - u({p.x - eps, p.y})) * (0.5 / eps);
        Vec2 uy;
        if (p.y - c.y >= eps) {
            uy = (u({p.x, p.y + eps}) - u({p.x, p.y - eps})) * (0.5 / eps);
        } else {
            uy = (u({p.x, p.y + eps}) * 4.0 - u(p) * 3.0 - u({p.x, p.y + 2.0 * eps})) * (0.5 / eps);
        }
        return 0.5 * (norm2(ux) + norm2(uy));
    };
    return integrate_half_disk(density, L, h, c);
}

HalfDiskIntegral moebius_energy(const MoebiusProfile& m, double L, double h)
{
    m.validate();
    auto out = energy([&](PlanePoint p) { return eval_moebius_ext(m, p); }, L, h);
    const double d = m.degree();
    out.tail_bound = 2.0 * std::numbers::pi * d * d / L;
    return out;
}

}  // namespace hmf
