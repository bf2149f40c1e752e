#include "hmf/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

// pchip.hpp in boost 1.74 calls isnan unqualified
#include <boost/math/special_functions/fpclassify.hpp>
using boost::math::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include "hmf/errors.hpp"
#include "hmf/io.hpp"
#include "hmf/numerics.hpp"

namespace hmf {

const char* to_string(KVariant v) { return v == KVariant::kzz ? "kzz" : "ksq"; }

KVariant parse_k_variant(const std::string& s)
{
    if (s == "kzz") return KVariant::kzz;
    if (s == "ksq") return KVariant::ksq;
    throw DomainError("unknown K-derivative reading '" + s + "'");
}

KernelK kernel_K(double zeta)
{
    if (zeta < 1.0) {
        // K = sum (-1)^n zeta^n / (4^{n+1} (n+1)!)
        KernelK k{0.0, 0.0, 0.0};
        double c = 0.25;  // 1 / (4^{n+1} (n+1)!)
        double zn = 1.0;  // zeta^n
        for (int n = 0; n < 25; ++n) {
            const double sgn = (n % 2 == 0) ? 1.0 : -1.0;
            k.K += sgn * c * zn;
            if (n >= 1) k.K1 += sgn * c * n * zn / zeta;
            if (n >= 2) k.K2 += sgn * c * n * (n - 1) * zn / (zeta * zeta);
            c /= 4.0 * (n + 2);
            zn *= zeta;
        }
        if (zeta == 0.0) {
            k.K1 = -1.0 / 32.0;
            k.K2 = 2.0 / 384.0;
        }
        return k;
    }
    const double e = std::exp(-0.25 * zeta);
    const double om = -std::expm1(-0.25 * zeta);
    const double z2 = zeta * zeta;
    return {om / zeta, 0.25 * e / zeta - om / z2, -e / (16.0 * zeta) - e / (2.0 * z2) + 2.0 * om / (z2 * zeta)};
}

namespace {

// int_0^inf f(rho) drho as a composite Gauss rule in v = log rho. The
// integrand has structure at rho ~ 1 and at rho ~ tau^{-1/2}; both are O(1)
// wide in v. The 10- and 15-point results on the same panels give the error estimate.
template <class F>
double rho_integral(F&& f, double tau, double tol, const char* what)
{
    const double top = (tau > 0.0 && tau < 1.0 ? -0.5 * std::log(tau) : 0.0) + 40.0;
    const double bottom = -15.0;
    const int panels = int(std::ceil((top - bottom) / 0.5));
    const auto& g10 = gauss_rule(10);
    const auto& g15 = gauss_rule(15);
    KahanSum a, b;
    double mag = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double va = bottom + (top - bottom) * k / panels;
        const double vb = bottom + (top - bottom) * (k + 1) / panels;
        const double mid = 0.5 * (va + vb), half = 0.5 * (vb - va);
        for (std::size_t i = 0; i < g10.nodes.size(); ++i) {
            const double rho = std::exp(mid + half * g10.nodes[i]);
            const double v = g10.weights[i] * half * rho * f(rho);
            a.add(v);
            mag += std::abs(v);
        }
        for (std::size_t i = 0; i < g15.nodes.size(); ++i) {
            const double rho = std::exp(mid + half * g15.nodes[i]);
            b.add(g15.weights[i] * half * rho * f(rho));
        }
    }
    if (!(std::abs(a.value() - b.value()) <= tol * mag + 1e-300))
        throw ToleranceError(std::string(what) + ": composite rule did not reach the tolerance");
    return b.value();
}

}  // namespace

double gamma_b(double tau, double tol)
{
    if (!(tau >= 0.0)) throw DomainError("gamma_b needs tau >= 0");
    auto f = [tau](double rho) {
        const double r2 = rho * rho, d = 1.0 + r2;
        return 8.0 * r2 / (d * d) * kernel_K(tau * d).K;
    };
    return rho_integral(f, tau, tol, "gamma_b");
}

double gamma(double tau, KVariant v, double tol)
{
    if (!(tau >= 0.0)) throw DomainError("gamma needs tau >= 0");
    auto f = [tau, v](double rho) {
        const double r2 = rho * rho, d = 1.0 + r2;
        const double z = tau * d;
        const auto k = kernel_K(z);
        const double second = v == KVariant::kzz ? k.K2 : k.K1 * k.K1;
        return 2.0 * r2 / (d * d) * (z * k.K1 - z * z * second);
    };
    return rho_integral(f, tau, tol, "gamma");
}

double gamma0(double tau, KVariant v, double tol) { return gamma(tau, v, tol) + gamma_b(tau, tol) / std::numbers::pi; }

using Pchip = boost::math::interpolators::pchip<std::vector<double>>;

struct GammaTable::Interp {
    Pchip p;
    double lo, hi;
};

GammaTable GammaTable::build(KVariant v, double tau_lo, double tau_hi, int per_decade)
{
    if (!(tau_lo > 0.0 && tau_hi > tau_lo) || per_decade < 2) throw DomainError("bad Gamma table range");
    const int n = int(std::ceil(std::log10(tau_hi / tau_lo) * per_decade));
    GammaTable t;
    t.variant_ = v;
    t.rows_.resize(std::size_t(n) + 2);
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k <= n + 1; ++k) {
        const double tau = k == 0 ? 0.0 : tau_lo * std::pow(tau_hi / tau_lo, double(k - 1) / n);
        const double g = gamma(tau, v);
        const double gb = gamma_b(tau);
        t.rows_[std::size_t(k)] = {tau, g, gb, g + gb / std::numbers::pi};
    }
    std::vector<double> x, y;
    for (std::size_t k = 1; k < t.rows_.size(); ++k) {
        x.push_back(std::log(t.rows_[k].tau));
        y.push_back(t.rows_[k].gamma0);
    }
    const double lo = x.front(), hi = x.back();
    t.interp_ = std::make_shared<const Interp>(Interp{Pchip(std::move(x), std::move(y)), lo, hi});
    return t;
}

double GammaTable::gamma0(double tau) const
{
    if (!(tau >= 0.0) || tau > tau_hi() * (1.0 + 1e-12))
        throw TableRangeError("Gamma0 requested outside the tabulated range: tau = " + fmt(tau));
    const double lo = rows_[1].tau;
    if (tau < lo) return c() + (rows_[1].gamma0 - c()) * std::sqrt(tau / lo);

    return interp_->p(std::clamp(std::log(tau), interp_->lo, interp_->hi));
}

void GammaTable::write_csv(const std::string& path) const
{
    CsvWriter w(path, {"tau", "gamma", "gamma_b", "gamma0"});
    for (const auto& r : rows_) w.row({r.tau, r.gamma, r.gamma_b, r.gamma0});
}

namespace {

// int_0^{t+T} f(t - sigma) Gamma0(lambda^2/sigma) dsigma / sigma
template <class F>
double balance_integral(const ModulationPath& path, double t, const GammaTable& table, F&& f)
{
    const double T = path.T();
    if (!(t < T)) throw DomainError("balance integral requested at t >= T");
    const double lam = path.lambda(t);
    const double l2 = lam * lam;
    const double sig_lo = l2 / table.tau_hi();
    const double sig_hi = t + T;
    if (sig_hi <= sig_lo) return 0.0;

    const double brk[] = {t, l2};
    const auto knots = log_panels(sig_lo, sig_hi, 0.2, brk);
    const auto& rule = gauss_rule(10);
    KahanSum acc;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const double la = std::log(knots[k]), lb = std::log(knots[k + 1]);
        const double half = 0.5 * (lb - la);
        for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
            const double sigma = std::exp(0.5 * (la + lb) + half * rule.nodes[g]);
            acc.add(rule.weights[g] * half * f(t - sigma) * table.gamma0(std::min(l2 / sigma, table.tau_hi())));
        }
    }
    // sigma < sig_lo: Gamma0(tau) ~ C / tau
    acc.add(f(t) * table.tail_coefficient() / table.tau_hi());
    return acc.value();
}

}  // namespace

double balance_A(const ModulationPath& path, double b2, double t, const GammaTable& table)
{
    const double I = balance_integral(path, t, table, [&](double s) { return path.p(s); });
    return path.lambda_dot(t) + I + 2.0 * b2;
}

double balance_B(const ModulationPath& path, double t, const GammaTable& table)
{
    return balance_integral(path, t, table, [&](double s) { return path.lambda_dot(s); });
}

double kappa0(double c, double b2)
{
    if (b2 == 0.0) throw DegenerateInput("kappa0: background slope b2 is zero");
    if (c == 0.0 || !std::isfinite(c)) throw DegenerateInput("kappa0: balance constant c is zero or not finite");
    const double k = -2.0 * b2 / c;
    if (!(k > 0.0)) throw SignMismatch("kappa0: -2 b2 / c = " + fmt(k) + " is not positive");
    return k;
}

double lambda0_exact(double T, double kappa, double t)
{
    const double u = T - t;
    if (u <= 0.0) return 0.0;
    const double lu = std::log(u);
    // int_0^u dv / log^2 v = li(u) - u / log u
    return kappa * std::abs(std::log(T)) * (std::expint(lu) - u / lu);
}

ModulationPath lambda0_path(double T, double kappa, double q, const PathSampling& s)
{
    if (!(T > 0.0 && T < std::exp(-1.0))) throw DomainError("lambda0_path needs 0 < T < 1/e");
    if (!(kappa > 0.0)) throw DomainError("lambda0_path needs kappa > 0");
    const double logT = std::abs(std::log(T));
    std::vector<double> times;
    const double umax = 2.0 * T, umin = s.min_gap * T;
    const int n = int(std::ceil(std::log10(umax / umin) * s.per_decade));
    for (int k = 0; k <= n; ++k) times.push_back(T - umax * std::pow(umin / umax, double(k) / n));
    times.front() = -T;
    // make sure t = 0 is a node so the kink of p sits on a panel edge
    times.push_back(0.0);
    times.push_back(T);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end(),
                            [](double a, double b) { return std::abs(a - b) <= 1e-15 * (std::abs(a) + 1e-300); }),
                times.end());

    std::vector<double> lam, lamd, xi(times.size(), q), xid(times.size(), 0.0);
    for (double t : times) {
        lam.push_back(lambda0_exact(T, kappa, t));
        const double u = T - t;
        lamd.push_back(u > 0.0 ? -kappa * logT / (std::log(u) * std::log(u)) : 0.0);
    }
    return ModulationPath(T, times, lam, lamd, xi, xid);
}

std::vector<BalanceSample> balance_sweep(const ModulationPath& path, double b2, const GammaTable& table, int points,
                                         double min_gap)
{
    const double T = path.T();
    std::vector<BalanceSample> out(std::size_t(points) + 1);
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k <= points; ++k) {
        const double t = T - T * std::pow(min_gap, double(k) / points);
        out[std::size_t(k)] = {t, path.lambda(t), balance_A(path, b2, t, table), balance_B(path, t, table)};
    }
    return out;
}

}  // namespace hmf
