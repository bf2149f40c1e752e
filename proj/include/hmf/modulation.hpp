#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hmf/path.hpp"

namespace hmf {

// Reading of the second-derivative term in the balance integrand:
// kzz uses zeta K_zeta - zeta^2 K_zetazeta, ksq uses zeta K_zeta - zeta^2 (K_zeta)^2.
enum class KVariant { kzz, ksq };
const char* to_string(KVariant v);
KVariant parse_k_variant(const std::string& s);

// K(zeta) = (1 - e^{-zeta/4}) / zeta and its first two derivatives
struct KernelK {
    double K, K1, K2;
};
KernelK kernel_K(double zeta);

double gamma_b(double tau, double tol = 1e-12);
double gamma(double tau, KVariant v = KVariant::kzz, double tol = 1e-12);
double gamma0(double tau, KVariant v = KVariant::kzz, double tol = 1e-12);

struct GammaRow {
    double tau, gamma, gamma_b, gamma0;
};

// Gamma0 tabulated at tau = 0 and on a log grid [tau_lo, tau_hi], monotone
// cubic interpolation in log tau. Between 0 and tau_lo the table follows
// Gamma0(0) + C sqrt(tau), the leading small-tau behaviour.
class GammaTable {
public:
    static GammaTable build(KVariant v, double tau_lo = 1e-12, double tau_hi = 1e8, int per_decade = 40);

    double gamma0(double tau) const;
    double c() const { return rows_.front().gamma0; }
    double tau_hi() const { return rows_.back().tau; }
    // tau Gamma0(tau) at the top of the table
    double tail_coefficient() const { return rows_.back().tau * rows_.back().gamma0; }
    KVariant variant() const { return variant_; }
    const std::vector<GammaRow>& rows() const { return rows_; }

    void write_csv(const std::string& path) const;

private:
    KVariant variant_ = KVariant::kzz;
    std::vector<GammaRow> rows_;  // rows_[0] is tau = 0
    struct Interp;
    std::shared_ptr<const Interp> interp_;
};

// A = lambda' + int_{-T}^t p(s) Gamma0(lambda^2/(t-s)) ds/(t-s) + 2 b2
double balance_A(const ModulationPath& path, double b2, double t, const GammaTable& table);
// B = int_{-T}^t lambda'(s) Gamma0(lambda^2/(t-s)) ds/(t-s)
double balance_B(const ModulationPath& path, double t, const GammaTable& table);

double kappa0(double c, double b2);

struct PathSampling {
    int per_decade = 40;       // nodes per decade of T - t
    double min_gap = 1e-13;    // smallest T - t sampled, relative to T
};

// lambda0' = -kappa |log T| / log^2(T - t), lambda0(T) = 0, xi = q.
ModulationPath lambda0_path(double T, double kappa, double q = 0.0, const PathSampling& s = {});
double lambda0_exact(double T, double kappa, double t);

struct BalanceSample {
    double t, lambda, A, B;
};
// A and B on t in [0, T) with T - t geometric from T down to min_gap T.
std::vector<BalanceSample> balance_sweep(const ModulationPath& path, double b2, const GammaTable& table,
                                         int points = 60, double min_gap = 1e-8);

}  // namespace hmf
