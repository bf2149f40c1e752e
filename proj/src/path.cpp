#include "hmf/path.hpp"

#include <algorithm>
#include <cmath>

#include "hmf/errors.hpp"

namespace hmf {

ModulationPath::ModulationPath(double T, std::vector<double> times, std::vector<double> lambda,
                               std::vector<double> lambda_dot, std::vector<double> xi, std::vector<double> xi_dot)
    : T_(T), t_(std::move(times)), lam_(std::move(lambda)), lamd_(std::move(lambda_dot)), xi_(std::move(xi)),
      xid_(std::move(xi_dot))
{
    if (!(T > 0.0)) throw DomainError("modulation horizon must be positive");
    const std::size_t n = t_.size();
    if (n < 2 || lam_.size() != n || lamd_.size() != n || xi_.size() != n || xid_.size() != n)
        throw DomainError("modulation path samples have inconsistent lengths");
    for (std::size_t k = 1; k < n; ++k)
        if (!(t_[k] > t_[k - 1])) throw DomainError("modulation path times must increase strictly");
    if (t_.front() > -T * (1.0 - 1e-12) || t_.front() > 0.0)
        throw DomainError("modulation path must start at or before -T");
    for (std::size_t k = 0; k < n; ++k) {
        if (t_[k] < T * (1.0 - 1e-14) && !(lam_[k] > 0.0))
            throw DomainError("lambda must be positive before the horizon");
    }
}

ModulationPath ModulationPath::constant(double T, double lambda, double xi)
{
    return ModulationPath(T, {-T, 0.0, T}, {lambda, lambda, lambda}, {0.0, 0.0, 0.0}, {xi, xi, xi}, {0.0, 0.0, 0.0});
}

ModulationPath ModulationPath::from_functions(double T, const std::function<double(double)>& lambda,
                                              const std::function<double(double)>& lambda_dot,
                                              const std::function<double(double)>& xi,
                                              const std::function<double(double)>& xi_dot,
                                              const std::vector<double>& times)
{
    std::vector<double> l, ld, x, xd;
    for (double t : times) {
        l.push_back(lambda(t));
        ld.push_back(lambda_dot(t));
        x.push_back(xi(t));
        xd.push_back(xi_dot(t));
    }
    return ModulationPath(T, times, l, ld, x, xd);
}

std::size_t ModulationPath::locate(double t) const
{
    if (t <= t_.front()) return 0;
    if (t >= t_.back()) return t_.size() - 2;
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    return std::size_t(it - t_.begin()) - 1;
}

double ModulationPath::hermite(const std::vector<double>& y, const std::vector<double>& dy, double t,
                               bool derivative) const
{
    if (t < t_.front() || t > t_.back()) {
        // constant-slope continuation outside the sampled window
        const std::size_t k = t < t_.front() ? 0 : t_.size() - 1;
        return derivative ? dy[k] : y[k] + dy[k] * (t - t_[k]);
    }
    const std::size_t k = locate(t);
    const double h = t_[k + 1] - t_[k];
    const double s = (t - t_[k]) / h;
    const double y0 = y[k], y1 = y[k + 1], m0 = dy[k] * h, m1 = dy[k + 1] * h;
    if (!derivative) {
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * m1;
    }
    const double s2 = s * s;
    return ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * m1) / h;
}

double ModulationPath::lambda(double t) const { return hermite(lam_, lamd_, t, false); }
double ModulationPath::lambda_dot(double t) const { return hermite(lam_, lamd_, t, true); }
double ModulationPath::xi(double t) const { return hermite(xi_, xid_, t, false); }
double ModulationPath::xi_dot(double t) const { return hermite(xi_, xid_, t, true); }

double ModulationPath::p(double t) const { return -2.0 * lambda_dot(t < 0.0 ? 0.0 : t); }

}  // namespace hmf
