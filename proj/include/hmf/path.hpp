#pragma once

#include <functional>
#include <vector>

namespace hmf {

// Sampled modulation parameters (lambda, xi) on [-T, T] with cubic Hermite
// interpolation in t. p(t) = -2 lambda'(t) for t >= 0 and the constant
// -2 lambda'(0) for t < 0.
class ModulationPath {
public:
    ModulationPath(double T, std::vector<double> times, std::vector<double> lambda,
                   std::vector<double> lambda_dot, std::vector<double> xi, std::vector<double> xi_dot);

    static ModulationPath constant(double T, double lambda, double xi);
    static ModulationPath from_functions(double T, const std::function<double(double)>& lambda,
                                         const std::function<double(double)>& lambda_dot,
                                         const std::function<double(double)>& xi,
                                         const std::function<double(double)>& xi_dot,
                                         const std::vector<double>& times);

    double T() const { return T_; }
    double t_first() const { return t_.front(); }
    double t_last() const { return t_.back(); }
    const std::vector<double>& times() const { return t_; }
    const std::vector<double>& lambda_samples() const { return lam_; }

    double lambda(double t) const;
    double lambda_dot(double t) const;
    double xi(double t) const;
    double xi_dot(double t) const;
    double p(double t) const;

private:
    std::size_t locate(double t) const;
    double hermite(const std::vector<double>& y, const std::vector<double>& dy, double t, bool derivative) const;

    double T_;
    std::vector<double> t_, lam_, lamd_, xi_, xid_;
};

}  // namespace hmf
