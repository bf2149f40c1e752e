#pragma once

#include <span>
#include <vector>

namespace hmf {

// Fixed-order pairwise summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> v);

// Compensated running sum (Neumaier).
struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;
    void add(double v);
    double value() const { return sum + comp; }
};

// Gauss-Legendre rule on [-1, 1], full node set.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Supported orders: 7, 10, 15, 20, 25, 30.
const GaussRule& gauss_rule(int n);
bool gauss_order_supported(int n);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};
LineFit linear_fit(std::span<const double> x, std::span<const double> y);

// Panel boundaries on [a, b] in log space with panel width at most `width`,
// honouring the interior breakpoints (in linear space) that fall inside.
std::vector<double> log_panels(double a, double b, double width, std::span<const double> breaks = {});

}  // namespace hmf
