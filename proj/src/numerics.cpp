#include "hmf/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

namespace hmf {

double pairwise_sum(std::span<const double> v)
{
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

void KahanSum::add(double v)
{
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
        comp += (sum - t) + v;
    else
        comp += (v - t) + sum;
    sum = t;
}

namespace {

template <int N>
GaussRule expand()
{
    using Rule = boost::math::quadrature::gauss<double, N>;
    const auto& a = Rule::abscissa();
    const auto& w = Rule::weights();
    GaussRule r;
    // boost stores the non-negative half; node 0 is the centre for odd N
    for (std::size_t i = a.size(); i-- > 0;) {
        if (a[i] == 0.0) continue;
        r.nodes.push_back(-a[i]);
        r.weights.push_back(w[i]);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        r.nodes.push_back(a[i]);
        r.weights.push_back(w[i]);
    }
    return r;
}

}  // namespace

bool gauss_order_supported(int n)
{
    return n == 7 || n == 10 || n == 15 || n == 20 || n == 25 || n == 30;
}

const GaussRule& gauss_rule(int n)
{
    static const GaussRule g7 = expand<7>();
    static const GaussRule g10 = expand<10>();
    static const GaussRule g15 = expand<15>();
    static const GaussRule g20 = expand<20>();
    static const GaussRule g25 = expand<25>();
    static const GaussRule g30 = expand<30>();
    switch (n) {
    case 7: return g7;
    case 10: return g10;
    case 15: return g15;
    case 20: return g20;
    case 25: return g25;
    case 30: return g30;
    default: throw std::invalid_argument("unsupported Gauss-Legendre order");
    }
}

LineFit linear_fit(std::span<const double> x, std::span<const double> y)
{
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return {};
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    return f;
}

std::vector<double> log_panels(double a, double b, double width, std::span<const double> breaks)
{
    std::vector<double> knots{a};
    for (double c : breaks)
        if (c > a * (1.0 + 1e-12) && c < b * (1.0 - 1e-12)) knots.push_back(c);
    knots.push_back(b);
    std::sort(knots.begin(), knots.end());

    std::vector<double> out{a};
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const double la = std::log(knots[k]);
        const double lb = std::log(knots[k + 1]);
        const int n = std::max(1, int(std::ceil((lb - la) / width)));
        for (int i = 1; i < n; ++i) out.push_back(std::exp(la + (lb - la) * i / n));
        out.push_back(knots[k + 1]);
    }
    return out;
}

}  // namespace hmf
