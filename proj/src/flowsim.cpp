#include "hmf/flowsim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "hmf/ansatz.hpp"
#include "hmf/errors.hpp"
#include "hmf/io.hpp"
#include "hmf/numerics.hpp"

namespace hmf {

namespace {

constexpr double kPi = std::numbers::pi;

double eta0(double s)
{
    // 1 on [0, 1], 0 on [2, inf), C^inf in between
    if (s <= 1.0) return 1.0;
    if (s >= 2.0) return 0.0;
    auto f = [](double v) { return v > 0.0 ? std::exp(-1.0 / v) : 0.0; };
    const double a = f(2.0 - s), b = f(s - 1.0);
    return a / (a + b);
}

Vec2 unit(Vec2 v) { return v * (1.0 / norm(v)); }

// first-derivative stencils with one-sided second-order closures at the ends
Vec2 diff(const Vec2* base, std::size_t k, std::size_t n, std::size_t stride, double h)
{
    auto at = [&](std::size_t m) { return base[m * stride]; };
    if (k == 0) return (at(0) * -3.0 + at(1) * 4.0 - at(2)) * (0.5 / h);
    if (k + 1 == n) return (at(n - 1) * 3.0 - at(n - 2) * 4.0 + at(n - 3)) * (0.5 / h);
    return (at(k + 1) - at(k - 1)) * (0.5 / h);
}

// trapezoid of |grad u|^2 over nodes with (x - c)^2 + y^2 <= r^2 (r = inf for the whole grid)
double grid_energy(const HalfPlaneGrid& g, std::span<const Vec2> u, double center, double radius)
{
    const std::size_t nx = g.nx, ny = g.ny;
    std::vector<double> rows(ny, 0.0);
    const double r2 = radius * radius;
#pragma omp parallel for schedule(static)
    for (long jj = 0; jj < long(ny); ++jj) {
        const std::size_t j = std::size_t(jj);
        const double y = g.y(j);
        if (std::isfinite(radius) && y * y > r2) continue;
        const double wj = (j == 0 || j + 1 == ny) ? 0.5 : 1.0;
        double s = 0.0;
        for (std::size_t i = 0; i < nx; ++i) {
            const double x = g.x(i) - center;
            if (std::isfinite(radius) && x * x + y * y > r2) continue;
            const double wi = (i == 0 || i + 1 == nx) ? 0.5 : 1.0;
            const Vec2 gx = diff(&u[j * nx], i, nx, 1, g.h);
            const Vec2 gy = diff(&u[i], j, ny, nx, g.h);
            s += wi * (norm2(gx) + norm2(gy));
        }
        rows[j] = wj * s;
    }
    return pairwise_sum(rows) * g.h * g.h;
}

std::vector<Vec2> sample_field(const HalfPlaneGrid& g, const std::function<Vec2(double, double)>& f, bool normalize_row0)
{
    std::vector<Vec2> u(g.nx * g.ny);
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 4)
    for (long jj = 0; jj < long(g.ny); ++jj) {
        try {
            const std::size_t j = std::size_t(jj);
            for (std::size_t i = 0; i < g.nx; ++i) {
                Vec2 v = f(g.x(i), g.y(j));
                if (j == 0 && normalize_row0) v = unit(v);
                u[g.index(i, j)] = v;
            }
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return u;
}

// lambda0(0) as a function of T, inverted by bisection in log T
double solve_horizon(double lambda, double kappa)
{
    double lo = std::log(1e-12), hi = std::log(0.35);
    if (lambda0_exact(std::exp(hi), kappa, 0.0) < lambda)
        throw ConfigError("bubble scale too large for the lambda0 ansatz with this background");
    if (lambda0_exact(std::exp(lo), kappa, 0.0) > lambda) throw ConfigError("bubble scale too small for the lambda0 ansatz");
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (lambda0_exact(std::exp(mid), kappa, 0.0) < lambda ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

template <class T>
T take(const nlohmann::json& j, const char* key, T fallback)
{
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

void only_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, const char* where)
{
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

}  // namespace

// ---------------------------------------------------------------- grid and config

HalfPlaneGrid HalfPlaneGrid::make(double Lx, std::size_t nx, std::size_t ny)
{
    HalfPlaneGrid g;
    g.Lx = Lx;
    g.nx = nx;
    g.ny = ny;
    g.h = nx > 1 ? 2.0 * Lx / double(nx - 1) : 0.0;
    g.Ly = g.h * double(ny > 0 ? ny - 1 : 0);
    g.validate();
    return g;
}

void HalfPlaneGrid::validate() const
{
    if (nx < 16 || ny < 16) throw ConfigError("grid needs at least 16 nodes per direction");
    if (!(Lx > 0.0) || !(h > 0.0)) throw ConfigError("grid extents must be positive");
    if (std::abs(h * double(nx - 1) - 2.0 * Lx) > 1e-12 * Lx || std::abs(h * double(ny - 1) - Ly) > 1e-12 * Ly)
        throw ConfigError("grid spacing inconsistent with extents");
}

const char* to_string(BoundaryMode m) { return m == BoundaryMode::local ? "local" : "nonlocal"; }

BoundaryMode parse_boundary_mode(const std::string& s)
{
    if (s == "local" || s == "local-projection") return BoundaryMode::local;
    if (s == "nonlocal" || s == "nonlocal-dtn") return BoundaryMode::nonlocal;
    throw ConfigError("unknown boundary mode '" + s + "'");
}

void SimConfig::validate() const
{
    grid.validate();
    const double h = grid.h;
    const double dt_ = time_step();
    if (!(dt_ > 0.0)) throw ConfigError("time step must be positive");
    if (dt_ > 0.25 * h * h * (1.0 + 1e-12)) throw CflError("dt exceeds the explicit bound h^2/4");
    if (!(lambda_min() > 2.0 * h)) throw ConfigError("lambda_min must exceed 2h");
    if (initial.bubbles.empty()) throw ConfigError("at least one bubble is required");
    if (!(initial.delta >= 0.0)) throw ConfigError("delta must be non-negative");
    if (!(initial.radius >= 0.0)) throw ConfigError("background radius must be non-negative");
    if (!(stop.max_time > 0.0)) throw ConfigError("max_time must be positive");
    if (output.cadence < 1) throw ConfigError("output cadence must be at least 1");
    if (!(output.transient >= 0.0 && output.transient < 1.0)) throw ConfigError("transient fraction must lie in [0, 1)");
    if (!(output.radius_small > 0.0 && output.radius_large >= output.radius_small))
        throw ConfigError("energy radii must be positive and ordered");
    if (!(history.thin_ratio > 0.0) || history.keep_recent < 2) throw ConfigError("bad history thinning parameters");
    for (const auto& b : initial.bubbles) {
        if (!(b.lambda > 0.0)) throw ConfigError("bubble scale must be positive");
        if (std::abs(b.q) + output.radius_large > grid.Lx || output.radius_large > grid.Ly)
            throw ConfigError("energy ball leaves the domain");
    }
    quadrature.validate();
}

SimConfig SimConfig::from_json(const nlohmann::json& j)
{
    only_keys(j, {"grid", "dt", "dt_factor", "boundary_mode", "initial", "stop", "output", "history", "quadrature", "seed"},
              "config");
    SimConfig c;
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        only_keys(g, {"lx", "ly", "nx", "ny"}, "grid");
        const double lx = take(g, "lx", c.grid.Lx);
        const auto nx = take<std::size_t>(g, "nx", c.grid.nx);
        const auto ny = take<std::size_t>(g, "ny", c.grid.ny);
        if (nx < 2) throw ConfigError("grid needs at least 16 nodes per direction");
        c.grid = HalfPlaneGrid::make(lx, nx, ny);
        if (g.contains("ly") && std::abs(take(g, "ly", 0.0) - c.grid.Ly) > 1e-9 * c.grid.Ly)
            throw ConfigError("ly must equal (ny - 1) * 2 lx / (nx - 1)");
    }
    c.dt = take(j, "dt", c.dt);
    c.dt_factor = take(j, "dt_factor", c.dt_factor);
    c.boundary_mode = parse_boundary_mode(take<std::string>(j, "boundary_mode", to_string(c.boundary_mode)));
    c.seed = take<std::uint64_t>(j, "seed", c.seed);
    if (j.contains("initial")) {
        const auto& in = j["initial"];
        only_keys(in, {"bubbles", "delta", "twist", "radius", "include_phi0", "k_variant", "noise"}, "initial");
        if (in.contains("bubbles")) {
            c.initial.bubbles.clear();
            if (!in["bubbles"].is_array()) throw ConfigError("bubbles must be an array");
            for (const auto& b : in["bubbles"]) {
                only_keys(b, {"lambda", "q"}, "bubble");
                c.initial.bubbles.push_back({take(b, "lambda", 0.05), take(b, "q", 0.0)});
            }
        }
        c.initial.delta = take(in, "delta", c.initial.delta);
        c.initial.twist = take(in, "twist", c.initial.twist);
        c.initial.radius = take(in, "radius", c.initial.radius);
        c.initial.include_phi0 = take(in, "include_phi0", c.initial.include_phi0);
        try {
            c.initial.k_variant = parse_k_variant(take<std::string>(in, "k_variant", to_string(c.initial.k_variant)));
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
        c.initial.noise = take(in, "noise", c.initial.noise);
    }
    if (j.contains("stop")) {
        const auto& s = j["stop"];
        only_keys(s, {"max_time", "lambda_min", "max_steps"}, "stop");
        c.stop.max_time = take(s, "max_time", c.stop.max_time);
        c.stop.lambda_min = take(s, "lambda_min", c.stop.lambda_min);
        c.stop.max_steps = take(s, "max_steps", c.stop.max_steps);
    }
    if (j.contains("output")) {
        const auto& o = j["output"];
        only_keys(o, {"cadence", "snapshot_every", "radius_small", "radius_large", "transient"}, "output");
        c.output.cadence = take(o, "cadence", c.output.cadence);
        c.output.snapshot_every = take(o, "snapshot_every", c.output.snapshot_every);
        c.output.radius_small = take(o, "radius_small", c.output.radius_small);
        c.output.radius_large = take(o, "radius_large", c.output.radius_large);
        c.output.transient = take(o, "transient", c.output.transient);
    }
    if (j.contains("history")) {
        const auto& hs = j["history"];
        only_keys(hs, {"thin_ratio", "keep_recent"}, "history");
        c.history.thin_ratio = take(hs, "thin_ratio", c.history.thin_ratio);
        c.history.keep_recent = take(hs, "keep_recent", c.history.keep_recent);
    }
    if (j.contains("quadrature")) {
        const auto& q = j["quadrature"];
        only_keys(q, {"z_cut", "dz", "tau_min", "tau_cut", "points", "panel_width", "tol", "check"}, "quadrature");
        c.quadrature.z_cut = take(q, "z_cut", c.quadrature.z_cut);
        c.quadrature.dz = take(q, "dz", c.quadrature.dz);
        c.quadrature.tau_min = take(q, "tau_min", c.quadrature.tau_min);
        c.quadrature.tau_cut = take(q, "tau_cut", c.quadrature.tau_cut);
        c.quadrature.points = take(q, "points", c.quadrature.points);
        c.quadrature.panel_width = take(q, "panel_width", c.quadrature.panel_width);
        c.quadrature.tol = take(q, "tol", c.quadrature.tol);
        c.quadrature.check = take(q, "check", c.quadrature.check);
    }
    try {
        c.validate();
    } catch (const CflError&) {
        throw;
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    return c;
}

nlohmann::json SimConfig::to_json() const
{
    nlohmann::json bubbles = nlohmann::json::array();
    for (const auto& b : initial.bubbles) bubbles.push_back({{"lambda", b.lambda}, {"q", b.q}});
    return {
        {"grid", {{"lx", grid.Lx}, {"ly", grid.Ly}, {"nx", grid.nx}, {"ny", grid.ny}}},
        {"dt", dt},
        {"dt_factor", dt_factor},
        {"boundary_mode", to_string(boundary_mode)},
        {"initial",
         {{"bubbles", bubbles},
          {"delta", initial.delta},
          {"twist", initial.twist},
          {"radius", initial.radius},
          {"include_phi0", initial.include_phi0},
          {"k_variant", to_string(initial.k_variant)},
          {"noise", initial.noise}}},
        {"stop", {{"max_time", stop.max_time}, {"lambda_min", stop.lambda_min}, {"max_steps", stop.max_steps}}},
        {"output",
         {{"cadence", output.cadence},
          {"snapshot_every", output.snapshot_every},
          {"radius_small", output.radius_small},
          {"radius_large", output.radius_large},
          {"transient", output.transient}}},
        {"history", {{"thin_ratio", history.thin_ratio}, {"keep_recent", history.keep_recent}}},
        {"quadrature",
         {{"z_cut", quadrature.z_cut},
          {"dz", quadrature.dz},
          {"tau_min", quadrature.tau_min},
          {"tau_cut", quadrature.tau_cut},
          {"points", quadrature.points},
          {"panel_width", quadrature.panel_width},
          {"tol", quadrature.tol},
          {"check", quadrature.check}}},
        {"seed", seed},
    };
}

// ---------------------------------------------------------------- state

FlowState make_state(const HalfPlaneGrid& grid, const std::function<Vec2(double, double)>& field,
                     std::vector<BubbleTrack> tracks)
{
    grid.validate();
    FlowState s{grid, sample_field(grid, field, true), 0.0, 0, TraceHistory(-grid.Lx, grid.h, grid.nx), std::move(tracks), {}};
    s.history.append(0.0, s.boundary());
    return s;
}

FlowState init_state(const SimConfig& config)
{
    config.validate();
    const auto& g = config.grid;
    const auto& in = config.initial;
    for (std::size_t a = 0; a < in.bubbles.size(); ++a) {
        const auto& b = in.bubbles[a];
        if (b.lambda < 8.0 * g.h) throw UnresolvedBubble("bubble scale below 8 grid spacings");
        if (std::abs(b.q) + 4.0 * b.lambda > g.Lx) throw UnresolvedBubble("bubble too close to the lateral edge");
        for (std::size_t c = 0; c < a; ++c)
            if (std::abs(b.q - in.bubbles[c].q) < 8.0 * (b.lambda + in.bubbles[c].lambda))
                throw OverlappingBubbles("bubble centres closer than 8 (lambda_i + lambda_j)");
    }

    const bool phi0 = in.include_phi0 && in.delta > 0.0;
    std::vector<ModulationPath> paths;
    std::vector<BubbleTrack> tracks;
    const double kappa = phi0 ? kappa0(gamma0(0.0, in.k_variant), -in.delta) : 0.0;
    for (const auto& b : in.bubbles) {
        if (phi0)
            paths.push_back(lambda0_path(solve_horizon(b.lambda, kappa), kappa, b.q));
        else
            paths.push_back(ModulationPath::constant(1.0, b.lambda, b.q));
        tracks.push_back({b.q, b.lambda});
    }

    BackgroundSpec bg;
    bg.delta = in.delta;
    bg.q = in.bubbles.front().q;
    bg.twist = in.twist;
    bg.radius = in.radius > 0.0 ? in.radius : std::numeric_limits<double>::infinity();

    std::vector<double> amp, phase;
    if (in.noise > 0.0) {
        std::mt19937_64 rng(config.seed);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        for (int m = 1; m <= 8; ++m) {
            amp.push_back(in.noise * U(rng) / m);
            phase.push_back(kPi * U(rng));
        }
    }
    const double Lx = g.Lx;
    auto pert = [bg, amp, phase, Lx](double x, double y, double) {
        Vec2 v = bg.initial({x, y});
        double n = 0.0;
        for (std::size_t m = 0; m < amp.size(); ++m)
            n += amp[m] * std::sin(kPi * double(m + 1) * (x + Lx) / (2.0 * Lx) + phase[m]);
        return v + Vec2{n * std::exp(-y / Lx), 0.0};
    };
    AssembledField field(std::move(paths), BackgroundField::zero(), pert, phi0);
    auto f = [&field](double x, double y) { return y == 0.0 ? field.boundary(x, 0.0) : field.interior(x, y, 0.0); };
    return make_state(g, f, std::move(tracks));
}

double boundary_norm_defect(const FlowState& s)
{
    double d = 0.0;
    for (const Vec2& v : s.boundary()) d = std::max(d, std::abs(norm(v) - 1.0));
    return d;
}

// ---------------------------------------------------------------- stepping

void step(FlowState& s, double dt, const StepOptions& o)
{
    const auto& g = s.grid;
    const double h = g.h;
    if (!(dt > 0.0) || dt > 0.25 * h * h * (1.0 + 1e-12)) throw CflError("dt exceeds the explicit bound h^2/4");
    const std::size_t nx = g.nx, ny = g.ny;
    const double r = dt / (h * h);

    std::vector<double> coeff;
    if (o.mode == BoundaryMode::nonlocal) {
        // the kernel needs four trace nodes on each side; the nodes next to the pinned edges keep the local rule
        coeff.assign(nx, std::numeric_limits<double>::quiet_NaN());
        std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
        for (long ii = 4; ii < long(nx) - 4; ++ii) {
            try {
                coeff[std::size_t(ii)] = spacetime_coeff(s.history, g.x(std::size_t(ii)), s.t, o.quadrature);
            } catch (...) {
#pragma omp critical
                if (!err) err = std::current_exception();
            }
        }
        if (err) std::rethrow_exception(err);
    }

    if (s.scratch.size() != s.u.size()) s.scratch = s.u;
    const std::vector<Vec2>& u = s.u;
    std::vector<Vec2>& v = s.scratch;
    int bad = 0;
#pragma omp parallel for schedule(static) reduction(| : bad)
    for (long jj = 0; jj < long(ny) - 1; ++jj) {
        const std::size_t j = std::size_t(jj);
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            const std::size_t c = j * nx + i;
            const Vec2 u0 = u[c];
            Vec2 w;
            if (j > 0) {
                w = u0 + (u[c - 1] + u[c + 1] + u[c - nx] + u[c + nx] - u0 * 4.0) * r;
            } else {
                const Vec2 u1 = u[c + nx];
                Vec2 ghost;
                const bool local = o.mode == BoundaryMode::local || std::isnan(coeff[i]);
                if (local) {
                    const Vec2 d = u1 - u0;
                    ghost = u0 + d - u0 * dot(d, u0);
                } else {
                    ghost = u1 + u0 * (2.0 * h * coeff[i]);
                }
                Vec2 lap = u[c - 1] + u[c + 1] + u1 + ghost - u0 * 4.0;
                // the local ghost fixes only the tangential part of d_y u; its normal part is left to the constraint
                if (local) lap = lap - u0 * dot(lap, u0);
                w = unit(u0 + lap * r);
            }
            if (!std::isfinite(w.x) || !std::isfinite(w.y)) bad = 1;
            v[c] = w;
        }
    }
    if (bad) throw DivergenceError("non-finite value in the flow at t = " + fmt(s.t));
    s.u.swap(v);
    s.t += dt;
    ++s.steps;
    s.history.append(s.t, s.boundary());
    s.history.thin(o.history.thin_ratio, o.history.keep_recent);
}

// ---------------------------------------------------------------- observables

std::vector<BubbleTrack> lambda_estimate(const FlowState& s)
{
    const auto& g = s.grid;
    const auto b = s.boundary();
    const std::size_t nx = g.nx;
    auto slope = [&](std::size_t i) {
        return norm(b[i - 2] - b[i - 1] * 8.0 + b[i + 1] * 8.0 - b[i + 2]) / (12.0 * g.h);
    };
    std::vector<BubbleTrack> out;
    for (const auto& tr : s.tracks) {
        const double w = 3.0 * tr.lambda + 6.0 * g.h;
        const auto lo = std::size_t(std::clamp(std::floor((tr.center - w + g.Lx) / g.h), 2.0, double(nx - 3)));
        const auto hi = std::size_t(std::clamp(std::ceil((tr.center + w + g.Lx) / g.h), 2.0, double(nx - 3)));
        std::size_t im = lo;
        double dm = -1.0;
        for (std::size_t i = lo; i <= hi; ++i) {
            const double d = slope(i);
            if (d > dm) {
                dm = d;
                im = i;
            }
        }
        double peak = dm, x = g.x(im);
        if (im > 2 && im + 3 < nx) {
            const double a = slope(im - 1), c = slope(im + 1);
            const double den = a - 2.0 * dm + c;
            if (den < 0.0) {
                const double off = 0.5 * (a - c) / den;
                peak = dm - 0.25 * (a - c) * off;
                x += off * g.h;
            }
        }
        const double lam = 2.0 / peak;
        if (!std::isfinite(lam) || !(peak > 0.0) || lam > 0.5 * std::min(g.Lx, g.Ly))
            throw LostBubble("no concentrated gradient near x = " + fmt(tr.center));
        out.push_back({x, lam});
    }
    return out;
}

double local_energy(const FlowState& s, double center, double radius)
{
    return grid_energy(s.grid, s.u, center, radius);
}

double total_energy(const FlowState& s)
{
    return grid_energy(s.grid, s.u, 0.0, std::numeric_limits<double>::infinity());
}

double local_energy(const HalfPlaneGrid& grid, const std::function<Vec2(double, double)>& field, double center,
                    double radius)
{
    return grid_energy(grid, sample_field(grid, field, false), center, radius);
}

// ---------------------------------------------------------------- rate fit

RateFit fit_rate(std::span<const double> t, std::span<const double> lambda, double transient)
{
    RateFit f;
    const std::size_t n = std::min(t.size(), lambda.size());
    if (n < 6) return f;
    const std::size_t s0 = std::size_t(std::floor(transient * double(n)));
    std::size_t first = n - 1;
    while (first > s0 && lambda[first - 1] > 0.0) --first;
    const std::size_t last = n - 1;
    if (last - first + 1 < 6) return f;
    const double span = t[last] - t[first];
    if (!(span > 0.0) || span >= 1.0) return f;

    auto model = [&](double T, double& kappa) {
        double sgg = 0.0, slg = 0.0;
        for (std::size_t k = first; k <= last; ++k) {
            const double u = T - t[k], L = std::log(u);
            const double gk = u / (L * L) / lambda[k];
            sgg += gk * gk;
            slg += gk;
        }
        kappa = slg / sgg;
        double res = 0.0;
        for (std::size_t k = first; k <= last; ++k) {
            const double u = T - t[k], L = std::log(u);
            const double e = 1.0 - kappa * u / (L * L) / lambda[k];
            res += e * e;
        }
        return res;
    };

    const double smax = (1.0 - span) * (1.0 - 1e-9);
    const double smin = std::max(1e-14, 1e-8 * span);
    if (!(smax > smin)) return f;
    const int scan = 400;
    std::vector<double> ss(scan + 1), rr(scan + 1);
    std::size_t best = 0;
    for (int k = 0; k <= scan; ++k) {
        double kap;
        ss[std::size_t(k)] = smin * std::pow(smax / smin, double(k) / scan);
        rr[std::size_t(k)] = model(t[last] + ss[std::size_t(k)], kap);
        if (rr[std::size_t(k)] < rr[best]) best = std::size_t(k);
    }
    // golden section on log s between the scan neighbours
    double a = std::log(ss[best > 0 ? best - 1 : 0]), b = std::log(ss[std::min<std::size_t>(best + 1, scan)]);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double kap;
    auto obj = [&](double ls) { return model(t[last] + std::exp(ls), kap); };
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = obj(c), fd = obj(d);
    for (int it = 0; it < 100 && b - a > 1e-12; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = obj(d);
        }
    }
    f.T_hat = t[last] + std::exp(0.5 * (a + b));
    f.rms = std::sqrt(model(f.T_hat, kap) / double(last - first + 1));
    f.first = first;
    f.last = last;

    std::vector<double> comp;
    double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
    for (std::size_t k = first; k <= last; ++k) {
        const double u = f.T_hat - t[k], L = std::log(u);
        comp.push_back(lambda[k] * L * L / u);
        cmin = std::min(cmin, comp.back());
        cmax = std::max(cmax, comp.back());
    }
    f.kappa_hat = pairwise_sum(comp) / double(comp.size());
    f.variation = cmax / cmin - 1.0;
    f.decades = std::log10((f.T_hat - t[first]) / (f.T_hat - t[last]));
    f.ok = std::isfinite(f.T_hat) && std::isfinite(f.kappa_hat) && f.T_hat > t[last];
    return f;
}

// ---------------------------------------------------------------- report

double BlowupReport::quantum_ratio() const
{
    return (final_energy_small - background_energy_small) / (2.0 * kPi);
}

nlohmann::json BlowupReport::to_json() const
{
    nlohmann::json ls = nlohmann::json::array(), es = nlohmann::json::array();
    for (std::size_t k = 0; k < times.size(); ++k) {
        nlohmann::json row = nlohmann::json::array({times[k]});
        for (double l : lambda_series[k]) row.push_back(l);
        ls.push_back(row);
    }
    for (const auto& e : energy_series) es.push_back({e.t, e.bubble, e.radius, e.energy});
    return {
        {"mode", to_string(mode)},
        {"stop_reason", stop_reason},
        {"blowup_detected", blowup_detected},
        {"monotone_after_transient", monotone_after_transient},
        {"energy_monotone", energy_monotone},
        {"energy_violations", energy_violations},
        {"steps", steps},
        {"t_end", t_end},
        {"dt", dt},
        {"h", h},
        {"lambda_min", lambda_min},
        {"T_hat", T_hat},
        {"kappa_hat", kappa_hat},
        {"fit",
         {{"ok", fit.ok},
          {"first", fit.first},
          {"last", fit.last},
          {"decades", fit.decades},
          {"variation", fit.variation},
          {"rms", fit.rms},
          {"rate_shape_ok", rate_shape_ok()}}},
        {"background_energy_small", background_energy_small},
        {"final_energy_small", final_energy_small},
        {"quantum_ratio", quantum_ratio()},
        {"lambda_series", ls},
        {"energy_series", es},
        {"total_energy", total_energy},
    };
}

void write_snapshot(const FlowState& s, const std::filesystem::path& file)
{
    CsvWriter w(file, {"x", "y", "u1", "u2"});
    for (std::size_t j = 0; j < s.grid.ny; ++j)
        for (std::size_t i = 0; i < s.grid.nx; ++i) {
            const Vec2 v = s.at(i, j);
            w.row({s.grid.x(i), s.grid.y(j), v.x, v.y});
        }
}

BlowupReport run(const SimConfig& config, const std::filesystem::path& out)
{
    FlowState s = init_state(config);
    const double dt = config.time_step();
    const double lmin = config.lambda_min();
    const std::size_t nb = s.tracks.size();
    StepOptions opt{config.boundary_mode, config.quadrature, config.history};

    BlowupReport rep;
    rep.mode = config.boundary_mode;
    rep.dt = dt;
    rep.h = config.grid.h;
    rep.lambda_min = lmin;
    {
        BackgroundSpec bg;
        bg.delta = config.initial.delta;
        bg.q = config.initial.bubbles.front().q;
        bg.twist = config.initial.twist;
        bg.radius = config.initial.radius > 0.0 ? config.initial.radius : std::numeric_limits<double>::infinity();
        rep.background_energy_small = local_energy(
            config.grid, [&bg](double x, double y) { return bg.initial({x, y}); }, bg.q, config.output.radius_small);
    }

    if (!out.empty()) std::filesystem::create_directories(out);
    std::unique_ptr<CsvWriter> series;
    if (!out.empty()) {
        std::vector<std::string> head{"t"};
        for (std::size_t k = 0; k < nb; ++k) head.push_back("lambda_est_" + std::to_string(k));
        for (std::size_t k = 0; k < nb; ++k) head.push_back("energy_r" + fmt(config.output.radius_small) + "_" + std::to_string(k));
        for (std::size_t k = 0; k < nb; ++k) head.push_back("energy_r" + fmt(config.output.radius_large) + "_" + std::to_string(k));
        head.push_back("total_energy");
        series = std::make_unique<CsvWriter>(out / "series.csv", head);
    }

    long sample = 0;
    auto record = [&]() -> bool {
        s.tracks = lambda_estimate(s);
        std::vector<double> lam, cen, es, el;
        for (const auto& tr : s.tracks) {
            lam.push_back(tr.lambda);
            cen.push_back(tr.center);
        }
        for (std::size_t k = 0; k < nb; ++k) {
            es.push_back(local_energy(s, s.tracks[k].center, config.output.radius_small));
            el.push_back(local_energy(s, s.tracks[k].center, config.output.radius_large));
            rep.energy_series.push_back({s.t, k, config.output.radius_small, es.back()});
            rep.energy_series.push_back({s.t, k, config.output.radius_large, el.back()});
        }
        const double E = total_energy(s);
        rep.times.push_back(s.t);
        rep.lambda_series.push_back(lam);
        rep.center_series.push_back(cen);
        rep.total_energy.push_back(E);
        rep.final_energy_small = es.front();
        if (series) {
            std::vector<double> row{s.t};
            row.insert(row.end(), lam.begin(), lam.end());
            row.insert(row.end(), es.begin(), es.end());
            row.insert(row.end(), el.begin(), el.end());
            row.push_back(E);
            series->row(row);
        }
        if (!out.empty() && config.output.snapshot_every > 0 && sample % config.output.snapshot_every == 0) {
            char name[32];
            std::snprintf(name, sizeof name, "field_%04ld.csv", sample / config.output.snapshot_every);
            write_snapshot(s, out / name);
        }
        ++sample;
        return std::any_of(lam.begin(), lam.end(), [&](double l) { return l < lmin; });
    };

    try {
        bool done = record();
        rep.stop_reason = done ? "lambda_min" : "";
        while (!done) {
            if (s.t + 0.5 * dt >= config.stop.max_time) {
                rep.stop_reason = "max_time";
                break;
            }
            if (config.stop.max_steps > 0 && s.steps >= config.stop.max_steps) {
                rep.stop_reason = "max_steps";
                break;
            }
            step(s, dt, opt);
            if (s.steps % config.output.cadence == 0) {
                done = record();
                if (done) rep.stop_reason = "lambda_min";
            }
        }
    } catch (const LostBubble&) {
        rep.stop_reason = "lost_bubble";
    }
    rep.steps = s.steps;
    rep.t_end = s.t;
    rep.blowup_detected = rep.stop_reason == "lambda_min";

    // monotone decrease of the first bubble after the transient
    const std::size_t n = rep.times.size();
    const std::size_t s0 = std::size_t(std::floor(config.output.transient * double(n)));
    rep.monotone_after_transient = n > s0 + 1;
    for (std::size_t k = s0 + 1; k < n; ++k)
        if (!(rep.lambda_series[k][0] < rep.lambda_series[k - 1][0])) rep.monotone_after_transient = false;

    for (std::size_t k = 1; k < n; ++k) {
        const double allow = 0.01 * std::abs(rep.total_energy[k - 1]) * (rep.times[k] - rep.times[k - 1]);
        if (rep.total_energy[k] > rep.total_energy[k - 1] + allow + 1e-12) ++rep.energy_violations;
    }
    rep.energy_monotone = rep.energy_violations == 0;

    std::vector<double> lam0;
    for (const auto& l : rep.lambda_series) lam0.push_back(l[0]);
    rep.fit = fit_rate(rep.times, lam0, config.output.transient);
    rep.T_hat = rep.fit.T_hat;
    rep.kappa_hat = rep.fit.kappa_hat;

    if (!out.empty()) write_file(out / "report.json", rep.to_json().dump(2) + "\n");
    return rep;
}

// ---------------------------------------------------------------- inner / outer split

double tau_lambda(const ModulationPath& path, double t, double tau0)
{
    if (t <= 0.0) return tau0;
    const double T = path.T();
    const auto& gr = gauss_rule(10);
    KahanSum acc;
    auto add_panel = [&](double a, double b, auto&& s_of) {
        const double m = 0.5 * (a + b), r = 0.5 * (b - a);
        for (std::size_t k = 0; k < gr.nodes.size(); ++k) {
            const double l = path.lambda(s_of(m + r * gr.nodes[k]));
            acc.add(r * gr.weights[k] / (l * l));
        }
    };
    if (t < T) {
        // geometric panels in T - s resolve the growth of 1/lambda^2 near T
        const auto knots = log_panels(T - t, T, 0.25);
        for (std::size_t k = 0; k + 1 < knots.size(); ++k)
            add_panel(knots[k], knots[k + 1], [T](double u) { return T - u; });
    } else {
        const int n = std::max(1, int(std::ceil(t / (0.01 * T))));
        for (int k = 0; k < n; ++k) add_panel(t * k / n, t * (k + 1) / n, [](double s) { return s; });
    }
    return tau0 + acc.sum + acc.comp;
}

DiagnosticsSummary inner_outer_diagnostics(const FlowState& s, const ModulationPath& path, const DiagnosticsOptions& o)
{
    const auto& g = s.grid;
    const double lam = path.lambda(s.t), xi = path.xi(s.t);
    const double beta = 0.25 + o.sigma;
    const double R = std::pow(lam, -beta);
    const double T = path.T();
    double inner = 0.0, outer = 0.0;
    const std::size_t nx = g.nx, ny = g.ny;
    const double h = g.h;

    auto fold = [&](double x, double y, double res_scaled, double res) {
        const double r = std::hypot(x - xi, y);
        const double rho = r / lam;
        if (rho <= 2.0 * R) inner = std::max(inner, std::pow(1.0 + rho, o.a) * res_scaled);
        const double eta = eta0(rho / R);
        const double w1 = r < 2.0 * R * lam ? std::pow(lam, o.theta - 2.0) * std::pow(R, -o.a) : 0.0;
        const double w2 = std::pow(T, -o.sigma0) * (1.0 - eta) * lam / (r * r + lam * lam);
        outer = std::max(outer, (1.0 - eta) * res / (1.0 + w1 + w2 + 1.0));
    };
    for (std::size_t j = 1; j + 1 < ny; ++j)
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            const std::size_t c = g.index(i, j);
            const Vec2 lap = (s.u[c - 1] + s.u[c + 1] + s.u[c - nx] + s.u[c + nx] - s.u[c] * 4.0) * (1.0 / (h * h));
            fold(g.x(i), g.y(j), lam * lam * norm(lap), norm(lap));
        }
    for (std::size_t i = 1; i + 1 < nx; ++i) {
        const Vec2 u0 = s.at(i, 0);
        const Vec2 dy = (u0 * -3.0 + s.at(i, 1) * 4.0 - s.at(i, 2)) * (0.5 / h);
        const double tang = std::abs(dot(dy, perp(u0)));
        fold(g.x(i), 0.0, lam * tang, tang);
    }
    return {s.t, lam, xi, R, tau_lambda(path, s.t, o.tau0), inner, outer};
}

}  // namespace hmf
