#include "hmf/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <set>

#include <CLI11.hpp>
#include <omp.h>

#include "hmf/ansatz.hpp"
#include "hmf/errors.hpp"
#include "hmf/flowsim.hpp"
#include "hmf/io.hpp"
#include "hmf/modulation.hpp"
#include "hmf/numerics.hpp"
#include "hmf/profiles.hpp"

namespace hmf::cli {

using nlohmann::json;
namespace fs = std::filesystem;

json RunManifest::to_json() const
{
    return {{"command", command},       {"config_digest", config_digest}, {"tool_version", tool_version},
            {"wall_seconds", wall_seconds}, {"steps", steps},             {"files", files}};
}

void RunManifest::write(const fs::path& dir) const { write_file(dir / "manifest.json", to_json().dump(2) + "\n"); }

std::string config_digest(const json& canonical) { return hex64(fnv1a64(canonical.dump())); }

namespace {

json load_json(const std::string& path)
{
    if (path.empty()) return json::object();
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(path + ": top level must be an object");
    return j;
}

void only_keys(const json& j, std::initializer_list<const char*> keys)
{
    for (const auto& [k, v] : j.items())
        if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
            throw ConfigError("unknown config key '" + k + "'");
}

template <class T>
void take(const json& j, const char* key, T& v)
{
    if (!j.contains(key)) return;
    try {
        v = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

std::vector<KVariant> variants(const std::string& s)
{
    if (s == "both") return {KVariant::kzz, KVariant::ksq};
    try {
        return {parse_k_variant(s)};
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

void require(bool ok, const std::string& what)
{
    if (!ok) throw ConfigError(what);
}

std::string tag(double v)
{
    std::string s = fmt(v);
    std::replace(s.begin(), s.end(), '+', 'p');
    return s;
}

// ---------------------------------------------------------------- profile

struct ProfileOptions {
    int degree = 1;
    double range = 50.0;
    double step = 0.1;
    double energy_radius = 100.0;
    double energy_h = 0.05;
    double spacing = 3.0;  // distance between bubble centres for degree > 1

    void merge(const json& j)
    {
        only_keys(j, {"degree", "range", "step", "energy_radius", "energy_h", "spacing"});
        take(j, "degree", degree);
        take(j, "range", range);
        take(j, "step", step);
        take(j, "energy_radius", energy_radius);
        take(j, "energy_h", energy_h);
        take(j, "spacing", spacing);
    }
    void validate() const
    {
        require(degree >= 1, "degree must be >= 1");
        require(range > 0.0 && step > 0.0 && step <= range, "need 0 < step <= range");
        require(energy_radius > 0.0 && energy_h > 0.0 && energy_h < energy_radius, "need 0 < energy_h < energy_radius");
        require(spacing > 0.0, "spacing must be positive");
    }
    json to_json() const
    {
        return {{"degree", degree},           {"range", range},       {"step", step},
                {"energy_radius", energy_radius}, {"energy_h", energy_h}, {"spacing", spacing}};
    }
};

MoebiusProfile profile_of_degree(int d, double spacing)
{
    MoebiusProfile m{0.0, {}, {}, false};
    for (int k = 0; k < d; ++k) {
        m.scales.push_back(1.0);
        m.centers.push_back((k - 0.5 * (d - 1)) * spacing);
    }
    return m;
}

const char* kPlotProfile = R"(import csv, sys
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open(sys.argv[1] if len(sys.argv) > 1 else "profile.csv")))
x = [float(r["x"]) for r in rows]
fig, ax = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
for k in ("omega_1", "omega_2", "moebius_1", "moebius_2"):
    ax[0].plot(x, [float(r[k]) for r in rows], label=k)
for k in ("Z1_1", "Z1_2", "Z2_1", "Z2_2", "Z3_1", "Z3_2"):
    ax[1].plot(x, [float(r[k]) for r in rows], label=k)
for a in ax:
    a.legend(fontsize=7)
ax[1].set_xlabel("x")
fig.savefig("profile.png", dpi=120)
)";

long cmd_profile(const ProfileOptions& o, const fs::path& dir, std::vector<std::string>& files, std::ostream& out)
{
    const MoebiusProfile m = profile_of_degree(o.degree, o.spacing);
    m.validate();

    const long n = std::lround(2.0 * o.range / o.step) + 1;
    {
        CsvWriter w(dir / "profile.csv", {"x", "omega_1", "omega_2", "Z1_1", "Z1_2", "Z2_1", "Z2_2", "Z3_1", "Z3_2",
                                          "moebius_1", "moebius_2"});
        for (long k = 0; k < n; ++k) {
            const double x = k + 1 == n ? o.range : -o.range + double(k) * o.step;
            const Vec2 w0 = omega(x), z1 = eval_Z(1, x), z2 = eval_Z(2, x), z3 = eval_Z(3, x), mb = eval_moebius(m, x);
            w.row({x, w0.x, w0.y, z1.x, z1.y, z2.x, z2.y, z3.x, z3.y, mb.x, mb.y});
        }
    }
    files.push_back("profile.csv");

    const HalfDiskIntegral e = moebius_energy(m, o.energy_radius, o.energy_h);
    const double target = std::numbers::pi * o.degree;
    const json rep = {
        {"degree", o.degree},
        {"radius", o.energy_radius},
        {"h", o.energy_h},
        {"energy", e.value},
        {"tail", e.tail},
        {"tail_bound", e.tail_bound},
        {"corrected", e.corrected()},
        {"target", target},
        {"rel_error", std::abs(e.value - target) / target},
        {"rel_error_corrected", std::abs(e.corrected() - target) / target},
        {"within_tail_bound", std::abs(e.value - target) <= e.tail_bound},
    };
    write_file(dir / "energy.json", rep.dump(2) + "\n");
    files.push_back("energy.json");
    write_file(dir / "plot_profile.py", kPlotProfile);
    files.push_back("plot_profile.py");

    out << "energy " << fmt(e.value) << " corrected " << fmt(e.corrected()) << " tail_bound " << fmt(e.tail_bound)
        << " target " << fmt(target) << "\n";
    return 0;
}

// ---------------------------------------------------------------- gamma

struct GammaOptions {
    std::string k_variant = "kzz";
    double tau_lo = 1e-12;
    double tau_hi = 1e8;
    int per_decade = 40;
    double fit_lo = 10.0;  // window for the tau Gamma0 slope
    double fit_hi = 1e4;

    void merge(const json& j)
    {
        only_keys(j, {"k_variant", "tau_lo", "tau_hi", "per_decade", "fit_lo", "fit_hi"});
        take(j, "k_variant", k_variant);
        take(j, "tau_lo", tau_lo);
        take(j, "tau_hi", tau_hi);
        take(j, "per_decade", per_decade);
        take(j, "fit_lo", fit_lo);
        take(j, "fit_hi", fit_hi);
    }
    void validate() const
    {
        variants(k_variant);
        require(tau_lo > 0.0 && tau_hi > tau_lo, "need 0 < tau_lo < tau_hi");
        require(per_decade >= 1, "per_decade must be >= 1");
        require(fit_lo > 0.0 && fit_hi > fit_lo, "need 0 < fit_lo < fit_hi");
    }
    json to_json() const
    {
        return {{"k_variant", k_variant}, {"tau_lo", tau_lo}, {"tau_hi", tau_hi},
                {"per_decade", per_decade}, {"fit_lo", fit_lo}, {"fit_hi", fit_hi}};
    }
};

const char* kPlotGamma = R"(import csv, glob
import matplotlib.pyplot as plt

fig, ax = plt.subplots(1, 2, figsize=(10, 4))
for f in sorted(glob.glob("gamma_*.csv")):
    rows = [r for r in csv.DictReader(open(f)) if float(r["tau"]) > 0]
    tau = [float(r["tau"]) for r in rows]
    ax[0].semilogx(tau, [float(r["gamma0"]) for r in rows], label=f)
    ax[1].semilogx(tau, [float(r["tau_gamma0"]) for r in rows], label=f)
ax[0].set_ylabel("Gamma0")
ax[1].set_ylabel("tau Gamma0")
for a in ax:
    a.set_xlabel("tau")
    a.legend(fontsize=7)
fig.savefig("gamma.png", dpi=120)
)";

long cmd_gamma(const GammaOptions& o, const fs::path& dir, std::vector<std::string>& files, std::ostream& out)
{
    json rep = {{"gamma_b0", gamma_b(0.0)}, {"gamma_b0_error", std::abs(gamma_b(0.0) - std::numbers::pi / 2)}};
    json vs = json::object();
    for (KVariant v : variants(o.k_variant)) {
        const GammaTable tab = GammaTable::build(v, o.tau_lo, o.tau_hi, o.per_decade);
        const std::string name = std::string("gamma_") + to_string(v) + ".csv";
        std::vector<double> fx, fy;
        {
            CsvWriter w(dir / name, {"tau", "gamma", "gamma_b", "gamma0", "tau_gamma0"});
            for (const auto& r : tab.rows()) {
                w.row({r.tau, r.gamma, r.gamma_b, r.gamma0, r.tau * r.gamma0});
                if (r.tau >= o.fit_lo && r.tau <= o.fit_hi) {
                    fx.push_back(r.tau);
                    fy.push_back(r.tau * r.gamma0);
                }
            }
        }
        files.push_back(name);
        const double c = tab.c();
        json e = {{"c", c}, {"sign", c > 0 ? 1 : c < 0 ? -1 : 0}, {"tail_coefficient", tab.tail_coefficient()}};
        if (fx.size() >= 2) {
            double sup = 0.0;
            for (double y : fy) sup = std::max(sup, std::abs(y));
            const double slope = linear_fit(fx, fy).slope;
            e["tau_gamma0_slope"] = slope;
            e["tau_gamma0_sup"] = sup;
            e["tau_gamma0_bounded"] = !(slope > 0.0);
        }
        vs[to_string(v)] = e;
        out << "c[" << to_string(v) << "] = " << fmt(c) << "\n";
    }
    rep["variants"] = vs;
    write_file(dir / "gamma.json", rep.dump(2) + "\n");
    files.push_back("gamma.json");
    write_file(dir / "plot_gamma.py", kPlotGamma);
    files.push_back("plot_gamma.py");
    return 0;
}

// ---------------------------------------------------------------- modulate

struct ModulateOptions {
    std::string k_variant = "kzz";
    double delta = 0.1;  // b2 = -delta
    std::vector<double> horizons{1e-2, 1e-3, 1e-4};
    int points = 40;
    double min_gap = 1e-8;
    int per_decade = 40;

    void merge(const json& j)
    {
        only_keys(j, {"k_variant", "delta", "horizons", "points", "min_gap", "per_decade"});
        take(j, "k_variant", k_variant);
        take(j, "delta", delta);
        take(j, "horizons", horizons);
        take(j, "points", points);
        take(j, "min_gap", min_gap);
        take(j, "per_decade", per_decade);
    }
    void validate() const
    {
        variants(k_variant);
        require(delta > 0.0, "delta must be positive");
        require(!horizons.empty(), "horizons must be non-empty");
        for (double T : horizons) require(T > 0.0 && T < std::exp(-1.0), "horizons must lie in (0, 1/e)");
        require(points >= 2 && per_decade >= 1, "points >= 2 and per_decade >= 1");
        require(min_gap > 0.0 && min_gap < 1.0, "min_gap must lie in (0, 1)");
    }
    json to_json() const
    {
        return {{"k_variant", k_variant}, {"delta", delta},     {"horizons", horizons},
                {"points", points},       {"min_gap", min_gap}, {"per_decade", per_decade}};
    }
};

const char* kPlotModulate = R"(import csv, glob
import matplotlib.pyplot as plt

fig, ax = plt.subplots(1, 3, figsize=(14, 4))
for f in sorted(glob.glob("path_*.csv")):
    rows = list(csv.DictReader(open(f)))
    T = max(float(r["t"]) for r in rows)
    ax[0].loglog([T - float(r["t"]) for r in rows if float(r["t"]) < T],
                 [float(r["lambda"]) for r in rows if float(r["t"]) < T], label=f)
for f in sorted(glob.glob("balance_*.csv")):
    rows = list(csv.DictReader(open(f)))
    u = [float(r["T_minus_t"]) for r in rows]
    ax[1].semilogx(u, [float(r["A"]) for r in rows], label=f)
    ax[2].semilogx(u, [float(r["B"]) for r in rows], label=f)
ax[0].set_ylabel("lambda")
ax[1].set_ylabel("A")
ax[2].set_ylabel("B")
for a in ax:
    a.set_xlabel("T - t")
    a.legend(fontsize=6)
fig.savefig("modulate.png", dpi=120)
)";

long cmd_modulate(const ModulateOptions& o, const fs::path& dir, std::vector<std::string>& files, std::ostream& out)
{
    const double b2 = -o.delta;
    json vs = json::object();
    for (KVariant v : variants(o.k_variant)) {
        const GammaTable tab = GammaTable::build(v);
        const double c = tab.c();
        const double kappa = kappa0(c, b2);
        out << "kappa0[" << to_string(v) << "] = -2 b2 / c = " << fmt(kappa) << "  (c = " << fmt(c)
            << ", b2 = " << fmt(b2) << ")\n";

        json hs = json::array();
        std::vector<double> supA, lx, ratio;
        for (double T : o.horizons) {
            const ModulationPath path = lambda0_path(T, kappa, 0.0, PathSampling{o.per_decade, 1e-13});
            const std::string stem = std::string(to_string(v)) + "_T" + tag(T) + ".csv";
            {
                CsvWriter w(dir / ("path_" + stem), {"t", "lambda", "lambda_dot"});
                for (double t : path.times()) w.row({t, path.lambda(t), path.lambda_dot(t)});
            }
            files.push_back("path_" + stem);

            const auto sw = balance_sweep(path, b2, tab, o.points, o.min_gap);
            const double lT = std::abs(std::log(T));
            const double scale = lT / (kappa * std::log(lT));
            double sa = 0.0, sb = 0.0;
            {
                CsvWriter w(dir / ("balance_" + stem), {"t", "T_minus_t", "lambda", "A", "B", "B_ratio"});
                for (const auto& s : sw) {
                    const double r = std::abs(s.B - c * kappa) * scale;
                    sa = std::max(sa, std::abs(s.A));
                    sb = std::max(sb, r);
                    w.row({s.t, T - s.t, s.lambda, s.A, s.B, r});
                }
            }
            files.push_back("balance_" + stem);
            supA.push_back(sa);
            lx.push_back(lT);
            ratio.push_back(sb);
            hs.push_back({{"T", T}, {"lambda_at_T", path.lambda(T)}, {"sup_A", sa}, {"B_ratio_max", sb},
                          {"B_end", sw.back().B}});
        }
        bool decreasing = true;
        for (std::size_t k = 1; k < supA.size(); ++k) decreasing = decreasing && supA[k] < supA[k - 1];
        json e = {{"c", c}, {"b2", b2}, {"kappa0", kappa}, {"c_kappa0", c * kappa}, {"horizons", hs},
                  {"A_decreasing", decreasing}};
        if (ratio.size() >= 2) {
            const double slope = linear_fit(lx, ratio).slope;
            e["B_ratio_slope"] = slope;
            e["B_ratio_bounded"] = !(slope > 0.0);
        }
        vs[to_string(v)] = e;
    }
    write_file(dir / "modulate.json", json{{"variants", vs}}.dump(2) + "\n");
    files.push_back("modulate.json");
    write_file(dir / "plot_modulate.py", kPlotModulate);
    files.push_back("plot_modulate.py");
    return 0;
}

// ---------------------------------------------------------------- residual

struct ResidualOptions {
    double T = 0.05;
    double kappa = 0.4;
    double q = 0.0;
    double t_frac = 0.5;  // grids are taken at t = t_frac T
    int nx = 41;
    int ny = 20;
    double extent = 4.0;  // grid half width in units of lambda(t)
    int probes = 100;
    std::uint64_t seed = 1;
    double tolerance = 1e-3;

    void merge(const json& j)
    {
        only_keys(j, {"T", "kappa", "q", "t_frac", "nx", "ny", "extent", "probes", "seed", "tolerance"});
        take(j, "T", T);
        take(j, "kappa", kappa);
        take(j, "q", q);
        take(j, "t_frac", t_frac);
        take(j, "nx", nx);
        take(j, "ny", ny);
        take(j, "extent", extent);
        take(j, "probes", probes);
        take(j, "seed", seed);
        take(j, "tolerance", tolerance);
    }
    void validate() const
    {
        require(T > 0.0 && T < std::exp(-1.0), "T must lie in (0, 1/e)");
        require(kappa > 0.0, "kappa must be positive");
        require(t_frac > -1.0 && t_frac < 1.0, "t_frac must lie in (-1, 1)");
        require(nx >= 3 && ny >= 1 && extent > 0.0, "grid too small");
        require(probes >= 1 && tolerance > 0.0, "probes >= 1 and tolerance > 0");
    }
    json to_json() const
    {
        return {{"T", T},       {"kappa", kappa}, {"q", q},           {"t_frac", t_frac},   {"nx", nx},
                {"ny", ny},     {"extent", extent}, {"probes", probes}, {"seed", seed}, {"tolerance", tolerance}};
    }
};

const char* kPlotResidual = R"(import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("residual_e1.csv")))
x = [float(r["x"]) for r in rows]
y = [float(r["y"]) for r in rows]
fig, ax = plt.subplots(1, 3, figsize=(14, 4))
for k, name in enumerate(("e1", "e2")):
    s = ax[k].scatter(x, y, c=[float(r[name]) for r in rows], s=6)
    fig.colorbar(s, ax=ax[k])
    ax[k].set_title("E1 component " + name[-1])
b = list(csv.DictReader(open("residual_e2.csv")))
ax[2].plot([float(r["x"]) for r in b], [float(r["e1"]) for r in b], label="E2 1")
ax[2].plot([float(r["x"]) for r in b], [float(r["e2"]) for r in b], label="E2 2")
ax[2].legend()
fig.savefig("residual.png", dpi=120)
)";

long cmd_residual(const ResidualOptions& o, const fs::path& dir, std::vector<std::string>& files, std::ostream& out,
                  bool& failed)
{
    const ModulationPath path = lambda0_path(o.T, o.kappa, o.q);
    const BackgroundField bg = BackgroundField::zero();
    const double t = o.t_frac * o.T;
    const double lam = path.lambda(t), xi = path.xi(t);
    const ModulationPath frozen = ModulationPath::constant(o.T, lam, xi);

    const std::size_t nx = std::size_t(o.nx), ny = std::size_t(o.ny);
    const double a = o.extent * lam;
    std::vector<double> off(nx), ys(ny);
    for (std::size_t i = 0; i < nx; ++i) off[i] = a * (2.0 * double(i) / double(nx - 1) - 1.0);
    for (std::size_t i = 0; i < nx / 2; ++i) off[nx - 1 - i] = -off[i];
    if (nx % 2) off[nx / 2] = 0.0;
    for (std::size_t j = 0; j < ny; ++j) ys[j] = a * double(j + 1) / double(ny);

    std::vector<Vec2> e1(nx * ny), p0(nx * ny);
#pragma omp parallel for collapse(2)
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            e1[j * nx + i] = inner_error(path, bg, xi + off[i], ys[j], t);
            p0[j * nx + i] = inner_error(frozen, bg, xi + off[i], ys[j], t);
        }
    const std::size_t nb = 4 * (nx - 1) + 1;
    std::vector<double> boff(nb);
    for (std::size_t i = 0; i < nb; ++i) boff[i] = a * (2.0 * double(i) / double(nb - 1) - 1.0);
    for (std::size_t i = 0; i < nb / 2; ++i) boff[nb - 1 - i] = -boff[i];
    boff[nb / 2] = 0.0;
    std::vector<Vec2> e2(nb);
    for (std::size_t i = 0; i < nb; ++i) e2[i] = boundary_error(path, bg, xi + boff[i], t);

    double e1_sup = 0.0, p0_sup = 0.0, e2_sup = 0.0, e1_asym = 0.0, e2_asym = 0.0;
    {
        CsvWriter w(dir / "residual_e1.csv", {"x", "y", "t", "e1", "e2", "p_zero_1", "p_zero_2"});
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i < nx; ++i) {
                const Vec2 e = e1[j * nx + i], z = p0[j * nx + i], m = e1[j * nx + nx - 1 - i];
                w.row({xi + off[i], ys[j], t, e.x, e.y, z.x, z.y});
                e1_sup = std::max(e1_sup, norm(e));
                p0_sup = std::max(p0_sup, norm(z));
                // first component odd, second even about the centre
                e1_asym = std::max(e1_asym, norm(Vec2{e.x + m.x, e.y - m.y}));
            }
    }
    files.push_back("residual_e1.csv");
    {
        CsvWriter w(dir / "residual_e2.csv", {"x", "t", "e1", "e2"});
        for (std::size_t i = 0; i < nb; ++i) {
            const Vec2 e = e2[i], m = e2[nb - 1 - i];
            w.row({xi + boff[i], t, e.x, e.y});
            e2_sup = std::max(e2_sup, norm(e));
            e2_asym = std::max(e2_asym, norm(Vec2{e.x + m.x, e.y - m.y}));
        }
    }
    files.push_back("residual_e2.csv");

    // analytic vs finite-difference inner error at random probes
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    struct Probe {
        double x, y, t;
    };
    std::vector<Probe> pr(std::size_t(o.probes));
    for (auto& p : pr) {
        p.t = -0.5 * o.T + 1.3 * o.T * U(rng);
        const double r = path.lambda(p.t) * std::pow(10.0, -1.0 + 3.0 * U(rng));
        const double th = std::numbers::pi * U(rng);
        p.x = path.xi(p.t) + r * std::cos(th);
        p.y = r * std::sin(th);
    }
    std::vector<Vec2> an(pr.size()), fd(pr.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t k = 0; k < pr.size(); ++k) {
        an[k] = inner_error(path, bg, pr[k].x, pr[k].y, pr[k].t);
        fd[k] = inner_error_fd(path, pr[k].x, pr[k].y, pr[k].t);
    }
    double worst = 0.0;
    {
        CsvWriter w(dir / "residual_probes.csv", {"x", "y", "t", "analytic_1", "analytic_2", "fd_1", "fd_2", "rel"});
        for (std::size_t k = 0; k < pr.size(); ++k) {
            const double rel = norm(an[k] - fd[k]) / norm(fd[k]);
            worst = std::max(worst, rel);
            w.row({pr[k].x, pr[k].y, pr[k].t, an[k].x, an[k].y, fd[k].x, fd[k].y, rel});
        }
    }
    files.push_back("residual_probes.csv");

    const double sym_tol = 1e-9;
    const json rep = {
        {"t", t},
        {"lambda", lam},
        {"xi", xi},
        {"e1_sup", e1_sup},
        {"e2_sup", e2_sup},
        {"p_zero_sup", p0_sup},
        {"p_zero_identically_zero", p0_sup == 0.0},
        {"e1_symmetry_defect", e1_asym},
        {"e2_symmetry_defect", e2_asym},
        {"e1_symmetric", e1_asym <= sym_tol * std::max(1.0, e1_sup)},
        {"e2_symmetric", e2_asym <= sym_tol * std::max(1.0, e2_sup)},
        {"fd_probes", o.probes},
        {"fd_max_rel_error", worst},
        {"fd_tolerance", o.tolerance},
        {"fd_within_tolerance", worst <= o.tolerance},
    };
    write_file(dir / "residual.json", rep.dump(2) + "\n");
    files.push_back("residual.json");
    write_file(dir / "plot_residual.py", kPlotResidual);
    files.push_back("plot_residual.py");

    out << "fd max relative error " << fmt(worst) << " over " << o.probes << " probes\n";
    failed = !(worst <= o.tolerance);
    return 0;
}

// ---------------------------------------------------------------- simulate

const char* kPlotSimulate = R"(import csv, json
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("series.csv")))
rep = json.load(open("report.json"))
t = [float(r["t"]) for r in rows]
fig, ax = plt.subplots(1, 3, figsize=(14, 4))
for k in rows[0]:
    if k.startswith("lambda_est"):
        ax[0].semilogy(t, [float(r[k]) for r in rows], label=k)
    elif k.startswith("energy"):
        ax[1].plot(t, [float(r[k]) for r in rows], label=k)
ax[0].axhline(rep["lambda_min"], ls=":", c="k")
ax[1].plot(t, [float(r["total_energy"]) for r in rows], label="total")
if rep["fit"]["ok"]:
    T = rep["T_hat"]
    import math
    u = [T - s for s in t if s < T]
    lam = [float(r["lambda_est_0"]) for r, s in zip(rows, t) if s < T]
    ax[2].loglog(u, [l * math.log(v) ** 2 / v for l, v in zip(lam, u)])
    ax[2].set_xlabel("T_hat - t")
    ax[2].set_ylabel("compensator")
for a in ax[:2]:
    a.set_xlabel("t")
    a.legend(fontsize=7)
fig.savefig("simulate.png", dpi=120)
)";

long cmd_simulate(const SimConfig& config, const fs::path& dir, std::vector<std::string>& files, std::ostream& out)
{
    const BlowupReport rep = run(config, dir);
    files.push_back("series.csv");
    files.push_back("report.json");
    std::vector<std::string> snaps;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string n = e.path().filename().string();
        if (n.rfind("field_", 0) == 0) snaps.push_back(n);
    }
    std::sort(snaps.begin(), snaps.end());
    files.insert(files.end(), snaps.begin(), snaps.end());
    write_file(dir / "plot_simulate.py", kPlotSimulate);
    files.push_back("plot_simulate.py");

    out << "stop " << rep.stop_reason << " steps " << rep.steps << " t " << fmt(rep.t_end) << " blowup "
        << (rep.blowup_detected ? "true" : "false") << " quantum_ratio " << fmt(rep.quantum_ratio()) << "\n";
    return rep.steps;
}

int exit_code(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
        dynamic_cast<const UnresolvedBubble*>(&e) || dynamic_cast<const OverlappingBubbles*>(&e) ||
        dynamic_cast<const SignMismatch*>(&e) || dynamic_cast<const DegenerateInput*>(&e))
        return kUsage;
    if (dynamic_cast<const DivergenceError*>(&e) || dynamic_cast<const CflError*>(&e) ||
        dynamic_cast<const LostBubble*>(&e))
        return kDivergence;
    if (dynamic_cast<const Error*>(&e)) return kTolerance;
    return 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Half-harmonic map heat flow laboratory", "hmflab"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir = "out";
    int threads = 0;
    app.add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker cap, 0 for the runtime default")->check(CLI::NonNegativeNumber);

    ProfileOptions po;
    auto* profile = app.add_subcommand("profile", "profiles, kernel modes and energy");
    auto* p_degree = profile->add_option("--degree", po.degree);
    auto* p_range = profile->add_option("--range", po.range);
    auto* p_step = profile->add_option("--step", po.step);

    GammaOptions go;
    const auto kv_check = CLI::IsMember({"kzz", "ksq", "both"});
    auto* gamma_cmd = app.add_subcommand("gamma", "Gamma table and c");
    auto* g_kv = gamma_cmd->add_option("--k-variant", go.k_variant)->check(kv_check);
    auto* g_per = gamma_cmd->add_option("--per-decade", go.per_decade);

    ModulateOptions mo;
    auto* modulate = app.add_subcommand("modulate", "lambda0 paths and balance residuals");
    auto* m_kv = modulate->add_option("--k-variant", mo.k_variant)->check(kv_check);
    auto* m_delta = modulate->add_option("--delta", mo.delta);
    auto* m_T = modulate->add_option("--T", mo.horizons, "horizons");

    ResidualOptions ro;
    auto* residual = app.add_subcommand("residual", "inner and boundary errors of the ansatz");
    auto* r_T = residual->add_option("--T", ro.T);
    auto* r_kappa = residual->add_option("--kappa", ro.kappa);
    auto* r_probes = residual->add_option("--probes", ro.probes);

    std::string boundary, sim_kv;
    SimConfig sim;
    auto* simulate = app.add_subcommand("simulate", "run the flow");
    auto* s_boundary = simulate->add_option("--boundary", boundary)->check(CLI::IsMember({"local", "nonlocal"}));
    auto* s_kv = simulate->add_option("--k-variant", sim_kv)->check(CLI::IsMember({"kzz", "ksq"}));

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    if (threads > 0) omp_set_num_threads(threads);

    try {
        const json file = load_json(config_path);
        const fs::path dir = out_dir;
        RunManifest man;
        json canonical;
        std::function<long(std::vector<std::string>&)> body;
        bool failed = false;

        if (profile->parsed()) {
            po.merge(file);
            // flags win over the file
            if (p_degree->count()) po.degree = p_degree->as<int>();
            if (p_range->count()) po.range = p_range->as<double>();
            if (p_step->count()) po.step = p_step->as<double>();
            po.validate();
            man.command = "profile";
            canonical = po.to_json();
            body = [&](auto& f) { return cmd_profile(po, dir, f, out); };
        } else if (gamma_cmd->parsed()) {
            const std::string kv = go.k_variant;
            const int per = go.per_decade;
            go.merge(file);
            if (g_kv->count()) go.k_variant = kv;
            if (g_per->count()) go.per_decade = per;
            go.validate();
            man.command = "gamma";
            canonical = go.to_json();
            body = [&](auto& f) { return cmd_gamma(go, dir, f, out); };
        } else if (modulate->parsed()) {
            const ModulateOptions flags = mo;
            mo.merge(file);
            if (m_kv->count()) mo.k_variant = flags.k_variant;
            if (m_delta->count()) mo.delta = flags.delta;
            if (m_T->count()) mo.horizons = flags.horizons;
            mo.validate();
            man.command = "modulate";
            canonical = mo.to_json();
            body = [&](auto& f) { return cmd_modulate(mo, dir, f, out); };
        } else if (residual->parsed()) {
            const ResidualOptions flags = ro;
            ro.merge(file);
            if (r_T->count()) ro.T = flags.T;
            if (r_kappa->count()) ro.kappa = flags.kappa;
            if (r_probes->count()) ro.probes = flags.probes;
            ro.validate();
            man.command = "residual";
            canonical = ro.to_json();
            body = [&](auto& f) { return cmd_residual(ro, dir, f, out, failed); };
        } else {
            sim = SimConfig::from_json(file);
            if (s_boundary->count()) sim.boundary_mode = parse_boundary_mode(boundary);
            if (s_kv->count()) sim.initial.k_variant = parse_k_variant(sim_kv);
            sim.validate();
            man.command = "simulate";
            canonical = sim.to_json();
            body = [&](auto& f) { return cmd_simulate(sim, dir, f, out); };
        }

        man.config_digest = config_digest(canonical);
        fs::create_directories(dir);
        write_file(dir / "config.json", canonical.dump(2) + "\n");
        man.files.push_back("config.json");
        const auto t0 = std::chrono::steady_clock::now();
        man.steps = body(man.files);
        man.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        man.write(dir);
        return failed ? kTolerance : kOk;
    } catch (const std::exception& e) {
        err << "hmflab: " << e.what() << "\n";
        return exit_code(e);
    }
}

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace hmf::cli
