#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmf/modulation.hpp"
#include "hmf/nonlocal.hpp"
#include "hmf/path.hpp"
#include "hmf/vec2.hpp"

namespace hmf {

// Nodes x_i = -Lx + i h, y_j = j h with h = 2 Lx / (nx - 1) and Ly = (ny - 1) h.
struct HalfPlaneGrid {
    double Lx = 1.0;
    double Ly = 1.0;
    std::size_t nx = 0;
    std::size_t ny = 0;
    double h = 0.0;

    static HalfPlaneGrid make(double Lx, std::size_t nx, std::size_t ny);
    void validate() const;
    double x(std::size_t i) const { return -Lx + h * double(i); }
    double y(std::size_t j) const { return h * double(j); }
    std::size_t index(std::size_t i, std::size_t j) const { return j * nx + i; }
};

enum class BoundaryMode { local, nonlocal };
const char* to_string(BoundaryMode m);
BoundaryMode parse_boundary_mode(const std::string& s);

struct BubbleSpec {
    double lambda = 0.05;
    double q = 0.0;
};

// Initial datum U + Phi0 + delta Z~0 (+ noise), lifted to S^1 on y = 0.
// Z~0 = -(x - q0) (twist, 1) chi(|(x - q0, y)| / radius) around the first bubble.
struct InitialSpec {
    std::vector<BubbleSpec> bubbles{BubbleSpec{}};
    double delta = 0.1;
    double twist = 0.0;
    double radius = 0.0;  // 0 means no cutoff
    bool include_phi0 = true;
    KVariant k_variant = KVariant::kzz;
    double noise = 0.0;  // amplitude of a smooth random tangential perturbation
};

struct StopSpec {
    double max_time = 1.0;
    double lambda_min = 0.0;  // 0 means 2.5 h
    long max_steps = 0;       // 0 means unlimited
};

struct OutputSpec {
    long cadence = 100;     // steps between samples
    long snapshot_every = 0;  // samples between field dumps, 0 for none
    double radius_small = 0.1;
    double radius_large = 0.3;
    double transient = 0.2;  // leading fraction of the samples excluded from the monotonicity check
};

struct HistorySpec {
    double thin_ratio = 0.05;
    std::size_t keep_recent = 8;
};

struct SimConfig {
    HalfPlaneGrid grid = HalfPlaneGrid::make(1.0, 128, 64);
    double dt = 0.0;  // 0 means dt_factor h^2
    double dt_factor = 0.2;
    BoundaryMode boundary_mode = BoundaryMode::local;
    InitialSpec initial;
    StopSpec stop;
    OutputSpec output;
    HistorySpec history;
    // grid traces are resolved only to h, so the step-doubling check is looser than for closed forms
    QuadratureSpec quadrature{.tol = 1e-2};
    std::uint64_t seed = 0;

    double time_step() const { return dt > 0.0 ? dt : dt_factor * grid.h * grid.h; }
    double lambda_min() const { return stop.lambda_min > 0.0 ? stop.lambda_min : 2.5 * grid.h; }
    void validate() const;

    static SimConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct BubbleTrack {
    double center = 0.0;
    double lambda = 0.0;
};

struct FlowState {
    HalfPlaneGrid grid;
    std::vector<Vec2> u;  // row-major, row 0 is the boundary
    double t = 0.0;
    long steps = 0;
    TraceHistory history;
    std::vector<BubbleTrack> tracks;
    std::vector<Vec2> scratch;  // step workspace; shares the pinned edge values with u

    Vec2 at(std::size_t i, std::size_t j) const { return u[grid.index(i, j)]; }
    std::span<const Vec2> boundary() const { return {u.data(), grid.nx}; }
};

FlowState init_state(const SimConfig& config);
// Sample a given field; row 0 is normalized.
FlowState make_state(const HalfPlaneGrid& grid, const std::function<Vec2(double, double)>& field,
                     std::vector<BubbleTrack> tracks = {});

struct StepOptions {
    BoundaryMode mode = BoundaryMode::local;
    QuadratureSpec quadrature;
    HistorySpec history;
};

void step(FlowState& state, double dt, const StepOptions& options = {});
double boundary_norm_defect(const FlowState& state);

// 2 / max |d_x u(., 0)| near each tracked centre; updates nothing.
std::vector<BubbleTrack> lambda_estimate(const FlowState& state);

// int over the half ball of |grad u|^2 (no 1/2)
double local_energy(const FlowState& state, double center, double radius);
double total_energy(const FlowState& state);
double local_energy(const HalfPlaneGrid& grid, const std::function<Vec2(double, double)>& field, double center,
                    double radius);

// Least squares fit of lambda = kappa (T - t) / log^2(T - t) on the samples after the transient fraction.
struct RateFit {
    bool ok = false;
    double T_hat = 0.0;
    double kappa_hat = 0.0;
    std::size_t first = 0, last = 0;  // window [first, last] into the series
    double decades = 0.0;             // log10 of the span of T - t over the window
    double variation = 0.0;           // max/min - 1 of the compensator over the window
    double rms = 0.0;                 // relative residual
};
RateFit fit_rate(std::span<const double> t, std::span<const double> lambda, double transient = 0.0);

struct EnergySample {
    double t;
    std::size_t bubble;
    double radius, energy;
};

struct BlowupReport {
    BoundaryMode mode = BoundaryMode::local;
    std::string stop_reason;
    bool blowup_detected = false;
    bool monotone_after_transient = false;
    bool energy_monotone = true;
    long energy_violations = 0;
    long steps = 0;
    double t_end = 0.0;
    double dt = 0.0;
    double h = 0.0;
    double lambda_min = 0.0;
    double T_hat = 0.0;
    double kappa_hat = 0.0;
    RateFit fit;
    double background_energy_small = 0.0;
    double final_energy_small = 0.0;
    std::vector<double> times;
    std::vector<std::vector<double>> lambda_series;  // per sample, per bubble
    std::vector<std::vector<double>> center_series;
    std::vector<EnergySample> energy_series;
    std::vector<double> total_energy;

    // (final small-ball energy - background) / 2 pi
    double quantum_ratio() const;
    bool rate_shape_ok() const { return fit.ok && fit.decades >= 1.0 && fit.variation < 0.5; }
    nlohmann::json to_json() const;
};

// Runs to lambda_min or max_time. With a non-empty directory, writes series.csv,
// report.json and optional field_XXXX.csv snapshots.
BlowupReport run(const SimConfig& config, const std::filesystem::path& out = {});
void write_snapshot(const FlowState& state, const std::filesystem::path& file);

// Inner/outer split of the discrete residual around a fitted path.
struct DiagnosticsOptions {
    double a = 1.5;
    double sigma = 0.05;       // beta = 1/4 + sigma
    double theta = 0.1;
    double sigma0 = 0.1;
    double tau0 = 1.0;
};
struct DiagnosticsSummary {
    double t, lambda, xi, R, tau_lambda;
    double inner, outer;
};
DiagnosticsSummary inner_outer_diagnostics(const FlowState& state, const ModulationPath& path,
                                           const DiagnosticsOptions& o = {});
// tau0 + int_0^t ds / lambda(s)^2
double tau_lambda(const ModulationPath& path, double t, double tau0 = 1.0);

}  // namespace hmf
