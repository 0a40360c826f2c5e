#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cavity_bloch/fluctuations.hpp"

namespace cb {

enum class SnrMode { analytic, detector_shot, full_backaction };
std::string_view to_string(SnrMode m);

struct SnrResult {
    double omega = 0.0;
    double t_end = 0.0;
    double signal = 0.0;
    double variance = 0.0;
    double snr = 0.0;
    SnrMode mode = SnrMode::detector_shot;
};

// epsilon^2 R T / 2
double snr_analytic(double contrast, double rate, double t_end);

// Classical cavity field with detector shot noise:
//   signal = kappa int cos(w t) |alpha|^2, variance = kappa int cos^2(w t) |alpha|^2.
SnrResult snr_detector_shot(const MeanfieldTrajectory& traj, double omega, double t_end);

// Two-time data. The normally ordered photocount correlation for L > E is
//   kappa^2 l(L)^T G(L, E) w(E),  l = (alpha*, alpha, 0..),
//   w = alpha* C e_a + alpha (C e_a^dag - e_a).
// All origins share the propagator, so for each omega the trapezoid sum over
// origins E_i of cos(w E_i) G(L, E_i) w(E_i) is carried as one vector, and
//   correlation(T) = Re int_0^T dL int_0^L dE cos(w L) cos(w E) l^T G w
// is accumulated on the fluctuation grid. Origins sit on every `stride`-th
// fluctuation step, stride in {1, 2}; the pair gives the halving check.
//
// Optional coarse blocks on origins t_i (points_per_period per Bloch period), t_j >= t_i:
//   lam(i, j)  = cavity 2x2 block of <R(t_i) R^T(t_j)> = C(t_i) G(t_j, t_i)^T
//   g(i, j)    = cavity 2x2 block of G(t_j, t_i)
//   xi(i, j)   = <xi_b(t_i) da^dag(t_j)> = sqrt(kappa) G(t_j, t_i)_{a^dag a^dag}
struct CorrelationSeries {
    double omega = 0.0;
    int stride = 1;
    std::vector<double> values;  // on TwoTimeGrid::t
};

struct TwoTimeGrid {
    std::vector<double> coarse_times;
    long origin_stride = 0;  // fluctuation steps between coarse origins
    double kappa = 0.0;
    bool blocks_stored = false;
    std::vector<std::array<cplx, 4>> lam_blocks;  // P x P row-major, row-major 2x2, j >= i only
    std::vector<std::array<cplx, 4>> g_blocks;
    std::vector<cplx> xi_corr;
    std::vector<CorrelationSeries> correlation;

    // fine series on the fluctuation grid
    std::vector<double> t, photons, dn;

    [[nodiscard]] std::size_t size() const { return coarse_times.size(); }
    // Lambda(t_i, t_j) cavity block for any ordering (conjugation relation for j < i).
    [[nodiscard]] std::array<cplx, 4> lam(std::size_t i, std::size_t j) const;
    [[nodiscard]] cplx xi(std::size_t i, std::size_t j) const;  // j >= i
    // Kernel l^T G w at coarse L = t_j, E = t_i (j >= i) rebuilt from the stored blocks.
    [[nodiscard]] cplx kernel_from_blocks(std::size_t i, std::size_t j, cplx alpha_e, cplx alpha_l) const;
    [[nodiscard]] const CorrelationSeries* find(double omega, int stride) const;
};

struct TwoTimeOptions {
    int points_per_period = 64;   // coarse block origins
    double origin_spacing = 0.0;  // coarse spacing when force == 0; 0 = run length / 64
    bool store_blocks = true;
    std::vector<double> omegas;   // default: omega_B
    double memory_budget_bytes = 2.0e9;
    LinearRunOptions linear{};
    // replace fluctuations by zero (control); correlation and dn vanish
    bool fluctuations_off = false;
};

struct TwoTimeRun {
    TwoTimeGrid grid;
    LinearRun linear;
    std::vector<cplx> kernel_diag;  // equal-time kernel l^T w at each fluctuation sample
};

// Fluctuation run with the two-time data accumulated alongside. The trajectory
// must have spacing step/2.
TwoTimeRun two_time_grid(const SystemParams& p, const MeanfieldTrajectory& traj, const TwoTimeOptions& opt = {});

// Full backaction SNR at omega (one of the prepared frequencies) over
// [t_0, t_0 + t_end] with origins every `stride` fluctuation steps.
SnrResult snr_full(const TwoTimeGrid& grid, const MeanfieldTrajectory& traj, double omega, double t_end,
                   int stride = 1);

enum class ScanAxis { beta, depth, n_atoms };
std::optional<ScanAxis> parse_axis(std::string_view s);
std::string_view to_string(ScanAxis a);

struct SnrSettings {
    double periods = 2.0;        // integration time in Bloch periods
    double fixed_beta = 1.0;     // for depth and n_atoms scans
    double target_depth = 3.0;   // for beta and n_atoms scans
    int points_per_period = 64;  // the fluctuation step divides T_B / points_per_period
    double fine_step = 0.005;    // upper bound on the fluctuation step
    double meanfield_tol = 1e-10;
    double convergence_tol = 0.05;
};

struct SnrScanRow {
    double axis_value = 0.0;
    SystemParams params;
    SnrResult detector_shot;
    SnrResult full;
    double full_coarse = 0.0;  // SNR with half the origin density
    bool converged = false;
    double contrast = 0.0;
    bool failed = false;
    std::string error;
};

// Parameters for one scan point: beta sets U0 at fixed N; depth sets the
// calibration target at fixed beta; n_atoms sets N at fixed beta.
SystemParams scan_point_params(const SystemParams& base, ScanAxis axis, double value, const SnrSettings& s);

SnrScanRow snr_point(const SystemParams& calibrated, double axis_value, const SnrSettings& s);

std::vector<SnrScanRow> snr_scan(const SystemParams& base, ScanAxis axis, std::span<const double> values,
                                 const SnrSettings& s);

// Fluctuation step dividing both the Bloch period and the origin spacing.
double aligned_step(const SystemParams& p, double max_step, int points_per_period);

}  // namespace cb
