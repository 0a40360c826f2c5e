#pragma once

#include <span>
#include <vector>

#include "cavity_bloch/params.hpp"
#include "cavity_bloch/types.hpp"

namespace cb {

// Meanfield in the transformed frame. The plane-wave label is kept centred:
// once q0 + f t passes a zone boundary the coefficients are relabelled by one
// index, tracked in `zone_shift`, so q0 + f t = q_reduced + 2 zone_shift.
struct MeanfieldState {
    cplx alpha{};
    VecC coeffs;
    double q0 = 0.0;
    double t = 0.0;
    int zone_shift = 0;
};

// Momentum offset entering the Bloch Hamiltonian at time t (labelled basis).
double effective_quasimomentum(const SystemParams& p, double t, int zone_shift);
double effective_quasimomentum(const SystemParams& p, const MeanfieldState& s);
// q reduced into (-1, 1].
double reduce_to_zone(double q);

// Relabel coefficients from zone_shift `from` to `to` (index shift, edges dropped).
VecC relabel(const VecC& c, int from, int to);

// <cos^2 x>; warns and renormalises on non-normalised input.
double cos2_expectation(std::span<const cplx> coeffs);
double cos2_expectation(const VecC& coeffs);
// (1/2 + e^{2ix}/4 + e^{-2ix}/4) acting on the coefficient vector.
VecC apply_cos2(const VecC& coeffs);

MatR bloch_hamiltonian(double q_eff, double depth, int n_max);
// H c without forming the matrix.
VecC apply_bloch_hamiltonian(double q_eff, double depth, const VecC& c);

struct BlochBandSolution {
    double q = 0.0;
    double depth = 0.0;
    VecR energies;  // ascending
    MatR vectors;   // real columns, largest entry positive
};

BlochBandSolution band_solve(double q, double depth, int n_max);

struct SelfConsistentState {
    cplx alpha_ss{};
    BlochBandSolution band;
    double cos2 = 0.5;
    bool converged = false;
    int iterations = 0;

    [[nodiscard]] double photons() const { return std::norm(alpha_ss); }
    [[nodiscard]] VecC ground() const { return band.vectors.col(0).cast<cplx>(); }
};

// Ground-band <cos^2> at lattice depth s and quasimomentum q.
double ground_cos2(double q, double depth, int n_max);
// I - eta^2 / ((delta_c - N U0 g(I))^2 + kappa^2)
double fixed_point_residual(const SystemParams& p, double q, double photons);

// All self-consistent photon numbers at quasimomentum q, ascending.
std::vector<double> steady_state_roots(const SystemParams& p, double q);
int count_steady_states(const SystemParams& p, double q);
double lowest_root(const SystemParams& p, double q);
// Root nearest branch_seed (a photon number guess).
SelfConsistentState steady_state(const SystemParams& p, double q, double branch_seed);
// Lowest-photon branch.
SelfConsistentState steady_state(const SystemParams& p, double q);

struct PumpCalibration {
    double eta = 0.0;
    double q_at_min = 0.0;
    double min_depth = 0.0;
    bool bistable = false;  // lowest branch used where several roots exist
};

// Minimum over q of the steady-state depth, lowest branch.
struct DepthMinimum {
    double q = 0.0;
    double depth = 0.0;
    bool bistable = false;
};
DepthMinimum minimum_depth(const SystemParams& p, int q_points = 41);

PumpCalibration calibrate_pump(const SystemParams& p, double target_min_depth);

// Steady state at q0 as an initial condition.
MeanfieldState initial_state(const SystemParams& p);

struct MeanfieldTrajectory {
    SystemParams params;
    std::vector<double> grid;
    std::vector<MeanfieldState> states;
    std::vector<double> depth;
    double max_norm_drift = 0.0;
    double edge_loss = 0.0;  // norm discarded at the basis edge on relabelling
    long accepted_steps = 0;
    long rejected_steps = 0;

    [[nodiscard]] std::size_t size() const { return grid.size(); }
    [[nodiscard]] double dt() const { return grid.size() > 1 ? grid[1] - grid[0] : 0.0; }
};

struct EvolveOptions {
    double tol = 1e-9;
    double dt_out = 0.01;
    double max_step = 0.05;
};

MeanfieldTrajectory evolve(const SystemParams& p, const MeanfieldState& initial, double t_end,
                           const EvolveOptions& opt = {});

// Right-hand side in the co-rotating gauge; exposed for tests.
void meanfield_rhs(const SystemParams& p, double t, int zone_shift, const VecC& y, VecC& dy);

// (s_max - s_min) / (s_max + s_min) over the whole Bloch periods covered.
double contrast(const MeanfieldTrajectory& traj);

struct DepthSpectrum {
    VecR frequency;  // units of omega_B (or of 1/time when force == 0)
    VecR magnitude;  // unitary DFT magnitude
};
DepthSpectrum depth_spectrum(const MeanfieldTrajectory& traj);

}  // namespace cb
