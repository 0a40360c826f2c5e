#pragma once

#include <vector>

#include "cavity_bloch/meanfield.hpp"

namespace cb {

// Instantaneous eigenbasis of the meanfield Hamiltonian with the shot-noise
// couplings u_j = i sqrt(N) U0 <nu_j| P cos^2 |phi>.
struct OscillatorSet {
    VecR energies;  // E_j, ascending
    VecC couplings;
    double chemical_potential = 0.0;
    VecR shifted;  // E_j - mu
    MatR vectors;  // nu_j as real columns
    double q_eff = 0.0;
};

OscillatorSet oscillator_set(const SystemParams& p, const MeanfieldState& state);

// 2 kappa nbar / ((delta_eff + omega)^2 + kappa^2)
double shot_noise_spectrum(double omega, double delta_eff, double kappa, double nbar);

struct RateOptions {
    int modes = 8;                // excited bands j = 1..modes
    int points_per_period = 64;   // rate refresh grid
};

struct RateRun {
    std::vector<double> t;
    MatR dn_modes;  // rows: time, cols: mode j = 1..modes
    std::vector<double> total;
    // rates on each refresh interval (rows: interval)
    MatR energy, coupling2, gamma_up, gamma_down;
};

// Rate equations dN_j/dt = (G_u - G_d) N_j + G_u from N_j(0) = 0, with the
// rates frozen over each refresh interval and integrated exactly.
RateRun evolve_rates(const SystemParams& p, const MeanfieldTrajectory& traj, const RateOptions& opt = {});

struct AdiabaticityReport {
    VecR pair_values;  // |2 omega_B / (pi Delta) <nu_j|p|nu_{j+1}>|, j = 0..
    bool breakdown = false;
};

// Neglected non-adiabatic coupling between adjacent instantaneous levels.
AdiabaticityReport adiabaticity_diagnostic(const SystemParams& p, const MeanfieldState& state, int pairs = 8,
                                           double threshold = 0.1);

}  // namespace cb
