#pragma once

#include <string_view>
#include <vector>

#include "cavity_bloch/fluctuations.hpp"

namespace cb {

enum class ModeKind { cavity_like, hybridized, marginal, zero_mode };
std::string_view to_string(ModeKind k);

// One eigenpair M r = (omega + i gamma) r with its biorthonormal left partner,
// (l, r) = l^dag r = 1. r is scaled so that |r^dag eta r| = 1 with
// eta = diag(1, -1, 1.., -1..) whenever that form is non-degenerate.
struct QuasiparticleMode {
    double omega = 0.0;
    double gamma = 0.0;
    VecC right;
    VecC left;
    ModeKind kind = ModeKind::hybridized;
    double cavity_weight = 0.0;  // |r_a|^2 + |r_a^dag|^2 for unit-norm r
    double meanfield_weight = 0.0;  // overlap with the zero-mode subspace
};

// Positive-omega modes first by ascending omega, then the partners.
std::vector<QuasiparticleMode> quasiparticle_modes(const FluctuationMatrix& m, const MeanfieldState& state);

struct ClassifyThresholds {
    double cavity_weight = 0.9;
    double cavity_gamma = 0.2;     // units of kappa
    double marginal_weight = 1e-6;
    double marginal_gamma = 1e-6;  // units of kappa
    double zero_tol = 1e-6;        // |omega| + |gamma|, units of omega_R
};

void classify(std::vector<QuasiparticleMode>& modes, double delta_eff, double kappa,
              const ClassifyThresholds& th = {});

double effective_detuning(const SystemParams& p, const MeanfieldState& state);

// Modes with omega > 0 that are neither cavity-like nor zero modes, ascending.
std::vector<const QuasiparticleMode*> atomic_branches(const std::vector<QuasiparticleMode>& modes);

struct TrackedSpectra {
    // labels[k][i]: persistent label of mode i at grid point k
    std::vector<std::vector<int>> labels;
    // (k, label) where the best overlap to k-1 fell below 0.5
    std::vector<std::pair<std::size_t, int>> crossings;
};
TrackedSpectra track_modes(const std::vector<std::vector<QuasiparticleMode>>& spectra);

// <rho_n^dag rho_n> with rho_n = (l_n, R), vacuum value subtracted.
VecR qp_occupations(const CovarianceMatrix& c, const MeanfieldState& state,
                    const std::vector<QuasiparticleMode>& modes);

// Instantaneous spectrum about the self-consistent steady state at q.
std::vector<QuasiparticleMode> steady_state_spectrum(const SystemParams& p, double q,
                                                     const ClassifyThresholds& th = {});

struct ResonanceInterval {
    double beta = 0.0;
    double eta = 0.0;
    double omega_min = 0.0;
    double omega_max = 0.0;
    double q_at_min = 0.0;
    double gamma_center = 0.0;  // gamma of the lowest branch at q = 0
    bool bistable = false;
};

// Envelope for parameters already calibrated.
ResonanceInterval resonance_interval(const SystemParams& calibrated, int q_points = 41);

// Envelope of the lowest quasiparticle frequency over q for each beta, with
// U0 set from beta at fixed N and eta calibrated to the target minimum depth.
std::vector<ResonanceInterval> resonance_range(const SystemParams& p, std::span<const double> betas,
                                               double target_depth = 3.0, int q_points = 41);

// Fraction of harmonic (k omega_B, k >= 1) power with k omega_B in [lo, hi];
// lo, hi in units of omega_R.
double power_in_range(const DepthSpectrum& s, double omega_b, double lo, double hi);

}  // namespace cb
