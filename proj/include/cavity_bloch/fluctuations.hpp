#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "cavity_bloch/meanfield.hpp"

namespace cb {

// Block order (da, da^dag, dc, dc^dag); dimension 2 + 2K.
struct FluctuationMatrix {
    MatC m;
    double t = 0.0;
    int zone_shift = 0;
};

struct Propagator {
    MatC g;
    double t = 0.0;
    double t0 = 0.0;
};

struct CovarianceMatrix {
    MatC c;  // C_jk = <R_j R_k>
    double t = 0.0;
    int zone_shift = 0;
};

// Index helpers for the block layout.
struct FluctLayout {
    Eigen::Index k;
    [[nodiscard]] Eigen::Index dim() const { return 2 + 2 * k; }
    [[nodiscard]] static constexpr Eigen::Index a() { return 0; }
    [[nodiscard]] static constexpr Eigen::Index a_dag() { return 1; }
    [[nodiscard]] Eigen::Index c(Eigen::Index n) const { return 2 + n; }
    [[nodiscard]] Eigen::Index c_dag(Eigen::Index n) const { return 2 + k + n; }
};

MatC projector_matrix(const MeanfieldState& state);

// Switches for control runs.
struct FluctuationModel {
    bool damping = true;  // the -i kappa in the cavity entry
};

FluctuationMatrix build_fluctuation_matrix(const SystemParams& p, const MeanfieldState& state,
                                           const FluctuationModel& model = {});

// T M T + conj(M), with T the block swap.
double swap_symmetry_residual(const MatC& m);
// max over eigenvalues lambda of the distance from -conj(lambda) to the spectrum.
double pairing_residual(const MatC& m);
// max(|M (0,0,c,0)|, |M (0,0,0,c*)|)
double zero_mode_residual(const MatC& m, const MeanfieldState& state);

CovarianceMatrix vacuum_covariance(const MeanfieldState& state);

struct Occupations {
    double dn = 0.0;  // <da^dag da>
    double dN = 0.0;  // sum_n <dc_n^dag dc_n>
    double imag_residue = 0.0;
};
Occupations occupations(const CovarianceMatrix& c);

// max-norm of C - C^T - [R, R^T]
double commutator_residual(const CovarianceMatrix& c, const MeanfieldState& state);

// Move fluctuation vectors / matrices between plane-wave labellings; the
// mode entering at the edge is put in its vacuum.
VecC relabel_fluct(const VecC& v, Eigen::Index k, int from, int to);
MatC relabel_fluct(const MatC& m, Eigen::Index k, int from, int to, bool vacuum_fill);

struct LinearRunOptions {
    double step = 0.01;        // fluctuation step; the trajectory grid must be step/2
    bool diffusion = true;     // Langevin source D
    FluctuationModel model{};
    bool cross_check = false;  // propagator form alongside the differential form
    bool keep_propagator = false;
    long snapshot_stride = 0;  // 0: none; stores C (and G) every stride steps
    double window_growth = 1e3;  // propagator-form restart threshold on max |G^-1| entry
};

// Everything an observer may need about one step k: [t_k, t_{k+1}].
struct StepView {
    long k = 0;
    double t0 = 0.0, t1 = 0.0;
    const MeanfieldState* s0 = nullptr;    // labelled as the step
    const MeanfieldState* smid = nullptr;  // relabelled into the step's labelling
    const MeanfieldState* s1 = nullptr;
    const MatC* u = nullptr;               // step propagator
    const MatC* c0 = nullptr;              // covariance at t_k (step labelling)
    const MatC* c1 = nullptr;              // covariance at t_{k+1} (step labelling)
    const std::vector<VecC>* rows = nullptr;  // requested rows times Phi
    int label_from = 0;                    // zone shift of the step labelling
    int label_to = 0;                      // zone shift at t_{k+1}
};

// Called before each step to ask for rows r^T int exp(X s) ds; may be null.
using RowRequest = std::function<void(long k, const MeanfieldState& smid_in_step, std::vector<VecC>& rows)>;
using StepObserver = std::function<void(const StepView&)>;

struct LinearRun {
    std::vector<double> t;
    std::vector<double> dn, dN, commutator;
    // part of dN carried out of the plane-wave basis at relabelling (cumulative)
    std::vector<double> dN_escaped;
    std::vector<CovarianceMatrix> snapshots;
    std::vector<Propagator> propagators;
    std::vector<FluctuationMatrix> matrices;  // at snapshot times
    double max_cross_check = 0.0;             // relative, propagator vs differential
    long steps = 0;
    CovarianceMatrix final_c;
};

LinearRun evolve_linear_system(const SystemParams& p, const MeanfieldTrajectory& traj, const CovarianceMatrix& c0,
                               const LinearRunOptions& opt = {}, const RowRequest& rows = {},
                               const StepObserver& observer = {});

// Earliest period boundary after which the per-period increase of the series
// is constant to three significant figures; nullopt if never.
std::optional<double> heating_onset(std::span<const double> t, std::span<const double> series, double period);

}  // namespace cb
