#include "cavity_bloch/coherent_approx.hpp"

#include <algorithm>
#include <cmath>

namespace cb {

OscillatorSet oscillator_set(const SystemParams& p, const MeanfieldState& state) {
    const VecC& c = state.coeffs;
    const double depth = p.u0 * std::norm(state.alpha);
    OscillatorSet out;
    out.q_eff = effective_quasimomentum(p, state);
    const auto band = band_solve(out.q_eff, depth, static_cast<int>((c.size() - 1) / 2));
    out.energies = band.energies;
    out.vectors = band.vectors;
    const VecC hc = apply_bloch_hamiltonian(out.q_eff, depth, c);
    out.chemical_potential = c.dot(hc).real();
    out.shifted = out.energies.array() - out.chemical_potential;
    const VecC cos_c = apply_cos2(c);
    const VecC w = cos_c - c * c.dot(cos_c);
    out.couplings = kI * std::sqrt(p.n_atoms) * p.u0 * (out.vectors.cast<cplx>().transpose() * w);
    return out;
}

double shot_noise_spectrum(double omega, double delta_eff, double kappa, double nbar) {
    const double d = delta_eff + omega;
    return 2.0 * kappa * nbar / (d * d + kappa * kappa);
}

RateRun evolve_rates(const SystemParams& p, const MeanfieldTrajectory& traj, const RateOptions& opt) {
    if (traj.size() < 1) throw ConfigError({"evolve_rates: empty trajectory"});
    if (opt.modes < 1 || opt.modes >= p.basis_size()) throw ConfigError({"evolve_rates: mode count out of range"});
    if (opt.points_per_period < 1) throw ConfigError({"evolve_rates: points_per_period must be positive"});
    const double dt = traj.dt();
    long stride = 1;
    if (traj.size() > 1 && p.force != 0.0) {
        const double tb = std::abs(p.bloch_period());
        stride = std::max<long>(1, static_cast<long>(std::floor(tb / opt.points_per_period / dt)));
    } else if (traj.size() > 1) {
        stride = std::max<long>(1, static_cast<long>(std::floor(1.0 / dt)));
    }
    const long last = static_cast<long>(traj.size()) - 1;
    std::vector<long> nodes{0};
    while (nodes.back() < last) nodes.push_back(std::min(last, nodes.back() + stride));

    const auto m = static_cast<Eigen::Index>(opt.modes);
    const auto intervals = static_cast<Eigen::Index>(nodes.size() - 1);
    RateRun run;
    run.dn_modes = MatR::Zero(static_cast<Eigen::Index>(nodes.size()), m);
    run.energy.resize(intervals, m);
    run.coupling2.resize(intervals, m);
    run.gamma_up.resize(intervals, m);
    run.gamma_down.resize(intervals, m);
    run.t.push_back(traj.grid.front());
    run.total.push_back(0.0);

    VecR n = VecR::Zero(m);
    for (Eigen::Index i = 0; i < intervals; ++i) {
        const long a = nodes[static_cast<std::size_t>(i)], b = nodes[static_cast<std::size_t>(i) + 1];
        // rates sampled at the interval midpoint (nearest stored sample)
        const auto& s = traj.states[static_cast<std::size_t>((a + b) / 2)];
        const auto osc = oscillator_set(p, s);
        const double nbar = std::norm(s.alpha);
        const double delta_eff = p.delta_c - p.n_atoms * p.u0 * cos2_expectation(s.coeffs);
        const double h = traj.grid[static_cast<std::size_t>(b)] - traj.grid[static_cast<std::size_t>(a)];
        for (Eigen::Index j = 0; j < m; ++j) {
            const double w = osc.shifted[j + 1];
            const double u2 = std::norm(osc.couplings[j + 1]);
            const double gu = u2 * shot_noise_spectrum(-w, delta_eff, p.kappa, nbar);
            const double gd = u2 * shot_noise_spectrum(w, delta_eff, p.kappa, nbar);
            const double r = gu - gd;
            // exact solution of N' = r N + gu over the interval
            const double e = std::exp(r * h);
            const double growth = std::abs(r * h) > 1e-12 ? std::expm1(r * h) / r : h;
            n[j] = n[j] * e + gu * growth;
            run.energy(i, j) = osc.energies[j + 1];
            run.coupling2(i, j) = u2;
            run.gamma_up(i, j) = gu;
            run.gamma_down(i, j) = gd;
        }
        run.dn_modes.row(i + 1) = n.transpose();
        run.t.push_back(traj.grid[static_cast<std::size_t>(b)]);
        run.total.push_back(n.sum());
    }
    return run;
}

AdiabaticityReport adiabaticity_diagnostic(const SystemParams& p, const MeanfieldState& state, int pairs,
                                           double threshold) {
    const auto osc = oscillator_set(p, state);
    const Eigen::Index k = osc.energies.size();
    const Eigen::Index n_max = (k - 1) / 2;
    const Eigen::Index np = std::min<Eigen::Index>(pairs, k - 1);
    VecR mom(k);
    for (Eigen::Index i = 0; i < k; ++i) mom[i] = 2.0 * static_cast<double>(i - n_max) + osc.q_eff;
    AdiabaticityReport rep;
    rep.pair_values.resize(np);
    for (Eigen::Index j = 0; j < np; ++j) {
        const double gap = osc.energies[j + 1] - osc.energies[j];
        const double pm = osc.vectors.col(j).dot(mom.cwiseProduct(osc.vectors.col(j + 1)));
        const double v = gap > 0 ? std::abs(2.0 * p.omega_b() / (std::numbers::pi * gap) * pm)
                                 : std::numeric_limits<double>::infinity();
        rep.pair_values[j] = v;
        rep.breakdown = rep.breakdown || v > threshold;
    }
    return rep;
}

}  // namespace cb
