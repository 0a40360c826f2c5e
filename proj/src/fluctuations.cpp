#include "cavity_bloch/fluctuations.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "cavity_bloch/linear_step.hpp"

namespace cb {

MatC projector_matrix(const MeanfieldState& state) {
    const Eigen::Index k = state.coeffs.size();
    return MatC::Identity(k, k) - state.coeffs * state.coeffs.adjoint();
}

FluctuationMatrix build_fluctuation_matrix(const SystemParams& p, const MeanfieldState& state,
                                           const FluctuationModel& model) {
    const Eigen::Index k = state.coeffs.size();
    const FluctLayout lay{k};
    const VecC& c = state.coeffs;
    const cplx alpha = state.alpha;
    const double g = std::sqrt(p.n_atoms) * p.u0;
    const double depth = p.u0 * std::norm(alpha);
    const double q = effective_quasimomentum(p, state);

    const VecC cos_c = apply_cos2(c);
    const cplx cos2 = c.dot(cos_c);  // <c|cos^2|c>
    const VecC w = cos_c - c * cos2;   // P cos^2 c

    MatC hbar = bloch_hamiltonian(q, depth, static_cast<int>((k - 1) / 2)).cast<cplx>();
    const double mu = c.dot(hbar * c).real();
    hbar.diagonal().array() -= mu;
    const MatC x = hbar * projector_matrix(state);

    const cplx a_entry = -p.delta_c + p.n_atoms * p.u0 * cos2.real() - (model.damping ? kI * p.kappa : cplx{});

    FluctuationMatrix out;
    out.t = state.t;
    out.zone_shift = state.zone_shift;
    MatC& m = out.m;
    m = MatC::Zero(lay.dim(), lay.dim());
    m(0, 0) = a_entry;
    m(1, 1) = -std::conj(a_entry);
    m.block(0, 2, 1, k) = g * alpha * w.adjoint();
    m.block(0, 2 + k, 1, k) = g * alpha * w.transpose();
    m.block(1, 2, 1, k) = -g * std::conj(alpha) * w.adjoint();
    m.block(1, 2 + k, 1, k) = -g * std::conj(alpha) * w.transpose();
    m.block(2, 0, k, 1) = g * std::conj(alpha) * w;
    m.block(2, 1, k, 1) = g * alpha * w;
    m.block(2 + k, 0, k, 1) = -g * std::conj(alpha) * w.conjugate();
    m.block(2 + k, 1, k, 1) = -g * alpha * w.conjugate();
    m.block(2, 2, k, k) = x;
    m.block(2 + k, 2 + k, k, k) = -x.conjugate();
    return out;
}

namespace {

MatC swap_blocks(const MatC& m) {
    const Eigen::Index k = (m.rows() - 2) / 2;
    Eigen::VectorXi perm(m.rows());
    perm[0] = 1;
    perm[1] = 0;
    for (Eigen::Index n = 0; n < k; ++n) {
        perm[2 + n] = static_cast<int>(2 + k + n);
        perm[2 + k + n] = static_cast<int>(2 + n);
    }
    MatC out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = m(perm[i], perm[j]);
    return out;
}

}  // namespace

double swap_symmetry_residual(const MatC& m) {
    return (swap_blocks(m) + m.conjugate()).cwiseAbs().maxCoeff();
}

double pairing_residual(const MatC& m) {
    Eigen::ComplexEigenSolver<MatC> es(m, false);
    const VecC& ev = es.eigenvalues();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        const cplx target = -std::conj(ev[i]);
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < ev.size(); ++j) best = std::min(best, std::abs(ev[j] - target));
        worst = std::max(worst, best);
    }
    return worst;
}

double zero_mode_residual(const MatC& m, const MeanfieldState& state) {
    const Eigen::Index k = state.coeffs.size();
    VecC v1 = VecC::Zero(2 + 2 * k), v2 = VecC::Zero(2 + 2 * k);
    v1.segment(2, k) = state.coeffs;
    v2.segment(2 + k, k) = state.coeffs.conjugate();
    return std::max((m * v1).cwiseAbs().maxCoeff(), (m * v2).cwiseAbs().maxCoeff());
}

CovarianceMatrix vacuum_covariance(const MeanfieldState& state) {
    const Eigen::Index k = state.coeffs.size();
    CovarianceMatrix out;
    out.t = state.t;
    out.zone_shift = state.zone_shift;
    out.c = MatC::Zero(2 + 2 * k, 2 + 2 * k);
    out.c(0, 1) = 1.0;
    out.c.block(2, 2 + k, k, k) = projector_matrix(state);
    return out;
}

Occupations occupations(const CovarianceMatrix& cv) {
    const Eigen::Index k = (cv.c.rows() - 2) / 2;
    const cplx dn = cv.c(1, 0);
    const cplx dN = cv.c.block(2 + k, 2, k, k).trace();
    return {dn.real(), dN.real(), std::max(std::abs(dn.imag()), std::abs(dN.imag()))};
}

double commutator_residual(const CovarianceMatrix& cv, const MeanfieldState& state) {
    const Eigen::Index k = state.coeffs.size();
    MatC r = cv.c - cv.c.transpose();
    r(0, 1) -= 1.0;
    r(1, 0) += 1.0;
    const MatC pm = projector_matrix(state);
    r.block(2, 2 + k, k, k) -= pm;
    r.block(2 + k, 2, k, k) += pm.transpose();
    return r.cwiseAbs().maxCoeff();
}

VecC relabel_fluct(const VecC& v, Eigen::Index k, int from, int to) {
    VecC out = v;
    out.segment(2, k) = relabel(v.segment(2, k), from, to);
    out.segment(2 + k, k) = relabel(v.segment(2 + k, k), from, to);
    return out;
}

MatC relabel_fluct(const MatC& m, Eigen::Index k, int from, int to, bool vacuum_fill) {
    if (from == to) return m;
    const Eigen::Index dim = 2 + 2 * k;
    const Eigen::Index d = to - from;
    auto map = [&](Eigen::Index i) -> Eigen::Index {
        if (i < 2) return i;
        const Eigen::Index base = i < 2 + k ? 2 : 2 + k;
        const Eigen::Index j = i - base + d;
        return (j >= 0 && j < k) ? base + j : -1;
    };
    MatC out = MatC::Zero(dim, m.cols() == dim ? dim : m.cols());
    const bool square = m.cols() == dim;
    for (Eigen::Index i = 0; i < dim; ++i) {
        const Eigen::Index ni = map(i);
        if (ni < 0) continue;
        if (square) {
            for (Eigen::Index j = 0; j < dim; ++j) {
                const Eigen::Index nj = map(j);
                if (nj >= 0) out(ni, nj) = m(i, j);
            }
        } else {
            out.row(ni) = m.row(i);
        }
    }
    if (vacuum_fill && square) {
        // modes entering at the edge: <dc dc^dag> = 1
        for (Eigen::Index n = 0; n < k; ++n) {
            const Eigen::Index src = n - d;
            if (src < 0 || src >= k) out(2 + n, 2 + k + n) = 1.0;
        }
    }
    return out;
}

namespace {

MeanfieldState in_labelling(const MeanfieldState& s, int shift) {
    MeanfieldState out = s;
    if (s.zone_shift != shift) {
        out.coeffs = relabel(s.coeffs, s.zone_shift, shift);
        out.zone_shift = shift;
    }
    return out;
}

}  // namespace

LinearRun evolve_linear_system(const SystemParams& p, const MeanfieldTrajectory& traj, const CovarianceMatrix& c0,
                               const LinearRunOptions& opt, const RowRequest& rows_req,
                               const StepObserver& observer) {
    if (traj.size() < 1) throw ConfigError({"evolve_linear_system: empty trajectory"});
    const double h = opt.step;
    if (traj.size() > 1 && std::abs(traj.dt() - 0.5 * h) > 1e-9 * h)
        throw ConfigError({"evolve_linear_system: trajectory spacing must be half the fluctuation step"});
    if ((traj.size() - 1) % 2 != 0) throw ConfigError({"evolve_linear_system: trajectory needs an odd sample count"});
    const Eigen::Index k = traj.states.front().coeffs.size();
    const Eigen::Index dim = 2 + 2 * k;
    if (c0.c.rows() != dim) throw ConfigError({"evolve_linear_system: covariance dimension mismatch"});

    LinearRun run;
    const long n_steps = static_cast<long>((traj.size() - 1) / 2);
    run.t.reserve(n_steps + 1);
    run.dn.reserve(n_steps + 1);
    run.dN.reserve(n_steps + 1);
    run.dN_escaped.reserve(n_steps + 1);
    run.commutator.reserve(n_steps + 1);

    MatC c = relabel_fluct(c0.c, k, c0.zone_shift, traj.states.front().zone_shift, true);
    MatC g = MatC::Identity(dim, dim);

    // atoms carried past the basis edge stay excited; their occupation is kept here
    double escaped = 0.0;
    auto record = [&](double t, const MeanfieldState& s, long step) {
        CovarianceMatrix cv{c, t, s.zone_shift};
        const auto occ = occupations(cv);
        run.t.push_back(t);
        run.dn.push_back(occ.dn);
        run.dN.push_back(occ.dN + escaped);
        run.dN_escaped.push_back(escaped);
        run.commutator.push_back(commutator_residual(cv, s));
        if (opt.snapshot_stride > 0 && step % opt.snapshot_stride == 0) {
            run.snapshots.push_back(cv);
            run.matrices.push_back(build_fluctuation_matrix(p, s, opt.model));
            if (opt.keep_propagator) run.propagators.push_back({g, t, traj.grid.front()});
        }
    };
    record(traj.grid.front(), traj.states.front(), 0);

    // propagator-form window
    MatC gw = MatC::Identity(dim, dim), gw_inv = MatC::Identity(dim, dim);
    MatC cw0 = c, sigma = MatC::Zero(dim, dim);
    std::vector<VecC> rows;

    for (long step = 0; step < n_steps; ++step) {
        const auto& sa = traj.states[2 * step];
        const int lab = sa.zone_shift;
        const MeanfieldState sm = in_labelling(traj.states[2 * step + 1], lab);
        const MeanfieldState sb = in_labelling(traj.states[2 * step + 2], lab);
        const MatC a0 = -kI * build_fluctuation_matrix(p, sa, opt.model).m;
        const MatC am = -kI * build_fluctuation_matrix(p, sm, opt.model).m;
        const MatC a1 = -kI * build_fluctuation_matrix(p, sb, opt.model).m;
        const MatC omega = magnus4(a0, am, a1, h);

        rows.clear();
        if (rows_req) rows_req(step, sm, rows);
        std::vector<RankOne> src;
        if (opt.diffusion) src = magnus4_source(a0, a1, h, 2.0 * p.kappa);
        const ExpStep st = exp_step(omega, h, {src, rows});

        MatC c1 = st.u * c * st.u.transpose();
        if (opt.diffusion) c1 += st.q;

        if (opt.cross_check) {
            gw = st.u * gw;
            gw_inv = gw_inv * st.u.inverse();
            if (opt.diffusion) sigma += gw_inv * st.q * gw_inv.transpose();
            const MatC cp = gw * (cw0 + sigma) * gw.transpose();
            const double scale = std::max(c1.cwiseAbs().maxCoeff(), 1e-300);
            run.max_cross_check = std::max(run.max_cross_check, (cp - c1).cwiseAbs().maxCoeff() / scale);
            if (gw_inv.cwiseAbs().maxCoeff() > opt.window_growth) {
                gw.setIdentity();
                gw_inv.setIdentity();
                sigma.setZero();
                cw0 = c1;
            }
        }
        if (opt.keep_propagator) g = st.u * g;

        if (observer) {
            StepView v;
            v.k = step;
            v.t0 = traj.grid[2 * step];
            v.t1 = traj.grid[2 * step + 2];
            v.s0 = &sa;
            v.smid = &sm;
            v.s1 = &sb;
            v.u = &st.u;
            v.c0 = &c;
            v.c1 = &c1;
            v.rows = &st.rows;
            v.label_from = lab;
            v.label_to = traj.states[2 * step + 2].zone_shift;
            observer(v);
        }

        const int next = traj.states[2 * step + 2].zone_shift;
        if (next != lab) {
            for (Eigen::Index n = 0; n < k; ++n)
                if (n + next - lab < 0 || n + next - lab >= k) escaped += c1(2 + k + n, 2 + n).real();
            c1 = relabel_fluct(c1, k, lab, next, true);
            if (opt.keep_propagator) {
                // rows follow the new labelling, columns stay in the initial one
                MatC gr(dim, dim);
                for (Eigen::Index j = 0; j < dim; ++j) gr.col(j) = relabel_fluct(VecC(g.col(j)), k, lab, next);
                g.swap(gr);
            }
            if (opt.cross_check) {
                gw.setIdentity();
                gw_inv.setIdentity();
                sigma.setZero();
                cw0 = c1;
            }
        }
        c.swap(c1);
        ++run.steps;
        record(traj.grid[2 * step + 2], traj.states[2 * step + 2], step + 1);
    }
    run.final_c = {c, traj.grid.back(), traj.states.back().zone_shift};
    return run;
}

std::optional<double> heating_onset(std::span<const double> t, std::span<const double> series, double period) {
    if (t.size() != series.size() || t.size() < 2 || !(period > 0)) return std::nullopt;
    const double t0 = t.front();
    const long periods = static_cast<long>(std::floor((t.back() - t0) / period + 1e-9));
    if (periods < 3) return std::nullopt;
    auto at = [&](double tt) {
        const auto it = std::lower_bound(t.begin(), t.end(), tt - 1e-9 * period);
        const auto i = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - t.begin(), static_cast<std::ptrdiff_t>(t.size()) - 1));
        return series[i];
    };
    std::vector<double> inc(periods);
    for (long m = 0; m < periods; ++m) inc[m] = at(t0 + (m + 1) * period) - at(t0 + m * period);
    const double peak = *std::max_element(inc.begin(), inc.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    for (long m = 0; m + 1 < periods; ++m) {
        const double ref = inc[m];
        if (!(std::abs(ref) > 1e-2 * std::abs(peak)) || std::abs(ref) == 0.0) continue;
        bool flat = true;
        for (long j = m + 1; j < periods && flat; ++j) flat = std::abs(inc[j] - ref) <= 1e-3 * std::abs(ref);
        if (flat) return t0 + static_cast<double>(m) * period;
    }
    return std::nullopt;
}

}  // namespace cb
