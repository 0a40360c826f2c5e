#include "cavity_bloch/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <spdlog/spdlog.h>

namespace cb {

std::string_view to_string(ModeKind k) {
    switch (k) {
        case ModeKind::cavity_like: return "cavity_like";
        case ModeKind::hybridized: return "hybridized";
        case ModeKind::marginal: return "marginal";
        case ModeKind::zero_mode: return "zero_mode";
    }
    return "unknown";
}

namespace {

// index of the swapped partner in the (a, a^dag, c, c^dag) layout
Eigen::Index partner(Eigen::Index j, Eigen::Index k) {
    if (j == 0) return 1;
    if (j == 1) return 0;
    return j < 2 + k ? j + k : j - k;
}

double eta_form(const VecC& r, Eigen::Index k) {
    double s = std::norm(r[0]) - std::norm(r[1]);
    s += r.segment(2, k).squaredNorm() - r.segment(2 + k, k).squaredNorm();
    return s;
}

}  // namespace

std::vector<QuasiparticleMode> quasiparticle_modes(const FluctuationMatrix& fm, const MeanfieldState& state) {
    const Eigen::Index dim = fm.m.rows();
    const Eigen::Index k = (dim - 2) / 2;
    MatC m = fm.m;
    Eigen::ComplexEigenSolver<MatC> es(m, true);
    if (es.info() != Eigen::Success) throw NumericalError("quasiparticle_modes: eigensolver failed");
    MatC v = es.eigenvectors();
    VecC lam = es.eigenvalues();
    Eigen::PartialPivLU<MatC> lu(v);
    // reciprocal condition estimate; defective at exact degeneracies
    if (lu.rcond() < 1e-13) {
        spdlog::warn("quasiparticle_modes: near-defective eigenbasis (rcond {:.2e}), dithering diagonal", lu.rcond());
        for (Eigen::Index i = 0; i < dim; ++i) m(i, i) += 1e-12 * static_cast<double>(i + 1) / static_cast<double>(dim);
        es.compute(m, true);
        v = es.eigenvectors();
        lam = es.eigenvalues();
        lu.compute(v);
    }
    const MatC vinv = lu.inverse();

    // meanfield (zero-mode) directions
    VecC z1 = VecC::Zero(dim), z2 = VecC::Zero(dim);
    z1.segment(2, k) = state.coeffs.normalized();
    z2.segment(2 + k, k) = state.coeffs.conjugate().normalized();

    std::vector<QuasiparticleMode> out(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i) {
        QuasiparticleMode& q = out[static_cast<std::size_t>(i)];
        q.omega = lam[i].real();
        q.gamma = lam[i].imag();
        const VecC unit = v.col(i).normalized();
        q.cavity_weight = std::norm(unit[0]) + std::norm(unit[1]);
        q.meanfield_weight = std::norm(z1.dot(unit)) + std::norm(z2.dot(unit));
        // rows of V^-1 are the left vectors up to conjugation; rescale pair
        VecC r = unit;
        VecC l = vinv.row(i).adjoint() * v.col(i).norm();
        const double ef = std::abs(eta_form(r, k));
        if (ef > 1e-12) {
            r /= std::sqrt(ef);
            l *= std::sqrt(ef);
        }
        q.right = std::move(r);
        q.left = std::move(l);
    }
    std::stable_sort(out.begin(), out.end(), [](const QuasiparticleMode& a, const QuasiparticleMode& b) {
        const bool pa = a.omega > 0, pb = b.omega > 0;
        if (pa != pb) return pa;
        return std::abs(a.omega) < std::abs(b.omega);
    });
    return out;
}

double effective_detuning(const SystemParams& p, const MeanfieldState& state) {
    return p.delta_c - p.n_atoms * p.u0 * cos2_expectation(state.coeffs);
}

void classify(std::vector<QuasiparticleMode>& modes, double /*delta_eff*/, double kappa,
              const ClassifyThresholds& th) {
    for (auto& m : modes) {
        if (std::abs(m.omega) + std::abs(m.gamma) < th.zero_tol && m.meanfield_weight > 0.5)
            m.kind = ModeKind::zero_mode;
        else if (m.cavity_weight > th.cavity_weight && std::abs(m.gamma + kappa) < th.cavity_gamma * kappa)
            m.kind = ModeKind::cavity_like;
        else if (m.cavity_weight < th.marginal_weight && std::abs(m.gamma) < th.marginal_gamma * kappa)
            m.kind = ModeKind::marginal;
        else
            m.kind = ModeKind::hybridized;
    }
}

std::vector<const QuasiparticleMode*> atomic_branches(const std::vector<QuasiparticleMode>& modes) {
    std::vector<const QuasiparticleMode*> out;
    for (const auto& m : modes)
        if (m.omega > 0 && (m.kind == ModeKind::hybridized || m.kind == ModeKind::marginal)) out.push_back(&m);
    std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->omega < b->omega; });
    return out;
}

TrackedSpectra track_modes(const std::vector<std::vector<QuasiparticleMode>>& spectra) {
    TrackedSpectra out;
    if (spectra.empty()) return out;
    const std::size_t n = spectra.front().size();
    out.labels.emplace_back(n);
    std::iota(out.labels.front().begin(), out.labels.front().end(), 0);
    for (std::size_t s = 1; s < spectra.size(); ++s) {
        const auto& prev = spectra[s - 1];
        const auto& cur = spectra[s];
        if (cur.size() != n) throw ConfigError({"track_modes: mode count changes along the grid"});
        struct Pair {
            double overlap;
            std::size_t i, j;
        };
        std::vector<Pair> pairs;
        pairs.reserve(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            const VecC a = prev[i].right.normalized();
            for (std::size_t j = 0; j < n; ++j) pairs.push_back({std::abs(a.dot(cur[j].right.normalized())), i, j});
        }
        std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
            if (a.overlap != b.overlap) return a.overlap > b.overlap;
            return a.i != b.i ? a.i < b.i : a.j < b.j;
        });
        std::vector<int> lab(n, -1);
        std::vector<bool> used(n, false);
        for (const auto& pr : pairs) {
            if (used[pr.i] || lab[pr.j] >= 0) continue;
            used[pr.i] = true;
            lab[pr.j] = out.labels[s - 1][pr.i];
            if (pr.overlap < 0.5) out.crossings.emplace_back(s, lab[pr.j]);
        }
        out.labels.push_back(std::move(lab));
    }
    return out;
}

VecR qp_occupations(const CovarianceMatrix& cv, const MeanfieldState& state,
                    const std::vector<QuasiparticleMode>& modes) {
    const Eigen::Index dim = cv.c.rows();
    const Eigen::Index k = (dim - 2) / 2;
    MeanfieldState s = state;
    if (s.zone_shift != cv.zone_shift) {
        s.coeffs = relabel(s.coeffs, s.zone_shift, cv.zone_shift);
        s.zone_shift = cv.zone_shift;
    }
    const MatC vac = vacuum_covariance(s).c;
    VecR out(static_cast<Eigen::Index>(modes.size()));
    for (std::size_t n = 0; n < modes.size(); ++n) {
        const VecC& l = modes[n].left;
        auto form = [&](const MatC& c) {
            // <rho^dag rho> = sum_jk l_j conj(l_k) <R_j^dag R_k>
            cplx acc = 0.0;
            for (Eigen::Index j = 0; j < dim; ++j) {
                if (l[j] == cplx{}) continue;
                cplx row = 0.0;
                const Eigen::Index pj = partner(j, k);
                for (Eigen::Index kk = 0; kk < dim; ++kk) row += c(pj, kk) * std::conj(l[kk]);
                acc += l[j] * row;
            }
            return acc.real();
        };
        out[static_cast<Eigen::Index>(n)] = form(cv.c) - form(vac);
    }
    return out;
}

std::vector<QuasiparticleMode> steady_state_spectrum(const SystemParams& p, double q, const ClassifyThresholds& th) {
    SystemParams pq = p;
    pq.q0 = q;
    const auto ss = steady_state(pq, q);
    const MeanfieldState st{ss.alpha_ss, ss.ground(), q, 0.0, 0};
    auto modes = quasiparticle_modes(build_fluctuation_matrix(pq, st), st);
    classify(modes, effective_detuning(pq, st), p.kappa, th);
    return modes;
}

ResonanceInterval resonance_interval(const SystemParams& p, int q_points) {
    if (q_points < 2) throw ConfigError({"resonance_range: need at least two q points"});
    ResonanceInterval r;
    r.beta = p.beta();
    r.eta = p.eta;
    r.omega_min = std::numeric_limits<double>::infinity();
    r.omega_max = -r.omega_min;
    for (int j = 0; j < q_points; ++j) {
        const double q = -1.0 + 2.0 * j / (q_points - 1);
        const double qq = q <= -1.0 ? 1.0 : q;
        if (count_steady_states(p, qq) > 1) r.bistable = true;
        const auto modes = steady_state_spectrum(p, qq);
        const auto br = atomic_branches(modes);
        if (br.empty()) continue;
        const double w = br.front()->omega;
        if (w < r.omega_min) {
            r.omega_min = w;
            r.q_at_min = q;
        }
        r.omega_max = std::max(r.omega_max, w);
        if (std::abs(q) < 1e-12) r.gamma_center = br.front()->gamma;
    }
    if (r.bistable) spdlog::warn("resonance_range: beta {} is bistable for some q, lowest branch used", r.beta);
    return r;
}

std::vector<ResonanceInterval> resonance_range(const SystemParams& p, std::span<const double> betas,
                                               double target_depth, int q_points) {
    if (q_points < 2) throw ConfigError({"resonance_range: need at least two q points"});
    std::vector<ResonanceInterval> out;
    for (const double beta : betas) {
        SystemParams pb = p;
        pb.u0 = beta * p.kappa / p.n_atoms;
        const auto cal = calibrate_pump(pb, target_depth);
        pb.eta = cal.eta;
        auto r = resonance_interval(pb, q_points);
        r.beta = beta;
        r.bistable = r.bistable || cal.bistable;
        out.push_back(r);
    }
    return out;
}

double power_in_range(const DepthSpectrum& s, double omega_b, double lo, double hi) {
    double total = 0.0, inside = 0.0;
    for (Eigen::Index j = 0; j < s.frequency.size(); ++j) {
        const double f = s.frequency[j];
        const double h = std::round(f);
        if (f <= 0.5 || std::abs(f - h) > 1e-6) continue;
        const double pw = s.magnitude[j] * s.magnitude[j];
        total += pw;
        const double w = h * omega_b;
        if (w >= lo && w <= hi) inside += pw;
    }
    return total > 0 ? inside / total : 0.0;
}

}  // namespace cb
