#include "cavity_bloch/snr.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

namespace cb {

std::string_view to_string(SnrMode m) {
    switch (m) {
        case SnrMode::analytic: return "analytic";
        case SnrMode::detector_shot: return "detector_shot";
        case SnrMode::full_backaction: return "full_backaction";
    }
    return "unknown";
}

std::optional<ScanAxis> parse_axis(std::string_view s) {
    if (s == "beta") return ScanAxis::beta;
    if (s == "depth") return ScanAxis::depth;
    if (s == "n_atoms") return ScanAxis::n_atoms;
    return std::nullopt;
}

std::string_view to_string(ScanAxis a) {
    switch (a) {
        case ScanAxis::beta: return "beta";
        case ScanAxis::depth: return "depth";
        case ScanAxis::n_atoms: return "n_atoms";
    }
    return "unknown";
}

double snr_analytic(double contrast, double rate, double t_end) {
    if (contrast < 0 || contrast > 1) throw ConfigError({"snr_analytic: contrast must lie in [0, 1]"});
    if (rate < 0) throw ConfigError({"snr_analytic: rate must be non-negative"});
    if (!(t_end > 0)) throw ConfigError({"snr_analytic: integration time must be positive"});
    return contrast * contrast * rate * t_end / 2.0;
}

namespace {

// Index of the sample at t (within 1e-9 of the spacing); throws when t is off-grid or beyond.
std::size_t sample_index(const std::vector<double>& t, double at, const char* what) {
    const double dt = t.size() > 1 ? t[1] - t[0] : 1.0;
    const double x = (at - t.front()) / dt;
    const long i = std::lround(x);
    if (i < 0 || static_cast<std::size_t>(i) >= t.size() || std::abs(x - static_cast<double>(i)) > 1e-6)
        throw ConfigError({std::string(what) + ": integration time not on the sample grid or beyond the run"});
    return static_cast<std::size_t>(i);
}

// trapezoid of g(t_j) * y_j over samples [0, last]
template <class G>
double trapz(const std::vector<double>& t, std::size_t last, G&& g) {
    double s = 0.0;
    for (std::size_t j = 0; j < last; ++j) s += 0.5 * (t[j + 1] - t[j]) * (g(j) + g(j + 1));
    return s;
}

}  // namespace

SnrResult snr_detector_shot(const MeanfieldTrajectory& traj, double omega, double t_end) {
    if (traj.size() < 2) throw ConfigError({"snr_detector_shot: trajectory too short"});
    if (!(t_end > 0)) throw ConfigError({"snr_detector_shot: integration time must be positive"});
    if (t_end > traj.grid.back() - traj.grid.front() + 1e-9)
        throw ConfigError({"snr_detector_shot: integration time exceeds the trajectory"});
    const std::size_t last = sample_index(traj.grid, traj.grid.front() + t_end, "snr_detector_shot");
    const double kappa = traj.params.kappa;
    auto n = [&](std::size_t j) { return std::norm(traj.states[j].alpha); };
    SnrResult r;
    r.omega = omega;
    r.t_end = t_end;
    r.mode = SnrMode::detector_shot;
    r.signal = kappa * trapz(traj.grid, last, [&](std::size_t j) { return std::cos(omega * traj.grid[j]) * n(j); });
    r.variance = kappa * trapz(traj.grid, last, [&](std::size_t j) {
                     const double c = std::cos(omega * traj.grid[j]);
                     return c * c * n(j);
                 });
    if (!(r.variance > 0)) throw NumericalError("snr_detector_shot: non-positive variance");
    r.snr = r.signal * r.signal / r.variance;
    return r;
}

std::array<cplx, 4> TwoTimeGrid::lam(std::size_t i, std::size_t j) const {
    const std::size_t p = size();
    if (j >= i) return lam_blocks[i * p + j];
    // <R_a(t_i) R_b(t_j)> = conj <R_{Tb}(t_j) R_{Ta}(t_i)>, T swaps a <-> a^dag
    const auto& b = lam_blocks[j * p + i];
    return {std::conj(b[3]), std::conj(b[1]), std::conj(b[2]), std::conj(b[0])};
}

cplx TwoTimeGrid::xi(std::size_t i, std::size_t j) const {
    if (j < i) throw ConfigError({"TwoTimeGrid::xi: only t_j >= t_i is defined"});
    return xi_corr[i * size() + j];
}

cplx TwoTimeGrid::kernel_from_blocks(std::size_t i, std::size_t j, cplx ae, cplx al) const {
    if (!blocks_stored) throw ConfigError({"TwoTimeGrid: blocks were not stored"});
    if (j < i) throw ConfigError({"TwoTimeGrid::kernel_from_blocks: needs t_j >= t_i"});
    const std::size_t p = size();
    const auto& lb = lam_blocks[i * p + j];  // <R_a(E) R_b(L)>, row-major (a, b)
    const auto& gb = g_blocks[i * p + j];    // G(L, E)_{ab}
    // <R_b(L) R_c(E)> = conj <R_{Tc}(E) R_{Tb}(L)>
    auto later_first = [&](int b, int c) { return std::conj(lb[(1 - c) * 2 + (1 - b)]); };
    const cplx l[2] = {std::conj(al), al};
    cplx s = 0.0;
    for (int b = 0; b < 2; ++b) {
        s += l[b] * (std::conj(ae) * later_first(b, 0) + ae * later_first(b, 1));
        s -= l[b] * ae * gb[b * 2 + 0];
    }
    return s;
}

double aligned_step(const SystemParams& p, double max_step, int points_per_period) {
    if (!(max_step > 0) || points_per_period < 1) throw ConfigError({"aligned_step: invalid arguments"});
    if (p.force == 0.0) return max_step;
    const double spacing = std::abs(p.bloch_period()) / points_per_period;
    const double m = std::ceil(spacing / max_step - 1e-9);
    return spacing / m;
}

const CorrelationSeries* TwoTimeGrid::find(double omega, int stride) const {
    for (const auto& c : correlation)
        if (c.stride == stride && std::abs(c.omega - omega) <= 1e-12 * std::max(1.0, std::abs(omega))) return &c;
    return nullptr;
}

TwoTimeRun two_time_grid(const SystemParams& p, const MeanfieldTrajectory& traj, const TwoTimeOptions& opt) {
    if (traj.size() < 3) throw ConfigError({"two_time_grid: trajectory too short"});
    const double h = opt.linear.step;
    const long n_steps = static_cast<long>((traj.size() - 1) / 2);
    const Eigen::Index k = traj.states.front().coeffs.size();
    const Eigen::Index dim = 2 + 2 * k;
    const double sk = std::sqrt(p.kappa);

    TwoTimeRun out;
    TwoTimeGrid& g = out.grid;
    g.kappa = p.kappa;
    g.blocks_stored = opt.store_blocks && !opt.fluctuations_off;

    // coarse block origins
    long stride = 0;
    std::size_t P = 0;
    if (g.blocks_stored) {
        double spacing = opt.origin_spacing;
        if (p.force != 0.0) spacing = std::abs(p.bloch_period()) / opt.points_per_period;
        if (!(spacing > 0)) spacing = (traj.grid.back() - traj.grid.front()) / 64.0;
        stride = std::lround(spacing / h);
        if (stride < 1 || std::abs(static_cast<double>(stride) * h - spacing) > 1e-6 * spacing)
            throw ConfigError({"two_time_grid: origin spacing is not a whole number of fluctuation steps"});
        P = static_cast<std::size_t>(n_steps / stride + 1);
        const double need = static_cast<double>(P) * static_cast<double>(P) * 9.0 * 16.0 +
                            static_cast<double>(dim) * static_cast<double>(P) * 4.0 * 16.0;
        if (need > opt.memory_budget_bytes)
            throw ResourceError("two_time_grid: coarse grid exceeds the memory budget", need, opt.memory_budget_bytes);
        g.origin_stride = stride;
        for (std::size_t i = 0; i < P; ++i)
            g.coarse_times.push_back(traj.grid[static_cast<std::size_t>(2 * stride * static_cast<long>(i))]);
        g.lam_blocks.assign(P * P, {});
        g.g_blocks.assign(P * P, {});
        g.xi_corr.assign(P * P, cplx{});
    }

    const std::vector<double> omegas = opt.omegas.empty() ? std::vector<double>{p.omega_b()} : opt.omegas;
    for (const double w : omegas)
        for (const int s : {1, 2})
            g.correlation.push_back({w, s, std::vector<double>(static_cast<std::size_t>(n_steps + 1), 0.0)});
    // one forced vector per series: sum_i weight_i cos(w E_i) G(t, E_i) w(E_i)
    MatC x = MatC::Zero(dim, static_cast<Eigen::Index>(g.correlation.size()));
    MatC blocks(dim, 0);
    std::size_t active = 0;

    auto origin_vector = [&](const MatC& c, cplx a) {
        VecC w = std::conj(a) * c.col(0) + a * c.col(1);
        w[0] -= a;
        out.kernel_diag.push_back(w[0] * std::conj(a) + w[1] * a);
        return w;
    };
    auto put_diagonal = [&](std::size_t i, const MatC& c) {
        g.lam_blocks[i * P + i] = {c(0, 0), c(0, 1), c(1, 0), c(1, 1)};
        g.g_blocks[i * P + i] = {1.0, 0.0, 0.0, 1.0};
        g.xi_corr[i * P + i] = 0.5 * sk;  // equal-time value, half the delta weight
    };

    RowRequest rows_req;
    StepObserver observer;
    if (!opt.fluctuations_off) {
        rows_req = [&](long, const MeanfieldState& sm, std::vector<VecC>& rows) {
            VecC l = VecC::Zero(dim);
            l[0] = std::conj(sm.alpha);
            l[1] = sm.alpha;
            rows.push_back(std::move(l));
        };
        observer = [&](const StepView& v) {
            const MatC& c0 = *v.c0;
            const VecC w = origin_vector(c0, v.s0->alpha);
            for (std::size_t n = 0; n < g.correlation.size(); ++n) {
                const auto& cs = g.correlation[n];
                if (v.k % cs.stride != 0) continue;
                const double weight = (v.k == 0 ? 0.5 : 1.0) * cs.stride * h;
                x.col(static_cast<Eigen::Index>(n)) += weight * std::cos(cs.omega * v.t0) * w;
            }
            const VecC proj = x.transpose() * (*v.rows)[0];  // l_mid^T Phi x
            const double tm = 0.5 * (v.t0 + v.t1);
            for (std::size_t n = 0; n < g.correlation.size(); ++n) {
                auto& vals = g.correlation[n].values;
                const auto kk = static_cast<std::size_t>(v.k);
                vals[kk + 1] = vals[kk] + std::cos(g.correlation[n].omega * tm) * proj[static_cast<Eigen::Index>(n)].real();
            }
            x = (*v.u) * x;

            if (g.blocks_stored) {
                if (v.k % stride == 0) {
                    blocks.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(4 * (active + 1)));
                    const auto base = static_cast<Eigen::Index>(4 * active);
                    blocks.col(base) = c0.row(0).transpose();
                    blocks.col(base + 1) = c0.row(1).transpose();
                    blocks.col(base + 2) = VecC::Unit(dim, 0);
                    blocks.col(base + 3) = VecC::Unit(dim, 1);
                    put_diagonal(static_cast<std::size_t>(v.k / stride), c0);
                    ++active;
                }
                blocks = (*v.u) * blocks;
                if ((v.k + 1) % stride == 0) {
                    const auto j = static_cast<std::size_t>((v.k + 1) / stride);
                    for (std::size_t i = 0; i < active; ++i) {
                        const auto base = static_cast<Eigen::Index>(4 * i);
                        auto& lb = g.lam_blocks[i * P + j];
                        auto& gb = g.g_blocks[i * P + j];
                        for (int a = 0; a < 2; ++a)
                            for (int b = 0; b < 2; ++b) {
                                lb[a * 2 + b] = blocks(b, base + a);
                                gb[a * 2 + b] = blocks(a, base + 2 + b);
                            }
                        g.xi_corr[i * P + j] = sk * blocks(1, base + 3);
                    }
                }
            }
            if (v.label_to != v.label_from) {
                for (Eigen::Index c = 0; c < x.cols(); ++c) x.col(c) = relabel_fluct(VecC(x.col(c)), k, v.label_from, v.label_to);
                for (Eigen::Index c = 0; c < blocks.cols(); ++c)
                    blocks.col(c) = relabel_fluct(VecC(blocks.col(c)), k, v.label_from, v.label_to);
            }
        };
    }

    out.linear = evolve_linear_system(p, traj, vacuum_covariance(traj.states.front()), opt.linear, rows_req, observer);
    if (!opt.fluctuations_off) {
        origin_vector(out.linear.final_c.c, traj.states.back().alpha);
        if (g.blocks_stored && n_steps % stride == 0) put_diagonal(P - 1, out.linear.final_c.c);
    }

    g.t = out.linear.t;
    g.photons.reserve(g.t.size());
    for (std::size_t j = 0; j < g.t.size(); ++j) g.photons.push_back(std::norm(traj.states[2 * j].alpha));
    g.dn = opt.fluctuations_off ? std::vector<double>(g.t.size(), 0.0) : out.linear.dn;
    return out;
}

SnrResult snr_full(const TwoTimeGrid& g, const MeanfieldTrajectory& traj, double omega, double t_end, int stride) {
    const CorrelationSeries* cs = g.find(omega, stride);
    if (!cs) throw ConfigError({"snr_full: frequency or origin stride not prepared in the two-time grid"});
    if (!(t_end > 0)) throw ConfigError({"snr_full: integration time must be positive"});

    const double t0 = traj.grid.front();
    const std::size_t last_traj = sample_index(traj.grid, t0 + t_end, "snr_full");
    const std::size_t last_fine = sample_index(g.t, t0 + t_end, "snr_full");
    if (last_fine % static_cast<std::size_t>(stride) != 0)
        throw ConfigError({"snr_full: integration time not on the strided origin grid"});
    const double kappa = g.kappa;

    auto n = [&](std::size_t j) { return std::norm(traj.states[j].alpha); };
    SnrResult r;
    r.omega = omega;
    r.t_end = t_end;
    r.mode = SnrMode::full_backaction;
    r.signal = kappa * (trapz(traj.grid, last_traj, [&](std::size_t j) { return std::cos(omega * traj.grid[j]) * n(j); }) +
                        trapz(g.t, last_fine, [&](std::size_t j) { return std::cos(omega * g.t[j]) * g.dn[j]; }));
    double shot = trapz(traj.grid, last_traj, [&](std::size_t j) {
        const double c = std::cos(omega * traj.grid[j]);
        return c * c * n(j);
    });
    shot += trapz(g.t, last_fine, [&](std::size_t j) {
        const double c = std::cos(omega * g.t[j]);
        return c * c * g.dn[j];
    });
    r.variance = kappa * shot + 2.0 * kappa * kappa * cs->values[last_fine];
    if (!(r.variance > 0)) throw NumericalError("snr_full: non-positive variance");
    r.snr = r.signal * r.signal / r.variance;
    return r;
}

SystemParams scan_point_params(const SystemParams& base, ScanAxis axis, double value, const SnrSettings& s) {
    SystemParams p = base;
    double target = s.target_depth;
    switch (axis) {
        case ScanAxis::beta:
            p.u0 = value * p.kappa / p.n_atoms;
            break;
        case ScanAxis::depth:
            p.u0 = s.fixed_beta * p.kappa / p.n_atoms;
            target = value;
            break;
        case ScanAxis::n_atoms:
            p.n_atoms = value;
            p.u0 = s.fixed_beta * p.kappa / value;
            break;
    }
    p.eta = calibrate_pump(p, target).eta;
    check(p);
    return p;
}

SnrScanRow snr_point(const SystemParams& p, double axis_value, const SnrSettings& s) {
    SnrScanRow row;
    row.axis_value = axis_value;
    row.params = p;
    if (p.force == 0.0) throw ConfigError({"snr_point: needs a nonzero force"});
    const double t_end = s.periods * std::abs(p.bloch_period());
    const double h = aligned_step(p, s.fine_step, s.points_per_period);
    const auto traj = evolve(p, initial_state(p), t_end, {s.meanfield_tol, 0.5 * h, 0.05});
    TwoTimeOptions o;
    o.store_blocks = false;
    o.linear.step = h;
    const auto run = two_time_grid(p, traj, o);
    row.detector_shot = snr_detector_shot(traj, p.omega_b(), t_end);
    row.full = snr_full(run.grid, traj, p.omega_b(), t_end, 1);
    row.full_coarse = snr_full(run.grid, traj, p.omega_b(), t_end, 2).snr;
    row.converged = std::abs(row.full_coarse - row.full.snr) <= s.convergence_tol * std::abs(row.full.snr);
    row.contrast = contrast(traj);
    return row;
}

std::vector<SnrScanRow> snr_scan(const SystemParams& base, ScanAxis axis, std::span<const double> values,
                                 const SnrSettings& s) {
    std::vector<SnrScanRow> rows;
    for (const double v : values) {
        try {
            rows.push_back(snr_point(scan_point_params(base, axis, v, s), v, s));
        } catch (const std::exception& e) {
            spdlog::error("snr_scan: point {} = {} failed: {}", to_string(axis), v, e.what());
            SnrScanRow bad;
            bad.axis_value = v;
            bad.failed = true;
            bad.error = e.what();
            rows.push_back(std::move(bad));
        }
    }
    return rows;
}

}  // namespace cb
