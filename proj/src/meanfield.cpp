#include "cavity_bloch/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/roots.hpp>
#include <lapacke.h>
#include <spdlog/spdlog.h>
#include <unsupported/Eigen/FFT>

#include "cavity_bloch/ode.hpp"

namespace cb {

double effective_quasimomentum(const SystemParams& p, double t, int zone_shift) {
    return p.q0 + p.force * t - 2.0 * zone_shift;
}

double effective_quasimomentum(const SystemParams& p, const MeanfieldState& s) {
    return effective_quasimomentum(p, s.t, s.zone_shift);
}

double reduce_to_zone(double q) {
    double r = std::fmod(q + 1.0, 2.0);
    if (r <= 0.0) r += 2.0;
    return r - 1.0;
}

VecC relabel(const VecC& c, int from, int to) {
    const Eigen::Index k = c.size();
    const Eigen::Index d = to - from;
    if (d == 0) return c;
    VecC out = VecC::Zero(k);
    for (Eigen::Index i = 0; i < k; ++i)
        if (i + d >= 0 && i + d < k) out[i + d] = c[i];
    return out;
}

double cos2_expectation(std::span<const cplx> c) {
    double norm = 0.0;
    for (const auto& z : c) norm += std::norm(z);
    cplx hop = 0.0;
    for (std::size_t n = 0; n + 1 < c.size(); ++n) hop += std::conj(c[n + 1]) * c[n];
    if (std::abs(norm - 1.0) > 1e-8) {
        spdlog::warn("cos2_expectation: input norm {} renormalised", norm);
        if (norm <= 0.0) return 0.5;
        return 0.5 + 0.5 * hop.real() / norm;
    }
    return 0.5 + 0.5 * hop.real();
}

double cos2_expectation(const VecC& c) {
    return cos2_expectation(std::span<const cplx>(c.data(), static_cast<std::size_t>(c.size())));
}

VecC apply_cos2(const VecC& c) {
    const Eigen::Index k = c.size();
    VecC out = 0.5 * c;
    out.head(k - 1) += 0.25 * c.tail(k - 1);
    out.tail(k - 1) += 0.25 * c.head(k - 1);
    return out;
}

MatR bloch_hamiltonian(double q_eff, double depth, int n_max) {
    const int k = 2 * n_max + 1;
    MatR h = MatR::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        const double m = 2.0 * (i - n_max) + q_eff;
        h(i, i) = m * m + 0.5 * depth;
        if (i + 1 < k) h(i, i + 1) = h(i + 1, i) = 0.25 * depth;
    }
    return h;
}

VecC apply_bloch_hamiltonian(double q_eff, double depth, const VecC& c) {
    const Eigen::Index k = c.size();
    const Eigen::Index n_max = (k - 1) / 2;
    VecC out(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double m = 2.0 * static_cast<double>(i - n_max) + q_eff;
        out[i] = (m * m + 0.5 * depth) * c[i];
    }
    out.head(k - 1) += 0.25 * depth * c.tail(k - 1);
    out.tail(k - 1) += 0.25 * depth * c.head(k - 1);
    return out;
}

BlochBandSolution band_solve(double q, double depth, int n_max) {
    // the dense solver is robust where the tridiagonal entry point is not
    Eigen::SelfAdjointEigenSolver<MatR> es(bloch_hamiltonian(q, depth, n_max));
    if (es.info() != Eigen::Success)
        throw NumericalError("band_solve: eigensolver failed at q = " + std::to_string(q) + ", depth = " + std::to_string(depth));
    BlochBandSolution out{q, depth, es.eigenvalues(), es.eigenvectors()};
    for (Eigen::Index j = 0; j < out.vectors.cols(); ++j) {
        Eigen::Index imax = 0;
        const double big = out.vectors.col(j).cwiseAbs().maxCoeff(&imax);
        // ties between mirror entries: take the lowest index within roundoff
        for (Eigen::Index i = 0; i < imax; ++i)
            if (std::abs(out.vectors(i, j)) > big * (1.0 - 1e-9)) {
                imax = i;
                break;
            }
        if (out.vectors(imax, j) < 0) out.vectors.col(j) *= -1.0;
    }
    return out;
}

double ground_cos2(double q, double depth, int n_max) {
    // lowest eigenpair only, via the tridiagonal MRRR driver
    const int k = 2 * n_max + 1;
    std::vector<double> d(k), e(k), w(k), z(k);
    std::vector<lapack_int> supp(2);
    for (int i = 0; i < k; ++i) {
        const double m = 2.0 * (i - n_max) + q;
        d[i] = m * m + 0.5 * depth;
        e[i] = 0.25 * depth;
    }
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', k, d.data(), e.data(), 0.0, 0.0, 1, 1, 0.0,
                                           &found, w.data(), z.data(), k, supp.data());
    if (info != 0 || found != 1) return cos2_expectation(VecC(band_solve(q, depth, n_max).vectors.col(0).cast<cplx>()));
    double hop = 0.0, norm = 0.0;
    for (int i = 0; i < k; ++i) norm += z[i] * z[i];
    for (int i = 0; i + 1 < k; ++i) hop += z[i] * z[i + 1];
    return 0.5 + 0.5 * hop / norm;
}

namespace {

double pump_map(const SystemParams& p, double q, double photons) {
    const double g = ground_cos2(q, p.u0 * photons, p.n_max);
    const double det = p.delta_c - p.n_atoms * p.u0 * g;
    return p.eta * p.eta / (det * det + p.kappa * p.kappa);
}

SelfConsistentState assemble(const SystemParams& p, double q, double photons, bool converged, int iters) {
    SelfConsistentState s;
    s.band = band_solve(q, p.u0 * photons, p.n_max);
    s.cos2 = cos2_expectation(VecC(s.band.vectors.col(0).cast<cplx>()));
    s.alpha_ss = kI * p.eta / (p.delta_c - p.n_atoms * p.u0 * s.cos2 + kI * p.kappa);
    s.converged = converged;
    s.iterations = iters;
    return s;
}

double refine_root(const SystemParams& p, double q, double lo, double hi) {
    auto f = [&](double i) { return fixed_point_residual(p, q, i); };
    boost::uintmax_t it = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-14 * std::max(1.0, std::abs(a)); };
    const double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, it);
    return 0.5 * (r.first + r.second);
}

}  // namespace

double fixed_point_residual(const SystemParams& p, double q, double photons) {
    return photons - pump_map(p, q, photons);
}

namespace {

constexpr int kRootSamples = 240;

// Sample points on [0, I_max], denser at both ends.
double sample_point(double i_max, int j) {
    const double x = static_cast<double>(j) / kRootSamples;
    return i_max * (0.5 * x * x * (3.0 - 2.0 * x) + 0.5 * x);
}

std::vector<double> scan_roots(const SystemParams& p, double q, bool first_only) {
    check(p);
    if (p.eta == 0.0) return {0.0};
    const double i_max = p.eta * p.eta / (p.kappa * p.kappa) * (1.0 + 1e-9);
    std::vector<double> roots;
    double prev_i = 0.0;
    double prev_h = fixed_point_residual(p, q, 0.0);
    for (int j = 1; j <= kRootSamples; ++j) {
        const double i = sample_point(i_max, j);
        const double h = fixed_point_residual(p, q, i);
        if ((prev_h < 0) != (h < 0) || h == 0.0) {
            roots.push_back(refine_root(p, q, prev_i, i));
            if (first_only) break;
        }
        prev_i = i;
        prev_h = h;
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, a); }),
                roots.end());
    if (roots.empty()) throw NumericalError("steady_state_roots: no root bracketed");
    return roots;
}

}  // namespace

std::vector<double> steady_state_roots(const SystemParams& p, double q) { return scan_roots(p, q, false); }

double lowest_root(const SystemParams& p, double q) { return scan_roots(p, q, true).front(); }

int count_steady_states(const SystemParams& p, double q) {
    return static_cast<int>(steady_state_roots(p, q).size());
}

SelfConsistentState steady_state(const SystemParams& p, double q, double branch_seed) {
    check(p);
    double i = std::max(0.0, branch_seed);
    constexpr int cap = 400;
    int it = 0;
    for (; it < cap; ++it) {
        const double next = 0.5 * i + 0.5 * pump_map(p, q, i);
        if (std::abs(next - i) <= 1e-13 * std::max(1.0, next)) {
            i = next;
            break;
        }
        i = next;
    }
    bool ok = it < cap && std::abs(fixed_point_residual(p, q, i)) < 1e-8 * std::max(i, 1e-300);
    // only accept the iterate if no other root sits closer to the seed
    const auto roots = steady_state_roots(p, q);
    const auto nearest = *std::min_element(roots.begin(), roots.end(), [&](double a, double b) {
        return std::abs(a - branch_seed) < std::abs(b - branch_seed);
    });
    if (!ok || std::abs(nearest - i) > 1e-6 * std::max(1.0, nearest)) {
        i = nearest;
        ok = std::abs(fixed_point_residual(p, q, i)) < 1e-8 * std::max(i, 1e-300) || i == 0.0;
    }
    return assemble(p, q, i, ok, it);
}

SelfConsistentState steady_state(const SystemParams& p, double q) {
    const auto roots = steady_state_roots(p, q);
    if (roots.size() > 1) spdlog::warn("steady_state: {} roots at q = {}, lowest branch used", roots.size(), q);
    const double i = roots.front();
    return assemble(p, q, i, std::abs(fixed_point_residual(p, q, i)) < 1e-8 * std::max(i, 1e-300) || i == 0.0,
                    0);
}

DepthMinimum minimum_depth(const SystemParams& p, int q_points) {
    // depth is even in q, so scan [0, 1]
    auto depth_at = [&](double q, bool& bi) {
        if (bi) return p.u0 * lowest_root(p, q);
        const auto roots = steady_state_roots(p, q);
        bi = roots.size() > 1;
        return p.u0 * roots.front();
    };
    DepthMinimum best{0.0, std::numeric_limits<double>::infinity(), false};
    int jbest = 0;
    const int n = std::max(q_points, 3);
    for (int j = 0; j < n; ++j) {
        const double q = static_cast<double>(j) / (n - 1);
        const double d = depth_at(q, best.bistable);
        if (d < best.depth) {
            best.depth = d;
            best.q = q;
            jbest = j;
        }
    }
    // golden-section refinement on the bracketing cell pair
    double a = std::max(0.0, static_cast<double>(jbest - 1) / (n - 1));
    double b = std::min(1.0, static_cast<double>(jbest + 1) / (n - 1));
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    bool dummy = true;  // lowest branch only
    double f1 = depth_at(x1, dummy), f2 = depth_at(x2, dummy);
    for (int it = 0; it < 40 && b - a > 1e-10; ++it) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a);
            f1 = depth_at(x1, dummy);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a);
            f2 = depth_at(x2, dummy);
        }
    }
    const double xm = f1 < f2 ? x1 : x2;
    const double fm = std::min(f1, f2);
    if (fm < best.depth) {
        best.depth = fm;
        best.q = xm;
    }
    return best;
}

namespace {

// Pump needed for a self-consistent state of depth s at quasimomentum q.
double required_eta(const SystemParams& p, double q, double s) {
    const double photons = s / p.u0;
    const double g = ground_cos2(q, s, p.n_max);
    const double det = p.delta_c - p.n_atoms * p.u0 * g;
    return std::sqrt(photons * (det * det + p.kappa * p.kappa));
}

}  // namespace

PumpCalibration calibrate_pump(const SystemParams& p, double target_min_depth) {
    if (!(target_min_depth > 0)) throw ConfigError({"target_min_depth must be positive"});
    check(p);
    if (!(p.u0 > 0)) throw ConfigError({"calibrate_pump requires u0 > 0"});
    // min_q depth(eta) = target  <=>  eta = max_q required_eta(q, target)
    constexpr int n = 41;
    int jbest = 0;
    double best = -1.0;
    for (int j = 0; j < n; ++j) {
        const double e = required_eta(p, static_cast<double>(j) / (n - 1), target_min_depth);
        if (e > best) {
            best = e;
            jbest = j;
        }
    }
    double a = std::max(0.0, (jbest - 1.0) / (n - 1)), b = std::min(1.0, (jbest + 1.0) / (n - 1));
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = required_eta(p, x1, target_min_depth), f2 = required_eta(p, x2, target_min_depth);
    for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
        if (f1 > f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a);
            f1 = required_eta(p, x1, target_min_depth);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a);
            f2 = required_eta(p, x2, target_min_depth);
        }
    }
    PumpCalibration out;
    out.eta = std::max({best, f1, f2});
    out.q_at_min = f1 >= f2 ? x1 : x2;
    if (best >= std::max(f1, f2)) out.q_at_min = static_cast<double>(jbest) / (n - 1);
    SystemParams pc = p;
    pc.eta = out.eta;
    const auto dm = minimum_depth(pc);
    out.min_depth = dm.depth;
    out.bistable = dm.bistable;
    if (out.bistable) spdlog::warn("calibrate_pump: bistable steady states at eta = {}", out.eta);
    return out;
}

MeanfieldState initial_state(const SystemParams& p) {
    const auto ss = steady_state(p, p.q0);
    return MeanfieldState{ss.alpha_ss, ss.ground(), p.q0, 0.0, 0};
}

void meanfield_rhs(const SystemParams& p, double t, int zone_shift, const VecC& y, VecC& dy) {
    const Eigen::Index k = y.size() - 1;
    const cplx a = y[0];
    const auto c = y.tail(k);
    const double depth = p.u0 * std::norm(a);
    const double q = effective_quasimomentum(p, t, zone_shift);
    const double norm = c.squaredNorm();
    const VecC cc = c;
    const double cos2 = 0.5 + 0.5 * (c.tail(k - 1).conjugate().cwiseProduct(c.head(k - 1))).sum().real() / norm;
    dy.resize(y.size());
    dy[0] = -kI * (-p.delta_c + p.n_atoms * p.u0 * cos2 - kI * p.kappa) * a + p.eta;
    VecC hc = apply_bloch_hamiltonian(q, depth, cc);
    const double mu = cc.dot(hc).real() / norm;
    dy.tail(k) = -kI * (hc - mu * cc);
}

MeanfieldTrajectory evolve(const SystemParams& p, const MeanfieldState& initial, double t_end,
                           const EvolveOptions& opt) {
    check(p);
    if (!(opt.tol > 0)) throw ConfigError({"tol must be positive"});
    if (!(t_end >= 0)) throw ConfigError({"t_end must be non-negative"});
    const Eigen::Index k = initial.coeffs.size();
    if (k != p.basis_size()) throw ConfigError({"initial state basis size does not match n_max"});

    MeanfieldTrajectory traj;
    traj.params = p;
    const long n_out = t_end > 0 ? std::max<long>(1, std::lround(t_end / opt.dt_out)) : 0;
    const double dt = n_out > 0 ? t_end / static_cast<double>(n_out) : 0.0;
    traj.grid.reserve(n_out + 1);
    traj.states.reserve(n_out + 1);
    traj.depth.reserve(n_out + 1);

    VecC y(k + 1);
    y[0] = initial.alpha;
    y.tail(k) = initial.coeffs;
    double t = initial.t;
    int shift = initial.zone_shift;
    const double t0 = initial.t;

    auto push = [&](double tt) {
        MeanfieldState s{y[0], y.tail(k), p.q0, tt, shift};
        traj.grid.push_back(tt);
        traj.depth.push_back(p.u0 * std::norm(s.alpha));
        traj.states.push_back(std::move(s));
    };
    push(t);
    if (n_out == 0) return traj;

    DormandPrince dp(k + 1, opt.tol, opt.tol);
    auto rhs = [&](double tt, const VecC& yy, VecC& dd) { meanfield_rhs(p, tt, shift, yy, dd); };
    double h = std::min(opt.max_step, 1e-3);
    for (long j = 1; j <= n_out; ++j) {
        const double target = t0 + dt * static_cast<double>(j);
        while (t < target - 1e-12 * std::max(1.0, std::abs(target))) {
            const double step = std::min({h, opt.max_step, target - t});
            const auto res = dp.step(rhs, t, y, step);
            if (res.accepted) {
                t += step;
                ++traj.accepted_steps;
                const double drift = std::abs(y.tail(k).squaredNorm() - 1.0);
                traj.max_norm_drift = std::max(traj.max_norm_drift, drift);
                if (drift > 1e-8) throw NumericalError("evolve: normalisation drift beyond 1e-8");
                const double q = effective_quasimomentum(p, t, shift);
                if (q > 1.0 || q <= -1.0) {
                    const int ns = shift + static_cast<int>(std::ceil((q - 1.0) / 2.0));
                    // amplitude pushed past the basis edge leaves the lattice
                    VecC moved = relabel(y.tail(k), shift, ns);
                    const double kept = moved.squaredNorm();
                    traj.edge_loss += y.tail(k).squaredNorm() - kept;
                    y.tail(k) = moved / std::sqrt(kept);
                    shift = ns;
                    dp.reset();
                }
            } else {
                ++traj.rejected_steps;
            }
            h = res.next_step;
            if (h < 1e-13 * std::max(1.0, std::abs(t))) throw NumericalError("evolve: step size underflow");
        }
        t = target;
        push(t);
    }
    return traj;
}

double contrast(const MeanfieldTrajectory& traj) {
    if (traj.size() < 2) throw ConfigError({"contrast: trajectory too short"});
    const double t0 = traj.grid.front();
    double t_stop = traj.grid.back();
    if (traj.params.force != 0.0) {
        const double tb = std::abs(traj.params.bloch_period());
        const double periods = std::floor((t_stop - t0) / tb + 1e-9);
        if (periods < 1) throw ConfigError({"contrast: span shorter than one Bloch period"});
        t_stop = t0 + periods * tb;
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t j = 0; j < traj.size(); ++j) {
        if (traj.grid[j] > t_stop + 1e-9) break;
        lo = std::min(lo, traj.depth[j]);
        hi = std::max(hi, traj.depth[j]);
    }
    return hi + lo > 0 ? (hi - lo) / (hi + lo) : 0.0;
}

DepthSpectrum depth_spectrum(const MeanfieldTrajectory& traj) {
    if (traj.size() < 2) throw ConfigError({"depth_spectrum: trajectory too short"});
    const double dt = traj.dt();
    std::size_t n = traj.size();
    double unit = 1.0;
    if (traj.params.force != 0.0) {
        const double tb = std::abs(traj.params.bloch_period());
        const double span = traj.grid.back() - traj.grid.front();
        const double periods = std::floor(span / tb + 1e-9);
        if (periods >= 1) n = static_cast<std::size_t>(std::lround(periods * tb / dt));
        n = std::min(n, traj.size());
        unit = std::abs(traj.params.omega_b());
    }
    std::vector<cplx> in(n), out;
    for (std::size_t j = 0; j < n; ++j) in[j] = traj.depth[j];
    Eigen::FFT<double> fft;
    fft.fwd(out, in);
    DepthSpectrum s;
    s.frequency.resize(static_cast<Eigen::Index>(n));
    s.magnitude.resize(static_cast<Eigen::Index>(n));
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
        const double m = j <= n / 2 ? static_cast<double>(j) : static_cast<double>(j) - static_cast<double>(n);
        s.frequency[static_cast<Eigen::Index>(j)] = 2.0 * std::numbers::pi * m / (static_cast<double>(n) * dt) / unit;
        s.magnitude[static_cast<Eigen::Index>(j)] = std::abs(out[j]) * scale;
    }
    return s;
}

}  // namespace cb
