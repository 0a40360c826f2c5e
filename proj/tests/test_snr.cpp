#include <doctest.h>

#include <cmath>

#include "cavity_bloch/snr.hpp"

using namespace cb;

namespace {

SystemParams base(double beta, int n_max = 5) {
    SystemParams p;
    p.kappa = 345.0;
    p.delta_c = -0.75 * p.kappa;
    p.n_atoms = 5e4;
    p.u0 = beta * p.kappa / p.n_atoms;
    p.force = kCanonicalForce;
    p.n_max = n_max;
    p.eta = calibrate_pump(p, 3.0).eta;
    return p;
}

struct Setup {
    SystemParams p;
    MeanfieldTrajectory traj;
    double h = 0.0;
    double t_end = 0.0;
};

Setup setup(const SystemParams& p, double periods, double max_step) {
    Setup s;
    s.p = p;
    s.h = aligned_step(p, max_step, 64);
    s.t_end = periods * p.bloch_period();
    s.traj = evolve(p, initial_state(p), s.t_end, {1e-10, 0.5 * s.h, 0.05});
    return s;
}

}  // namespace

TEST_CASE("analytic SNR") {
    CHECK(snr_analytic(0.2, 1000.0, 3.0) == doctest::Approx(0.04 * 1000.0 * 3.0 / 2.0));
    CHECK_THROWS_AS(snr_analytic(1.5, 1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(snr_analytic(0.5, 1.0, 0.0), ConfigError);
}

TEST_CASE("detector shot noise for a constant photon number") {
    MeanfieldTrajectory traj;
    traj.params = base(1.0);
    const double n = 400.0, w = 0.25, tb = 8.0 * std::numbers::pi;
    const int m = 4000;
    for (int j = 0; j <= m; ++j) {
        traj.grid.push_back(2.0 * tb * j / m);
        MeanfieldState s;
        s.alpha = std::sqrt(n);
        traj.states.push_back(s);
        traj.depth.push_back(0.0);
    }
    const auto r = snr_detector_shot(traj, w, 2.0 * tb);
    // over whole periods: int cos = 0, int cos^2 = T / 2
    CHECK(std::abs(r.signal) < 1e-9 * traj.params.kappa * n);
    CHECK(r.variance == doctest::Approx(traj.params.kappa * n * tb).epsilon(1e-9));
    CHECK_THROWS_AS(snr_detector_shot(traj, w, 3.0 * tb), ConfigError);
}

TEST_CASE("fluctuations off reduces exactly to the detector-shot SNR") {
    const auto s = setup(base(1.0), 0.5, 0.02);
    TwoTimeOptions o;
    o.linear.step = s.h;
    o.fluctuations_off = true;
    const auto run = two_time_grid(s.p, s.traj, o);
    const auto full = snr_full(run.grid, s.traj, s.p.omega_b(), s.t_end);
    const auto ds = snr_detector_shot(s.traj, s.p.omega_b(), s.t_end);
    CHECK(full.signal == ds.signal);
    CHECK(full.variance == ds.variance);
    CHECK(full.snr == ds.snr);
}

TEST_CASE("coherent field without atoms has Poissonian counts") {
    auto p = base(1.0);
    p.u0 = 0.0;
    p.eta = 10.0 * p.kappa;
    const auto s = setup(p, 0.25, 0.02);
    TwoTimeOptions o;
    o.linear.step = s.h;
    const auto run = two_time_grid(p, s.traj, o);
    const auto full = snr_full(run.grid, s.traj, p.omega_b(), s.t_end);
    const auto ds = snr_detector_shot(s.traj, p.omega_b(), s.t_end);
    CHECK(full.snr == doctest::Approx(ds.snr).epsilon(1e-12));
    for (const auto& c : run.grid.correlation)
        for (const double v : c.values) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("two-time blocks: equal-time diagonal, conjugation, kernel consistency") {
    const auto s = setup(base(2.0), 0.25, 0.02);
    TwoTimeOptions o;
    o.linear.step = s.h;
    o.linear.snapshot_stride = 1;
    const auto run = two_time_grid(s.p, s.traj, o);
    const auto& g = run.grid;
    REQUIRE(g.blocks_stored);
    const auto stride = static_cast<std::size_t>(g.origin_stride);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const MatC& c = run.linear.snapshots[i * stride].c;
        const auto d = g.lam(i, i);
        CHECK(std::abs(d[0] - c(0, 0)) < 1e-10);
        CHECK(std::abs(d[1] - c(0, 1)) < 1e-10);
        CHECK(std::abs(d[3] - c(1, 1)) < 1e-10);
        // stored kernel from the running vector equals the block reconstruction
        const cplx a = s.traj.states[2 * i * stride].alpha;
        CHECK(std::abs(g.kernel_from_blocks(i, i, a, a) - run.kernel_diag[i * stride]) < 1e-9);
    }
    // Lambda(t2, t1)_{ab} = conj Lambda(t1, t2)_{Tb, Ta}
    const auto fwd = g.lam(1, 5), back = g.lam(5, 1);
    CHECK(std::abs(back[0] - std::conj(fwd[3])) < 1e-15);
    CHECK(std::abs(back[1] - std::conj(fwd[1])) < 1e-15);
    CHECK(std::abs(back[3] - std::conj(fwd[0])) < 1e-15);
    CHECK(std::abs(g.xi(2, 2) - 0.5 * std::sqrt(s.p.kappa)) < 1e-15);
    CHECK_THROWS_AS((void)g.xi(3, 2), ConfigError);
}

TEST_CASE("frozen generator: propagator blocks depend on the time difference only") {
    auto p = base(1.0);
    p.force = 0.0;
    Setup s;
    s.p = p;
    s.h = 0.01;
    s.t_end = 2.0;
    s.traj = evolve(p, initial_state(p), s.t_end, {1e-12, 0.5 * s.h, 0.01});
    TwoTimeOptions o;
    o.linear.step = s.h;
    o.origin_spacing = 0.2;
    const auto run = two_time_grid(p, s.traj, o);
    const auto& g = run.grid;
    for (std::size_t lag = 1; lag < 4; ++lag) {
        const auto a = g.g_blocks[0 * g.size() + lag];
        const auto b = g.g_blocks[3 * g.size() + 3 + lag];
        for (int e = 0; e < 4; ++e) CHECK(std::abs(a[e] - b[e]) < 1e-8);
    }
}

TEST_CASE("under Bloch oscillation correlations are not stationary") {
    const auto s = setup(base(2.0), 0.5, 0.02);
    TwoTimeOptions o;
    o.linear.step = s.h;
    const auto run = two_time_grid(s.p, s.traj, o);
    const auto& g = run.grid;
    const auto a = g.lam(0, 2), b = g.lam(10, 12);
    CHECK(std::abs(a[1] - b[1]) > 1e-3 * std::abs(a[1]));
}

TEST_CASE("correlation term against a direct double quadrature of the blocks") {
    // small kappa so that the coarse quadrature resolves the cavity ridge
    SystemParams p;
    p.kappa = 20.0;
    p.delta_c = -15.0;
    p.n_atoms = 2000;
    p.u0 = 0.5 * p.kappa / p.n_atoms;
    p.force = kCanonicalForce;
    p.n_max = 4;
    p.eta = calibrate_pump(p, 3.0).eta;
    const double h = aligned_step(p, 0.002, 2048);
    const double t_end = 0.125 * p.bloch_period();
    const auto traj = evolve(p, initial_state(p), t_end, {1e-11, 0.5 * h, 0.05});
    TwoTimeOptions o;
    o.linear.step = h;
    o.points_per_period = 2048;
    const auto run = two_time_grid(p, traj, o);
    const auto& g = run.grid;
    const double w = p.omega_b();
    const std::size_t n = g.size();
    const double dt = g.coarse_times[1] - g.coarse_times[0];
    const auto stride = static_cast<std::size_t>(g.origin_stride);
    // trapezoid over the triangle L >= E
    double ref = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double wt = dt * dt;
            if (i == 0 || i == n - 1) wt *= 0.5;
            if (j == n - 1) wt *= 0.5;
            if (j == i) wt *= 0.5;
            const cplx ae = traj.states[2 * i * stride].alpha, al = traj.states[2 * j * stride].alpha;
            ref += wt * std::cos(w * g.coarse_times[i]) * std::cos(w * g.coarse_times[j]) *
                   g.kernel_from_blocks(i, j, ae, al).real();
        }
    const auto* cs = g.find(w, 1);
    REQUIRE(cs != nullptr);
    const double got = cs->values.back();
    CHECK(std::abs(got - ref) < 2e-2 * std::abs(ref));
}

TEST_CASE("origin-density halving and SNR below detector shot at moderate coupling") {
    const auto s = setup(base(3.0), 1.0, 0.02);
    TwoTimeOptions o;
    o.linear.step = s.h;
    o.store_blocks = false;
    const auto run = two_time_grid(s.p, s.traj, o);
    const auto f1 = snr_full(run.grid, s.traj, s.p.omega_b(), s.t_end, 1);
    const auto f2 = snr_full(run.grid, s.traj, s.p.omega_b(), s.t_end, 2);
    const auto ds = snr_detector_shot(s.traj, s.p.omega_b(), s.t_end);
    CHECK(std::abs(f1.snr - f2.snr) < 0.05 * f1.snr);
    CHECK(f1.snr < ds.snr);
    CHECK_THROWS_AS(snr_full(run.grid, s.traj, 0.123, s.t_end), ConfigError);
}

TEST_CASE("memory budget is enforced") {
    const auto s = setup(base(1.0), 0.25, 0.02);
    TwoTimeOptions o;
    o.linear.step = s.h;
    o.memory_budget_bytes = 1e3;
    try {
        two_time_grid(s.p, s.traj, o);
        FAIL("expected ResourceError");
    } catch (const ResourceError& e) {
        CHECK(e.required_bytes > e.available_bytes);
    }
}

TEST_CASE("scan points and failures") {
    SystemParams b = base(1.0);
    SnrSettings st;
    const auto pb = scan_point_params(b, ScanAxis::beta, 2.0, st);
    CHECK(pb.beta() == doctest::Approx(2.0));
    CHECK(minimum_depth(pb).depth == doctest::Approx(3.0).epsilon(1e-6));
    const auto pn = scan_point_params(b, ScanAxis::n_atoms, 1e5, st);
    CHECK(pn.n_atoms == 1e5);
    CHECK(pn.beta() == doctest::Approx(st.fixed_beta));
    const auto pd = scan_point_params(b, ScanAxis::depth, 5.0, st);
    CHECK(minimum_depth(pd).depth == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(parse_axis("beta") == ScanAxis::beta);
    CHECK_FALSE(parse_axis("gamma").has_value());
    // a failing point is flagged and the scan continues
    const double values[] = {-1.0};
    const auto rows = snr_scan(b, ScanAxis::beta, values, st);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].failed);
    CHECK_FALSE(rows[0].error.empty());
}
