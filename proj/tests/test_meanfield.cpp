#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cavity_bloch/meanfield.hpp"

using namespace cb;

namespace {

SystemParams canonical(double u0 = 7e-3, double eta_over_kappa = 30.7) {
    SystemParams p;
    p.kappa = 345.0;
    p.delta_c = -0.75 * p.kappa;
    p.n_atoms = 5e4;
    p.u0 = u0;
    p.eta = eta_over_kappa * p.kappa;
    p.force = kCanonicalForce;
    p.n_max = 8;
    return p;
}

// <psi| cos^2 x |psi> by real-space quadrature of psi(x) = sum c_n e^{i(2n+q)x}
double cos2_by_quadrature(const VecC& c) {
    const int m = 2048;
    const auto k = c.size();
    const auto n_max = (k - 1) / 2;
    double num = 0.0, den = 0.0;
    for (int j = 0; j < m; ++j) {
        const double x = std::numbers::pi * j / m;
        cplx psi = 0.0;
        for (Eigen::Index n = 0; n < k; ++n) psi += c[n] * std::exp(kI * (2.0 * static_cast<double>(n - n_max) * x));
        num += std::norm(psi) * std::cos(x) * std::cos(x);
        den += std::norm(psi);
    }
    return num / den;
}

}  // namespace

TEST_CASE("free-particle bands") {
    const auto b = band_solve(0.3, 0.0, 6);
    // (2n + q)^2 sorted
    std::vector<double> ref;
    for (int n = -6; n <= 6; ++n) ref.push_back((2.0 * n + 0.3) * (2.0 * n + 0.3));
    std::sort(ref.begin(), ref.end());
    for (std::size_t j = 0; j < ref.size(); ++j) CHECK(b.energies[static_cast<Eigen::Index>(j)] == doctest::Approx(ref[j]).epsilon(1e-12));
}

TEST_CASE("lowest band at q = 0 matches Mathieu characteristic values") {
    // -y'' + s cos^2 x y = E y  <=>  Mathieu with q_M = s / 4, E = a_0(q_M) + s / 2
    // a_0(1) = -0.4551386041, a_0(5) = -5.8000460209 (tabulated)
    CHECK(band_solve(0.0, 4.0, 16).energies[0] == doctest::Approx(-0.4551386041 + 2.0).epsilon(1e-9));
    CHECK(band_solve(0.0, 20.0, 16).energies[0] == doctest::Approx(-5.8000460209 + 10.0).epsilon(1e-9));
}

TEST_CASE("cos^2 expectation against quadrature and Hellmann-Feynman") {
    for (const double s : {0.5, 3.0, 12.0}) {
        for (const double q : {0.0, 0.4, 1.0}) {
            const auto b = band_solve(q, s, 10);
            const VecC c = b.vectors.col(0).cast<cplx>();
            CHECK(cos2_expectation(c) == doctest::Approx(cos2_by_quadrature(c)).epsilon(1e-12));
            // dE0/ds = <cos^2>
            const double d = 1e-5;
            const double fd = (band_solve(q, s + d, 10).energies[0] - band_solve(q, s - d, 10).energies[0]) / (2 * d);
            CHECK(ground_cos2(q, s, 10) == doctest::Approx(fd).epsilon(1e-7));
        }
    }
}

TEST_CASE("apply_cos2 is the matrix of cos^2 in the plane-wave basis") {
    const auto b = band_solve(0.2, 2.0, 6);
    const VecC c = b.vectors.col(1).cast<cplx>();
    const VecC hc = apply_cos2(c);
    CHECK(c.dot(hc).real() == doctest::Approx(cos2_by_quadrature(c)).epsilon(1e-12));
    // H c = (kinetic + s cos^2) c
    const VecC h = apply_bloch_hamiltonian(0.2, 2.0, c);
    CHECK((h - b.energies[1] * c).norm() < 1e-10);
}

TEST_CASE("empty lattice steady state is the bare cavity response") {
    auto p = canonical(0.0);
    p.eta = 10.0 * p.kappa;
    const auto s = steady_state(p, 0.0);
    CHECK(s.photons() == doctest::Approx(p.eta * p.eta / (p.delta_c * p.delta_c + p.kappa * p.kappa)).epsilon(1e-12));
    CHECK(count_steady_states(p, 0.0) == 1);
}

TEST_CASE("self-consistency residual vanishes at the steady state") {
    const auto p = canonical();
    for (const double q : {0.0, 0.5, 1.0}) {
        const auto s = steady_state(p, q);
        CHECK(std::abs(fixed_point_residual(p, q, s.photons())) < 1e-8 * s.photons());
        CHECK(s.cos2 == doctest::Approx(ground_cos2(q, s.band.depth, p.n_max)).epsilon(1e-12));
    }
}

TEST_CASE("pump calibration inverts the minimum depth") {
    auto p = canonical(3 * 7e-3);
    const auto cal = calibrate_pump(p, 3.0);
    p.eta = cal.eta;
    CHECK(minimum_depth(p).depth == doctest::Approx(3.0).epsilon(1e-6));
    CHECK_THROWS_AS(calibrate_pump(p, 0.0), ConfigError);
}

TEST_CASE("relabel shifts and drops edges") {
    VecC c(5);
    c << 1.0, 2.0, 3.0, 4.0, 5.0;
    const VecC up = relabel(c, 0, 1);
    CHECK(up[0] == cplx(0.0));
    CHECK(up[1] == cplx(1.0));
    CHECK(up[4] == cplx(4.0));
    CHECK(relabel(up, 1, 0).head(4) == c.head(4));
    CHECK(reduce_to_zone(1.5) == doctest::Approx(-0.5));
    CHECK(reduce_to_zone(1.0) == doctest::Approx(1.0));
    CHECK(reduce_to_zone(-1.0) == doctest::Approx(1.0));
}

TEST_CASE("without force the steady state is stationary") {
    auto p = canonical();
    p.force = 0.0;
    const auto traj = evolve(p, initial_state(p), 5.0, {1e-11, 0.05, 0.05});
    const double n0 = std::norm(traj.states.front().alpha);
    double worst = 0.0;
    for (const auto& s : traj.states) worst = std::max(worst, std::abs(std::norm(s.alpha) / n0 - 1.0));
    CHECK(worst < 1e-7);
    CHECK(traj.max_norm_drift < 1e-9);
}

TEST_CASE("Bloch oscillation moves the quasimomentum by 2 per period") {
    const auto p = canonical();
    const double tb = p.bloch_period();
    const auto traj = evolve(p, initial_state(p), tb, {1e-10, 0.05, 0.05});
    CHECK(traj.states.back().zone_shift == 1);
    CHECK(reduce_to_zone(effective_quasimomentum(p, traj.states.back())) == doctest::Approx(p.q0).epsilon(1e-9));
    CHECK(traj.max_norm_drift < 1e-8);
    const double eps = contrast(traj);
    CHECK(eps > 0.0);
    CHECK(eps < 1.0);
}

TEST_CASE("contrast and depth spectrum of a synthetic depth series") {
    MeanfieldTrajectory traj;
    traj.params = canonical();
    const double tb = traj.params.bloch_period();
    const int n = 256;
    for (int j = 0; j <= 2 * n; ++j) {
        const double t = tb * j / n;
        traj.grid.push_back(t);
        traj.depth.push_back(3.0 + std::cos(traj.params.omega_b() * t) + 0.5 * std::cos(3 * traj.params.omega_b() * t));
        traj.states.push_back({});
    }
    CHECK(contrast(traj) == doctest::Approx((4.5 - 1.5 + 0.0) / 6.0).epsilon(1e-3));
    const auto s = depth_spectrum(traj);
    auto mag_at = [&](double f) {
        for (Eigen::Index j = 0; j < s.frequency.size(); ++j)
            if (std::abs(s.frequency[j] - f) < 1e-9) return s.magnitude[j];
        return -1.0;
    };
    // unitary DFT over 2n samples: amplitude a gives a sqrt(2n) / 2
    CHECK(mag_at(1.0) == doctest::Approx(std::sqrt(2.0 * n) / 2).epsilon(1e-9));
    CHECK(mag_at(3.0) == doctest::Approx(0.5 * std::sqrt(2.0 * n) / 2).epsilon(1e-9));
    CHECK(mag_at(2.0) < 1e-9);
    CHECK(mag_at(0.5) < 1e-9);
}
