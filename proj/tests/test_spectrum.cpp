#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "cavity_bloch/spectrum.hpp"

using namespace cb;

namespace {

SystemParams base(double beta) {
    SystemParams p;
    p.kappa = 345.0;
    p.delta_c = -0.75 * p.kappa;
    p.n_atoms = 5e4;
    p.u0 = beta * p.kappa / p.n_atoms;
    p.force = kCanonicalForce;
    p.n_max = 6;
    p.eta = calibrate_pump(p, 3.0).eta;
    return p;
}

}  // namespace

TEST_CASE("empty cavity: bare cavity poles and free-particle excitations") {
    SystemParams p = base(1.0);
    p.u0 = 0.0;
    p.n_max = 4;
    auto modes = steady_state_spectrum(p, 0.0);
    REQUIRE(modes.size() == 2 + 2 * 9);
    std::vector<double> pos;
    for (const auto& m : modes)
        if (m.omega > 1e-9) pos.push_back(m.omega);
    // excitations (2n)^2 above the condensate, each twice, then the cavity at -delta_c
    const std::vector<double> ref{4, 4, 16, 16, 36, 36, 64, 64, -p.delta_c};
    REQUIRE(pos.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(pos[i] == doctest::Approx(ref[i]).epsilon(1e-10));
    int cavity = 0, zero = 0;
    for (const auto& m : modes) {
        if (m.kind == ModeKind::cavity_like) {
            ++cavity;
            CHECK(m.gamma == doctest::Approx(-p.kappa));
            CHECK(std::abs(m.omega) == doctest::Approx(-p.delta_c));
        }
        if (m.kind == ModeKind::zero_mode) ++zero;
    }
    CHECK(cavity == 2);
    CHECK(zero == 2);
}

TEST_CASE("eigenvalues agree with a dense solver and left vectors are biorthonormal") {
    const auto p = base(2.0);
    const double q = 0.3;
    SystemParams pq = p;
    pq.q0 = q;
    const auto ss = steady_state(pq, q);
    const MeanfieldState st{ss.alpha_ss, ss.ground(), q, 0.0, 0};
    const auto fm = build_fluctuation_matrix(pq, st);
    const auto modes = quasiparticle_modes(fm, st);
    Eigen::ComplexEigenSolver<MatC> es(fm.m, false);
    for (const auto& m : modes) {
        double best = 1e300;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
            best = std::min(best, std::abs(es.eigenvalues()[i] - cplx(m.omega, m.gamma)));
        CHECK(best < 1e-9);
        CHECK((fm.m * m.right - cplx(m.omega, m.gamma) * m.right).norm() < 1e-8 * m.right.norm() * fm.m.norm());
        CHECK(std::abs(m.left.dot(m.right) - 1.0) < 1e-8);
    }
    // distinct non-zero modes: l_i^dag r_j = 0
    for (std::size_t i = 0; i < modes.size(); ++i)
        for (std::size_t j = 0; j < modes.size(); ++j) {
            if (i == j || std::abs(modes[i].omega) < 1e-6 || std::abs(modes[j].omega) < 1e-6) continue;
            CHECK(std::abs(modes[i].left.dot(modes[j].right)) < 1e-7);
        }
}

TEST_CASE("positive frequencies come first in ascending order") {
    const auto modes = steady_state_spectrum(base(1.0), 0.5);
    std::size_t npos = 0;
    while (npos < modes.size() && modes[npos].omega > 0) ++npos;
    CHECK(npos > 0);
    for (std::size_t i = 1; i < npos; ++i) CHECK(modes[i].omega >= modes[i - 1].omega);
    const auto br = atomic_branches(modes);
    REQUIRE_FALSE(br.empty());
    CHECK(br.front()->kind != ModeKind::cavity_like);
}

TEST_CASE("vacuum has zero quasiparticle occupation") {
    const auto p = base(1.0);
    const auto st = initial_state(p);
    const auto fm = build_fluctuation_matrix(p, st);
    auto modes = quasiparticle_modes(fm, st);
    const VecR occ = qp_occupations(vacuum_covariance(st), st, modes);
    CHECK(occ.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mode tracking: static grid and permuted input") {
    const auto modes = steady_state_spectrum(base(1.0), 0.2);
    const std::vector<std::vector<QuasiparticleMode>> same(3, modes);
    const auto tr = track_modes(same);
    for (const auto& lab : tr.labels)
        for (std::size_t i = 0; i < lab.size(); ++i) CHECK(lab[i] == static_cast<int>(i));
    auto shuffled = modes;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto tp = track_modes({modes, shuffled});
    // the reversed list gets the reversed labels
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const auto lab = tp.labels[1][i];
        CHECK(std::abs(shuffled[i].omega - modes[static_cast<std::size_t>(lab)].omega) < 1e-12);
    }
}

TEST_CASE("power in range") {
    DepthSpectrum s;
    s.frequency.resize(6);
    s.magnitude.resize(6);
    s.frequency << 0.0, 0.5, 1.0, 2.0, 3.0, -1.0;
    s.magnitude << 10.0, 5.0, 1.0, 2.0, 1.0, 1.0;
    const double wb = 0.25;
    // harmonics 1, 2, 3 at 0.25, 0.5, 0.75 carry 1, 4, 1
    CHECK(power_in_range(s, wb, 10.0, 20.0) == 0.0);
    CHECK(power_in_range(s, wb, 0.0, 1.0) == doctest::Approx(1.0));
    CHECK(power_in_range(s, wb, 0.4, 0.6) == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("resonance range: minimum at the zone edge for weak coupling") {
    SystemParams p = base(0.5);
    const double betas[] = {0.5};
    const auto r = resonance_range(p, betas, 3.0, 21);
    REQUIRE(r.size() == 1);
    CHECK(std::abs(r[0].q_at_min) == doctest::Approx(1.0));
    CHECK(r[0].omega_max > r[0].omega_min);
    // the q envelope is much wider than the q = 0 linewidth
    CHECK(r[0].omega_max - r[0].omega_min > 100.0 * std::abs(r[0].gamma_center));
}
