#include <doctest.h>

#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "cavity_bloch/linear_step.hpp"

using namespace cb;

namespace {

MatC random_matrix(Eigen::Index n, double scale, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    MatC m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = scale * cplx(d(gen), d(gen));
    return m;
}

VecC random_vector(Eigen::Index n, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    VecC v(n);
    for (auto& x : v) x = cplx(d(gen), d(gen));
    return v;
}

double rel(const MatC& a, const MatC& b) { return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("magnus4 of a constant generator is A h") {
    const MatC a = random_matrix(6, 1.0, 1);
    CHECK(rel(magnus4(a, a, a, 0.3), a * 0.3) < 1e-15);
}

TEST_CASE("exp_step propagator, source and rows against block-matrix exponentials") {
    const Eigen::Index n = 8;
    const double h = 0.05;
    // dissipative generator with a large norm, as for the cavity block
    MatC x = random_matrix(n, 3.0, 2);
    x.diagonal().array() -= 40.0;
    const MatC omega = x * h;
    const VecC s1 = random_vector(n, 3), s2 = random_vector(n, 4), r = random_vector(n, 5);
    const std::vector<RankOne> src{{s1, s2}};
    const std::vector<VecC> rows{r};
    const ExpStep st = exp_step(omega, h, {src, rows});

    const MatC u_ref = omega.exp();
    CHECK(rel(st.u, u_ref) < 1e-12);

    // Van Loan: exp([[-X, S], [0, X^T]] h) = [[F11, F12], [0, F22]], Q = F22^T F12
    const MatC s = s1 * s2.transpose();
    MatC big = MatC::Zero(2 * n, 2 * n);
    big.topLeftCorner(n, n) = -x;
    big.topRightCorner(n, n) = s;
    big.bottomRightCorner(n, n) = x.transpose();
    const MatC f = (big * h).exp();
    const MatC q_ref = f.bottomRightCorner(n, n).transpose() * f.topRightCorner(n, n);
    CHECK(rel(st.q, q_ref) < 1e-11);

    // int_0^h exp(X s) ds from exp([[X, I], [0, 0]] h)
    MatC aug = MatC::Zero(2 * n, 2 * n);
    aug.topLeftCorner(n, n) = x;
    aug.topRightCorner(n, n) = MatC::Identity(n, n);
    const MatC phi = (aug * h).exp().topRightCorner(n, n);
    const VecC row_ref = (r.transpose() * phi).transpose();
    REQUIRE(st.rows.size() == 1);
    CHECK((st.rows[0] - row_ref).cwiseAbs().maxCoeff() / row_ref.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("magnus4 step is fourth-order accurate for a time-dependent generator") {
    const Eigen::Index n = 4;
    const MatC a0 = random_matrix(n, 1.0, 7), a1 = random_matrix(n, 1.0, 8);
    auto a = [&](double t) -> MatC { return a0 + std::sin(3.0 * t) * a1; };
    auto propagate = [&](int steps) {
        const double h = 1.0 / steps;
        MatC u = MatC::Identity(n, n);
        for (int k = 0; k < steps; ++k) {
            const double t = k * h;
            u = magnus4(a(t), a(t + h / 2), a(t + h), h).exp() * u;
        }
        return u;
    };
    const MatC ref = propagate(4096);
    const double e1 = rel(propagate(16), ref), e2 = rel(propagate(32), ref);
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
}

TEST_CASE("magnus4 source reduces to D for a constant generator") {
    const MatC a = random_matrix(4, 1.0, 9);
    const auto src = magnus4_source(a, a, 0.1, 2.0);
    MatC s = MatC::Zero(4, 4);
    for (const auto& t : src) s += t.x * t.y.transpose();
    MatC d = MatC::Zero(4, 4);
    d(0, 1) = 2.0;
    CHECK((s - d).cwiseAbs().maxCoeff() < 1e-15);
}
