#include "cavity_bloch/linear_step.hpp"

#include <cmath>

namespace cb {

MatC magnus4(const MatC& a0, const MatC& amid, const MatC& a1, double h) {
    MatC omega = (h / 6.0) * (a0 + 4.0 * amid + a1);
    omega.noalias() -= (h * h / 12.0) * (a0 * a1);
    omega.noalias() += (h * h / 12.0) * (a1 * a0);
    return omega;
}

std::vector<RankOne> magnus4_source(const MatC& a0, const MatC& a1, double h, double d12) {
    const Eigen::Index d = a0.rows();
    const VecC e0 = VecC::Unit(d, 0), e1 = VecC::Unit(d, 1);
    const VecC da0 = a1.col(0) - a0.col(0);
    const VecC da1 = a1.col(1) - a0.col(1);
    return {RankOne{d12 * (e0 + (h / 12.0) * da0), e1}, RankOne{(d12 * h / 12.0) * e0, da1}};
}

namespace {

double norm1(const MatC& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); }

}  // namespace

ExpStep exp_step(const MatC& omega, double h, const ExpStepRequest& req) {
    const Eigen::Index d = omega.rows();
    // scale so that the base Taylor step has norm <= 1/4
    const double nrm = norm1(omega);
    int levels = 0;
    while (nrm / std::ldexp(1.0, levels) > 0.25) ++levels;
    const double s0 = h / std::ldexp(1.0, levels);
    const MatC b = omega / std::ldexp(1.0, levels);
    const double bn = nrm / std::ldexp(1.0, levels);

    std::vector<MatC> pw;
    pw.push_back(MatC::Identity(d, d));
    std::vector<double> fact{1.0};
    {
        double term = 1.0;
        for (int j = 1; j < 30; ++j) {
            term *= bn / j;
            pw.push_back(pw.back() * b);
            fact.push_back(fact.back() * j);
            if (term < 1e-18) break;
        }
    }
    const int order = static_cast<int>(pw.size());

    MatC e = MatC::Zero(d, d);
    for (int j = 0; j < order; ++j) e += pw[j] / fact[j];

    ExpStep out;
    const bool source = !req.source.empty();
    if (source) {
        const auto r = static_cast<Eigen::Index>(req.source.size());
        MatC v(d, order * r), w(d, order * r);
        for (Eigen::Index t = 0; t < r; ++t)
            for (int j = 0; j < order; ++j) {
                v.col(t * order + j) = pw[j] * req.source[t].x;
                w.col(t * order + j) = pw[j] * req.source[t].y;
            }
        MatC coef = MatC::Zero(order * r, order * r);
        for (Eigen::Index t = 0; t < r; ++t)
            for (int j = 0; j < order; ++j)
                for (int m = 0; m < order; ++m)
                    coef(t * order + j, t * order + m) = s0 / (fact[j] * fact[m] * (j + m + 1));
        out.q = v * coef * w.transpose();
    } else {
        out.q = MatC::Zero(d, d);
    }

    MatC phi0;
    if (!req.rows.empty()) {
        phi0 = MatC::Zero(d, d);
        for (int j = 0; j < order; ++j) phi0 += pw[j] * (s0 / (fact[j] * (j + 1)));
    }

    std::vector<MatC> level_e;
    level_e.reserve(levels);
    MatC tmp(d, d);
    for (int i = 0; i < levels; ++i) {
        if (source) {
            tmp.noalias() = e * out.q;
            out.q.noalias() += tmp * e.transpose();
        }
        if (!req.rows.empty()) level_e.push_back(e);
        tmp.noalias() = e * e;
        e.swap(tmp);
    }
    out.u = std::move(e);

    out.rows.reserve(req.rows.size());
    for (const VecC& r : req.rows) {
        // r^T (I + E_{L-1}) ... (I + E_0) Phi_0, applied left to right
        VecC v = r;
        for (int i = levels - 1; i >= 0; --i) v += level_e[i].transpose() * v;
        out.rows.push_back(phi0.transpose() * v);
    }
    return out;
}

}  // namespace cb
