#pragma once

#include <algorithm>
#include <cmath>

#include "cavity_bloch/types.hpp"

namespace cb {

// Embedded Dormand-Prince 5(4) stepper with first-same-as-last reuse.
class DormandPrince {
public:
    struct Result {
        bool accepted = false;
        double error = 0.0;
        double next_step = 0.0;
    };

    DormandPrince(Eigen::Index n, double rtol, double atol) : rtol_(rtol), atol_(atol) {
        for (auto& k : k_) k.resize(n);
        tmp_.resize(n);
        ynew_.resize(n);
    }

    void reset() { have_k1_ = false; }

    // Attempts one step of size h; y is advanced only if accepted.
    template <class Rhs>
    Result step(Rhs&& f, double t, VecC& y, double h) {
        static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                                a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                                a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                                b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                                e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

        if (!have_k1_) {
            f(t, y, k_[0]);
            have_k1_ = true;
        }
        tmp_ = y + h * a21 * k_[0];
        f(t + c2 * h, tmp_, k_[1]);
        tmp_ = y + h * (a31 * k_[0] + a32 * k_[1]);
        f(t + c3 * h, tmp_, k_[2]);
        tmp_ = y + h * (a41 * k_[0] + a42 * k_[1] + a43 * k_[2]);
        f(t + c4 * h, tmp_, k_[3]);
        tmp_ = y + h * (a51 * k_[0] + a52 * k_[1] + a53 * k_[2] + a54 * k_[3]);
        f(t + c5 * h, tmp_, k_[4]);
        tmp_ = y + h * (a61 * k_[0] + a62 * k_[1] + a63 * k_[2] + a64 * k_[3] + a65 * k_[4]);
        f(t + h, tmp_, k_[5]);
        ynew_ = y + h * (b1 * k_[0] + b3 * k_[2] + b4 * k_[3] + b5 * k_[4] + b6 * k_[5]);
        f(t + h, ynew_, k_[6]);
        tmp_ = h * (e1 * k_[0] + e3 * k_[2] + e4 * k_[3] + e5 * k_[4] + e6 * k_[5] + e7 * k_[6]);

        double err = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double sc = atol_ + rtol_ * std::max(std::abs(y[i]), std::abs(ynew_[i]));
            err = std::max(err, std::abs(tmp_[i]) / sc);
        }
        Result r;
        r.error = err;
        const double fac = err > 0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        if (err <= 1.0) {
            r.accepted = true;
            y.swap(ynew_);
            std::swap(k_[0], k_[6]);
            r.next_step = h * std::clamp(fac, 0.2, 5.0);
        } else {
            r.next_step = h * std::clamp(fac, 0.1, 0.9);
        }
        return r;
    }

private:
    double rtol_, atol_;
    bool have_k1_ = false;
    VecC k_[7];
    VecC tmp_, ynew_;
};

}  // namespace cb
