#pragma once

#include <span>
#include <vector>

#include "cavity_bloch/types.hpp"

namespace cb {

// Fourth-order Magnus generator for dx/dt = A(t) x over one step of length h,
// from A at the start, midpoint and end.
MatC magnus4(const MatC& a0, const MatC& amid, const MatC& a1, double h);

// Rank-one term x y^T of a source matrix.
struct RankOne {
    VecC x, y;
};

// One step of the Lyapunov flow C' = X C + C X^T + S with X = omega / h and
// S = sum_i x_i y_i^T:
//   u    = exp(omega)
//   q    = int_0^h exp(X s) S exp(X^T s) ds
//   rows = r_i^T int_0^h exp(X s) ds  for each requested row r_i
struct ExpStep {
    MatC u;
    MatC q;
    std::vector<VecC> rows;  // stored as column vectors holding the row entries
};

struct ExpStepRequest {
    std::span<const RankOne> source;
    std::span<const VecC> rows;
};

// Source for the fourth-order Magnus step of C' = A C + C A^T + D, A linear in
// time across the step, D = d12 e_0 e_1^T:
//   S = D + (h/12) (dA D + D dA^T),  dA = A(t+h) - A(t)
std::vector<RankOne> magnus4_source(const MatC& a0, const MatC& a1, double h, double d12);

ExpStep exp_step(const MatC& omega, double h, const ExpStepRequest& req);

}  // namespace cb
