#pragma once

#include <complex>

#include <Eigen/Dense>

namespace cb {

using cplx = std::complex<double>;
using VecC = Eigen::VectorXcd;
using MatC = Eigen::MatrixXcd;
using VecR = Eigen::VectorXd;
using MatR = Eigen::MatrixXd;

inline constexpr cplx kI{0.0, 1.0};

}  // namespace cb
