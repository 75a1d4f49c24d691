#pragma once

#include <complex>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace irflow {

using Real    = double;
using Complex = std::complex<double>;

using Vec3  = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using RVec  = Eigen::VectorXd;
using CVec  = Eigen::VectorXcd;
using RMat  = Eigen::MatrixXd;
using CMat  = Eigen::MatrixXcd;

// Assembled operators are stored row-compressed; column-major copies are made
// only where a direct factorization requires them.
using SpMat    = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using SpMatCol = Eigen::SparseMatrix<Complex, Eigen::ColMajor>;
using Triplet  = Eigen::Triplet<Complex>;

inline constexpr Real kPi = 3.14159265358979323846264338327950288;

}  // namespace irflow
