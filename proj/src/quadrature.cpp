#include "irflow/quadrature.hpp"

#include <cmath>

#include "irflow/errors.hpp"

namespace irflow {

// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix of the Legendre
// recurrence, weights are 2 * (first eigenvector component)^2.
Quadrature gauss_legendre(int n) {
    if (n < 1) throw InvalidParams("quadrature order must be >= 1");
    if (n == 1) {
        Quadrature q;
        q.nodes = RVec::Zero(1);
        q.weights = RVec::Constant(1, 2.0);
        return q;
    }
    RMat jacobi = RMat::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const Real b = i / std::sqrt(4.0 * i * i - 1.0);
        jacobi(i, i - 1) = b;
        jacobi(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(jacobi);
    Quadrature q;
    q.nodes = es.eigenvalues();
    q.weights = 2.0 * es.eigenvectors().row(0).array().square();
    return q;
}

Quadrature scaled_to(const Quadrature& q, Real a, Real b) {
    Quadrature out;
    out.nodes = 0.5 * (b - a) * q.nodes.array() + 0.5 * (a + b);
    out.weights = 0.5 * (b - a) * q.weights;
    return out;
}

}  // namespace irflow
