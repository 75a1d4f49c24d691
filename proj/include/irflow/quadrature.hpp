#pragma once

#include "irflow/types.hpp"

namespace irflow {

struct Quadrature {
    RVec nodes;    // ascending
    RVec weights;  // positive, matching nodes
};

// Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree <= 2n-1.
Quadrature gauss_legendre(int n);

// Affine map of a [-1,1] rule onto [a, b].
Quadrature scaled_to(const Quadrature& q, Real a, Real b);

}  // namespace irflow
