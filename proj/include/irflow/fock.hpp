#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "irflow/grid.hpp"
#include "irflow/types.hpp"

namespace irflow {

using Occupation = std::vector<std::uint8_t>;

// Occupation-number basis of the bosonic Fock space over a mode grid, cut at
// total occupation Nmax.  Enumeration is graded (total ascending) and, inside
// a grade, lexicographic with mode 0 most significant; the vacuum is state 0.
struct FockBasis {
    int n_modes = 0;
    int Nmax = 0;
    std::vector<Occupation> states;
    std::map<Occupation, std::int32_t> lookup;

    Eigen::Index dim() const { return static_cast<Eigen::Index>(states.size()); }
    std::int32_t index_of(const Occupation& occ) const;  // -1 if absent
    int total(std::int32_t state) const;
};

// dim = sum_{n=0..Nmax} C(M+n-1, n); throws DimOverflow past the cap.
long fock_dimension(int n_modes, int Nmax, long dim_cap);

FockBasis build_fock_basis(const ModeGrid& grid, int Nmax, long dim_cap);

// Inclusion of a basis over a mode-prefix into a larger one (added modes
// unoccupied).  Requires small.n_modes <= big.n_modes and equal Nmax.
CVec embed(const FockBasis& small, const FockBasis& big, const CVec& v);

// Fraction of |v|^2 carried by states saturating the occupation cap; the
// truncation-leak diagnostic.
Real boundary_weight(const FockBasis& basis, const CVec& v);

}  // namespace irflow
