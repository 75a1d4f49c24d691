#include "irflow/fock.hpp"

#include <numeric>
#include <string>

#include "irflow/errors.hpp"

namespace irflow {

std::int32_t FockBasis::index_of(const Occupation& occ) const {
    const auto it = lookup.find(occ);
    return it == lookup.end() ? -1 : it->second;
}

int FockBasis::total(std::int32_t state) const {
    const Occupation& occ = states[state];
    return std::accumulate(occ.begin(), occ.end(), 0);
}

long fock_dimension(int n_modes, int Nmax, long dim_cap) {
    // dim = sum_n C(M+n-1, n), accumulated with overflow guards.
    long dim = 0;
    long term = 1;  // C(M-1, 0)
    for (int n = 0; n <= Nmax; ++n) {
        if (n > 0) {
            // C(M+n-1, n) = C(M+n-2, n-1) * (M+n-1) / n
            if (term > dim_cap) throw DimOverflow("per-grade term exceeds cap");
            term = term * (n_modes + n - 1) / n;
        }
        if (n_modes == 0 && n > 0) term = 0;
        dim += term;
        if (dim > dim_cap)
            throw DimOverflow("dim > cap = " + std::to_string(dim_cap) + " at grade " +
                              std::to_string(n));
    }
    return dim;
}

namespace {

void enumerate_grade(int n_modes, int mode, int remaining, Occupation& occ,
                     std::vector<Occupation>& out) {
    if (mode == n_modes - 1) {
        occ[mode] = static_cast<std::uint8_t>(remaining);
        out.push_back(occ);
        return;
    }
    for (int n = remaining; n >= 0; --n) {
        occ[mode] = static_cast<std::uint8_t>(n);
        enumerate_grade(n_modes, mode + 1, remaining - n, occ, out);
    }
    occ[mode] = 0;
}

}  // namespace

FockBasis build_fock_basis(const ModeGrid& grid, int Nmax, long dim_cap) {
    if (Nmax < 0) throw InvalidParams("Nmax must be >= 0");
    FockBasis basis;
    basis.n_modes = grid.n_modes();
    basis.Nmax = Nmax;
    const long dim = fock_dimension(basis.n_modes, Nmax, dim_cap);
    basis.states.reserve(static_cast<size_t>(dim));

    Occupation occ(static_cast<size_t>(basis.n_modes), 0);
    if (basis.n_modes == 0) {
        basis.states.push_back(occ);  // vacuum of the empty grid
    } else {
        for (int n = 0; n <= Nmax; ++n) enumerate_grade(basis.n_modes, 0, n, occ, basis.states);
    }
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(basis.states.size()); ++i)
        basis.lookup.emplace(basis.states[i], i);
    return basis;
}

CVec embed(const FockBasis& small, const FockBasis& big, const CVec& v) {
    if (small.n_modes > big.n_modes || small.Nmax != big.Nmax)
        throw InvalidParams("embed requires a mode-prefix sub-basis with equal Nmax");
    if (v.size() != small.dim()) throw InvalidParams("embed: vector/basis size mismatch");
    CVec out = CVec::Zero(big.dim());
    Occupation padded(static_cast<size_t>(big.n_modes), 0);
    for (Eigen::Index i = 0; i < small.dim(); ++i) {
        const Occupation& occ = small.states[i];
        std::copy(occ.begin(), occ.end(), padded.begin());
        const std::int32_t target = big.index_of(padded);
        if (target < 0) throw InvalidParams("embed: target basis misses a padded state");
        out[target] = v[i];
    }
    return out;
}

Real boundary_weight(const FockBasis& basis, const CVec& v) {
    const Real nrm2 = v.squaredNorm();
    if (nrm2 == 0.0) return 0.0;
    Real w = 0.0;
    for (Eigen::Index i = 0; i < basis.dim(); ++i)
        if (basis.total(static_cast<std::int32_t>(i)) == basis.Nmax) w += std::norm(v[i]);
    return w / nrm2;
}

}  // namespace irflow
