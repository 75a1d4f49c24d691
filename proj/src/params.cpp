#include "irflow/params.hpp"

#include <sstream>

namespace irflow {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Direct: return "direct";
        case Strategy::Recursive: return "recursive";
        case Strategy::Both: return "both";
    }
    return "direct";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "direct") return Strategy::Direct;
    if (s == "recursive") return Strategy::Recursive;
    if (s == "both") return Strategy::Both;
    throw InvalidParams("strategy must be direct|recursive|both, got '" + s + "'");
}

void ModelParams::validate() const {
    std::ostringstream err;
    if (!(Lambda > 0)) throw InvalidParams("Lambda must be > 0");
    if (!(epsilon > 0 && epsilon < 1)) throw InvalidParams("epsilon must lie in (0,1)");
    if (J < 0) throw InvalidParams("J must be >= 0");
    if (n_radial < 1 || n_theta < 1 || n_phi < 1)
        throw InvalidParams("quadrature counts must be >= 1");
    if (Nmax < 1) throw InvalidParams("Nmax must be >= 1");
    if (n_quad < 4) throw InvalidParams("n_quad must be >= 4");
    if (dim_cap < 1) throw InvalidParams("dim_cap must be >= 1");
    if (!(tol_eig > 0 && tol_solve > 0 && tol_herm > 0))
        throw InvalidParams("tolerances must be > 0");

    const Real p = P.norm();
    if (!(p < 1.0 / 3.0)) {
        err << "|P| = " << p << " >= 1/3: momentum outside the admissible ball";
        throw InvariantViolation(err.str());
    }
    const Real c_alpha = 1.0 / 3.0 + c_alpha_margin * alpha;
    if (!(0 < rho_minus && rho_minus < mu && mu < rho_plus)) {
        err << "need 0 < rho_minus < mu < rho_plus, got (" << rho_minus << ", " << mu
            << ", " << rho_plus << ")";
        throw InvariantViolation(err.str());
    }
    if (!(rho_plus < 1.0 - c_alpha)) {
        err << "rho_plus = " << rho_plus << " must be < 1 - C_alpha = " << 1.0 - c_alpha;
        throw InvariantViolation(err.str());
    }
    if (!(epsilon < rho_minus / rho_plus)) {
        err << "epsilon = " << epsilon << " must be < rho_minus/rho_plus = "
            << rho_minus / rho_plus;
        throw InvariantViolation(err.str());
    }
    if (!(0 < nu_min && nu_min < nu_max && nu_max < 1))
        throw InvariantViolation("need 0 < nu_min < nu_max < 1");
    if (alpha < 0) throw InvalidParams("alpha must be >= 0");
}

}  // namespace irflow
