#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "irflow/errors.hpp"
#include "irflow/flow.hpp"
#include "irflow/params.hpp"
#include "irflow/verify.hpp"

using namespace irflow;

TEST_CASE("line fit against hand-computed least squares") {
    // Exact line.
    LineFit f = fit_line({0, 1, 2, 3}, {2.0, 2.5, 3.0, 3.5});
    CHECK(f.slope == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(f.intercept == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
    // x = {0,1,2}, y = {0,1,1}: slope 1/2, intercept 1/6, r^2 = 3/4.
    f = fit_line({0, 1, 2}, {0, 1, 1});
    CHECK(f.slope == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(f.intercept == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(f.r2 == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(f.n == 3);
}

TEST_CASE("momentum samplers are deterministic and in-domain") {
    const auto a = sample_ball_momenta(50, 0.32, 1234);
    const auto b = sample_ball_momenta(50, 0.32, 1234);
    REQUIRE(a.size() == 50);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK((a[i] - b[i]).norm() == 0.0);
        CHECK(a[i].norm() < 0.32);
    }
    ModelParams p;
    const auto ks = sample_photon_momenta(p, 40, 77);
    REQUIRE(ks.size() == 40);
    for (const Vec3& k : ks) {
        CHECK(k.norm() > 0.0);
        CHECK(k.norm() <= p.Lambda + 1e-12);
    }
}

TEST_CASE("energy inequality holds on a small sample") {
    ModelParams p;
    p.J = 2;
    const auto Ps = sample_ball_momenta(2, 0.3, 42);
    const auto ks = sample_photon_momenta(p, 3, 43);
    const VerificationReport rep = verify_I4(p, ks, Ps, 2);
    CHECK(rep.passed);
    CHECK(rep.check == "I4_energy_inequality");
    CHECK(!rep.samples.empty());
    // C_alpha stays strictly below the fiber threshold.
    for (const auto& [name, value] : rep.fitted)
        if (name == "C_alpha") CHECK(value < 1.0);
}

TEST_CASE("pull-through residual on the coarse instance") {
    ModelParams p;
    p.J = 2;
    const VerificationReport rep = pull_through_scan(p, 1);
    CHECK(rep.check == "pull_through");
    CHECK(rep.passed);
}

TEST_CASE("photon-number scan input validation and free-theory triviality") {
    ModelParams p;
    CHECK_THROWS_AS(photon_number_scan({}, p), InvalidParams);
    ModelParams f;
    f.alpha = 0.0;
    f.J = 3;
    const FlowResult flow = run_flow(f, {});
    const VerificationReport rep = photon_number_scan(flow.records, f);
    CHECK(rep.passed);  // all occupations are zero: trivially consistent
}

TEST_CASE("gradient bounds at alpha = 0 are exact") {
    ModelParams p;
    p.alpha = 0.0;
    p.J = 2;
    const FlowResult flow = run_flow(p, {});
    const VerificationReport rep = gradient_bounds_scan(flow.records, p, 2);
    CHECK(rep.check == "gradient_bounds");
    CHECK(rep.passed);
}

TEST_CASE("ladder check on the free flow") {
    ModelParams p;
    p.alpha = 0.0;
    p.J = 3;
    const FlowResult flow = run_flow(p, {});
    const VerificationReport rep = ladder_check(flow, p);
    CHECK(rep.check == "convergence_ladder");
    CHECK(rep.passed);
}

TEST_CASE("marginal operator norms match the direct mode sum") {
    ModelParams p;
    p.J = 2;
    const FlowResult flow = run_flow(p, {});
    const MarginalSample ms = marginal_decay_at(p, flow, 0);
    CHECK(ms.evaluated);
    CHECK(std::abs(ms.Z_matrix - ms.Z_direct) <= 1e-10 * std::max(Real(1), ms.Z_direct));
    CHECK(ms.marginal >= 0.0);
    CHECK(std::isfinite(ms.quad_max));
}

TEST_CASE("holder continuity scan on one scale") {
    ModelParams p;
    p.J = 1;
    const VerificationReport rep = holder_scan(p, {0.02, 0.01}, {1});
    CHECK(rep.check == "holder_ladder");
    CHECK(rep.passed);
}
