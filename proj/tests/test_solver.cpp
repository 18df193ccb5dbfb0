#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "dualschro/continuation.hpp"
#include "dualschro/solver.hpp"
#include "oracles.hpp"

using namespace dualschro;
using Catch::Approx;

namespace {

const DualTransform& t1() {
    static const DualTransform t = build_transform(theta1(), 1e6);
    return t;
}
const DualTransform& tu() {
    static const DualTransform t = build_transform(theta_unit(), 1e6);
    return t;
}
const Domain& dom400() {
    static const Domain d = prepare_domain(DomainMesh::interval(0, 1, 400));
    return d;
}

SolveConfig config(double lambda, double q, const Domain& d = dom400()) {
    SolveConfig c;
    c.lambda = lambda;
    c.q = q;
    c.mesh = d.mesh;
    return c;
}

bool is_sub(const Nonlinearity& n, double lambda, const Field& w) {
    const Field R = pde_residual(n, lambda, w);
    return R.max() <= 0.0;
}

}  // namespace

TEST_CASE("sub-solution certificates", "[solver]") {
    const auto& d = dom400();
    SECTION("sublinear identity transform") {
        const Nonlinearity n(tu(), 0.5);
        const Field w = make_subsolution(config(1.0, 0.5), n, d.eig);
        CHECK(w.max() > 0.0);
        CHECK(is_sub(n, 1.0, w));
    }
    SECTION("q=1 below the threshold has no certificate") {
        const Nonlinearity n(t1(), 1.0);
        CHECK_THROWS_AS(make_subsolution(config(0.9 * d.eig.lambda, 1.0), n, d.eig), CertificateError);
        const Field w = make_subsolution(config(1.2 * d.eig.lambda, 1.0), n, d.eig);
        CHECK(is_sub(n, 1.2 * d.eig.lambda, w));
    }
    SECTION("phi_1^2 for q=2 at large lambda") {
        const Nonlinearity n(t1(), 2.0);
        const Field w = make_subsolution(config(1e3, 2.0), n, d.eig);
        CHECK(is_sub(n, 1e3, w));
        CHECK(w[200] == Approx(d.eig.phi[200] * d.eig.phi[200]));
        CHECK_THROWS_AS(make_subsolution(config(1.0, 2.0), n, d.eig), CertificateError);
    }
    SECTION("no construction for q >= 3") {
        CHECK_THROWS_AS(make_subsolution(config(10.0, 3.0), Nonlinearity(t1(), 3.0), d.eig), CertificateError);
    }
}

TEST_CASE("super-solution certificates", "[solver]") {
    const auto d = prepare_domain(DomainMesh::interval(0, 1, 399));
    REQUIRE(d.torsion.e_L == Approx(0.055));
    REQUIRE(d.torsion.e_M == Approx(0.18));
    const Nonlinearity n(t1(), 0.5);
    const Field w = make_supersolution(config(1.0, 0.5, d), n, d.torsion);
    CHECK(pde_residual(n, 1.0, w).min() >= 0.0);
    const Field small = make_supersolution(config(1e-3, 0.5, d), n, d.torsion);
    CHECK(small.max() < 1e-3 * w.max());
    CHECK_THROWS_AS(make_supersolution(config(10.0, 5.0, d), Nonlinearity(t1(), 5.0), d.torsion), CertificateError);
}

TEST_CASE("sublinear uniqueness from both sides", "[solver]") {
    const auto& d = dom400();
    for (const DualTransform* t : {&tu(), &t1()}) {
        const Nonlinearity n(*t, 0.5);
        SolveConfig c = config(1.0, 0.5);
        const auto a = solve(c, n, d);
        c.start = StartKind::from_super;
        const auto b = solve(c, n, d);
        REQUIRE(a.converged);
        REQUIRE(b.converged);
        CHECK(a.monotone_direction == Direction::increasing);
        CHECK(b.monotone_direction == Direction::decreasing);
        CHECK(max_abs_diff(a.v, b.v) <= 1e-6);
    }
}

TEST_CASE("exact solution is a fixed point", "[solver]") {
    const Nonlinearity n(t1(), 0.5);
    SolveConfig c = config(1.0, 0.5);
    const auto a = solve(c, n, dom400());
    c.start = StartKind::custom;
    c.custom_start = a.v;
    const auto b = solve(c, n, dom400());
    CHECK(b.converged);
    CHECK(b.iterations <= 2);
    CHECK(b.last_step <= 1e-9);
}

TEST_CASE("q=1 solution is sandwiched by its certificates", "[solver]") {
    const auto& d = dom400();
    const Nonlinearity n(t1(), 1.0);
    const double lambda = 1.2 * d.eig.lambda;
    SolveConfig c = config(lambda, 1.0);
    const Field sub = make_subsolution(c, n, d.eig);
    const Field sup = make_supersolution(c, n, d.torsion, &sub);
    const auto r = monotone_iterate(c, n, sub);
    REQUIRE(r.converged);
    for (std::size_t i = 0; i < r.v.size(); ++i) {
        CHECK(sub[i] <= r.v[i]);
        CHECK(r.v[i] <= sup[i]);
    }
    CHECK(r.residual_sup <= residual_bar(c.tol, lambda, r.sup_v));
    CHECK(r.sup_u <= r.sup_v);
}

TEST_CASE("start that is neither sub nor super is rejected", "[solver]") {
    const auto& d = dom400();
    const Nonlinearity n(t1(), 0.5);
    Field bad = d.eig.phi;
    for (std::size_t i = 0; i < bad.size(); i += 2) bad[i] *= 1.5;
    CHECK_THROWS_AS(monotone_iterate(config(1.0, 0.5), n, bad), ContractError);
}

TEST_CASE("too small a shift breaks monotonicity", "[solver]") {
    const auto& d = dom400();
    const Nonlinearity n(t1(), 0.5);
    SolveConfig c = config(1e4, 0.5);
    const Field sup = make_supersolution(c, n, d.torsion);
    c.K = 0.0;
    CHECK_THROWS_AS(monotone_iterate(c, n, sup), MonotonicityError);
}

TEST_CASE("Newton reproduces the cubic shooting solution", "[solver]") {
    const auto& d = dom400();
    const Nonlinearity n(tu(), 3.0);
    const double lambda = 12.0;
    const auto r = newton_solve(config(lambda, 3.0), n, std::sqrt(d.eig.lambda / lambda) * d.eig.phi);
    REQUIRE(r.converged);
    const auto ref = oracle::shoot_power(lambda, 3.0, d.mesh.n);
    double err = 0.0, sup = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        err = std::max(err, std::abs(r.v[i] - ref[i]));
        sup = std::max(sup, ref[i]);
    }
    const double h = d.mesh.h();
    CHECK(err / sup <= 10 * h * h);
}

TEST_CASE("Newton from a root converges immediately", "[solver]") {
    const Nonlinearity n(t1(), 2.0);
    SolveConfig c = config(30.0, 2.0);
    c.start = StartKind::from_super;
    const auto a = solve(c, n, dom400());
    REQUIRE(a.converged);
    const auto b = newton_solve(c, n, a.v);
    CHECK(b.converged);
    CHECK(b.iterations <= 3);
}

TEST_CASE("Newton below the fold finds no positive solution", "[solver]") {
    const auto& d = dom400();
    const Nonlinearity n(t1(), 2.0);
    const double ls = find_lambda_star(n, d, 8.0, 32.0);
    const auto top = detail::maximal_solution(n, d, 1.05 * ls, 1e-9, 10000);
    REQUIRE(top.converged);
    const auto r = newton_solve(config(0.9 * ls, 2.0), n, top.v);
    const bool positive = r.converged && r.v.min() >= 0.0 && r.sup_v > 1e-6;
    CHECK_FALSE(positive);
}

TEST_CASE("Newton refuses q < 1", "[solver]") {
    const auto& d = dom400();
    CHECK_THROWS_AS(newton_solve(config(1.0, 0.5), Nonlinearity(t1(), 0.5), d.eig.phi), ContractError);
}

TEST_CASE("lambda <= 0 is refused", "[solver]") {
    const Nonlinearity n(tu(), 2.0);
    CHECK_THROWS_AS(solve(config(-1.0, 2.0), n, dom400()), ContractError);
    CHECK_THROWS_AS(solve(config(0.0, 2.0), n, dom400()), ContractError);
}

TEST_CASE("a-priori bound", "[solver]") {
    const Nonlinearity n(t1(), 2.0);
    const auto r = detail::maximal_solution(n, dom400(), 30.0, 1e-9, 10000);
    REQUIRE(r.converged);
    const auto b = apriori_bound_check(r, n, std::sqrt(2.0));
    CHECK(b.C == Approx(8.0 * 900.0));
    CHECK(b.holds);
    CHECK(b.margin > 0.0);
    CHECK(b.psi_residual <= 1e-9);
    CHECK_THROWS_AS(apriori_bound_check(r, Nonlinearity(t1(), 3.0), std::sqrt(2.0)), ContractError);
    CHECK_THROWS_AS(apriori_bound_check(r, Nonlinearity(t1(), 1.0), std::sqrt(2.0)), ContractError);
}

TEST_CASE("energy and its gradient", "[solver]") {
    const auto& d = dom400();
    const Nonlinearity n(t1(), 2.0);
    const Field zero(d.mesh);
    CHECK(energy(n, 5.0, zero) == 0.0);
    CHECK(energy_gradient(n, 5.0, zero).max_abs() == 0.0);

    const Field v = 3.0 * d.eig.phi;
    const Field w = Field::sample(d.mesh, [](double x) { return x * x * (1 - x); });
    const Field grad = energy_gradient(n, 5.0, v);
    const double exact = dot(grad, w);
    auto fwd = [&](double t) { return (energy(n, 5.0, v + t * w) - energy(n, 5.0, v)) / t - exact; };
    auto ctr = [&](double t) {
        return (energy(n, 5.0, v + t * w) - energy(n, 5.0, v - t * w)) / (2 * t) - exact;
    };
    const double p_fwd = std::log2(std::abs(fwd(0.02)) / std::abs(fwd(0.01)));
    const double p_ctr = std::log2(std::abs(ctr(0.02)) / std::abs(ctr(0.01)));
    CHECK(p_fwd == Approx(1.0).margin(0.1));
    CHECK(p_ctr >= 1.9);

    SolveConfig c = config(30.0, 2.0);
    c.start = StartKind::from_super;
    const auto r = solve(c, n, d);
    REQUIRE(r.converged);
    CHECK(energy_gradient(n, 30.0, r.v).max_abs() <= c.tol * 31.0);
}

TEST_CASE("recovery u = f(v)", "[solver]") {
    const auto& d = dom400();
    const Field v = 50.0 * d.eig.phi;
    const Field uu = recover_u(tu(), v);
    CHECK(max_abs_diff(uu, v) <= 1e-12);
    const Field u = recover_u(t1(), v);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(u[i]) <= std::abs(v[i]));
    const Field back = invert_u(t1(), u);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(back[i] == Approx(v[i]).epsilon(10 * t1().tol()));
}

TEST_CASE("stability of the two roots above the fold", "[solver]") {
    const auto& d = dom400();
    const Nonlinearity n(t1(), 2.0);
    const auto two = two_solutions(n, d, 40.0);
    CHECK(two.upper_stability == 1);
    CHECK(two.lower_stability == -1);
    CHECK(stability_sign(n, 40.0, two.upper.v) == 1);
}

TEST_CASE("2D sublinear solve", "[solver]") {
    const auto d = prepare_domain(DomainMesh::rectangle(0, 1, 0, 1, 31));
    const Nonlinearity n(t1(), 0.5);
    SolveConfig c = config(5.0, 0.5, d);
    const auto a = solve(c, n, d);
    c.start = StartKind::from_super;
    const auto b = solve(c, n, d);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(max_abs_diff(a.v, b.v) <= 1e-6);
}
