#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "dualschro/mesh.hpp"

using namespace dualschro;
using Catch::Approx;
using std::numbers::pi;

TEST_CASE("mesh geometry", "[mesh]") {
    const auto m = DomainMesh::interval(0, 1, 399);
    CHECK(m.h() == Approx(1.0 / 400));
    CHECK(m.size() == 399);
    CHECK(m.coord(0, 0) == Approx(1.0 / 400));
    const auto r = DomainMesh::rectangle(0, 2, -1, 1, 9);
    CHECK(r.size() == 81);
    CHECK(r.h(0) == Approx(0.2));
    CHECK(r.index(3, 2) == 21);
    CHECK_THROWS_AS(DomainMesh::interval(1, 0, 10), ContractError);
    CHECK_THROWS_AS(DomainMesh::interval(0, 1, 10, 0.0), ContractError);
    CHECK_THROWS_AS(DomainMesh::interval(0, 1, 0), ContractError);
}

TEST_CASE("discrete eigen identity of the 1D stencil", "[mesh]") {
    const auto m = DomainMesh::interval(0, 1, 99);
    const Field v = Field::sample(m, [](double x) { return std::sin(pi * x); });
    const Field Av = laplacian_apply(m, v);
    const double h = m.h();
    const double mu = (2 - 2 * std::cos(pi * h)) / (h * h);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(Av[i] / v[i] == Approx(mu).epsilon(1e-10));
    CHECK(laplacian_apply(m, Field(m)).max_abs() == 0.0);
    CHECK_THROWS_AS(laplacian_apply(DomainMesh::interval(0, 1, 98), v), ContractError);
}

TEST_CASE("2D stencil on the product eigenfunction", "[mesh]") {
    const auto m = DomainMesh::rectangle(0, 1, 0, 1, 63);
    const Field v = Field::sample(m, [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); });
    const Field Av = laplacian_apply(m, v);
    const double h = m.h();
    const double mu = 2 * (2 - 2 * std::cos(pi * h)) / (h * h);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(Av[i] / v[i] == Approx(mu).epsilon(1e-9));
    CHECK(mu == Approx(2 * pi * pi).epsilon(1e-3));
}

TEST_CASE("shifted Poisson solves", "[mesh]") {
    const auto m = DomainMesh::interval(0, 1, 199);
    const Field w = solve_shifted_poisson(m, Field(m, 1.0), 0.0);
    // The 3-point stencil is exact on quadratics.
    for (int i = 0; i < m.n; ++i) {
        const double x = m.coord(0, i);
        CHECK(w[i] == Approx(x * (1 - x) / 2).epsilon(1e-10));
    }
    CHECK(w.max() == Approx(0.125).epsilon(1e-4));
    CHECK(solve_shifted_poisson(m, Field(m), 3.0).max_abs() == 0.0);
    CHECK_THROWS_AS(solve_shifted_poisson(m, Field(m, 1.0), -1.0), ContractError);

    // Residual contract with a shift, 1D and 2D.
    for (const auto& mesh : {DomainMesh::interval(0, 1, 300), DomainMesh::rectangle(0, 1, 0, 2, 40)}) {
        const Field rhs = Field::sample(mesh, [](double x, double y) { return std::exp(x) + y * y; });
        const double K = 7.5;
        const Field sol = solve_shifted_poisson(mesh, rhs, K);
        Field r = laplacian_apply(mesh, sol);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] += K * sol[i] - rhs[i];
        CHECK(std::sqrt(dot(r, r)) <= 1e-10 * std::sqrt(dot(rhs, rhs)));
    }
}

TEST_CASE("discrete maximum principle and symmetry", "[mesh]") {
    const auto m = DomainMesh::rectangle(-1, 1, -1, 1, 31);
    const Field rhs = Field::sample(m, [](double x, double y) { return std::exp(-10 * (x * x + y * y)); });
    const Field w = solve_shifted_poisson(m, rhs, 0.5);
    CHECK(w.min() >= -1e-12);
    for (int j = 0; j < m.n; ++j)
        for (int i = 0; i < m.n; ++i) {
            CHECK(w[m.index(i, j)] == Approx(w[m.index(m.n - 1 - i, j)]).epsilon(1e-8));
            CHECK(w[m.index(i, j)] == Approx(w[m.index(j, i)]).epsilon(1e-8));
        }
}

TEST_CASE("principal eigenpair", "[mesh]") {
    const auto m = DomainMesh::interval(0, 1, 399);
    const auto e = principal_eigenpair(m, 1);
    const double h = m.h();
    CHECK(e.lambda == Approx((2 - 2 * std::cos(pi * h)) / (h * h)).epsilon(1e-10));
    CHECK(e.lambda == Approx(pi * pi).epsilon(1e-3));
    CHECK(e.phi.max() == 1.0);
    CHECK(e.phi.min() > 0.0);
    Field r = laplacian_apply(m, e.phi);
    r -= e.lambda * e.phi;
    CHECK(r.max_abs() <= 1e-8 * e.lambda);

    const Field rhs = solve_shifted_poisson(m, e.phi, 0.0);
    CHECK(max_abs_diff(rhs, (1.0 / e.lambda) * e.phi) <= 1e-8);

    const auto e2 = principal_eigenpair(m, 2);
    CHECK(e2.lambda == Approx(4 * pi * pi).epsilon(1e-3));
    CHECK(e2.phi.max_abs() == Approx(1.0));
    CHECK_THROWS_AS(principal_eigenpair(m, 0), ContractError);
}

TEST_CASE("2D principal eigenvalue", "[mesh]") {
    const auto e = principal_eigenpair(DomainMesh::rectangle(0, 1, 0, 1, 63), 1);
    CHECK(e.lambda == Approx(2 * pi * pi).epsilon(5e-4));
    CHECK(e.phi.min() > 0.0);
}

TEST_CASE("eigenvalue error is second order", "[mesh]") {
    const double exact = pi * pi;
    const double e1 = principal_eigenpair(DomainMesh::interval(0, 1, 49), 1).lambda - exact;
    const double e2 = principal_eigenpair(DomainMesh::interval(0, 1, 99), 1).lambda - exact;
    CHECK(e1 / e2 == Approx(4.0).epsilon(0.01));
}

TEST_CASE("torsion function of the padded interval", "[mesh]") {
    const auto t = torsion_function(DomainMesh::interval(0, 1, 399));
    CHECK(t.pad_nodes == 40);
    CHECK(t.e_L == Approx(0.055).epsilon(1e-10));
    CHECK(t.e_M == Approx(0.18).epsilon(1e-10));
    CHECK(t.e_L > 0.0);
    CHECK(t.on_D.min() >= 0.0);
    for (int i = 0; i < t.padded.n; ++i) {
        const double x = t.padded.coord(0, i);
        CHECK(t.on_D[i] == Approx((x + 0.1) * (1.1 - x) / 2).epsilon(1e-9));
    }
}

TEST_CASE("torsion function in 2D", "[mesh]") {
    const auto t = torsion_function(DomainMesh::rectangle(0, 1, 0, 1, 39, 0.1));
    CHECK(t.e_L > 0.0);
    CHECK(t.e_M > t.e_L);
    CHECK(t.on_D.min() >= 0.0);
    CHECK(t.on_omega.max() == Approx(t.e_M));
}

TEST_CASE("field arithmetic", "[mesh]") {
    const auto m = DomainMesh::interval(0, 1, 4);
    Field a(m, 2.0), b(m, 0.5);
    CHECK((a + b)[0] == 2.5);
    CHECK((a - b)[3] == 1.5);
    CHECK((3.0 * b)[2] == 1.5);
    CHECK(inner(a, b) == Approx(0.2 * 4));
    CHECK_THROWS_AS(a += Field(DomainMesh::interval(0, 1, 5)), ContractError);
    CHECK_THROWS_AS(Field(m, std::vector<double>(3)), ContractError);
}
