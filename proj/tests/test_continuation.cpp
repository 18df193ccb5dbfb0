#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "dualschro/continuation.hpp"
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
const Domain& dom(int n) {
    static std::map<int, Domain> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, prepare_domain(DomainMesh::interval(0, 1, n))).first;
    return it->second;
}

/// Continuum fold for theta1, q = 2, from the time map with the closed-form transform.
double fold_oracle() {
    static const double v = oracle::fold_lambda(
        [](double s) { return std::pow(oracle::f_theta1(s), 3) / 3; }, 1e-2, 1e4);
    return v;
}

}  // namespace

TEST_CASE("sublinear branch grows with lambda", "[continuation]") {
    const auto b = sweep(Nonlinearity(t1(), 0.5), dom(400), log_grid(0.1, 1e3, 9));
    for (const auto& p : b.points) REQUIRE(p.converged);
    for (std::size_t i = 1; i < b.points.size(); ++i) {
        CHECK(b.points[i].sup_u > b.points[i - 1].sup_u);
        CHECK(b.points[i].sup_v > b.points[i - 1].sup_v);
    }
    CHECK(b.points.back().sup_u / b.points.front().sup_u >= 1e2);
    for (const auto& p : b.points) CHECK(p.stability == 1);
}

TEST_CASE("parallel cold starts match the sequential sweep", "[continuation]") {
    SweepOptions opt;
    opt.parallel = true;
    const auto lam = log_grid(0.5, 50, 5);
    const auto a = sweep(Nonlinearity(t1(), 0.5), dom(200), lam);
    const auto b = sweep(Nonlinearity(t1(), 0.5), dom(200), lam, opt);
    for (std::size_t i = 0; i < lam.size(); ++i) CHECK(a.points[i].sup_v == b.points[i].sup_v);
}

TEST_CASE("q=1 branch starts at lambda_1", "[continuation]") {
    const auto& d = dom(400);
    const double l1 = d.eig.lambda;
    const auto b = sweep(Nonlinearity(t1(), 1.0), d, {0.5 * l1, 0.99 * l1, 1.0 * l1, 1.05 * l1, 2 * l1});
    CHECK_FALSE(b.points[0].converged);
    CHECK_FALSE(b.points[1].converged);
    CHECK_FALSE(b.points[2].converged);
    CHECK(b.points[3].converged);
    CHECK(b.points[4].converged);
    CHECK(b.points[4].sup_u > b.points[3].sup_u);
    CHECK_FALSE(b.points[0].note.empty());
    CHECK_FALSE(b.solutions[0].has_value());
}

TEST_CASE("q=1 threshold equals theta(0) lambda_1", "[continuation]") {
    const auto& d = dom(400);
    const auto e = linear_threshold(Nonlinearity(t1(), 1.0), d);
    CHECK(e.predicted == Approx(d.eig.lambda));
    CHECK(e.relative_error() <= 1e-3);
    const auto t4 = build_transform(theta4(), 1e6);
    const auto e4 = linear_threshold(Nonlinearity(t4, 1.0), d);
    CHECK(e4.predicted == Approx((1 + std::log(2.0)) * d.eig.lambda));
    CHECK(e4.relative_error() <= 1e-3);
}

TEST_CASE("fold lambda_* for q=2 against the time map", "[continuation]") {
    const Nonlinearity n(t1(), 2.0);
    const double oracle = fold_oracle();
    const double ls = find_lambda_star(n, dom(400), 0.5 * oracle, 2 * oracle);
    CHECK(ls == Approx(oracle).epsilon(1e-2));
    CHECK_FALSE(fold_probe(n, dom(400), 0.5 * ls));
    CHECK(fold_probe(n, dom(400), 1.01 * ls));
}

TEST_CASE("two ordered roots above the fold", "[continuation]") {
    const Nonlinearity n(t1(), 2.0);
    const double ls = fold_oracle();
    const auto two = two_solutions(n, dom(400), 2 * ls);
    CHECK(two.upper.sup_v > two.lower.sup_v);
    for (std::size_t i = 0; i < two.upper.v.size(); ++i) CHECK(two.upper.v[i] >= two.lower.v[i]);
    CHECK(two.upper_stability == 1);
    CHECK(two.lower_stability == -1);

    const auto b = sweep(n, dom(400), {1.5 * ls, 2 * ls});
    REQUIRE(b.points[0].converged);
    REQUIRE(b.points[1].converged);
    CHECK(b.points[1].sup_u > b.points[0].sup_u);
}

TEST_CASE("unit theta has no fold", "[continuation]") {
    // v -> c v scales lambda by c^{1-q}: a positive solution exists for every lambda.
    CHECK_THROWS_AS(find_lambda_star(Nonlinearity(tu(), 2.0), dom(200), 1.0, 100.0), ContractError);
    CHECK_THROWS_AS(find_lambda_star(Nonlinearity(t1(), 3.0), dom(200), 1.0, 100.0), ContractError);
}

TEST_CASE("q=3 blow-up at (alpha^2/4) lambda_1", "[continuation]") {
    const auto& d = dom(400);
    const auto tr = bifurcation_from_infinity(Nonlinearity(t1(), 3.0), d);
    CHECK(tr.predicted == Approx(d.eig.lambda / 2));
    CHECK(tr.reached_floor);
    CHECK(tr.monotone);
    CHECK(std::abs(tr.estimate - tr.predicted) / tr.predicted <= 2e-2);
    CHECK_THROWS_AS(bifurcation_from_infinity(Nonlinearity(tu(), 3.0), d), ContractError);
}

TEST_CASE("q=5 blow-up as lambda decreases", "[continuation]") {
    const auto& d = dom(400);
    const auto rep = small_lambda_blowup(Nonlinearity(t1(), 5.0), d, d.eig.lambda, 1e-2 * d.eig.lambda);
    CHECK(rep.increasing);
    // v grows like 1/lambda at large amplitude, so u = f(v) like lambda^{-1/2}.
    CHECK(rep.sup_u.back() > 5 * rep.sup_u.front());
    CHECK(rep.growth_exponent < -0.5);
    const auto up = small_lambda_blowup(Nonlinearity(t1(), 5.0), d, d.eig.lambda, 10 * d.eig.lambda, 5);
    CHECK(up.increasing);  // here: sup_u decreases as lambda grows
}

TEST_CASE("cubic scaling of the identity transform", "[continuation]") {
    const auto& d = dom(400);
    const auto b = sweep(Nonlinearity(tu(), 3.0), d, {20.0, 10.0, 5.0});
    for (const auto& p : b.points) REQUIRE(p.converged);
    CHECK(b.points[1].sup_v / b.points[0].sup_v == Approx(std::sqrt(2.0)).epsilon(1e-8));
    CHECK(b.points[2].sup_v / b.points[1].sup_v == Approx(std::sqrt(2.0)).epsilon(1e-8));
}

TEST_CASE("thresholds are stable under mesh refinement", "[continuation]") {
    const Nonlinearity n(t1(), 2.0);
    const double oracle = fold_oracle();
    const double a = find_lambda_star(n, dom(200), 0.5 * oracle, 2 * oracle);
    const double b = find_lambda_star(n, dom(400), 0.5 * oracle, 2 * oracle);
    CHECK(std::abs(a - b) / b <= 1e-2);
    const Nonlinearity n1(t1(), 1.0);
    const double c = linear_threshold(n1, dom(200)).estimate;
    const double e = linear_threshold(n1, dom(400)).estimate;
    CHECK(std::abs(c - e) / e <= 1e-2);
}

TEST_CASE("sweep refuses non-positive lambda", "[continuation]") {
    CHECK_THROWS_AS(sweep(Nonlinearity(t1(), 0.5), dom(200), {-1.0, 1.0}), ContractError);
    CHECK_THROWS_AS(sweep(Nonlinearity(t1(), 0.5), dom(200), {3.0, 1.0, 2.0}), ContractError);
}

TEST_CASE("bisection validates its bracket", "[continuation]") {
    auto pred = [](double l) { return l > 3.0; };
    CHECK(bisect_solvability(pred, 1.0, 10.0, 1e-6) == Approx(3.0).epsilon(1e-6));
    CHECK_THROWS_AS(bisect_solvability(pred, 4.0, 10.0, 1e-6), ContractError);
    CHECK_THROWS_AS(bisect_solvability(pred, 1.0, 2.0, 1e-6), ContractError);
    const auto [lo, hi] = auto_bracket(pred, 1.0);
    CHECK_FALSE(pred(lo));
    CHECK(pred(hi));
}
