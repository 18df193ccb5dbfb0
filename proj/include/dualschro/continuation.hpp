#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dualschro/errors.hpp"
#include "dualschro/solver.hpp"

namespace dualschro {

struct BranchPoint {
    double lambda = 0.0;
    double sup_v = 0.0, sup_u = 0.0;
    double energy = 0.0;
    int stability = 0;  ///< sign of the smallest eigenvalue of -Delta_h - lambda diag(g'(v))
    bool converged = false;
    std::string branch_id;
    double residual = 0.0;
    std::string note;  ///< failure reason for non-converged markers
};

struct Branch {
    std::vector<BranchPoint> points;
    std::vector<std::optional<Field>> solutions;  ///< v at each point when converged
};

struct SweepOptions {
    std::string branch_id = "main";
    double tol = 1e-9;
    int max_iter = 10000;
    bool parallel = false;  ///< cold-start parallel mode, q <= 1 only
};

namespace detail {

inline BranchPoint make_point(const Nonlinearity& n, const SolveReport& r, const std::string& id) {
    BranchPoint p;
    p.lambda = r.lambda;
    p.branch_id = id;
    p.converged = r.converged;
    p.residual = r.residual_sup;
    p.note = r.converged ? "" : (r.message.empty() ? to_string(r.status) : r.message);
    if (r.v.size() > 0) {
        p.sup_v = r.sup_v;
        p.sup_u = r.sup_u;
        p.energy = r.energy;
    }
    if (r.converged) {
        // Re-check the residual invariant on ingestion.
        const double res = pde_residual(n, r.lambda, r.v).max_abs();
        if (res > residual_bar(1e-9, r.lambda, r.sup_v) * 10.0 + r.residual_sup)
            throw NumericalError("branch point fails the residual invariant on ingestion");
        p.stability = stability_sign(n, r.lambda, r.v);
    }
    return p;
}

inline BranchPoint failed_point(double lambda, const std::string& id, const std::string& why) {
    BranchPoint p;
    p.lambda = lambda;
    p.branch_id = id;
    p.converged = false;
    p.note = why;
    return p;
}

/// Amplitude A with g(A)/A = target, searched on a log scale; empty when none exists below the table extent.
inline std::optional<double> amplitude_for_slope(const Nonlinearity& n, double target) {
    const auto grid = log_grid(1e-8, n.transform().s_max() * 0.5, 2000);
    double prev_s = grid.front();
    double prev = n.g(prev_s) / prev_s - target;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double s = grid[i];
        const double cur = n.g(s) / s - target;
        if ((prev < 0.0) != (cur < 0.0)) {
            double a = prev_s, b = s, fa = prev;
            for (int k = 0; k < 80; ++k) {
                const double m = std::sqrt(a * b);
                const double fm = n.g(m) / m - target;
                if ((fa < 0.0) == (fm < 0.0)) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            return std::sqrt(a * b);
        }
        prev_s = s;
        prev = cur;
    }
    return std::nullopt;
}

inline SolveConfig base_config(const Domain& dom, const Nonlinearity& n, double lambda, double tol, int max_iter) {
    SolveConfig c;
    c.lambda = lambda;
    c.q = n.q();
    c.mesh = dom.mesh;
    c.tol = tol;
    c.max_iter = max_iter;
    return c;
}

/// Newton start A phi_1 from the linearized balance lambda g(A)/A = lambda_1.
inline Field linearized_guess(const Nonlinearity& n, const Domain& dom, double lambda) {
    const auto A = amplitude_for_slope(n, dom.eig.lambda / lambda);
    if (!A) throw CertificateError("no amplitude with lambda g(A)/A = lambda_1 at this lambda");
    return *A * dom.eig.phi;
}

/// Maximal solution: monotone iteration down from the super-solution, then a Newton polish.
inline SolveReport maximal_solution(const Nonlinearity& n, const Domain& dom, double lambda, double tol,
                                    int max_iter) {
    SolveConfig c = base_config(dom, n, lambda, tol, max_iter);
    c.start = StartKind::from_super;
    SolveReport r = solve(c, n, dom);
    if (r.converged && n.q() >= 1.0 && r.sup_v > 1e-6) {
        SolveReport polished = newton_solve(c, n, r.v);
        if (polished.converged) {
            polished.monotone_direction = r.monotone_direction;
            polished.iterations += r.iterations;
            polished.K = r.K;
            return polished;
        }
    }
    return r;
}

inline bool is_positive(const Field& v, double sup) { return v.min() >= -1e-9 * std::max(1.0, sup) && sup > 1e-6; }

}  // namespace detail

/// Regime-dispatched sweep over sorted positive lambdas.
///   q <= 1: monotone iteration from the sub-solution (unique positive solution);
///   1 < q < 3: maximal solution (monotone from super + Newton polish);
///   q >= 3: Newton continuation with a secant predictor.
inline Branch sweep(const Nonlinearity& n, const Domain& dom, const std::vector<double>& lambdas,
                    const SweepOptions& opt = {}) {
    for (double l : lambdas)
        if (sign_guard(l) == SignDecision::refuse)
            throw ContractError("sweep: lambda <= 0 has no nontrivial solution; refusing");
    const bool ascending = std::is_sorted(lambdas.begin(), lambdas.end());
    const bool descending = std::is_sorted(lambdas.rbegin(), lambdas.rend());
    if (!ascending && !descending) throw ContractError("sweep: lambdas must be sorted");

    Branch out;
    out.points.resize(lambdas.size());
    out.solutions.resize(lambdas.size());
    const double q = n.q();

    auto cold = [&](std::size_t i) {
        const double l = lambdas[i];
        try {
            SolveReport r;
            if (q <= 1.0) {
                SolveConfig c = detail::base_config(dom, n, l, opt.tol, opt.max_iter);
                c.start = StartKind::from_sub;
                r = solve(c, n, dom);
            } else {
                r = detail::maximal_solution(n, dom, l, opt.tol, opt.max_iter);
                if (r.converged && !detail::is_positive(r.v, r.sup_v)) {
                    out.points[i] = detail::failed_point(l, opt.branch_id, "iteration collapsed to the trivial solution");
                    return;
                }
            }
            out.points[i] = detail::make_point(n, r, opt.branch_id);
            if (r.converged) out.solutions[i] = r.v;
        } catch (const Error& e) {
            out.points[i] = detail::failed_point(l, opt.branch_id, e.what());
        }
    };

    if (q < 3.0) {
        if (opt.parallel && q <= 1.0) {
            const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
            std::vector<std::future<void>> jobs;
            for (std::size_t w = 0; w < workers; ++w)
                jobs.push_back(std::async(std::launch::async, [&, w] {
                    for (std::size_t i = w; i < lambdas.size(); i += workers) cold(i);
                }));
            for (auto& j : jobs) j.get();
        } else {
            for (std::size_t i = 0; i < lambdas.size(); ++i) cold(i);
        }
        return out;
    }

    // Newton continuation.
    std::optional<Field> prev, prev2;
    double lprev = 0.0, lprev2 = 0.0;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        const double l = lambdas[i];
        try {
            Field guess;
            if (prev && prev2) {
                const double w = (l - lprev) / (lprev - lprev2);
                guess = *prev + w * (*prev - *prev2);
            } else if (prev) {
                guess = *prev;
            } else {
                guess = detail::linearized_guess(n, dom, l);
            }
            SolveConfig c = detail::base_config(dom, n, l, opt.tol, opt.max_iter);
            SolveReport r = newton_solve(c, n, guess);
            if (!r.converged && prev) r = newton_solve(c, n, *prev);
            if (r.converged && !detail::is_positive(r.v, r.sup_v)) {
                out.points[i] = detail::failed_point(l, opt.branch_id, "Newton left the positive cone");
                continue;
            }
            out.points[i] = detail::make_point(n, r, opt.branch_id);
            if (r.converged) {
                out.solutions[i] = r.v;
                prev2 = prev;
                lprev2 = lprev;
                prev = r.v;
                lprev = l;
            }
        } catch (const Error& e) {
            out.points[i] = detail::failed_point(l, opt.branch_id, e.what());
        }
    }
    return out;
}

struct BisectionOptions {
    double rel_width = 1e-3;
    double tol = 1e-9;
    int probe_budget = 10000;  ///< monotone iterations per solvability probe
};

/// Bisection on a monotone solvability predicate (false below, true above).
inline double bisect_solvability(const std::function<bool(double)>& solvable, double lo, double hi,
                                 double rel_width) {
    if (!(lo > 0.0 && hi > lo)) throw ContractError("bisection: need 0 < lo < hi");
    if (solvable(lo)) throw ContractError("bisection: bracket invalid, solvable at the lower end");
    if (!solvable(hi)) throw ContractError("bisection: bracket invalid, not solvable at the upper end");
    while ((hi - lo) > rel_width * 0.5 * (hi + lo)) {
        const double mid = 0.5 * (lo + hi);
        (solvable(mid) ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Expanding search for a bracket [lo, hi] of a monotone predicate, starting at `seed`.
inline std::pair<double, double> auto_bracket(const std::function<bool(double)>& solvable, double seed) {
    double hi = seed;
    for (int k = 0; k < 40 && !solvable(hi); ++k) hi *= 2.0;
    if (!solvable(hi)) throw NumericalError("auto_bracket: no solvable lambda found");
    double lo = hi * 0.5;
    for (int k = 0; k < 60 && solvable(lo); ++k) lo *= 0.5;
    if (solvable(lo)) throw NumericalError("auto_bracket: solvable for every probed lambda");
    return {lo, 2.0 * lo};
}

/// Solvability probe for q in (1, 3): monotone iteration from the super-solution
/// within the budget converges to a positive solution confirmed by Newton.
inline bool fold_probe(const Nonlinearity& n, const Domain& dom, double lambda, const BisectionOptions& opt = {}) {
    try {
        const SolveReport r = detail::maximal_solution(n, dom, lambda, opt.tol, opt.probe_budget);
        return r.converged && detail::is_positive(r.v, r.sup_v);
    } catch (const CertificateError&) {
        return false;
    } catch (const MonotonicityError&) {
        return false;
    }
}

/// Fold value lambda_* for q in (1, 3) by bisection on solvability within [lo, hi].
inline double find_lambda_star(const Nonlinearity& n, const Domain& dom, double lo, double hi,
                               const BisectionOptions& opt = {}) {
    if (!(n.q() > 1.0 && n.q() < 3.0)) throw ContractError("find_lambda_star: requires q in (1, 3)");
    if (!n.theta().alpha)
        throw ContractError("find_lambda_star: theta without quadratic growth has no fold (no super-solution)");
    return bisect_solvability([&](double l) { return fold_probe(n, dom, l, opt); }, lo, hi, opt.rel_width);
}

/// Solvability for q = 1: an ordered pair of certificates eps phi_1 <= K e exists
/// (only the sub-solution when theta has no quadratic growth).
inline bool linear_probe(const Nonlinearity& n, const Domain& dom, double lambda) {
    SolveConfig c = detail::base_config(dom, n, lambda, 1e-9, 10000);
    try {
        const Field sub = make_subsolution(c, n, dom.eig);
        if (n.theta().alpha) make_supersolution(c, n, dom.torsion, &sub);
        return true;
    } catch (const CertificateError&) {
        return false;
    }
}

struct ThresholdEstimate {
    double estimate = 0.0;
    double predicted = 0.0;
    double relative_error() const { return std::abs(estimate - predicted) / predicted; }
};

/// Existence threshold for q = 1 by bisection on certificate solvability; predicted theta(0) lambda_1.
inline ThresholdEstimate linear_threshold(const Nonlinearity& n, const Domain& dom, double rel_width = 1e-4) {
    if (n.q() != 1.0) throw ContractError("linear_threshold: requires q = 1");
    auto probe = [&](double l) { return linear_probe(n, dom, l); };
    const auto [lo, hi] = auto_bracket(probe, 1.0);
    return {bisect_solvability(probe, lo, hi, rel_width), n.theta().eval(0.0) * dom.eig.lambda};
}

struct BlowupTrace {
    std::vector<double> lambda, sup_v, sup_u;
    double estimate = 0.0;   ///< extrapolated zero of 1/sup_v
    double predicted = 0.0;  ///< (alpha^2/4) lambda_1
    bool reached_floor = false;
    bool monotone = true;  ///< sup_v increases at every accepted step
    std::vector<Field> solutions;  ///< v at each accepted lambda
    double relative_error() const { return std::abs(estimate - predicted) / predicted; }
};

struct BlowupOptions {
    double floor = 1e3;       ///< sup_v counted as numerical blow-up
    double start_factor = 2;  ///< start at start_factor * lambda_1
    double tol = 1e-9;
    int max_steps = 2000;
    std::size_t fit_points = 4;
};

namespace detail {

/// Least-squares line y = a + b x; returns the root -a/b.
inline double linear_root(const std::vector<double>& x, const std::vector<double>& y) {
    const double m = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double b = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double a = (sy - b * sx) / m;
    return -a / b;
}

}  // namespace detail

/// Descend lambda along the q = 3 branch with adaptive step halving until sup_v
/// exceeds the blow-up floor, then extrapolate 1/sup_v linearly in lambda to zero.
inline BlowupTrace bifurcation_from_infinity(const Nonlinearity& n, const Domain& dom, const BlowupOptions& opt = {}) {
    if (n.q() != 3.0) throw ContractError("bifurcation_from_infinity: requires q = 3");
    if (!n.theta().alpha) throw ContractError("bifurcation_from_infinity: theta has no asymptotic constant alpha");
    const double alpha = *n.theta().alpha;
    BlowupTrace tr;
    tr.predicted = alpha * alpha / 4.0 * dom.eig.lambda;

    double lambda = opt.start_factor * dom.eig.lambda;
    SolveConfig c = detail::base_config(dom, n, lambda, opt.tol, 100);
    SolveReport r = newton_solve(c, n, detail::linearized_guess(n, dom, lambda));
    if (!r.converged) throw NumericalError("bifurcation_from_infinity: no starting solution");
    Field v = r.v, vprev = r.v;
    double lprev = lambda;
    tr.lambda.push_back(lambda);
    tr.sup_v.push_back(r.sup_v);
    tr.sup_u.push_back(r.sup_u);
    tr.solutions.push_back(r.v);

    double step = 0.05 * lambda;
    for (int k = 0; k < opt.max_steps && r.sup_v <= opt.floor; ++k) {
        if (step < 1e-12 * lambda) throw NumericalError("bifurcation_from_infinity: branch lost before the blow-up floor");
        const double next = lambda - step;
        Field guess = v;
        if (lprev != lambda) guess += ((next - lambda) / (lambda - lprev)) * (v - vprev);
        c.lambda = next;
        SolveReport t;
        try {
            t = newton_solve(c, n, guess);
        } catch (const Error&) {
            t.converged = false;
        }
        // Step control only: a jump of more than 1.5x either way means the step was too long.
        // Monotonicity is measured afterwards, not enforced here.
        const bool ok = t.converged && detail::is_positive(t.v, t.sup_v) && t.sup_v < 1.5 * r.sup_v &&
                        t.sup_v * 1.5 > r.sup_v;
        if (!ok) {
            step *= 0.5;
            continue;
        }
        if (std::abs(t.sup_v - r.sup_v) < 0.1 * r.sup_v) step *= 1.5;
        vprev = std::move(v);
        lprev = lambda;
        v = t.v;
        lambda = next;
        r = std::move(t);
        tr.lambda.push_back(lambda);
        tr.sup_v.push_back(r.sup_v);
        tr.sup_u.push_back(r.sup_u);
        tr.solutions.push_back(r.v);
    }
    tr.reached_floor = r.sup_v > opt.floor;
    if (!tr.reached_floor) throw NumericalError("bifurcation_from_infinity: step budget exhausted before the floor");
    for (std::size_t i = 1; i < tr.sup_v.size(); ++i)
        if (!(tr.sup_v[i] > tr.sup_v[i - 1])) tr.monotone = false;

    const std::size_t m = std::min(opt.fit_points, tr.lambda.size());
    std::vector<double> x(tr.lambda.end() - m, tr.lambda.end()), y;
    for (auto it = tr.sup_v.end() - m; it != tr.sup_v.end(); ++it) y.push_back(1.0 / *it);
    tr.estimate = detail::linear_root(x, y);
    return tr;
}

struct DescentReport {
    std::vector<double> lambda, sup_v, sup_u;
    bool increasing = true;        ///< sup_u strictly increases as lambda decreases
    double growth_exponent = 0.0;  ///< least-squares slope of log sup_v against log lambda
    std::vector<Field> solutions;  ///< v at each stage end
};

/// Newton continuation from lambda_from to lambda_to through `steps` geometric
/// stages, subdividing a stage when Newton fails.
inline DescentReport small_lambda_blowup(const Nonlinearity& n, const Domain& dom, double lambda_from,
                                         double lambda_to, int steps = 20, double tol = 1e-9) {
    if (!(n.q() > 1.0)) throw ContractError("small_lambda_blowup: requires a superlinear exponent");
    if (!(lambda_from > 0.0 && lambda_to > 0.0)) throw ContractError("small_lambda_blowup: lambdas must be positive");
    SolveConfig c = detail::base_config(dom, n, lambda_from, tol, 100);
    SolveReport r = newton_solve(c, n, detail::linearized_guess(n, dom, lambda_from));
    if (!r.converged || !detail::is_positive(r.v, r.sup_v))
        throw NumericalError("small_lambda_blowup: no starting solution");

    DescentReport rep;
    rep.lambda.push_back(lambda_from);
    rep.sup_v.push_back(r.sup_v);
    rep.sup_u.push_back(r.sup_u);
    rep.solutions.push_back(r.v);
    Field v = r.v;
    double lambda = lambda_from;
    const double ratio = std::pow(lambda_to / lambda_from, 1.0 / steps);
    for (int s = 1; s <= steps; ++s) {
        const double target = lambda_from * std::pow(ratio, s);
        double next = target;
        int failures = 0;
        while (lambda != target) {
            c.lambda = next;
            SolveReport t = newton_solve(c, n, v);
            if (t.converged && detail::is_positive(t.v, t.sup_v)) {
                v = t.v;
                lambda = next;
                r = std::move(t);
                next = target;
                continue;
            }
            if (++failures > 60) throw NumericalError("small_lambda_blowup: branch lost");
            next = std::sqrt(lambda * next);  // geometric midpoint
        }
        rep.lambda.push_back(lambda);
        rep.sup_v.push_back(r.sup_v);
        rep.sup_u.push_back(r.sup_u);
        rep.solutions.push_back(r.v);
    }
    const bool down = lambda_to < lambda_from;
    for (std::size_t i = 1; i < rep.sup_u.size(); ++i)
        if (down ? !(rep.sup_u[i] > rep.sup_u[i - 1]) : !(rep.sup_u[i] < rep.sup_u[i - 1])) rep.increasing = false;

    std::vector<double> x, y;
    for (std::size_t i = 0; i < rep.lambda.size(); ++i) {
        x.push_back(std::log(rep.lambda[i]));
        y.push_back(std::log(rep.sup_v[i]));
    }
    const double m = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    rep.growth_exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return rep;
}

struct TwoRoots {
    SolveReport upper, lower;
    int upper_stability = 0, lower_stability = 0;
};

/// Above the fold: the maximal solution plus a second Newton root found from
/// scaled copies of the maximal one, A = sup_upper 2^-k.
inline TwoRoots two_solutions(const Nonlinearity& n, const Domain& dom, double lambda, double tol = 1e-9) {
    TwoRoots out;
    out.upper = detail::maximal_solution(n, dom, lambda, tol, 10000);
    if (!out.upper.converged || !detail::is_positive(out.upper.v, out.upper.sup_v))
        throw NumericalError("two_solutions: no maximal solution at this lambda");
    out.upper_stability = stability_sign(n, lambda, out.upper.v);
    SolveConfig c = detail::base_config(dom, n, lambda, tol, 100);
    for (int k = 1; k <= 40; ++k) {
        const Field guess = std::ldexp(1.0, -k) * out.upper.v;
        SolveReport r = newton_solve(c, n, guess);
        if (r.converged && detail::is_positive(r.v, r.sup_v) && r.sup_v * 1.2 <= out.upper.sup_v) {
            out.lower = std::move(r);
            out.lower_stability = stability_sign(n, lambda, out.lower.v);
            return out;
        }
    }
    throw NumericalError("two_solutions: no second positive root found");
}

}  // namespace dualschro
