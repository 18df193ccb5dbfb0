#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dualschro/errors.hpp"
#include "dualschro/mesh.hpp"
#include "dualschro/nonlinearity.hpp"

namespace dualschro {

enum class StartKind { from_sub, from_super, custom };

struct SolveConfig {
    double lambda = 1.0;
    double q = 1.0;
    DomainMesh mesh;
    std::optional<double> K;  ///< monotone shift; auto-selected when empty
    double tol = 1e-9;
    int max_iter = 10000;
    StartKind start = StartKind::from_sub;
    std::optional<Field> custom_start;
    double r = 2.0;  ///< exponent of the phi_1^r sub-solution for q in (1, 3)
};

enum class Direction { increasing, decreasing, none };

enum class SolveStatus {
    converged,
    fold_signal,    ///< singular Jacobian or line search stalled
    diverged,       ///< left the transform table, non-finite, or Newton cap
    iteration_cap,  ///< monotone iteration budget exhausted
};

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::fold_signal: return "fold_signal";
        case SolveStatus::diverged: return "diverged";
        case SolveStatus::iteration_cap: return "iteration_cap";
    }
    return "?";
}

struct SolveReport {
    Field v;  ///< dual solution
    Field u;  ///< recovered solution f(v)
    double lambda = 0.0;
    double residual_sup = std::numeric_limits<double>::infinity();
    double last_step = std::numeric_limits<double>::infinity();
    int iterations = 0;
    double sup_v = 0.0, sup_u = 0.0;
    double energy = 0.0;
    double K = 0.0;  ///< shift used by monotone iteration
    bool converged = false;
    SolveStatus status = SolveStatus::diverged;
    Direction monotone_direction = Direction::none;
    std::string message;
};

/// Mesh-dependent data shared by every solve on one mesh.
struct Domain {
    DomainMesh mesh;
    EigenPair eig;
    Torsion torsion;
};

inline Domain prepare_domain(const DomainMesh& mesh) {
    return {mesh, principal_eigenpair(mesh, 1), torsion_function(mesh)};
}

/// Residual bar for convergence: tol (1 + lambda) max(1, |v|_inf). The
/// max(1, |v|) factor absorbs the round-off floor of h^-2 |v| in the stencil.
inline double residual_bar(double tol, double lambda, double sup_v) {
    return tol * (1.0 + lambda) * std::max(1.0, sup_v);
}

inline Field apply_g(const Nonlinearity& n, const Field& v) {
    return map(v, [&n](double s) { return n.g(s); });
}

/// F(v) = -Delta_h v - lambda g(v)
inline Field pde_residual(const Nonlinearity& n, double lambda, const Field& v) {
    Field F = laplacian_apply(v.mesh(), v);
    for (std::size_t i = 0; i < v.size(); ++i) F[i] -= lambda * n.g(v[i]);
    return F;
}

/// Node-wise u = f(v).
inline Field recover_u(const DualTransform& t, const Field& v) {
    return map(v, [&t](double s) { return t.eval(s); });
}

/// Node-wise v = f^{-1}(u).
inline Field invert_u(const DualTransform& t, const Field& u) {
    return map(u, [&t](double x) { return t.inverse(x); });
}

/// Discrete energy I(v) = 1/2 <v, -Delta_h v> - lambda <1, G(v)>.
inline double energy(const Nonlinearity& n, double lambda, const Field& v) {
    const Field Av = laplacian_apply(v.mesh(), v);
    double e = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) e += 0.5 * v[i] * Av[i] - lambda * n.G(v[i]);
    return v.mesh().cell_volume() * e;
}

/// Gradient of `energy` in the Euclidean coordinates: h^dim (-Delta_h v - lambda g(v)).
inline Field energy_gradient(const Nonlinearity& n, double lambda, const Field& v) {
    Field F = pde_residual(n, lambda, v);
    F *= v.mesh().cell_volume();
    return F;
}

namespace detail {

inline void require_positive_lambda(double lambda) {
    if (sign_guard(lambda) == SignDecision::refuse)
        throw ContractError("no nontrivial solution exists for lambda <= 0; refusing to solve");
}

inline void finish(SolveReport& rep, const Nonlinearity& n, double lambda) {
    rep.lambda = lambda;
    rep.sup_v = rep.v.max_abs();
    rep.u = recover_u(n.transform(), rep.v);
    rep.sup_u = rep.u.max_abs();
    rep.energy = energy(n, lambda, rep.v);
}

/// Shift making s -> lambda g(s) + K s nondecreasing on [0, M], from 1000 samples.
inline double auto_shift(const Nonlinearity& n, double lambda, double M) {
    double worst = 0.0;
    const int samples = 1000;
    for (int i = 1; i <= samples; ++i) worst = std::min(worst, n.g_prime(M * i / samples));
    return 1.1 * lambda * std::max(0.0, -worst);
}

}  // namespace detail

/// Sub-solution certificate: eps phi_1 (q <= 1, largest dyadic eps <= 1) or
/// phi_1^r (1 < q < 3), verified node-wise against -Delta_h w <= lambda g(w).
inline Field make_subsolution(const SolveConfig& cfg, const Nonlinearity& n, const EigenPair& eig) {
    detail::require_positive_lambda(cfg.lambda);
    const DomainMesh& mesh = eig.phi.mesh();
    auto verified = [&](const Field& w) {
        const Field Aw = laplacian_apply(mesh, w);
        for (std::size_t i = 0; i < w.size(); ++i)
            if (Aw[i] > cfg.lambda * n.g(w[i])) return false;
        return true;
    };
    const double q = n.q();
    if (q <= 1.0) {
        for (int k = 0; k <= 60; ++k) {
            Field w = std::ldexp(1.0, -k) * eig.phi;
            if (verified(w)) return w;
        }
        throw CertificateError("no sub-solution certificate: lambda g(eps phi_1) < lambda_1 eps phi_1 for every eps >= 2^-60");
    }
    if (q < 3.0) {
        if (!(cfg.r > 1.0)) throw ContractError("sub-solution exponent r must exceed 1");
        Field w = map(eig.phi, [r = cfg.r](double p) { return std::pow(p, r); });
        if (verified(w)) return w;
        throw CertificateError("no sub-solution certificate: phi_1^r fails -Delta w <= lambda g(w) at this lambda");
    }
    throw CertificateError("no sub-solution certificate construction for q >= 3");
}

/// Super-solution certificate K e with K the smallest power of 2 such that
/// e_M g(K e_L)/(K e_L) <= 1/lambda holds for K and every larger power of 2
/// up to the transform extent; verified node-wise. When `floor` is given, K
/// is doubled until K e >= floor.
inline Field make_supersolution(const SolveConfig& cfg, const Nonlinearity& n, const Torsion& torsion,
                                const Field* floor = nullptr) {
    detail::require_positive_lambda(cfg.lambda);
    const double lambda = cfg.lambda;
    const double eL = torsion.e_L, eM = torsion.e_M;
    const double cap = n.transform().s_max() / eM;
    auto holds = [&](double K) {
        const double s = K * eL;
        return eM * n.g(s) / s <= 1.0 / lambda;
    };
    int k = static_cast<int>(std::floor(std::log2(cap)));
    if (!holds(std::ldexp(1.0, k)))
        throw CertificateError("no super-solution certificate: e_M g(K e_L)/(K e_L) > 1/lambda at the largest admissible K");
    while (k > -1000 && holds(std::ldexp(1.0, k - 1))) --k;

    const Field& e = torsion.on_omega;
    auto verified = [&](double K) {
        const Field w = K * e;
        const Field Aw = laplacian_apply(e.mesh(), w);
        for (std::size_t i = 0; i < w.size(); ++i)
            if (Aw[i] < lambda * n.g(w[i])) return false;
        if (floor)
            for (std::size_t i = 0; i < w.size(); ++i)
                if (w[i] < (*floor)[i]) return false;
        return true;
    };
    for (; std::ldexp(1.0, k) <= cap; ++k)
        if (verified(std::ldexp(1.0, k))) return std::ldexp(1.0, k) * e;
    throw CertificateError("no super-solution certificate: K e fails the node-wise check up to the transform extent");
}

/// Monotone iteration (-Delta_h + K) v_{n+1} = lambda g(v_n) + K v_n from a
/// verified sub- or super-solution v0. Asserts node-wise monotonicity every step.
inline SolveReport monotone_iterate(const SolveConfig& cfg, const Nonlinearity& n, const Field& v0) {
    detail::require_positive_lambda(cfg.lambda);
    const double lambda = cfg.lambda;
    const DomainMesh& mesh = v0.mesh();
    if (v0.min() < 0.0) throw ContractError("monotone_iterate: start must be nonnegative");

    SolveReport rep;
    const Field R0 = pde_residual(n, lambda, v0);
    const double detect = residual_bar(cfg.tol, lambda, v0.max_abs());
    const bool is_sub = R0.max() <= detect;
    const bool is_super = R0.min() >= -detect;
    if (!is_sub && !is_super) throw ContractError("monotone_iterate: start is neither a sub- nor a super-solution");
    const bool up = is_sub;
    rep.monotone_direction = up ? Direction::increasing : Direction::decreasing;

    double M = std::max(v0.max(), std::numeric_limits<double>::min());
    double K = cfg.K ? *cfg.K : detail::auto_shift(n, lambda, up ? 2.0 * M : M);
    if (up && !cfg.K) M *= 2.0;
    std::vector<double> shift(mesh.size(), K);

    Field v = v0;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        Field rhs(mesh);
        for (std::size_t i = 0; i < v.size(); ++i) rhs[i] = lambda * n.g(v[i]) + K * v[i];
        Field w = solve_shifted(mesh, shift, rhs);

        const double scale = std::max(1.0, w.max_abs());
        const double slack = 1e-10 * scale;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double d = w[i] - v[i];
            if ((up && d < -slack) || (!up && d > slack))
                throw MonotonicityError("monotone_iterate: iterate " + std::to_string(it) + " breaks monotonicity by " +
                                        std::to_string(std::abs(d)) + " (shift K=" + std::to_string(K) + ")");
        }
        if (!std::isfinite(w.max_abs())) throw NumericalError("monotone_iterate: non-finite iterate");

        rep.last_step = max_abs_diff(w, v);
        v = std::move(w);
        rep.iterations = it;

        if (up && !cfg.K && v.max() > M) {
            M = 2.0 * v.max();
            K = std::max(K, detail::auto_shift(n, lambda, M));
            std::fill(shift.begin(), shift.end(), K);
        }
        if (rep.last_step <= cfg.tol * scale) {
            rep.residual_sup = pde_residual(n, lambda, v).max_abs();
            if (rep.residual_sup <= residual_bar(cfg.tol, lambda, scale)) {
                rep.converged = true;
                break;
            }
        }
    }
    rep.K = K;
    rep.v = std::move(v);
    if (!rep.converged) rep.residual_sup = pde_residual(n, lambda, rep.v).max_abs();
    rep.status = rep.converged ? SolveStatus::converged : SolveStatus::iteration_cap;
    if (!rep.converged) rep.message = "monotone iteration hit the iteration cap";
    detail::finish(rep, n, lambda);
    return rep;
}

/// Sign of the smallest eigenvalue of -Delta_h - lambda diag(g'(v)): +1 stable,
/// -1 unstable, 0 numerically singular. Read off the inertia of an LDL^T factorization.
inline int stability_sign(const Nonlinearity& n, double lambda, const Field& v) {
    std::vector<double> shift(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) shift[i] = -lambda * n.g_prime(v[i]);
    SymmetricFactor fac(v.mesh(), shift);
    if (fac.singular()) return 0;
    return fac.negative_count() == 0 ? 1 : -1;
}

struct NewtonOptions {
    int max_iter = 60;
    int max_halvings = 40;
};

/// Damped Newton on F(v) = -Delta_h v - lambda g(v) with step halving until ||F||_2 decreases.
inline SolveReport newton_solve(const SolveConfig& cfg, const Nonlinearity& n, const Field& v0,
                                const NewtonOptions& opt = {}) {
    detail::require_positive_lambda(cfg.lambda);
    if (n.q() < 1.0) throw ContractError("newton_solve: requires q >= 1 (g' is singular at 0 for q < 1)");
    const double lambda = cfg.lambda;
    const DomainMesh& mesh = v0.mesh();

    SolveReport rep;
    rep.v = v0;
    auto fail = [&](SolveStatus s, std::string msg) {
        rep.status = s;
        rep.message = std::move(msg);
        rep.converged = false;
        try {
            detail::finish(rep, n, lambda);
        } catch (const Error&) {
            rep.sup_v = rep.v.max_abs();
        }
        return rep;
    };

    try {
        Field F = pde_residual(n, lambda, rep.v);
        for (int it = 0; it <= opt.max_iter; ++it) {
            rep.residual_sup = F.max_abs();
            rep.iterations = it;
            if (!std::isfinite(rep.residual_sup)) return fail(SolveStatus::diverged, "non-finite residual");
            if (rep.residual_sup <= residual_bar(cfg.tol, lambda, rep.v.max_abs())) {
                rep.converged = true;
                rep.status = SolveStatus::converged;
                detail::finish(rep, n, lambda);
                return rep;
            }
            if (it == opt.max_iter) break;

            std::vector<double> shift(mesh.size());
            for (std::size_t i = 0; i < shift.size(); ++i) shift[i] = -lambda * n.g_prime(rep.v[i]);
            SymmetricFactor fac(mesh, shift);
            if (fac.singular()) return fail(SolveStatus::fold_signal, "singular Jacobian");
            Field rhs = F;
            rhs *= -1.0;
            const Field delta = fac.solve(rhs);

            const double f0 = std::sqrt(dot(F, F));
            double t = 1.0;
            bool accepted = false;
            for (int k = 0; k <= opt.max_halvings; ++k, t *= 0.5) {
                Field trial = rep.v;
                for (std::size_t i = 0; i < trial.size(); ++i) trial[i] += t * delta[i];
                Field Ft;
                try {
                    Ft = pde_residual(n, lambda, trial);
                } catch (const RangeError&) {
                    continue;  // left the transform table: shorten the step
                }
                const double ft = std::sqrt(dot(Ft, Ft));
                if (std::isfinite(ft) && ft < (1.0 - 1e-4 * t) * f0) {
                    rep.last_step = t * delta.max_abs();
                    rep.v = std::move(trial);
                    F = std::move(Ft);
                    accepted = true;
                    break;
                }
            }
            if (!accepted) return fail(SolveStatus::fold_signal, "line search stalled");
        }
    } catch (const RangeError& e) {
        return fail(SolveStatus::diverged, e.what());
    }
    return fail(SolveStatus::diverged, "Newton iteration cap reached");
}

/// Entry point honouring cfg.start: monotone iteration from the sub- or
/// super-solution certificate, or from a caller-provided sub/super field.
inline SolveReport solve(const SolveConfig& cfg, const Nonlinearity& n, const Domain& dom) {
    detail::require_positive_lambda(cfg.lambda);
    switch (cfg.start) {
        case StartKind::from_sub: return monotone_iterate(cfg, n, make_subsolution(cfg, n, dom.eig));
        case StartKind::from_super: {
            std::optional<Field> sub;
            try {
                sub = make_subsolution(cfg, n, dom.eig);
            } catch (const CertificateError&) {
            }
            return monotone_iterate(cfg, n, make_supersolution(cfg, n, dom.torsion, sub ? &*sub : nullptr));
        }
        case StartKind::custom:
            if (!cfg.custom_start) throw ContractError("solve: custom start requires a field");
            return monotone_iterate(cfg, n, *cfg.custom_start);
    }
    throw ContractError("solve: unknown start");
}

/// Result of the a-priori comparison v <= C psi.
struct BoundReport {
    double C = 0.0;
    Field psi;
    double psi_residual = 0.0;  ///< |-Delta_h psi - psi^{(q-1)/2}|_inf
    double margin = 0.0;        ///< min over nodes of C psi - v
    double slack = 0.0;         ///< 10 h^2 |v|_inf
    bool holds = false;
};

/// psi solving -Delta_h psi = psi^p (0 < p < 1) by monotone iteration from a
/// torsion super-solution; the map s -> s^p is increasing so no shift is needed.
inline Field sublinear_profile(const DomainMesh& mesh, double p, double tol = 1e-12, int max_iter = 10000,
                               double* residual = nullptr) {
    if (!(p > 0.0 && p < 1.0)) throw ContractError("sublinear_profile: exponent must lie in (0, 1)");
    const Field tau = solve_shifted_poisson(mesh, Field(mesh, 1.0), 0.0);
    // K tau is a super-solution when K >= (K tau_max)^p.
    const double K = std::pow(tau.max(), p / (1.0 - p)) * 2.0;
    Field psi = K * tau;
    const std::vector<double> zero(mesh.size(), 0.0);
    for (int it = 0; it < max_iter; ++it) {
        Field next = solve_shifted(mesh, zero, map(psi, [p](double s) { return std::pow(std::max(s, 0.0), p); }));
        const double step = max_abs_diff(next, psi);
        psi = std::move(next);
        if (step <= tol * std::max(1.0, psi.max_abs())) break;
    }
    if (residual) {
        Field r = laplacian_apply(mesh, psi);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= std::pow(psi[i], p);
        *residual = r.max_abs();
    }
    return psi;
}

/// Check v <= C psi with C = lambda^{2/(3-q)} (8/alpha^2)^{(q+1)/(2(3-q))} and
/// psi solving -Delta psi = psi^{(q-1)/2}. Throws when the bound fails beyond slack.
inline BoundReport apriori_bound_check(const SolveReport& rep, const Nonlinearity& n, double alpha) {
    const double q = n.q();
    if (!(q > 1.0 && q < 3.0)) throw ContractError("apriori_bound_check: requires q in (1, 3)");
    if (!rep.converged) throw ContractError("apriori_bound_check: needs a converged solution");
    if (rep.v.min() < 0.0) throw ContractError("apriori_bound_check: needs a nonnegative solution");
    BoundReport b;
    const double lambda = rep.lambda;
    b.C = std::pow(lambda, 2.0 / (3.0 - q)) * std::pow(8.0 / (alpha * alpha), (q + 1.0) / (2.0 * (3.0 - q)));
    b.psi = sublinear_profile(rep.v.mesh(), 0.5 * (q - 1.0), 1e-12, 10000, &b.psi_residual);
    const double h = rep.v.mesh().h(0);
    b.slack = 10.0 * h * h * rep.v.max_abs();
    b.margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rep.v.size(); ++i) b.margin = std::min(b.margin, b.C * b.psi[i] - rep.v[i]);
    b.holds = b.margin > 0.0;
    if (b.margin < -b.slack)
        throw NumericalError("a-priori bound v <= C psi violated by " + std::to_string(-b.margin) +
                             " beyond slack; solver or transform invariant broken");
    return b;
}

}  // namespace dualschro
