#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dualschro/errors.hpp"

namespace dualschro {

/// Even coefficient function theta: R -> [1, inf) with its derivative.
///
/// `alpha` is the asymptotic constant with theta(s)/s^2 -> alpha^2/2 as
/// |s| -> inf; it is empty for coefficients without quadratic growth.
struct ThetaSpec {
    std::string name;
    std::function<double(double)> eval;
    std::function<double(double)> deriv;
    std::optional<double> alpha;

    double operator()(double s) const { return eval(s); }
};

namespace detail {

// log(1 + e^x) without overflow.
inline double softplus(double x) {
    if (x > 30.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

// 1 / (1 + e^{-x})
inline double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double sign(double s) { return (s > 0.0) - (s < 0.0); }

}  // namespace detail

/// theta(s) = 1 + s^2
inline ThetaSpec theta1() {
    return {"theta1",
            [](double s) { return 1.0 + s * s; },
            [](double s) { return 2.0 * s; },
            std::numbers::sqrt2};
}

/// theta(s) = (1 + |s|^p)^{1/p} + s^2, p in (1, 2].
inline ThetaSpec theta2(double p = 1.5) {
    if (!(p > 1.0 && p <= 2.0))
        throw ContractError("theta2 requires p in (1, 2], got " + std::to_string(p));
    auto eval = [p](double s) {
        return std::pow(1.0 + std::pow(std::abs(s), p), 1.0 / p) + s * s;
    };
    auto deriv = [p](double s) {
        const double a = std::abs(s);
        if (a == 0.0) return 0.0;
        const double ap = std::pow(a, p);
        return detail::sign(s) * std::pow(1.0 + ap, 1.0 / p - 1.0) * ap / a + 2.0 * s;
    };
    char buf[64];
    std::snprintf(buf, sizeof buf, "theta2:p=%g", p);
    return {buf, eval, deriv, std::numbers::sqrt2};
}

/// theta(s) = 1 + ln(1 + e^{s^2})
inline ThetaSpec theta3() {
    return {"theta3",
            [](double s) { return 1.0 + detail::softplus(s * s); },
            [](double s) { return 2.0 * s * detail::logistic(s * s); },
            std::numbers::sqrt2};
}

/// theta(s) = 1 + ln(e^{s atan s} + e^{s^2 + s atan s}) = 1 + s atan s + ln(1 + e^{s^2})
inline ThetaSpec theta4() {
    return {"theta4",
            [](double s) { return 1.0 + s * std::atan(s) + detail::softplus(s * s); },
            [](double s) {
                return std::atan(s) + s / (1.0 + s * s) + 2.0 * s * detail::logistic(s * s);
            },
            std::numbers::sqrt2};
}

/// theta(s) = 1 + ln((1 + |s|)^{|s|} (1 + e^{s^2})) = 1 + |s| ln(1 + |s|) + ln(1 + e^{s^2})
inline ThetaSpec theta5() {
    return {"theta5",
            [](double s) {
                const double a = std::abs(s);
                return 1.0 + a * std::log1p(a) + detail::softplus(s * s);
            },
            [](double s) {
                const double a = std::abs(s);
                return detail::sign(s) * (std::log1p(a) + a / (1.0 + a)) +
                       2.0 * s * detail::logistic(s * s);
            },
            std::numbers::sqrt2};
}

/// theta == 1. The transform is the identity; fails the quadratic-growth hypothesis.
inline ThetaSpec theta_unit() {
    return {"unit", [](double) { return 1.0; }, [](double) { return 0.0; }, std::nullopt};
}

/// Built-in coefficients: theta1..theta5 and the unit coefficient.
inline std::vector<ThetaSpec> catalog(double theta2_p = 1.5) {
    return {theta1(), theta2(theta2_p), theta3(), theta4(), theta5(), theta_unit()};
}

/// Resolve a CLI catalog key: theta1, theta2:p=<val>, theta3, theta4, theta5, unit.
inline ThetaSpec theta_by_name(std::string_view key) {
    if (key == "theta1") return theta1();
    if (key == "theta3") return theta3();
    if (key == "theta4") return theta4();
    if (key == "theta5") return theta5();
    if (key == "unit") return theta_unit();
    if (key == "theta2") return theta2();
    constexpr std::string_view prefix = "theta2:p=";
    if (key.starts_with(prefix)) {
        const std::string tail(key.substr(prefix.size()));
        std::size_t used = 0;
        double p = 0.0;
        try {
            p = std::stod(tail, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != tail.size())
            throw ContractError("malformed theta2 exponent in '" + std::string(key) + "'");
        return theta2(p);
    }
    throw ContractError("unknown theta '" + std::string(key) + "'");
}

/// Outcome of the sampled hypothesis checks.
struct HypothesisReport {
    std::pair<double, double> checked_range{0.0, 0.0};
    bool bounded_below_ok = true;  // theta >= 1
    bool even_ok = true;
    bool monotone_ok = true;  // monotone away from 0
    bool ratio_nonincreasing_ok = true;  // theta/s^2 nonincreasing on (0, inf)
    bool quadratic_limit_ok = true;  // theta/s^2 -> alpha^2/2
    /// (s, magnitude) of the largest violation seen by any check.
    std::pair<double, double> worst_violation{0.0, 0.0};
    double alpha_estimate = 0.0;
};

struct HypothesisOptions {
    double monotone_rel_tol = 1e-8;
    double even_rel_tol = 1e-12;
    double alpha_rel_tol = 1e-2;
    double s_min = 1e-4;
};

/// Log-spaced positive grid on [s_min, s_max] with `count` points.
inline std::vector<double> log_grid(double s_min, double s_max, std::size_t count) {
    std::vector<double> out(count);
    const double a = std::log(s_min), b = std::log(s_max);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    out.back() = s_max;
    return out;
}

/// Sample theta on a log-spaced grid of [-s_max, s_max] and check monotonicity, the nonincreasing ratio theta/s^2 and its limit.
/// Failed hypotheses are flagged in the report; non-finite values throw.
inline HypothesisReport validate_hypotheses(const ThetaSpec& spec, double s_max, std::size_t samples,
                                            const HypothesisOptions& opt = {}) {
    if (!(s_max > 0.0)) throw ContractError("validate_hypotheses: s_max must be positive");
    if (samples < 16) throw ContractError("validate_hypotheses: need at least 16 samples");

    HypothesisReport rep;
    rep.checked_range = {-s_max, s_max};
    auto flag = [&rep](bool& ok, double s, double magnitude) {
        if (magnitude <= 0.0) return;
        ok = false;
        if (magnitude > rep.worst_violation.second) rep.worst_violation = {s, magnitude};
    };
    auto eval = [&spec](double s) {
        const double v = spec.eval(s);
        const double d = spec.deriv(s);
        if (!std::isfinite(v) || !std::isfinite(d))
            throw NumericalError("theta '" + spec.name + "' is not finite at s=" + std::to_string(s));
        return std::pair{v, d};
    };

    const double s_lo = std::min(opt.s_min, 1e-3 * s_max);
    const auto pos = log_grid(s_lo, s_max, samples);

    auto [t0, d0] = eval(0.0);
    flag(rep.bounded_below_ok, 0.0, 1.0 - t0);
    flag(rep.monotone_ok, 0.0, std::abs(d0) - opt.monotone_rel_tol * (1.0 + std::abs(t0)));

    double prev_t = t0;
    double prev_ratio = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        const double s = pos[i];
        const auto [tp, dp] = eval(s);
        const auto [tn, dn] = eval(-s);
        const double scale = 1.0 + std::abs(tp);
        flag(rep.bounded_below_ok, s, 1.0 - tp);
        flag(rep.bounded_below_ok, -s, 1.0 - tn);
        flag(rep.even_ok, s, std::abs(tp - tn) - opt.even_rel_tol * scale);

        // derivative has the sign of s and the samples are monotone.
        flag(rep.monotone_ok, s, -dp - opt.monotone_rel_tol * scale);
        flag(rep.monotone_ok, -s, dn - opt.monotone_rel_tol * scale);
        flag(rep.monotone_ok, s, (prev_t - tp) - opt.monotone_rel_tol * std::abs(prev_t));
        prev_t = tp;

        // theta/s^2 nonincreasing on (0, s_max].
        const double ratio = tp / (s * s);
        if (i > 0) flag(rep.ratio_nonincreasing_ok, s, (ratio - prev_ratio) / prev_ratio - opt.monotone_rel_tol);
        prev_ratio = ratio;
    }

    // alpha from the largest sample, stable over the last decade.
    const double S = pos.back();
    const double two_ratio = 2.0 * spec.eval(S) / (S * S);
    rep.alpha_estimate = std::sqrt(two_ratio);
    for (double s : pos) {
        if (s < 0.1 * S) continue;
        const double a = std::sqrt(2.0 * spec.eval(s) / (s * s));
        flag(rep.quadratic_limit_ok, s, std::abs(a - rep.alpha_estimate) / rep.alpha_estimate - opt.alpha_rel_tol);
    }
    if (rep.quadratic_limit_ok && spec.alpha) {
        const double a2 = *spec.alpha * *spec.alpha;
        flag(rep.quadratic_limit_ok, S, std::abs(two_ratio - a2) / a2 - opt.alpha_rel_tol);
    }
    return rep;
}

}  // namespace dualschro
