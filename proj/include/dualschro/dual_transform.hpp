#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dualschro/errors.hpp"
#include "dualschro/theta.hpp"

namespace dualschro {

/// Upsilon(t) = int_0^t theta(r)^{1/2} dr, the inverse of the dual transform.
/// Adaptive Gauss-Kronrod to relative tolerance `rel_tol`; odd in t.
inline double upsilon(const ThetaSpec& theta, double t, double rel_tol = 1e-10) {
    if (!std::isfinite(t)) throw ContractError("upsilon: t must be finite");
    if (t == 0.0) return 0.0;
    auto integrand = [&theta](double r) {
        const double v = theta.eval(r);
        if (!std::isfinite(v) || v < 0.0)
            throw NumericalError("upsilon: integrand not finite at r=" + std::to_string(r));
        return std::sqrt(v);
    };
    double err = 0.0;
    const double a = std::abs(t);
    const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        integrand, 0.0, a, 20, rel_tol, &err);
    return t < 0.0 ? -value : value;
}

/// What to do when f is evaluated beyond the tabulated extent.
enum class Extrapolation {
    error,      ///< throw RangeError
    asymptotic  ///< f(s) ~ (8/alpha^2)^{1/4} sqrt(s), requires alpha
};

struct TransformOptions {
    Extrapolation extrapolation = Extrapolation::error;
    /// Relative node spacing of the first table attempt; halved on each refinement.
    double initial_ratio = 0.01;
    int max_refinements = 7;
    /// First positive table node.
    double first_node = 1e-6;
};

/// Default table extent. Covers the continuation blow-up floor with a wide margin.
inline constexpr double default_transform_extent = 1e6;

/// The odd change of variable f with f' = theta(f)^{-1/2}, f(0) = 0.
///
/// f is tabulated on [0, s_max] with node values obtained by integrating
/// sqrt(theta) between consecutive nodes and solving for the upper limit.
/// Between nodes f is the cubic Hermite interpolant built from the exact nodal
/// slopes. f' and f'' are evaluated from the analytic formulas at f(s).
/// Copies share the immutable table.
class DualTransform {
public:
    const ThetaSpec& theta() const { return table_->theta; }
    double s_max() const { return table_->s.back(); }
    /// f(s_max), the largest tabulated value.
    double u_max() const { return table_->f.back(); }
    double tol() const { return table_->tol; }
    /// Largest ODE residual measured on the verification grid.
    double achieved_residual() const { return table_->residual; }
    std::size_t size() const { return table_->s.size(); }
    std::span<const double> nodes() const { return table_->s; }
    std::span<const double> values() const { return table_->f; }
    Extrapolation extrapolation() const { return table_->extrapolation; }

    /// f(s), odd.
    double eval(double s) const {
        const double a = std::abs(s);
        const double v = a <= s_max() ? interpolate(a) : extrapolate(a);
        return s < 0.0 ? -v : v;
    }

    /// f'(s) = theta(f(s))^{-1/2}, even.
    double prime(double s) const { return 1.0 / std::sqrt(theta().eval(eval(s))); }

    /// f''(s) = -theta'(f(s)) / (2 theta(f(s))^2), odd.
    double second(double s) const {
        const double u = eval(s);
        const double t = theta().eval(u);
        return -theta().deriv(u) / (2.0 * t * t);
    }

    /// f^{-1}(u) by inverting the interpolant; f^{-1}(f(s)) == s to round-off.
    double inverse(double u) const {
        const double a = std::abs(u);
        double s = 0.0;
        if (a <= u_max()) {
            s = invert(a);
        } else {
            if (table_->extrapolation != Extrapolation::asymptotic || !theta().alpha)
                throw RangeError("f_inverse: |u|=" + std::to_string(a) + " exceeds f(s_max)=" +
                                 std::to_string(u_max()));
            warn_extrapolation();
            const double c = tail_constant();
            s = (a / c) * (a / c);
        }
        return u < 0.0 ? -s : s;
    }

    /// Derivative of the interpolant (not the analytic f'). Used to measure the ODE residual.
    double interpolant_slope(double s) const {
        const double a = std::abs(s);
        if (a > s_max()) throw RangeError("interpolant_slope: outside table");
        const auto k = interval(a);
        return hermite_slope(k, a);
    }

    /// |p'(s) theta(p(s))^{1/2} - 1| with p the interpolant.
    double ode_residual(double s) const {
        return std::abs(interpolant_slope(s) * std::sqrt(theta().eval(eval(s))) - 1.0);
    }

    friend DualTransform build_transform(ThetaSpec theta, double s_max, double tol,
                                         const TransformOptions& opt);

private:
    struct Table {
        ThetaSpec theta;
        std::vector<double> s, f, d;  // nodes, values, slopes
        double tol = 0.0;
        double residual = 0.0;
        Extrapolation extrapolation = Extrapolation::error;
        mutable std::once_flag warned;
    };

    explicit DualTransform(std::shared_ptr<const Table> t) : table_(std::move(t)) {}

    double tail_constant() const { return std::pow(8.0 / (*theta().alpha * *theta().alpha), 0.25); }

    void warn_extrapolation() const {
        std::call_once(table_->warned, [this] {
            std::clog << "warning: dual transform '" << theta().name
                      << "' evaluated beyond s_max=" << s_max() << ", using sqrt tail\n";
        });
    }

    double extrapolate(double a) const {
        if (table_->extrapolation != Extrapolation::asymptotic || !theta().alpha)
            throw RangeError("f: |s|=" + std::to_string(a) + " exceeds table extent " +
                             std::to_string(s_max()));
        warn_extrapolation();
        return tail_constant() * std::sqrt(a);
    }

    std::size_t interval(double a) const {
        const auto& s = table_->s;
        auto it = std::upper_bound(s.begin(), s.end(), a);
        std::size_t k = static_cast<std::size_t>(it - s.begin());
        k = k == 0 ? 0 : k - 1;
        return std::min(k, s.size() - 2);
    }

    double hermite(std::size_t k, double a) const {
        const auto& T = *table_;
        const double h = T.s[k + 1] - T.s[k];
        const double t = (a - T.s[k]) / h;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * T.f[k] + (t3 - 2 * t2 + t) * h * T.d[k] +
               (-2 * t3 + 3 * t2) * T.f[k + 1] + (t3 - t2) * h * T.d[k + 1];
    }

    double hermite_slope(std::size_t k, double a) const {
        const auto& T = *table_;
        const double h = T.s[k + 1] - T.s[k];
        const double t = (a - T.s[k]) / h;
        const double t2 = t * t;
        return (6 * t2 - 6 * t) / h * T.f[k] + (3 * t2 - 4 * t + 1) * T.d[k] +
               (-6 * t2 + 6 * t) / h * T.f[k + 1] + (3 * t2 - 2 * t) * T.d[k + 1];
    }

    double interpolate(double a) const { return hermite(interval(a), a); }

    double invert(double a) const {
        const auto& T = *table_;
        auto it = std::upper_bound(T.f.begin(), T.f.end(), a);
        std::size_t k = static_cast<std::size_t>(it - T.f.begin());
        k = k == 0 ? 0 : std::min(k - 1, T.f.size() - 2);
        double lo = T.s[k], hi = T.s[k + 1];
        // Safeguarded Newton on the monotone Hermite piece.
        double x = lo + (hi - lo) * (a - T.f[k]) / (T.f[k + 1] - T.f[k]);
        for (int it_count = 0; it_count < 100; ++it_count) {
            const double r = hermite(k, x) - a;
            if (r > 0.0) hi = x; else lo = x;
            if (r == 0.0) break;
            const double dx = r / hermite_slope(k, x);
            double next = x - dx;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - x) <= 4e-16 * std::max(1.0, std::abs(x))) {
                x = next;
                break;
            }
            x = next;
        }
        return x;
    }

    std::shared_ptr<const Table> table_;
};

namespace detail {

inline double sqrt_theta_integral(const ThetaSpec& theta, double a, double b) {
    return boost::math::quadrature::gauss<double, 10>::integrate(
        [&theta](double r) { return std::sqrt(theta.eval(r)); }, a, b);
}

// Solve int_{f0}^{F} sqrt(theta) = ds for F by Newton from a Taylor guess.
inline double advance(const ThetaSpec& theta, double f0, double ds) {
    const double t0 = theta.eval(f0);
    const double d0 = 1.0 / std::sqrt(t0);
    const double dd0 = -theta.deriv(f0) / (2.0 * t0 * t0);
    double F = f0 + ds * d0 + 0.5 * ds * ds * dd0;
    if (!(F > f0)) F = f0 + ds * d0;
    for (int it = 0; it < 50; ++it) {
        const double r = sqrt_theta_integral(theta, f0, F) - ds;
        const double step = r / std::sqrt(theta.eval(F));
        F -= step;
        if (std::abs(step) <= 1e-16 * std::max(F, 1e-300)) break;
    }
    if (!std::isfinite(F) || !(F > f0))
        throw NumericalError("build_transform: node integration failed near f=" + std::to_string(f0));
    return F;
}

}  // namespace detail

/// Tabulate f on [0, s_max] so that the interpolant satisfies
/// |f'(s) theta(f(s))^{1/2} - 1| <= tol on a grid four times finer than the table.
/// The spacing is geometric and is halved until the residual bound holds.
inline DualTransform build_transform(ThetaSpec theta, double s_max, double tol = 1e-9,
                                     const TransformOptions& opt = {}) {
    if (!(s_max > 0.0) || !std::isfinite(s_max)) throw ContractError("build_transform: s_max must be positive");
    if (!(tol > 0.0 && tol <= 1e-4)) throw ContractError("build_transform: tol must lie in (0, 1e-4]");
    if (opt.extrapolation == Extrapolation::asymptotic && !theta.alpha)
        throw ContractError("build_transform: asymptotic extrapolation needs alpha");

    double ratio = opt.initial_ratio;
    double achieved = 0.0;
    for (int attempt = 0; attempt <= opt.max_refinements; ++attempt, ratio *= 0.5) {
        auto table = std::make_shared<DualTransform::Table>();
        table->theta = theta;
        table->tol = tol;
        table->extrapolation = opt.extrapolation;

        const double first = std::min(opt.first_node, 0.1 * s_max);
        table->s.push_back(0.0);
        for (double s = first; s < s_max * (1.0 - 1e-12); s *= 1.0 + ratio) table->s.push_back(s);
        if (table->s.back() < s_max) table->s.push_back(s_max);
        // Drop a sliver interval at the end.
        const std::size_t n = table->s.size();
        if (n > 3 && (table->s[n - 1] - table->s[n - 2]) < 0.25 * ratio * table->s[n - 2]) {
            table->s.erase(table->s.end() - 2);
        }

        table->f.resize(table->s.size());
        table->d.resize(table->s.size());
        table->f[0] = 0.0;
        table->d[0] = 1.0 / std::sqrt(theta.eval(0.0));
        for (std::size_t k = 1; k < table->s.size(); ++k) {
            table->f[k] = detail::advance(theta, table->f[k - 1], table->s[k] - table->s[k - 1]);
            table->d[k] = 1.0 / std::sqrt(theta.eval(table->f[k]));
        }

        DualTransform t(table);
        double worst = 0.0;
        for (std::size_t k = 0; k + 1 < table->s.size(); ++k) {
            if (!(table->f[k + 1] > table->f[k]))
                throw NumericalError("build_transform: table not strictly increasing");
            const double h = table->s[k + 1] - table->s[k];
            for (int j = 0; j <= 3; ++j) worst = std::max(worst, t.ode_residual(table->s[k] + 0.25 * j * h));
        }
        worst = std::max(worst, t.ode_residual(s_max));
        achieved = worst;
        table->residual = worst;
        if (worst <= tol) return t;
    }
    throw NumericalError("build_transform: residual " + std::to_string(achieved) +
                         " above tolerance " + std::to_string(tol) + " after refinement");
}

}  // namespace dualschro
