#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dualschro/dual_transform.hpp"
#include "dualschro/errors.hpp"

namespace dualschro {

/// Exponent regimes of the power nonlinearity lambda |u|^{q-1} u.
enum class Regime {
    sublinear,       ///< q in (0, 1)
    linear_at_zero,  ///< q = 1
    between,         ///< q in (1, 3)
    critical_slope,  ///< q = 3
    superlinear,     ///< q in (3, 2*2^* - 1)
    supercritical    ///< q >= 2*2^* - 1
};

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::sublinear: return "sublinear";
        case Regime::linear_at_zero: return "linear-at-0";
        case Regime::between: return "between";
        case Regime::critical_slope: return "critical-slope";
        case Regime::superlinear: return "superlinear";
        case Regime::supercritical: return "supercritical";
    }
    return "?";
}

/// Critical exponent 2*2^* - 1 = (3N + 2)/(N - 2) with 2^* = 2N/(N - 2); infinite for N <= 2.
inline double critical_exponent(int N) {
    if (N <= 2) return std::numeric_limits<double>::infinity();
    return (3.0 * N + 2.0) / (N - 2.0);
}

inline Regime classify_regime(double q, int N) {
    if (!(q > 0.0)) throw ContractError("exponent q must be positive");
    if (q < 1.0) return Regime::sublinear;
    if (q == 1.0) return Regime::linear_at_zero;
    if (q < 3.0) return Regime::between;
    if (q == 3.0) return Regime::critical_slope;
    if (q < critical_exponent(N)) return Regime::superlinear;
    return Regime::supercritical;
}

/// Dual nonlinearity g(s) = f'(s) |f(s)|^{q-1} f(s) and its primitive G(s) = |f(s)|^{q+1}/(q+1).
class Nonlinearity {
public:
    Nonlinearity(DualTransform transform, double q, int N = 3)
        : transform_(std::move(transform)), q_(q), N_(N), regime_(classify_regime(q, N)) {}

    double q() const { return q_; }
    int dimension() const { return N_; }
    Regime regime() const { return regime_; }
    const DualTransform& transform() const { return transform_; }
    const ThetaSpec& theta() const { return transform_.theta(); }

    double g(double s) const {
        if (s == 0.0) return 0.0;
        const double u = transform_.eval(s);
        const double fp = 1.0 / std::sqrt(theta().eval(u));
        return fp * std::pow(std::abs(u), q_ - 1.0) * u;
    }

    double G(double s) const { return std::pow(std::abs(transform_.eval(s)), q_ + 1.0) / (q_ + 1.0); }

    /// g'(s) = |f|^{q-1} (2 q theta(f) - theta'(f) f) / (2 theta(f)^2), even in s.
    /// Singular at 0 for q < 1.
    double g_prime(double s) const {
        if (s == 0.0) {
            if (q_ < 1.0) throw ContractError("g_prime: g' is singular at 0 for q < 1");
            if (q_ == 1.0) return 1.0 / theta().eval(0.0);
            return 0.0;
        }
        const double u = std::abs(transform_.eval(s));
        const double t = theta().eval(u);
        return std::pow(u, q_ - 1.0) * (2.0 * q_ * t - theta().deriv(u) * u) / (2.0 * t * t);
    }

private:
    DualTransform transform_;
    double q_;
    int N_;
    Regime regime_;
};

/// Measured slope limits of g(s)/s and the pass/fail verdicts per limit.
/// Items that do not apply to the exponent are left empty.
struct SlopeReport {
    Regime regime{};
    double critical_exponent = 0.0;
    double s_small = 0.0, s_large = 0.0;
    double slope_at_zero = 0.0;      ///< g(s)/s at s_small
    double slope_at_infinity = 0.0;  ///< g(s)/s at s_large
    bool decreasing = true;          ///< g/s nonincreasing on every consecutive sample pair
    bool increasing = true;
    std::optional<bool> zero_slope_infinite, zero_slope_linear, zero_slope_vanishes, tail_slope_vanishes, tail_slope_finite, tail_slope_infinite, slope_decreasing_ok, slope_increasing_ok;

    bool all_pass() const {
        for (const auto* item : {&zero_slope_infinite, &zero_slope_linear, &zero_slope_vanishes, &tail_slope_vanishes, &tail_slope_finite, &tail_slope_infinite, &slope_decreasing_ok, &slope_increasing_ok})
            if (item->has_value() && !**item) return false;
        return true;
    }
};

struct SlopeOptions {
    double s_small = 1e-8;
    /// Largest sample; defaults to the transform extent.
    std::optional<double> s_large;
    std::size_t samples = 1000;
    double monotone_slack = 1e-10;
    double limit_rel_tol = 1e-2;
    double linear_rel_tol = 1e-3;
};

/// Sample g(s)/s on a log grid and check the slope limits at 0 and infinity
/// and the monotonicity of s -> g(s)/s that apply to this exponent.
inline SlopeReport classify_slopes(const Nonlinearity& n, int N, const SlopeOptions& opt = {}) {
    SlopeReport rep;
    const double q = n.q();
    rep.regime = classify_regime(q, N);
    rep.critical_exponent = critical_exponent(N);
    rep.s_small = opt.s_small;
    rep.s_large = opt.s_large.value_or(n.transform().s_max());

    const auto grid = log_grid(rep.s_small, rep.s_large, opt.samples);
    auto slope = [&n](double s) { return n.g(s) / s; };
    double prev = slope(grid.front());
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double cur = slope(grid[i]);
        if (cur > prev * (1.0 + opt.monotone_slack)) rep.decreasing = false;
        if (cur < prev * (1.0 - opt.monotone_slack)) rep.increasing = false;
        prev = cur;
    }
    rep.slope_at_zero = slope(rep.s_small);
    rep.slope_at_infinity = slope(rep.s_large);

    // Power-law growth test: across a factor 100 in s the slope must move at
    // least halfway towards the pure power prediction.
    auto moves_like = [](double ratio, double power_ratio) { return ratio > 1.0 + 0.5 * (power_ratio - 1.0); };
    const double near0 = slope(100.0 * rep.s_small);
    const double nearinf = slope(rep.s_large / 100.0);
    const auto alpha = n.theta().alpha;

    if (q < 1.0) rep.zero_slope_infinite = moves_like(rep.slope_at_zero / near0, std::pow(100.0, 1.0 - q));
    if (q == 1.0) {
        const double target = 1.0 / n.theta().eval(0.0);
        rep.zero_slope_linear = std::abs(rep.slope_at_zero - target) <= opt.linear_rel_tol * target;
    }
    if (q > 1.0) rep.zero_slope_vanishes = moves_like(near0 / rep.slope_at_zero, std::pow(100.0, q - 1.0));
    if (q < 3.0 && alpha) {
        const double envelope = std::pow(8.0 / (*alpha * *alpha), (q + 1.0) / 4.0) *
                                std::pow(rep.s_large, (q - 3.0) / 2.0);
        rep.tail_slope_vanishes = rep.slope_at_infinity <= envelope * (1.0 + 1e-9) &&
                      moves_like(nearinf / rep.slope_at_infinity, std::pow(100.0, (3.0 - q) / 2.0));
    }
    if (q == 3.0 && alpha) {
        const double target = 4.0 / (*alpha * *alpha);
        rep.tail_slope_finite = std::abs(rep.slope_at_infinity - target) <= opt.limit_rel_tol * target;
    }
    if (q > 3.0) rep.tail_slope_infinite = moves_like(rep.slope_at_infinity / nearinf, std::pow(100.0, (q - 3.0) / 2.0));
    if (q <= 1.0) rep.slope_decreasing_ok = rep.decreasing;
    if (q >= 3.0) rep.slope_increasing_ok = rep.increasing;
    return rep;
}

/// Pohozaev function samples z(s) = (N-2)/2 g(s) s - N G(s) and ratio g(s)/(g'(s) s).
struct PohozaevReport {
    int N = 3;
    double q = 0.0;
    std::vector<double> s, z, ratio;
    double min_z = 0.0;
    double max_ratio = 0.0;
    double ratio_bound = 0.0;       ///< 2/(q-1)
    double sufficient_bound = 0.0;  ///< (N-2)/(N+2)
    bool z_positive = false;
    bool ratio_within_bound = false;  ///< ratio < 2/(q-1) everywhere
    bool sufficient = false;          ///< ratio <= (N-2)/(N+2) everywhere, so z' >= 0

    /// z > 0, the ratio bound and the monotonicity condition hold on every sample.
    bool nonexistence() const { return z_positive && ratio_within_bound && sufficient; }
};

inline PohozaevReport pohozaev_scan(const Nonlinearity& n, int N, double s_hi, double s_lo = 1e-6,
                                    std::size_t samples = 1000) {
    if (N < 3) throw ContractError("pohozaev_scan: needs N >= 3");
    if (!(s_hi > s_lo && s_lo > 0.0)) throw ContractError("pohozaev_scan: need 0 < s_lo < s_hi");
    PohozaevReport rep;
    rep.N = N;
    rep.q = n.q();
    rep.ratio_bound = n.q() > 1.0 ? 2.0 / (n.q() - 1.0) : std::numeric_limits<double>::infinity();
    rep.sufficient_bound = (N - 2.0) / (N + 2.0);
    rep.s = log_grid(s_lo, s_hi, samples);
    rep.min_z = std::numeric_limits<double>::infinity();
    rep.max_ratio = -std::numeric_limits<double>::infinity();
    for (double s : rep.s) {
        const double g = n.g(s);
        const double z = 0.5 * (N - 2.0) * g * s - N * n.G(s);
        const double r = g / (n.g_prime(s) * s);
        rep.z.push_back(z);
        rep.ratio.push_back(r);
        rep.min_z = std::min(rep.min_z, z);
        rep.max_ratio = std::max(rep.max_ratio, r);
    }
    rep.z_positive = rep.min_z > 0.0;
    rep.ratio_within_bound = rep.max_ratio < rep.ratio_bound;
    rep.sufficient = rep.max_ratio <= rep.sufficient_bound;
    return rep;
}

enum class SignDecision { proceed, refuse };

/// No nontrivial solution exists for lambda <= 0.
inline SignDecision sign_guard(double lambda) {
    return lambda > 0.0 ? SignDecision::proceed : SignDecision::refuse;
}

}  // namespace dualschro
