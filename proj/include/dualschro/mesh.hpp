#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "dualschro/errors.hpp"

namespace dualschro {

/// Uniform finite-difference grid on an interval (dim 1) or rectangle (dim 2)
/// with homogeneous Dirichlet data. Only interior nodes are unknowns.
///
/// `pad` is the fraction of each side by which the enclosing domain D is
/// dilated on every side for the torsion function.
struct DomainMesh {
    int dim = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{1.0, 1.0};
    int n = 100;  ///< interior points per axis
    double pad = 0.1;

    static DomainMesh interval(double a, double b, int n, double pad = 0.1) {
        DomainMesh m{1, {a, 0.0}, {b, 0.0}, n, pad};
        m.check();
        return m;
    }

    static DomainMesh rectangle(double ax, double bx, double ay, double by, int n, double pad = 0.1) {
        DomainMesh m{2, {ax, ay}, {bx, by}, n, pad};
        m.check();
        return m;
    }

    void check() const {
        if (dim != 1 && dim != 2) throw ContractError("mesh: dim must be 1 or 2");
        if (n < 1) throw ContractError("mesh: need at least one interior point");
        for (int a = 0; a < dim; ++a)
            if (!(hi[a] > lo[a])) throw ContractError("mesh: empty extent");
        if (!(pad > 0.0)) throw ContractError("mesh: pad must be positive so that D contains the closure");
    }

    double side(int axis) const { return hi[axis] - lo[axis]; }
    double h(int axis = 0) const { return side(axis) / (n + 1); }
    std::size_t size() const { return dim == 1 ? std::size_t(n) : std::size_t(n) * std::size_t(n); }
    /// Quadrature weight h^dim (cell volume).
    double cell_volume() const { return dim == 1 ? h(0) : h(0) * h(1); }
    std::size_t index(int i, int j = 0) const { return std::size_t(j) * std::size_t(n) + std::size_t(i); }
    /// Coordinate of interior node i (0-based) along `axis`.
    double coord(int axis, int i) const { return lo[axis] + (i + 1) * h(axis); }

    bool operator==(const DomainMesh&) const = default;
};

/// Grid function on the interior nodes of a mesh; boundary values are zero.
class Field {
public:
    Field() = default;
    explicit Field(const DomainMesh& mesh, double value = 0.0) : mesh_(mesh), v_(mesh.size(), value) {}
    Field(const DomainMesh& mesh, std::vector<double> values) : mesh_(mesh), v_(std::move(values)) {
        if (v_.size() != mesh_.size()) throw ContractError("field: value count does not match mesh");
    }

    /// Sample `fn(x)` (1D) or `fn(x, y)` (2D) at interior nodes.
    template <class Fn>
    static Field sample(const DomainMesh& mesh, Fn&& fn) {
        Field out(mesh);
        if (mesh.dim == 1) {
            for (int i = 0; i < mesh.n; ++i) {
                if constexpr (std::is_invocable_v<Fn, double>) out.v_[i] = fn(mesh.coord(0, i));
                else out.v_[i] = fn(mesh.coord(0, i), 0.0);
            }
        } else {
            if constexpr (std::is_invocable_v<Fn, double, double>) {
                for (int j = 0; j < mesh.n; ++j)
                    for (int i = 0; i < mesh.n; ++i)
                        out.v_[mesh.index(i, j)] = fn(mesh.coord(0, i), mesh.coord(1, j));
            } else {
                throw ContractError("field: 2D sampling needs fn(x, y)");
            }
        }
        return out;
    }

    const DomainMesh& mesh() const { return mesh_; }
    std::size_t size() const { return v_.size(); }
    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }
    std::span<double> values() { return v_; }
    std::span<const double> values() const { return v_; }

    double max() const { return *std::max_element(v_.begin(), v_.end()); }
    double min() const { return *std::min_element(v_.begin(), v_.end()); }
    double max_abs() const {
        double m = 0.0;
        for (double x : v_) m = std::max(m, std::abs(x));
        return m;
    }

    Field& operator*=(double a) {
        for (double& x : v_) x *= a;
        return *this;
    }
    Field& operator+=(const Field& o) {
        same_mesh(o);
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        same_mesh(o);
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
        return *this;
    }
    friend Field operator*(double a, Field f) { return f *= a; }
    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }

    void same_mesh(const Field& o) const {
        if (!(mesh_ == o.mesh_)) throw ContractError("field: mesh mismatch");
    }

private:
    DomainMesh mesh_;
    std::vector<double> v_;
};

inline double dot(const Field& a, const Field& b) {
    a.same_mesh(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Discrete inner product h^dim * sum a_i b_i.
inline double inner(const Field& a, const Field& b) { return a.mesh().cell_volume() * dot(a, b); }

inline double max_abs_diff(const Field& a, const Field& b) {
    a.same_mesh(b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Apply a node-wise map.
template <class Fn>
Field map(const Field& v, Fn&& fn) {
    Field out(v.mesh());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = fn(v[i]);
    return out;
}

namespace detail {

inline void apply_laplacian(const DomainMesh& m, std::span<const double> v, std::span<double> out) {
    if (m.dim == 1) {
        const double c = 1.0 / (m.h(0) * m.h(0));
        const int n = m.n;
        for (int i = 0; i < n; ++i) {
            const double left = i > 0 ? v[i - 1] : 0.0;
            const double right = i + 1 < n ? v[i + 1] : 0.0;
            out[i] = c * (2.0 * v[i] - left - right);
        }
        return;
    }
    const double cx = 1.0 / (m.h(0) * m.h(0)), cy = 1.0 / (m.h(1) * m.h(1));
    const int n = m.n;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const std::size_t k = m.index(i, j);
            const double w = i > 0 ? v[k - 1] : 0.0;
            const double e = i + 1 < n ? v[k + 1] : 0.0;
            const double s = j > 0 ? v[k - n] : 0.0;
            const double nn = j + 1 < n ? v[k + n] : 0.0;
            out[k] = cx * (2.0 * v[k] - w - e) + cy * (2.0 * v[k] - s - nn);
        }
    }
}

inline double norm2(std::span<const double> a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

/// Symmetric tridiagonal LDL^T of -Delta_h + diag(shift) in 1D.
struct TridiagonalLDLT {
    std::vector<double> pivots;
    double off = 0.0;  // off-diagonal entry -1/h^2
    int negative = 0;
    bool singular = false;

    TridiagonalLDLT(const DomainMesh& m, std::span<const double> shift) {
        const double c = 1.0 / (m.h(0) * m.h(0));
        off = -c;
        pivots.resize(m.n);
        const double scale = 2.0 * c;
        for (int i = 0; i < m.n; ++i) {
            double d = 2.0 * c + shift[i];
            if (i > 0) d -= off * off / pivots[i - 1];
            if (std::abs(d) < 1e-13 * scale || !std::isfinite(d)) {
                singular = true;
                d = d < 0.0 ? -1e-13 * scale : 1e-13 * scale;
            }
            if (d < 0.0) ++negative;
            pivots[i] = d;
        }
    }

    void solve(std::span<const double> rhs, std::span<double> x) const {
        const std::size_t n = pivots.size();
        std::vector<double> y(rhs.begin(), rhs.end());
        for (std::size_t i = 1; i < n; ++i) y[i] -= off / pivots[i - 1] * y[i - 1];
        x[n - 1] = y[n - 1] / pivots[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) x[i] = (y[i] - off * x[i + 1]) / pivots[i];
    }
};

inline Eigen::SparseMatrix<double> assemble_2d(const DomainMesh& m, std::span<const double> shift) {
    const double cx = 1.0 / (m.h(0) * m.h(0)), cy = 1.0 / (m.h(1) * m.h(1));
    const int n = m.n;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(m.size() * 5);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int k = static_cast<int>(m.index(i, j));
            t.emplace_back(k, k, 2.0 * cx + 2.0 * cy + shift[k]);
            if (i > 0) t.emplace_back(k, k - 1, -cx);
            if (i + 1 < n) t.emplace_back(k, k + 1, -cx);
            if (j > 0) t.emplace_back(k, k - n, -cy);
            if (j + 1 < n) t.emplace_back(k, k + n, -cy);
        }
    }
    Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m.size()));
    A.setFromTriplets(t.begin(), t.end());
    return A;
}

/// Conjugate gradients for -Delta_h + diag(shift), matrix-free.
inline void conjugate_gradient(const DomainMesh& m, std::span<const double> shift, std::span<const double> rhs,
                               std::span<double> x, double rel_tol, int max_iter) {
    const std::size_t n = rhs.size();
    std::vector<double> r(n), p(n), Ap(n);
    auto apply = [&](std::span<const double> v, std::span<double> out) {
        apply_laplacian(m, v, out);
        for (std::size_t i = 0; i < n; ++i) out[i] += shift[i] * v[i];
    };
    apply(x, Ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - Ap[i];
    const double bnorm = norm2(rhs);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return;
    }
    p = r;
    double rr = 0.0;
    for (double v : r) rr += v * v;
    for (int it = 0; it < max_iter; ++it) {
        if (std::sqrt(rr) <= rel_tol * bnorm) return;
        apply(p, Ap);
        double pAp = 0.0;
        for (std::size_t i = 0; i < n; ++i) pAp += p[i] * Ap[i];
        if (!(pAp > 0.0)) throw NumericalError("conjugate_gradient: operator is not positive definite");
        const double a = rr / pAp;
        double rr_new = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += a * p[i];
            r[i] -= a * Ap[i];
            rr_new += r[i] * r[i];
        }
        const double b = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + b * p[i];
    }
    if (std::sqrt(rr) > rel_tol * bnorm)
        throw NumericalError("conjugate_gradient: no convergence, relative residual " +
                             std::to_string(std::sqrt(rr) / bnorm));
}

}  // namespace detail

/// -Delta_h v with zero Dirichlet data (positive operator).
inline Field laplacian_apply(const DomainMesh& mesh, const Field& v) {
    if (!(v.mesh() == mesh)) throw ContractError("laplacian_apply: mesh mismatch");
    Field out(mesh);
    detail::apply_laplacian(mesh, v.values(), out.values());
    return out;
}

/// Solve (-Delta_h + diag(shift)) w = rhs for a shift keeping the operator
/// positive definite. Direct tridiagonal elimination in 1D, conjugate
/// gradients in 2D; relative residual <= 1e-10 either way.
inline Field solve_shifted(const DomainMesh& mesh, std::span<const double> shift, const Field& rhs) {
    if (!(rhs.mesh() == mesh)) throw ContractError("solve_shifted: mesh mismatch");
    Field w(mesh);
    if (mesh.dim == 1) {
        detail::TridiagonalLDLT f(mesh, shift);
        if (f.singular) throw NumericalError("solve_shifted: singular operator");
        f.solve(rhs.values(), w.values());
    } else {
        detail::conjugate_gradient(mesh, shift, rhs.values(), w.values(), 1e-11,
                                   static_cast<int>(20 * mesh.size() + 100));
    }
    return w;
}

/// Solve (-Delta_h + K) w = rhs with K >= 0.
inline Field solve_shifted_poisson(const DomainMesh& mesh, const Field& rhs, double K) {
    if (!(K >= 0.0)) throw ContractError("solve_shifted_poisson: K must be nonnegative");
    const std::vector<double> shift(mesh.size(), K);
    return solve_shifted(mesh, shift, rhs);
}

/// Factorization of the symmetric (possibly indefinite) operator -Delta_h + diag(shift).
/// Reports the inertia (number of negative eigenvalues) and near-singularity.
class SymmetricFactor {
public:
    SymmetricFactor(const DomainMesh& mesh, std::span<const double> shift) : mesh_(mesh) {
        if (mesh.dim == 1) {
            tri_.emplace_back(mesh, shift);
            negative_ = tri_.front().negative;
            singular_ = tri_.front().singular;
        } else {
            ldlt_.compute(detail::assemble_2d(mesh, shift));
            if (ldlt_.info() != Eigen::Success) {
                singular_ = true;
                return;
            }
            const auto& D = ldlt_.vectorD();
            const double scale = 4.0 / (mesh.h(0) * mesh.h(0));
            for (Eigen::Index i = 0; i < D.size(); ++i) {
                if (D[i] < 0.0) ++negative_;
                if (std::abs(D[i]) < 1e-13 * scale) singular_ = true;
            }
        }
    }

    bool singular() const { return singular_; }
    int negative_count() const { return negative_; }

    Field solve(const Field& rhs) const {
        Field x(mesh_);
        if (mesh_.dim == 1) {
            tri_.front().solve(rhs.values(), x.values());
        } else {
            Eigen::Map<const Eigen::VectorXd> b(rhs.values().data(), static_cast<Eigen::Index>(rhs.size()));
            Eigen::VectorXd sol = ldlt_.solve(b);
            std::copy(sol.data(), sol.data() + sol.size(), x.values().begin());
        }
        return x;
    }

private:
    DomainMesh mesh_;
    std::vector<detail::TridiagonalLDLT> tri_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    int negative_ = 0;
    bool singular_ = false;
};

/// Dirichlet eigenpair with the eigenfunction normalized to sup-norm 1.
struct EigenPair {
    int k = 1;
    double lambda = 0.0;
    Field phi;
};

namespace detail {

inline EigenPair inverse_iteration(const DomainMesh& mesh, int k, const std::vector<Field>& lower, double rel_tol,
                                   int max_iter) {
    std::mt19937 rng(12345u + static_cast<unsigned>(k));
    std::uniform_real_distribution<double> unif(0.5, 1.5);
    Field v(mesh);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = unif(rng);

    auto deflate = [&lower](Field& x) {
        for (const auto& u : lower) {
            const double c = dot(x, u) / dot(u, u);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] -= c * u[i];
        }
    };
    auto normalize = [](Field& x) { x *= 1.0 / std::sqrt(dot(x, x)); };

    deflate(v);
    normalize(v);
    double rayleigh = 0.0;
    const std::vector<double> zero(mesh.size(), 0.0);
    for (int it = 0; it < max_iter; ++it) {
        Field w = solve_shifted(mesh, zero, v);
        deflate(w);
        normalize(w);
        const Field Aw = laplacian_apply(mesh, w);
        const double rq = dot(w, Aw);
        double res = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) res = std::max(res, std::abs(Aw[i] - rq * w[i]));
        const bool settled = std::abs(rq - rayleigh) <= rel_tol * rq;
        rayleigh = rq;
        v = std::move(w);
        if (settled && res <= rel_tol * rq * v.max_abs()) {
            // Fix the sign so that the largest-magnitude entry is positive; scale to sup-norm 1.
            std::size_t imax = 0;
            for (std::size_t i = 0; i < v.size(); ++i)
                if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
            v *= 1.0 / v[imax];
            return {k, rayleigh, std::move(v)};
        }
    }
    throw NumericalError("principal_eigenpair: inverse iteration did not converge for k=" + std::to_string(k));
}

}  // namespace detail

/// k-th Dirichlet eigenpair of -Delta_h by inverse power iteration with
/// deflation against the lower eigenvectors.
inline EigenPair principal_eigenpair(const DomainMesh& mesh, int k = 1, double rel_tol = 1e-10) {
    if (k < 1 || k > 10) throw ContractError("principal_eigenpair: k must be in [1, 10]");
    std::vector<Field> lower;
    EigenPair pair;
    for (int j = 1; j <= k; ++j) {
        pair = detail::inverse_iteration(mesh, j, lower, rel_tol, 20000);
        lower.push_back(pair.phi);
    }
    if (k == 1) {
        for (std::size_t i = 0; i < pair.phi.size(); ++i)
            if (!(pair.phi[i] > 0.0)) throw NumericalError("principal_eigenpair: phi_1 not positive");
    }
    return pair;
}

/// Torsion function e of the padded domain D (-Delta e = 1 in D, e = 0 on dD)
/// and its extremes over the closure of the mesh domain.
struct Torsion {
    DomainMesh padded;  ///< interior grid of D (same spacing as the mesh)
    Field on_D;
    Field on_omega;  ///< restriction to the interior nodes of the mesh
    double e_L = 0.0;
    double e_M = 0.0;
    int pad_nodes = 0;
    double effective_pad = 0.0;  ///< pad realized on the grid: pad_nodes / (n + 1)
};

inline Torsion torsion_function(const DomainMesh& mesh) {
    mesh.check();
    Torsion t;
    t.pad_nodes = std::max(1, static_cast<int>(std::lround(mesh.pad * (mesh.n + 1))));
    t.effective_pad = static_cast<double>(t.pad_nodes) / (mesh.n + 1);
    const int m = t.pad_nodes;
    DomainMesh D = mesh;
    D.n = mesh.n + 2 * m;
    for (int a = 0; a < mesh.dim; ++a) {
        D.lo[a] = mesh.lo[a] - m * mesh.h(a);
        D.hi[a] = mesh.hi[a] + m * mesh.h(a);
    }
    t.padded = D;
    t.on_D = solve_shifted_poisson(D, Field(D, 1.0), 0.0);

    // Closure nodes of the mesh domain sit at padded indices m-1 .. m+n (0-based interior numbering).
    const int first = m - 1, last = m + mesh.n;
    t.e_L = std::numeric_limits<double>::infinity();
    t.e_M = 0.0;
    t.on_omega = Field(mesh);
    if (mesh.dim == 1) {
        for (int i = first; i <= last; ++i) {
            t.e_L = std::min(t.e_L, t.on_D[D.index(i)]);
            t.e_M = std::max(t.e_M, t.on_D[D.index(i)]);
        }
        for (int i = 0; i < mesh.n; ++i) t.on_omega[mesh.index(i)] = t.on_D[D.index(i + m)];
    } else {
        for (int j = first; j <= last; ++j)
            for (int i = first; i <= last; ++i) {
                t.e_L = std::min(t.e_L, t.on_D[D.index(i, j)]);
                t.e_M = std::max(t.e_M, t.on_D[D.index(i, j)]);
            }
        for (int j = 0; j < mesh.n; ++j)
            for (int i = 0; i < mesh.n; ++i) t.on_omega[mesh.index(i, j)] = t.on_D[D.index(i + m, j + m)];
    }
    return t;
}

}  // namespace dualschro
