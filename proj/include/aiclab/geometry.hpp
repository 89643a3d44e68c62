#ifndef AICLAB_GEOMETRY_HPP
#define AICLAB_GEOMETRY_HPP

// Dense symmetric spectral toolkit: eigendecomposition, top-d projectors,
// Fisher-weighted norms, spectral gaps and Davis-Kahan subspace bounds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "aiclab/errors.hpp"
#include "aiclab/linalg.hpp"

namespace aiclab {

inline constexpr double kSymmetryTolerance = 1e-12;   // relative to max|A|
inline constexpr double kDegenerateGap = 1e-10;
inline constexpr double kOrthonormalTolerance = 1e-10;
inline constexpr double kCommutatorTolerance = 1e-8;  // relative to ‖F‖_op

/// Symmetric, finite n×n matrix. Validated on construction.
class SymMatrix {
public:
    SymMatrix() = default;

    explicit SymMatrix(Matrix m) : m_(std::move(m)) {
        if (!m_.square()) throw DimensionMismatch("SymMatrix must be square", m_.rows(), m_.cols());
        if (!all_finite(m_.data())) throw NonFiniteError("SymMatrix has non-finite entries");
        const double tol = kSymmetryTolerance * max_abs(m_);
        const double asym = asymmetry(m_);
        if (asym > tol) throw AsymmetryError(asym, tol);
    }

    SymMatrix(std::initializer_list<std::initializer_list<double>> rows)
        : SymMatrix(Matrix(rows)) {}

    /// Replaces m by (m + mᵀ)/2 before validation; for matrices assembled by
    /// arithmetic that is symmetric only up to rounding.
    static SymMatrix symmetrized(const Matrix& m) {
        if (!m.square()) throw DimensionMismatch("symmetrized", m.rows(), m.cols());
        Matrix s = m;
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = i + 1; j < m.cols(); ++j) {
                const double avg = 0.5 * (m(i, j) + m(j, i));
                s(i, j) = avg;
                s(j, i) = avg;
            }
        return SymMatrix(std::move(s));
    }

    static SymMatrix diagonal(std::span<const double> d) { return SymMatrix(Matrix::diagonal(d)); }
    static SymMatrix diagonal(std::initializer_list<double> d) {
        return diagonal(std::span<const double>(d.begin(), d.size()));
    }
    static SymMatrix identity(std::size_t n) { return SymMatrix(Matrix::identity(n)); }

    std::size_t n() const noexcept { return m_.rows(); }
    const Matrix& matrix() const noexcept { return m_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }

    Vector apply(std::span<const double> v) const { return matvec(m_, v); }

    double quadratic_form(std::span<const double> v) const { return dot(v, apply(v)); }

private:
    Matrix m_;
};

/// Eigenvalues in non-increasing order with matching orthonormal eigenvector columns.
struct SymSpectrum {
    Vector eigenvalues;
    Matrix eigenvectors;

    std::size_t n() const noexcept { return eigenvalues.size(); }
    Vector vector(std::size_t j) const { return eigenvectors.column(j); }
    double lambda_max() const { return eigenvalues.empty() ? 0.0 : eigenvalues.front(); }

    /// V diag(f(λ)) Vᵀ
    template <typename F>
    Matrix reconstruct(F&& f) const {
        const std::size_t k = n();
        Matrix out(eigenvectors.rows(), eigenvectors.rows());
        for (std::size_t j = 0; j < k; ++j) {
            const double w = f(eigenvalues[j]);
            if (w == 0.0) continue;
            for (std::size_t r = 0; r < out.rows(); ++r) {
                const double vr = w * eigenvectors(r, j);
                if (vr == 0.0) continue;
                auto row = out.row(r);
                for (std::size_t c = 0; c < out.cols(); ++c) row[c] += vr * eigenvectors(c, j);
            }
        }
        return out;
    }

    Matrix reconstruct() const {
        return reconstruct([](double l) { return l; });
    }
};

namespace detail {

/// One cyclic Jacobi pass structure; `a` converges to diagonal, `v` accumulates rotations.
inline void jacobi_diagonalize(Matrix& a, Matrix& v) {
    const std::size_t n = a.rows();
    const double scale = frobenius_norm(a);
    if (scale == 0.0) return;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off == 0.0 || std::sqrt(2.0 * off) <= 1e-17 * scale) return;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double g = 100.0 * std::abs(apq);
                // Element is below rounding of both diagonal entries: drop it.
                if (sweep > 3 && std::abs(app) + g == std::abs(app) &&
                    std::abs(aqq) + g == std::abs(aqq)) {
                    a(p, q) = 0.0;
                    a(q, p) = 0.0;
                    continue;
                }
                const double theta = (aqq - app) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150)
                    t = 0.5 / theta;
                else
                    t = (theta >= 0.0 ? 1.0 : -1.0) /
                        (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    const double np = c * akp - s * akq;
                    const double nq = s * akp + c * akq;
                    a(k, p) = np;
                    a(p, k) = np;
                    a(k, q) = nq;
                    a(q, k) = nq;
                }
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;

                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
}

}  // namespace detail

/// Cyclic Jacobi eigendecomposition. Eigenvalues descending; each eigenvector's
/// largest-magnitude component (first on ties) is made positive.
inline SymSpectrum eigendecompose(const SymMatrix& s) {
    const std::size_t n = s.n();
    Matrix a = s.matrix();
    Matrix v = Matrix::identity(n);
    detail::jacobi_diagonalize(a, v);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    SymSpectrum out{Vector(n), Matrix(n, n)};
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        out.eigenvalues[j] = a(src, src);
        std::size_t arg = 0;
        double big = -1.0;
        for (std::size_t r = 0; r < n; ++r) {
            if (std::abs(v(r, src)) > big) {
                big = std::abs(v(r, src));
                arg = r;
            }
        }
        const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, j) = sign * v(r, src);
    }
    return out;
}

inline SymSpectrum eigendecompose(const Matrix& m) { return eigendecompose(SymMatrix(m)); }

/// Orthogonal projector P = B Bᵀ onto the span of orthonormal basis columns B.
class Projector {
public:
    Projector() = default;

    /// `basis` must have orthonormal columns (checked to 1e-10).
    static Projector from_basis(Matrix basis, bool ill_conditioned = false) {
        const Matrix gram = matmul(transpose(basis), basis);
        for (std::size_t i = 0; i < gram.rows(); ++i)
            for (std::size_t j = 0; j < gram.cols(); ++j)
                if (std::abs(gram(i, j) - (i == j ? 1.0 : 0.0)) > kOrthonormalTolerance)
                    throw Error("projector basis is not orthonormal");
        Projector p;
        p.basis_ = std::move(basis);
        p.ill_conditioned_ = ill_conditioned;
        p.matrix_ = matmul(p.basis_, transpose(p.basis_));
        return p;
    }

    static Projector zero(std::size_t n) { return from_basis(Matrix(n, 0)); }
    static Projector identity(std::size_t n) { return from_basis(Matrix::identity(n)); }

    std::size_t n() const noexcept { return basis_.rows(); }
    std::size_t rank() const noexcept { return basis_.cols(); }
    const Matrix& basis() const noexcept { return basis_; }
    const Matrix& matrix() const noexcept { return matrix_; }

    /// Set when the eigen-gap at the cut is below 1e-10, so the subspace is not well defined.
    bool ill_conditioned() const noexcept { return ill_conditioned_; }

    /// Coordinates Bᵀv in the subspace basis.
    Vector coordinates(std::span<const double> v) const {
        if (v.size() != n()) throw DimensionMismatch("projector", n(), v.size());
        return matvec_transpose(basis_, v);
    }

    Vector apply(std::span<const double> v) const { return matvec(basis_, coordinates(v)); }

    /// ‖Pv‖²
    double mass(std::span<const double> v) const {
        const Vector c = coordinates(v);
        return dot(c, c);
    }

private:
    Matrix basis_;
    Matrix matrix_;
    bool ill_conditioned_ = false;
};

/// Λ = λ_d − λ_{d+1}.
inline double spectral_gap(const SymSpectrum& s, std::size_t d) {
    if (d < 1 || d >= s.n())
        throw Error("spectral gap needs 1 <= d < n (d = " + std::to_string(d) +
                    ", n = " + std::to_string(s.n()) + ")");
    return s.eigenvalues[d - 1] - s.eigenvalues[d];
}

/// Projector onto the span of the d leading eigenvectors.
inline Projector top_projector(const SymSpectrum& s, std::size_t d) {
    if (d < 1 || d > s.n())
        throw Error("top_projector needs 1 <= d <= n (d = " + std::to_string(d) +
                    ", n = " + std::to_string(s.n()) + ")");
    Matrix basis(s.n(), d);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t r = 0; r < s.n(); ++r) basis(r, j) = s.eigenvectors(r, j);
    const bool degenerate = d < s.n() && spectral_gap(s, d) < kDegenerateGap;
    return Projector::from_basis(std::move(basis), degenerate);
}

/// F^{1/2} = V Λ^{1/2} Vᵀ of a PSD matrix, cached.
class FisherHalf {
public:
    explicit FisherHalf(SymSpectrum spectrum) : spectrum_(std::move(spectrum)) {
        const double floor = -1e-12 * std::max(1.0, std::abs(spectrum_.lambda_max()));
        for (double l : spectrum_.eigenvalues)
            if (l < floor) throw Error("Fisher matrix is not PSD: eigenvalue " + std::to_string(l));
        half_ = spectrum_.reconstruct([](double l) { return std::sqrt(std::max(l, 0.0)); });
        full_ = spectrum_.reconstruct();
    }

    explicit FisherHalf(const SymMatrix& f) : FisherHalf(eigendecompose(f)) {}

    std::size_t n() const noexcept { return spectrum_.n(); }
    const SymSpectrum& spectrum() const noexcept { return spectrum_; }
    const Matrix& half() const noexcept { return half_; }
    const Matrix& full() const noexcept { return full_; }
    double lambda_max() const noexcept { return std::max(spectrum_.lambda_max(), 0.0); }

    Vector apply(std::span<const double> v) const { return matvec(half_, v); }

private:
    SymSpectrum spectrum_;
    Matrix half_;
    Matrix full_;
};

/// ‖F^{1/2} P v‖
inline double fisher_half_norm(const FisherHalf& f, const Projector& p, std::span<const double> v) {
    if (f.n() != p.n()) throw DimensionMismatch("fisher_half_norm: projector", f.n(), p.n());
    if (v.size() != f.n()) throw DimensionMismatch("fisher_half_norm: vector", f.n(), v.size());
    return norm(f.apply(p.apply(v)));
}

/// ‖FP − PF‖_op
inline double commutator_norm(const SymMatrix& f, const Projector& p) {
    if (f.n() != p.n()) throw DimensionMismatch("commutator", f.n(), p.n());
    const Matrix fp = matmul(f.matrix(), p.matrix());
    return operator_norm(subtract(fp, transpose(fp)));  // PF = (FP)ᵀ for symmetric F, P
}

inline void require_spectral(const SymMatrix& f, const Projector& p) {
    const double tol = kCommutatorTolerance * std::max(operator_norm(f.matrix()), 1e-300);
    const double c = commutator_norm(f, p);
    if (c > tol) throw NotSpectralError(c, tol);
}

struct RayleighFloor {
    double quad;   // zᵀFz
    double floor;  // λ‖Pz‖²
    bool holds;
};

/// Checks zᵀFz ≥ λ‖Pz‖² for a spectral projector P of F.
inline RayleighFloor rayleigh_floor(const SymMatrix& f, const Projector& p, double lambda,
                                    std::span<const double> z) {
    require_spectral(f, p);
    if (z.size() != f.n()) throw DimensionMismatch("rayleigh_floor", f.n(), z.size());
    RayleighFloor r{};
    r.quad = f.quadratic_form(z);
    r.floor = lambda * p.mass(z);
    r.holds = r.quad >= r.floor - 1e-10;
    return r;
}

/// ‖P1 − P2‖_op; lies in [0, 1] for equal-rank orthogonal projectors.
inline double projector_distance(const Projector& a, const Projector& b) {
    if (a.n() != b.n()) throw DimensionMismatch("projector_distance", a.n(), b.n());
    if (a.rank() != b.rank()) throw DimensionMismatch("projector_distance rank", a.rank(), b.rank());
    return operator_norm(subtract(a.matrix(), b.matrix()));
}

struct DavisKahanResult {
    double distance;              // ‖P1 − P0‖_op
    double perturbation;          // ‖F1 − F0‖_op
    double gap;                   // Λ of F0 at rank d
    std::optional<double> bound;  // 2‖F1 − F0‖/Λ; empty when Λ is degenerate
    bool holds;
};

inline DavisKahanResult davis_kahan_check(const SymMatrix& f0, const SymMatrix& f1, std::size_t d) {
    if (f0.n() != f1.n()) throw DimensionMismatch("davis_kahan_check", f0.n(), f1.n());
    const SymSpectrum s0 = eigendecompose(f0);
    const SymSpectrum s1 = eigendecompose(f1);
    DavisKahanResult r{};
    r.distance = projector_distance(top_projector(s0, d), top_projector(s1, d));
    r.perturbation = operator_norm(subtract(f1.matrix(), f0.matrix()));
    r.gap = d < s0.n() ? spectral_gap(s0, d) : 0.0;
    if (d < s0.n() && r.gap > kDegenerateGap) {
        r.bound = 2.0 * r.perturbation / r.gap;
        r.holds = r.distance <= *r.bound + 1e-10;
    } else {
        r.holds = false;
    }
    return r;
}

}  // namespace aiclab

#endif  // AICLAB_GEOMETRY_HPP
