#ifndef AICLAB_LINALG_HPP
#define AICLAB_LINALG_HPP

// Small dense linear algebra: row-major matrices and std::vector<double> vectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "aiclab/errors.hpp"
#include "aiclab/random.hpp"

namespace aiclab {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw DimensionMismatch("ragged matrix literal", cols_, r.size());
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(std::span<const double> d) {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    Vector column(std::size_t j) const {
        Vector c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    void set_column(std::size_t j, std::span<const double> v) {
        for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
    }

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Vector operations

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("dot", a.size(), b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline Vector add(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("add", a.size(), b.size());
    Vector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vector subtract(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("subtract", a.size(), b.size());
    Vector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vector scaled(std::span<const double> a, double s) {
    Vector r(a.begin(), a.end());
    for (double& x : r) x *= s;
    return r;
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw DimensionMismatch("axpy", y.size(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vector normalized(std::span<const double> a) {
    const double n = norm(a);
    if (n == 0.0) throw Error("cannot normalize a zero vector");
    return scaled(a, 1.0 / n);
}

inline double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

inline bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

/// Neumaier-compensated summation.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// ---------------------------------------------------------------------------
// Matrix operations

inline Vector matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw DimensionMismatch("matvec", a.cols(), x.size());
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

/// Aᵀx
inline Vector matvec_transpose(const Matrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) throw DimensionMismatch("matvec_transpose", a.rows(), x.size());
    Vector y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) y[j] += r[j] * x[i];
    }
    return y;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("matmul", a.cols(), b.rows());
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const auto bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows()) throw DimensionMismatch(what, a.rows(), b.rows());
    if (a.cols() != b.cols()) throw DimensionMismatch(what, a.cols(), b.cols());
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "matrix add");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

inline Matrix subtract(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "matrix subtract");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

inline Matrix scaled(const Matrix& a, double s) {
    Matrix c = a;
    for (double& x : c.data()) x *= s;
    return c;
}

inline Matrix outer(std::span<const double> a, std::span<const double> b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

inline double max_abs(const Matrix& a) { return max_abs(std::span<const double>(a.data())); }

inline double frobenius_norm(const Matrix& a) { return norm(a.data()); }

inline double trace(const Matrix& a) {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) t += a(i, i);
    return t;
}

/// Largest |A[i,j] - A[j,i]|.
inline double asymmetry(const Matrix& a) {
    if (!a.square()) throw DimensionMismatch("asymmetry", a.rows(), a.cols());
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - a(j, i)));
    return m;
}

inline bool is_diagonal(const Matrix& a) {
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j && a(i, j) != 0.0) return false;
    return true;
}

inline constexpr double kOperatorNormTolerance = 1e-10;
inline constexpr int kOperatorNormMaxIterations = 10000;

/// Spectral norm ‖A‖₂ by power iteration on AᵀA, started from a fixed
/// pseudo-random vector so results are reproducible.
inline double operator_norm(const Matrix& a) {
    if (a.rows() == 0 || a.cols() == 0) return 0.0;
    if (max_abs(a) == 0.0) return 0.0;
    CounterRng rng(0x0A1C1AB, streams::power_start);
    Vector v(a.cols());
    for (double& x : v) x = rng.normal();
    v = normalized(v);
    double sigma = 0.0;
    for (int it = 0; it < kOperatorNormMaxIterations; ++it) {
        Vector w = matvec_transpose(a, matvec(a, v));
        const double wn = norm(w);
        if (wn == 0.0) return sigma;
        const double next = std::sqrt(wn);  // ‖AᵀA v‖ → σ² as v converges
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = w[i] / wn;
        if (std::abs(next - sigma) <= kOperatorNormTolerance * next) {
            sigma = next;
            break;
        }
        sigma = next;
    }
    // Final Rayleigh quotient on the converged direction.
    return std::max(sigma, norm(matvec(a, v)));
}

/// Modified Gram-Schmidt (two passes) on the columns of `a`; returns Q with
/// orthonormal columns. Throws if the columns are numerically dependent.
inline Matrix orthonormalize_columns(const Matrix& a) {
    Matrix q = a;
    for (std::size_t j = 0; j < q.cols(); ++j) {
        Vector v = q.column(j);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < j; ++k) {
                double p = 0.0;
                for (std::size_t i = 0; i < q.rows(); ++i) p += q(i, k) * v[i];
                for (std::size_t i = 0; i < q.rows(); ++i) v[i] -= p * q(i, k);
            }
        }
        const double n = norm(v);
        if (n < 1e-12) throw Error("columns are linearly dependent");
        for (double& x : v) x /= n;
        q.set_column(j, v);
    }
    return q;
}

/// Seeded matrix of independent standard normals.
inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                              std::uint64_t stream = streams::matrix) {
    CounterRng rng(seed, stream);
    Matrix m(rows, cols);
    for (double& x : m.data()) x = rng.normal();
    return m;
}

/// Cholesky factor L (lower) of an SPD matrix.
inline Matrix cholesky(const Matrix& a) {
    if (!a.square()) throw DimensionMismatch("cholesky", a.rows(), a.cols());
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) throw Error("matrix is not positive definite");
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

/// Solve (L Lᵀ) x = b given the Cholesky factor L.
inline Vector cholesky_solve(const Matrix& l, std::span<const double> b) {
    const std::size_t n = l.rows();
    if (b.size() != n) throw DimensionMismatch("cholesky_solve", n, b.size());
    Vector y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) y[i] -= l(i, k) * y[k];
        y[i] /= l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) y[i] -= l(k, i) * y[k];
        y[i] /= l(i, i);
    }
    return y;
}

}  // namespace aiclab

#endif  // AICLAB_LINALG_HPP
