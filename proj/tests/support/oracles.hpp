#ifndef AICLAB_TEST_ORACLES_HPP
#define AICLAB_TEST_ORACLES_HPP

// Reference computations used only by tests. Each avoids the library routine
// it checks (no Jacobi, no log-sum-exp, no boost).

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "aiclab/linalg.hpp"

namespace oracle {

using aiclab::Matrix;
using aiclab::Vector;

/// det(A − xI) by LU with partial pivoting.
inline double shifted_det(const Matrix& a, double x) {
    const std::size_t n = a.rows();
    std::vector<std::vector<double>> m(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m[i][j] = a(i, j) - (i == j ? x : 0.0);
    double det = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
        if (m[piv][c] == 0.0) return 0.0;
        if (piv != c) {
            std::swap(m[piv], m[c]);
            det = -det;
        }
        det *= m[c][c];
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = m[r][c] / m[c][c];
            for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
        }
    }
    return det;
}

/// Eigenvalues (descending) of a symmetric matrix with simple spectrum: sign
/// changes of det(A − xI) on a grid over the Gershgorin interval, then bisection.
inline Vector charpoly_eigenvalues(const Matrix& a, std::size_t grid = 20000) {
    const std::size_t n = a.rows();
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) r += std::abs(a(i, j));
        lo = std::min(lo, a(i, i) - r);
        hi = std::max(hi, a(i, i) + r);
    }
    lo -= 1e-3;
    hi += 1e-3;
    Vector roots;
    double x0 = lo, f0 = shifted_det(a, lo);
    for (std::size_t k = 1; k <= grid; ++k) {
        const double x1 = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(grid);
        const double f1 = shifted_det(a, x1);
        if ((f0 < 0) != (f1 < 0)) {
            double l = x0, r = x1, fl = f0;
            for (int it = 0; it < 200 && r - l > 1e-15 * std::max(1.0, std::abs(l)); ++it) {
                const double mid = 0.5 * (l + r);
                const double fm = shifted_det(a, mid);
                if ((fm < 0) == (fl < 0)) {
                    l = mid;
                    fl = fm;
                } else {
                    r = mid;
                }
            }
            roots.push_back(0.5 * (l + r));
        }
        x0 = x1;
        f0 = f1;
    }
    std::sort(roots.rbegin(), roots.rend());
    return roots;
}

/// Δθ(t) = −φ(H, t) g0 for θ̇ = −(g0 + HΔθ), with φ(H, t) = Σ_k (−H)^k t^{k+1}/(k+1)!
/// summed until terms fall below 1e-20 relative.
inline Vector linear_flow_displacement(const Matrix& h, const Vector& g0, double t) {
    const std::size_t n = g0.size();
    Vector term = g0;  // (−H t)^k g0 · t/(k+1)!
    for (double& x : term) x *= t;
    Vector sum = term;
    for (int k = 1; k < 400; ++k) {
        Vector next(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) next[i] -= h(i, j) * term[j];
        double size = 0.0, total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            next[i] *= t / static_cast<double>(k + 1);
            sum[i] += next[i];
            size = std::max(size, std::abs(next[i]));
            total = std::max(total, std::abs(sum[i]));
        }
        term = next;
        if (size <= 1e-20 * std::max(total, 1e-300)) break;
    }
    for (double& x : sum) x = -x;
    return sum;
}

/// Beta(a, b) CDF by composite Simpson integration after substituting u = w²,
/// which removes the √u endpoint behaviour of half-integer a.
inline double beta_cdf(double x, double a, double b, std::size_t panels = 20000) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    auto integrand = [&](double w) {
        const double u = w * w;
        if (w <= 0.0 || u >= 1.0) return 0.0;
        return 2.0 * w * std::exp(log_norm + (a - 1.0) * std::log(u) + (b - 1.0) * std::log1p(-u));
    };
    const double top = std::sqrt(x);
    const double h = top / static_cast<double>(panels);
    double s = integrand(0.0) + integrand(top);
    for (std::size_t i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * integrand(h * static_cast<double>(i));
    return s * h / 3.0;
}

/// Σ_x p(x) Σ_y D(y|x) log(e^{θ_xy} / Σ_j e^{θ_xj}) with plain exponentials.
inline double plain_utility(const Matrix& logits, const Vector& p, const Matrix& d) {
    double total = 0.0;
    for (std::size_t x = 0; x < logits.rows(); ++x) {
        double z = 0.0;
        for (std::size_t y = 0; y < logits.cols(); ++y) z += std::exp(logits(x, y));
        for (std::size_t y = 0; y < logits.cols(); ++y)
            if (d(x, y) > 0.0) total += p[x] * d(x, y) * std::log(std::exp(logits(x, y)) / z);
    }
    return total;
}

/// KL((½,½) ‖ (σ(2δ), 1 − σ(2δ))) in closed form.
inline double binary_kl(double delta) {
    const double s = 1.0 / (1.0 + std::exp(-2.0 * delta));
    return -std::log(2.0) - 0.5 * std::log(s * (1.0 - s));
}

}  // namespace oracle

#endif  // AICLAB_TEST_ORACLES_HPP
