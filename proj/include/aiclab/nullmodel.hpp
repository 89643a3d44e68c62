#ifndef AICLAB_NULLMODEL_HPP
#define AICLAB_NULLMODEL_HPP

// Monte Carlo checks of the flat-geometry baseline: uniform unit updates,
// the trace identity, projection-mass concentration and the Rayleigh split.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "aiclab/errors.hpp"
#include "aiclab/geometry.hpp"
#include "aiclab/linalg.hpp"
#include "aiclab/parallel.hpp"
#include "aiclab/random.hpp"

namespace aiclab {

inline constexpr std::size_t kMinQuadraticTrials = 1000;
inline constexpr std::size_t kMinMassTrials = 10000;

/// Uniform draws on S^{n-1}: draw i normalizes n Gaussians taken from the
/// counter stream (seed, sphere_base + i).
struct SphereSampler {
    std::size_t n = 1;
    std::uint64_t seed = 0;
    std::uint64_t counter = 0;

    Vector draw(std::uint64_t index) const {
        if (n < 1) throw Error("sphere dimension must be >= 1");
        CounterRng rng(seed, streams::sphere_base + index);
        Vector z(n);
        for (double& x : z) x = rng.normal();
        const double len = norm(z);
        for (double& x : z) x /= len;
        return z;
    }
};

inline Vector sample_unit(SphereSampler& s) { return s.draw(s.counter++); }

struct MCEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t trials = 0;
    double target = 0.0;

    double z_score() const {
        if (std_error > 0.0) return (mean - target) / std_error;
        return mean == target ? 0.0 : std::copysign(INFINITY, mean - target);
    }
    bool within(double sigmas) const { return std::abs(z_score()) <= sigmas; }
};

/// Mean and standard error of per-trial values, summed in index order.
inline MCEstimate summarize(const std::vector<double>& values, double target) {
    if (values.size() < 2) throw InsufficientData("Monte Carlo estimate needs >= 2 trials");
    CompensatedSum s;
    for (double v : values) s.add(v);
    const double m = static_cast<double>(values.size());
    const double mean = s.value() / m;
    CompensatedSum ss;
    for (double v : values) ss.add((v - mean) * (v - mean));
    MCEstimate e;
    e.mean = mean;
    e.std_error = std::sqrt(ss.value() / (m - 1.0)) / std::sqrt(m);
    e.trials = values.size();
    e.target = target;
    return e;
}

namespace detail {

inline void require_trials(std::size_t trials, std::size_t floor, const char* what) {
    if (trials < floor)
        throw InfeasibleParams("trials", std::string(what) + " needs >= " + std::to_string(floor) +
                                             " trials, got " + std::to_string(trials));
}

/// gᵀFg for each of `trials` draws, consuming sampler counters in order.
inline std::vector<double> quadratic_form_samples(const SymMatrix& f, std::size_t trials,
                                                  SphereSampler& s, unsigned threads) {
    if (f.n() != s.n) throw DimensionMismatch("quadratic form sampler", f.n(), s.n);
    const std::uint64_t base = s.counter;
    s.counter += trials;
    std::vector<double> out(trials);
    const bool diag = is_diagonal(f.matrix());
    Vector d(f.n());
    for (std::size_t i = 0; i < f.n(); ++i) d[i] = f(i, i);
    parallel_for(trials, threads, [&](std::size_t i) {
        const Vector g = s.draw(base + i);
        if (diag) {
            double q = 0.0;
            for (std::size_t j = 0; j < g.size(); ++j) q += d[j] * g[j] * g[j];
            out[i] = q;
        } else {
            out[i] = f.quadratic_form(g);
        }
    });
    return out;
}

}  // namespace detail

/// Estimate of E[gᵀFg]; target Tr(F)/n.
inline MCEstimate quadratic_form_mean(const SymMatrix& f, std::size_t trials, SphereSampler& s,
                                      unsigned threads = 1) {
    detail::require_trials(trials, kMinQuadraticTrials, "quadratic_form_mean");
    const auto values = detail::quadratic_form_samples(f, trials, s, threads);
    return summarize(values, trace(f.matrix()) / static_cast<double>(f.n()));
}

/// Estimate of E[½η²gᵀFg]; target η²Tr(F)/(2n).
inline MCEstimate expected_loss_mc(const SymMatrix& f, double eta, std::size_t trials,
                                   SphereSampler& s, unsigned threads = 1) {
    if (!(eta > 0.0)) throw InfeasibleParams("eta", "step scale must be > 0");
    detail::require_trials(trials, kMinQuadraticTrials, "expected_loss_mc");
    auto values = detail::quadratic_form_samples(f, trials, s, threads);
    for (double& v : values) v *= 0.5 * eta * eta;
    return summarize(values, eta * eta * trace(f.matrix()) / (2.0 * static_cast<double>(f.n())));
}

/// Empirical second moment mean(ggᵀ) over `trials` draws.
inline Matrix second_moment(std::size_t trials, SphereSampler& s) {
    Matrix m(s.n, s.n);
    for (std::size_t t = 0; t < trials; ++t) {
        const Vector g = sample_unit(s);
        for (std::size_t i = 0; i < s.n; ++i)
            for (std::size_t j = 0; j < s.n; ++j) m(i, j) += g[i] * g[j];
    }
    return scaled(m, 1.0 / static_cast<double>(trials));
}

struct ProjectionMass {
    std::vector<double> samples;  // ‖Pg‖² per draw
    std::size_t n = 0;
    std::size_t d = 0;

    double expected() const { return static_cast<double>(d) / static_cast<double>(n); }

    double mean() const {
        CompensatedSum s;
        for (double v : samples) s.add(v);
        return s.value() / static_cast<double>(samples.size());
    }

    /// Fraction of draws with |‖Pg‖² − d/n| > ε·d/n.
    double tail_freq(double eps) const {
        const double c = expected();
        std::size_t hits = 0;
        for (double v : samples)
            if (std::abs(v - c) > eps * c) ++hits;
        return static_cast<double>(hits) / static_cast<double>(samples.size());
    }
};

inline ProjectionMass projection_mass(const Projector& p, std::size_t trials, SphereSampler& s,
                                      unsigned threads = 1) {
    detail::require_trials(trials, kMinMassTrials, "projection_mass");
    if (p.n() != s.n) throw DimensionMismatch("projection_mass", p.n(), s.n);
    ProjectionMass out;
    out.n = p.n();
    out.d = p.rank();
    out.samples.assign(trials, 0.0);
    const std::uint64_t base = s.counter;
    s.counter += trials;
    if (p.rank() == 0) return out;
    if (p.rank() == p.n()) {
        std::fill(out.samples.begin(), out.samples.end(), 1.0);
        return out;
    }
    parallel_for(trials, threads, [&](std::size_t i) { out.samples[i] = p.mass(s.draw(base + i)); });
    return out;
}

/// CDF of Beta(a, b), the exact law of ‖Pg‖² with a = d/2, b = (n − d)/2.
inline double beta_cdf(double x, double a, double b) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return boost::math::ibeta(a, b, x);
}

/// Kolmogorov–Smirnov distance between the samples and a continuous CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw InsufficientData("KS statistic needs samples");
    std::sort(samples.begin(), samples.end());
    const double m = static_cast<double>(samples.size());
    double dmax = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        dmax = std::max({dmax, static_cast<double>(i + 1) / m - f, f - static_cast<double>(i) / m});
    }
    return dmax;
}

/// 1% critical value 1.63/√m.
inline double ks_critical_1pct(std::size_t m) { return 1.63 / std::sqrt(static_cast<double>(m)); }

struct RayleighSplit {
    std::size_t violations = 0;
    double lambda_top = 0.0;   // λ₁
    double lambda_tail = 0.0;  // largest eigenvalue on the complement of range(P)
    double max_excess = -INFINITY;  // max of gᵀFg − bound
};

/// Counts draws where gᵀFg > λ₁‖Pg‖² + λ_{d+1}(1 − ‖Pg‖²) + 1e-10.
inline RayleighSplit rayleigh_split_check(const SymMatrix& f, const Projector& p, std::size_t trials,
                                          SphereSampler& s) {
    require_spectral(f, p);
    if (f.n() != s.n) throw DimensionMismatch("rayleigh_split_check", f.n(), s.n);
    RayleighSplit r;
    r.lambda_top = eigendecompose(f).lambda_max();
    const Matrix q = subtract(Matrix::identity(f.n()), p.matrix());
    const Matrix tail = matmul(matmul(q, f.matrix()), q);
    r.lambda_tail = p.rank() == p.n() ? 0.0 : eigendecompose(SymMatrix::symmetrized(tail)).lambda_max();
    for (std::size_t t = 0; t < trials; ++t) {
        const Vector g = sample_unit(s);
        const double m = p.mass(g);
        const double excess = f.quadratic_form(g) - (r.lambda_top * m + r.lambda_tail * (1.0 - m));
        r.max_excess = std::max(r.max_excess, excess);
        if (excess > 1e-10) ++r.violations;
    }
    return r;
}

}  // namespace aiclab

#endif  // AICLAB_NULLMODEL_HPP
