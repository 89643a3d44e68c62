#ifndef AICLAB_POLICY_HPP
#define AICLAB_POLICY_HPP

// Tabular softmax policies over finite contexts and outcomes, with exact
// utility, KL degradation and Fisher information.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aiclab/errors.hpp"
#include "aiclab/geometry.hpp"
#include "aiclab/linalg.hpp"
#include "aiclab/random.hpp"
#include "aiclab/scaling.hpp"

namespace aiclab {

inline constexpr double kProbabilityTolerance = 1e-12;

/// Context distribution p(x) and reference conditionals D(y|x), one row per context.
class SkillDistribution {
public:
    SkillDistribution() = default;
    SkillDistribution(Vector context_probs, Matrix conditionals)
        : p_(std::move(context_probs)), d_(std::move(conditionals)) {
        if (p_.size() != d_.rows())
            throw DimensionMismatch("skill context count", d_.rows(), p_.size());
        if (p_.empty() || d_.cols() == 0) throw Error("skill needs >= 1 context and outcome");
        check_row(p_, "context distribution");
        for (std::size_t x = 0; x < d_.rows(); ++x)
            check_row(d_.row(x), ("conditional row " + std::to_string(x)).c_str());
    }

    std::size_t contexts() const noexcept { return p_.size(); }
    std::size_t outcomes() const noexcept { return d_.cols(); }
    const Vector& context_probs() const noexcept { return p_; }
    const Matrix& conditionals() const noexcept { return d_; }
    double p(std::size_t x) const { return p_[x]; }
    double d(std::size_t x, std::size_t y) const { return d_(x, y); }

    /// Throws SupportError at the first zero reference probability.
    void require_full_support() const {
        for (std::size_t x = 0; x < d_.rows(); ++x)
            for (std::size_t y = 0; y < d_.cols(); ++y)
                if (d_(x, y) <= 0.0) throw SupportError(x, y);
    }

private:
    static void check_row(std::span<const double> row, const char* what) {
        double total = 0.0;
        for (double v : row) {
            if (!std::isfinite(v) || v < 0.0)
                throw Error(std::string(what) + ": probabilities must be finite and >= 0");
            total += v;
        }
        if (std::abs(total - 1.0) > kProbabilityTolerance)
            throw Error(std::string(what) + " sums to " + std::to_string(total));
    }

    Vector p_;
    Matrix d_;
};

/// Seeded skill with full support: each row is a normalized exp(N(0,1)) draw.
inline SkillDistribution random_skill(std::size_t contexts, std::size_t outcomes, std::uint64_t seed) {
    CounterRng rng(seed, streams::skill);
    auto draw_row = [&](std::span<double> row) {
        double total = 0.0;
        for (double& v : row) total += (v = std::exp(rng.normal()));
        for (double& v : row) v /= total;
    };
    Vector p(contexts);
    draw_row(p);
    Matrix d(contexts, outcomes);
    for (std::size_t x = 0; x < contexts; ++x) draw_row(d.row(x));
    return {std::move(p), std::move(d)};
}

inline double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (m == -std::numeric_limits<double>::infinity()) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

/// π_θ(y|x) ∝ exp θ[x, y]. Logits are finite or −∞; a −∞ logit is an outcome
/// the policy assigns exactly zero probability. Each row needs a finite entry.
class TabularPolicy {
public:
    TabularPolicy() = default;
    explicit TabularPolicy(Matrix logits) : logits_(std::move(logits)) {
        for (std::size_t x = 0; x < logits_.rows(); ++x) {
            bool any_finite = false;
            for (double v : logits_.row(x)) {
                if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
                    throw NonFiniteError("policy logits must be finite or -inf");
                any_finite = any_finite || std::isfinite(v);
            }
            if (!any_finite) throw NonFiniteError("policy row " + std::to_string(x) + " has no finite logit");
        }
    }

    std::size_t contexts() const noexcept { return logits_.rows(); }
    std::size_t outcomes() const noexcept { return logits_.cols(); }
    const Matrix& logits() const noexcept { return logits_; }

    Vector log_probs(std::size_t x) const {
        const auto row = logits_.row(x);
        const double lse = log_sum_exp(row);
        Vector out(row.size());
        for (std::size_t y = 0; y < row.size(); ++y) out[y] = row[y] - lse;
        return out;
    }

    Vector probs(std::size_t x) const {
        Vector out = log_probs(x);
        for (double& v : out) v = std::exp(v);
        return out;
    }

private:
    Matrix logits_;
};

// Row-major index map: θ[x, y] ↔ flat[x·|Y| + y].

inline Vector flatten(const TabularPolicy& p) { return p.logits().data(); }

inline TabularPolicy unflatten(std::span<const double> flat, std::size_t contexts, std::size_t outcomes) {
    if (flat.size() != contexts * outcomes)
        throw DimensionMismatch("unflatten", contexts * outcomes, flat.size());
    Matrix m(contexts, outcomes);
    std::copy(flat.begin(), flat.end(), m.data().begin());
    return TabularPolicy(std::move(m));
}

inline TabularPolicy shifted(const TabularPolicy& p, std::span<const double> delta) {
    Vector flat = flatten(p);
    if (delta.size() != flat.size()) throw DimensionMismatch("policy shift", flat.size(), delta.size());
    axpy(1.0, delta, flat);
    return unflatten(flat, p.contexts(), p.outcomes());
}

inline void require_compatible(const TabularPolicy& p, const SkillDistribution& s) {
    if (p.contexts() != s.contexts()) throw DimensionMismatch("policy contexts", s.contexts(), p.contexts());
    if (p.outcomes() != s.outcomes()) throw DimensionMismatch("policy outcomes", s.outcomes(), p.outcomes());
}

/// Logits log D(y|x), centered per row, so π = D.
inline TabularPolicy fit_optimal(const SkillDistribution& skill) {
    skill.require_full_support();
    Matrix m(skill.contexts(), skill.outcomes());
    for (std::size_t x = 0; x < m.rows(); ++x) {
        double mean = 0.0;
        for (std::size_t y = 0; y < m.cols(); ++y) mean += (m(x, y) = std::log(skill.d(x, y)));
        mean /= static_cast<double>(m.cols());
        for (std::size_t y = 0; y < m.cols(); ++y) m(x, y) -= mean;
    }
    return TabularPolicy(std::move(m));
}

/// Σ_x p(x) Σ_y D(y|x) log π(y|x); −∞ when π(y|x) = 0 with D(y|x) > 0.
inline double utility(const TabularPolicy& policy, const SkillDistribution& skill) {
    require_compatible(policy, skill);
    double total = 0.0;
    for (std::size_t x = 0; x < skill.contexts(); ++x) {
        const Vector lp = policy.log_probs(x);
        double inner = 0.0;
        for (std::size_t y = 0; y < skill.outcomes(); ++y) {
            const double w = skill.d(x, y);
            if (w == 0.0) continue;
            if (lp[y] == -std::numeric_limits<double>::infinity())
                return -std::numeric_limits<double>::infinity();
            inner += w * lp[y];
        }
        total += skill.p(x) * inner;
    }
    return total;
}

/// E_x KL(π_θ*(·|x) ‖ π_θ(·|x)). θ* is assumed optimal for the skill.
inline double kl_degradation(const TabularPolicy& theta_star, const TabularPolicy& theta,
                             const SkillDistribution& skill) {
    require_compatible(theta_star, skill);
    require_compatible(theta, skill);
    double total = 0.0;
    for (std::size_t x = 0; x < skill.contexts(); ++x) {
        const Vector ls = theta_star.log_probs(x);
        const Vector lt = theta.log_probs(x);
        double inner = 0.0;
        for (std::size_t y = 0; y < skill.outcomes(); ++y) {
            const double ps = std::exp(ls[y]);
            if (ps == 0.0) continue;
            if (lt[y] == -std::numeric_limits<double>::infinity())
                return std::numeric_limits<double>::infinity();
            inner += ps * (ls[y] - lt[y]);
        }
        total += skill.p(x) * inner;
    }
    return total;
}

/// Σ_x p(x)(diag(π_x) − π_x π_xᵀ), one block per context in the flattened index map.
inline SymMatrix exact_fisher(const TabularPolicy& policy, const SkillDistribution& skill) {
    require_compatible(policy, skill);
    const std::size_t ny = skill.outcomes();
    const std::size_t n = skill.contexts() * ny;
    Matrix f(n, n);
    for (std::size_t x = 0; x < skill.contexts(); ++x) {
        const Vector pi = policy.probs(x);
        const std::size_t o = x * ny;
        for (std::size_t a = 0; a < ny; ++a)
            for (std::size_t b = 0; b < ny; ++b)
                f(o + a, o + b) = skill.p(x) * ((a == b ? pi[a] : 0.0) - pi[a] * pi[b]);
    }
    return SymMatrix(std::move(f));
}

// ---------------------------------------------------------------------------
// Checks

struct RemainderFit {
    bool null_direction = false;  // vᵀFv and every Δu vanish; no fit
    double quad = 0.0;            // vᵀFv
    double cubic_constant = 0.0;  // K with slope pinned at 3
    ScalingFit fit;               // free-slope fit of R(s)
    Series remainder;
};

struct QuadraticFormReport {
    std::vector<RemainderFit> directions;
};

namespace detail {

/// e^z − 1 − z − z²/2 without cancellation for small |z|.
inline double exp_tail3(double z) {
    if (std::abs(z) >= 0.5) return std::expm1(z) - z - 0.5 * z * z;
    double term = z * z * z / 6.0, sum = 0.0;
    for (int k = 4; std::abs(term) > 1e-18 * std::abs(sum) && k < 40; ++k) {
        sum += term;
        term *= z / k;
    }
    return sum;
}

/// log(1 + a) − a without cancellation for small |a|.
inline double log1p_minus(double a) {
    if (std::abs(a) >= 0.5) return std::log1p(a) - a;
    double power = a * a, sum = 0.0;
    for (int k = 2; k < 80; ++k) {
        const double term = (k % 2 ? 1.0 : -1.0) * power / k;
        sum += term;
        if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
        power *= a;
    }
    return sum;
}

}  // namespace detail

/// Δu(θ* + s v) − ½ s² vᵀFv evaluated without subtracting the two O(s²) terms.
/// Per context, with w = v − E_π*[v], KL = log1p(A) where
/// A = E[e^{sw} − 1 − sw] = ½s²Var(v) + E[exp_tail3(sw)].
inline double kl_quadratic_remainder(const TabularPolicy& theta_star, const SkillDistribution& skill,
                                     std::span<const double> v, double s) {
    require_compatible(theta_star, skill);
    const std::size_t ny = skill.outcomes();
    if (v.size() != skill.contexts() * ny)
        throw DimensionMismatch("kl_quadratic_remainder direction", skill.contexts() * ny, v.size());
    double total = 0.0;
    for (std::size_t x = 0; x < skill.contexts(); ++x) {
        const Vector pi = theta_star.probs(x);
        double mean = 0.0;
        for (std::size_t y = 0; y < ny; ++y) mean += pi[y] * v[x * ny + y];
        double tail = 0.0, half_var = 0.0;
        for (std::size_t y = 0; y < ny; ++y) {
            const double z = s * (v[x * ny + y] - mean);
            tail += pi[y] * detail::exp_tail3(z);
            half_var += pi[y] * 0.5 * z * z;
        }
        total += skill.p(x) * (tail + detail::log1p_minus(half_var + tail));
    }
    return total;
}

/// R(s) = |Δu(θ* + s v) − ½ s² vᵀFv| for each direction and scale.
inline QuadraticFormReport quadratic_form_check(const TabularPolicy& theta_star,
                                                const SkillDistribution& skill,
                                                const std::vector<Vector>& directions,
                                                const std::vector<double>& scales) {
    const SymMatrix f = exact_fisher(theta_star, skill);
    QuadraticFormReport report;
    for (const Vector& v : directions) {
        if (v.size() != f.n()) throw DimensionMismatch("quadratic_form_check direction", f.n(), v.size());
        RemainderFit r;
        r.quad = f.quadratic_form(v);
        bool all_zero = true;
        for (double s : scales) {
            const double du = kl_degradation(theta_star, shifted(theta_star, scaled(v, s)), skill);
            const double rem = std::abs(kl_quadratic_remainder(theta_star, skill, v, s));
            r.remainder.push_back({s, rem});
            all_zero = all_zero && std::abs(du) <= 1e-15 && rem <= 1e-15;
        }
        const auto positive = static_cast<std::size_t>(
            std::count_if(r.remainder.begin(), r.remainder.end(),
                          [](const SeriesPoint& pt) { return pt.t > 0.0 && pt.value > 0.0; }));
        if (all_zero && std::abs(r.quad) <= 1e-15) {
            r.null_direction = true;
        } else {
            // Fewer than kMinFitPoints usable scales: remainders only, no fit.
            if (positive >= kMinFitPoints)
                r.fit = fit_power_law(r.remainder, *std::min_element(scales.begin(), scales.end()),
                                      *std::max_element(scales.begin(), scales.end()));
            double acc = 0.0;
            std::size_t used = 0;
            for (const auto& pt : r.remainder) {
                if (pt.t <= 0.0 || pt.value <= 0.0) continue;
                acc += std::log(pt.value) - 3.0 * std::log(pt.t);
                ++used;
            }
            r.cubic_constant = used ? std::exp(acc / static_cast<double>(used)) : 0.0;
        }
        report.directions.push_back(std::move(r));
    }
    return report;
}

/// Log-spaced scales from lo to hi inclusive.
inline std::vector<double> log_scales(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double f = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        out[i] = lo * std::pow(hi / lo, f);
    }
    return out;
}

struct RelaxedBound {
    std::size_t violations = 0;
    double fitted_c = 0.0;
    double radius = 0.0;
    double utility_gradient_norm = 0.0;  // ‖∇u(θ_near)‖, zero at the optimum
};

/// Smallest C ≥ 0 with u(θ) − u(θ+Δ) ≥ ½ΔᵀF(θ)Δ − C‖Δ‖³ over seeded Δ with
/// ‖Δ‖ uniform in [r/2, r]; violations are then counted against that C.
inline RelaxedBound relaxed_lb_check(const TabularPolicy& theta_near, const SkillDistribution& skill,
                                     std::size_t trials, double radius, std::uint64_t seed) {
    if (!(radius > 0.0)) throw InfeasibleParams("radius", "must be > 0");
    const SymMatrix f = exact_fisher(theta_near, skill);
    const double u0 = utility(theta_near, skill);
    CounterRng rng(seed, streams::perturbation);
    struct Draw {
        double loss, quad, len;
    };
    std::vector<Draw> draws;
    draws.reserve(trials);
    RelaxedBound r;
    r.radius = radius;
    for (std::size_t t = 0; t < trials; ++t) {
        Vector delta(f.n());
        for (double& x : delta) x = rng.normal();
        delta = scaled(normalized(delta), radius * rng.uniform(0.5, 1.0));
        const double loss = u0 - utility(shifted(theta_near, delta), skill);
        const Draw d{loss, 0.5 * f.quadratic_form(delta), norm(delta)};
        r.fitted_c = std::max(r.fitted_c, (d.quad - d.loss) / (d.len * d.len * d.len));
        draws.push_back(d);
    }
    for (const Draw& d : draws)
        if (d.loss < d.quad - r.fitted_c * d.len * d.len * d.len - 1e-12) ++r.violations;

    // ∇u over logits: p(x)(D(·|x) − π(·|x)).
    double g2 = 0.0;
    for (std::size_t x = 0; x < skill.contexts(); ++x) {
        const Vector pi = theta_near.probs(x);
        for (std::size_t y = 0; y < skill.outcomes(); ++y) {
            const double g = skill.p(x) * (skill.d(x, y) - pi[y]);
            g2 += g * g;
        }
    }
    r.utility_gradient_norm = std::sqrt(g2);
    return r;
}

inline constexpr double kHessianStep = 1e-4;

/// Central-difference Hessian of θ ↦ KL(π_θ* ‖ π_θ) at θ*.
inline Matrix kl_hessian_fd(const TabularPolicy& theta_star, const SkillDistribution& skill,
                            double h = kHessianStep) {
    const Vector base = flatten(theta_star);
    const std::size_t n = base.size();
    auto f = [&](std::size_t i, double si, std::size_t j, double sj) {
        Vector v = base;
        v[i] += si;
        v[j] += sj;
        return kl_degradation(theta_star, unflatten(v, theta_star.contexts(), theta_star.outcomes()), skill);
    };
    Matrix hess(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        hess(i, i) = (f(i, h, i, 0.0) - 2.0 * f(i, 0.0, i, 0.0) + f(i, -h, i, 0.0)) / (h * h);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = (f(i, h, j, h) - f(i, h, j, -h) - f(i, -h, j, h) + f(i, -h, j, -h)) / (4.0 * h * h);
            hess(i, j) = hess(j, i) = v;
        }
    }
    return hess;
}

/// max |H_fd − F| over entries.
inline double fisher_vs_kl_hessian(const TabularPolicy& theta_star, const SkillDistribution& skill,
                                   double h = kHessianStep) {
    return max_abs(subtract(kl_hessian_fd(theta_star, skill, h), exact_fisher(theta_star, skill).matrix()));
}

/// Per-sample score gradients ∇_θ log π(y|x) for (x, y) drawn from p and D,
/// as |X|×|Y| matrices: row x is e_y − π(·|x), other rows are zero.
inline std::vector<Matrix> score_gradients(const TabularPolicy& policy, const SkillDistribution& skill,
                                           std::size_t count, std::uint64_t seed) {
    require_compatible(policy, skill);
    CounterRng rng(seed, streams::synth_input);
    auto pick = [&rng](std::span<const double> probs) {
        const double u = rng.uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return probs.size() - 1;
    };
    std::vector<Matrix> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t x = pick(skill.context_probs());
        const std::size_t y = pick(skill.conditionals().row(x));
        const Vector pi = policy.probs(x);
        Matrix g(skill.contexts(), skill.outcomes());
        for (std::size_t b = 0; b < pi.size(); ++b) g(x, b) = (b == y ? 1.0 : 0.0) - pi[b];
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace aiclab

#endif  // AICLAB_POLICY_HPP
