#ifndef AICLAB_FLOW_HPP
#define AICLAB_FLOW_HPP

// Gradient-flow / gradient-descent trajectories and the drift and loss
// diagnostics computed along them, including the rotating-Fisher extension.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aiclab/errors.hpp"
#include "aiclab/geometry.hpp"
#include "aiclab/landscape.hpp"
#include "aiclab/linalg.hpp"
#include "aiclab/scaling.hpp"

namespace aiclab {

enum class Method { rk4_fixed, euler };

struct IntegratorConfig {
    Method method = Method::rk4_fixed;
    double step = 5e-5;
    double horizon = 0.5;
    std::size_t record_every = 1;
    double ball_radius = 1.0;

    /// Step of 1e-4 of the horizon.
    static IntegratorConfig defaults(double horizon = 0.5) {
        IntegratorConfig c;
        c.horizon = horizon;
        c.step = 1e-4 * horizon;
        return c;
    }

    void validate() const {
        if (!(step > 0.0)) throw Error("integrator step must be > 0");
        if (!(horizon > 0.0)) throw Error("integrator horizon must be > 0");
        if (record_every < 1) throw Error("record_every must be >= 1");
        if (!(ball_radius > 0.0)) throw Error("ball radius must be > 0");
    }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    bool exited_ball = false;
    double exit_time = std::numeric_limits<double>::quiet_NaN();

    std::size_t size() const noexcept { return times.size(); }
    const Vector& origin() const { return states.front(); }
    Vector displacement(std::size_t i) const { return subtract(states[i], states.front()); }
};

inline constexpr double kFirstStepErrorLimit = 1e-8;

namespace detail {

template <typename Velocity>
Vector rk4_step(const Velocity& f, const Vector& y, double h) {
    const Vector k1 = f(y);
    Vector tmp = y;
    axpy(0.5 * h, k1, tmp);
    const Vector k2 = f(tmp);
    tmp = y;
    axpy(0.5 * h, k2, tmp);
    const Vector k3 = f(tmp);
    tmp = y;
    axpy(h, k3, tmp);
    const Vector k4 = f(tmp);
    Vector out = y;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

}  // namespace detail

/// Integrates ẏ = velocity(y) from `start` with a fixed step. The trajectory
/// stops (flagged, not failed) at the first step leaving the ball around `start`.
template <typename Velocity>
Trajectory integrate_field(const Velocity& velocity, const Vector& start,
                           const IntegratorConfig& cfg) {
    cfg.validate();
    const std::size_t steps =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.horizon / cfg.step)));

    auto advance = [&](const Vector& y, double h) {
        if (cfg.method == Method::euler) {
            Vector out = y;
            axpy(h, velocity(y), out);
            return out;
        }
        return detail::rk4_step(velocity, y, h);
    };

    if (cfg.method == Method::rk4_fixed) {
        const Vector full = advance(start, cfg.step);
        const Vector half = advance(advance(start, 0.5 * cfg.step), 0.5 * cfg.step);
        const double estimate = norm(subtract(full, half)) * 16.0 / 15.0;
        if (!(estimate < kFirstStepErrorLimit))
            throw Error("step " + std::to_string(cfg.step) +
                        " too large: first-step RK4 error estimate " + std::to_string(estimate));
    }

    Trajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(start);
    Vector y = start;
    for (std::size_t k = 1; k <= steps; ++k) {
        Vector next = advance(y, cfg.step);
        const double t = static_cast<double>(k) * cfg.step;
        if (!all_finite(next)) throw IntegrationFault(static_cast<double>(k - 1) * cfg.step);
        if (norm(subtract(next, start)) > cfg.ball_radius) {
            traj.exited_ball = true;
            traj.exit_time = t;
            break;
        }
        y = std::move(next);
        if (k % cfg.record_every == 0 || k == steps) {
            traj.times.push_back(t);
            traj.states.push_back(y);
        }
    }
    return traj;
}

/// θ̇ = −g(θ) from θ*; method euler gives θ_{k+1} = θ_k − h g(θ_k).
inline Trajectory integrate(const FineTuneObjective& obj, const IntegratorConfig& cfg) {
    auto velocity = [&obj](const Vector& theta) { return scaled(gradient(obj, theta), -1.0); };
    return integrate_field(velocity, obj.theta_star, cfg);
}

/// Second-order expansion −t g0 + (t²/2) H g0 of θ(t) − θ*.
inline Vector taylor_prediction(std::span<const double> g0, const SymMatrix& h, double t) {
    Vector out = scaled(g0, -t);
    axpy(0.5 * t * t, h.apply(g0), out);
    return out;
}

inline Series drift_curve(const Trajectory& traj, const FisherHalf& f, const Projector& p) {
    Series s;
    s.reserve(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i)
        s.push_back({traj.times[i], fisher_half_norm(f, p, traj.displacement(i))});
    return s;
}

inline Series loss_curve(const Trajectory& traj, const QuadraticUtility& u) {
    Series s;
    s.reserve(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i)
        s.push_back({traj.times[i], utility_loss(u, traj.states[i])});
    return s;
}

inline ScalingFit fit_power_law(const Series& series, std::pair<double, double> window) {
    return fit_power_law(series, window.first, window.second);
}

// ---------------------------------------------------------------------------
// Data-driven fit window

enum class Regime {
    second_order,  // drift led by (t²/2) F^{1/2} P H g0
    first_order,   // drift led by t F^{1/2} P g0
};

struct WindowRule {
    Regime regime = Regime::second_order;
    double fraction = 0.1;  // stop when the neglected part reaches this share of the leading term
    double t_min = 1e-3;
    double t_cap = 1e-1;

    /// Second order: 10% remainder share, t ≥ 1e-3. First order: 0.2% share
    /// from the first recorded time, since the fitted coefficient is an
    /// extrapolation to t = 1 and its bias grows with the share times |log t|.
    static WindowRule for_regime(Regime r) {
        if (r == Regime::first_order) return {r, 0.002, 0.0, 1e-1};
        return {r, 0.1, 1e-3, 1e-1};
    }
};

struct FitWindow {
    double t_min;
    double t_max;
};

/// Picks the regime whose leading term dominates at `t_cap`.
inline Regime detect_regime(const FineTuneObjective& obj, const FisherHalf& f, const Projector& p,
                            double t_cap) {
    const double lin = fisher_half_norm(f, p, obj.g0);
    const double quad = fisher_half_norm(f, p, obj.hessian.apply(obj.g0));
    return lin * t_cap > 0.5 * quad * t_cap * t_cap ? Regime::first_order : Regime::second_order;
}

/// Window [t_min, t_end]: t_end is the last recorded time (≤ t_cap) before the
/// measured remainder exceeds `fraction` of the leading drift term. For the
/// second-order regime the remainder is ‖F^{1/2}P(Δθ − taylor)‖ against the
/// quadratic term; for the first-order regime it is everything beyond −t g0.
inline FitWindow data_driven_window(const Trajectory& traj, const FineTuneObjective& obj,
                                    const FisherHalf& f, const Projector& p,
                                    const WindowRule& rule) {
    const Vector hg0 = obj.hessian.apply(obj.g0);
    const double lin = fisher_half_norm(f, p, obj.g0);
    const double quad = fisher_half_norm(f, p, hg0);
    FitWindow w{rule.t_min, rule.t_min};
    for (std::size_t i = 1; i < traj.size(); ++i) {
        const double t = traj.times[i];
        if (t > rule.t_cap) break;
        const Vector disp = traj.displacement(i);
        double leading, remainder;
        if (rule.regime == Regime::second_order) {
            leading = 0.5 * t * t * quad;
            remainder = fisher_half_norm(f, p, subtract(disp, taylor_prediction(obj.g0, obj.hessian, t)));
        } else {
            leading = t * lin;
            Vector rest = disp;
            axpy(t, obj.g0, rest);
            remainder = fisher_half_norm(f, p, rest);
        }
        if (remainder > rule.fraction * leading) break;
        if (t >= rule.t_min) w.t_max = t;
    }
    return w;
}

// ---------------------------------------------------------------------------
// Bound checks

struct DriftBoundResult {
    bool holds = false;
    double fitted_c = 0.0;            // for the Fisher-weighted form with ε′ = √λ_max ε
    double fitted_c_euclidean = 0.0;  // same, with the plain ε t term
    double eps_prime = 0.0;
    double first_time = 0.0;
};

/// Smallest C ≥ 0 with drift(t) ≥ (γ/2)t² − ε′t − Ct³ at every recorded t > 0.
/// Holds when C is finite and the cubic correction at the first recorded time
/// removes at most half of the quadratic term.
inline DriftBoundResult check_drift_bound(const Trajectory& traj, const FisherHalf& f,
                                          const Projector& p, const AICParams& params) {
    DriftBoundResult r;
    r.eps_prime = std::sqrt(f.lambda_max()) * params.epsilon;
    const Series drift = drift_curve(traj, f, p);
    for (const auto& pt : drift) {
        if (pt.t <= 0.0) continue;
        if (r.first_time == 0.0) r.first_time = pt.t;
        const double t3 = pt.t * pt.t * pt.t;
        const double quad = 0.5 * params.gamma * pt.t * pt.t;
        r.fitted_c = std::max(r.fitted_c, (quad - r.eps_prime * pt.t - pt.value) / t3);
        r.fitted_c_euclidean =
            std::max(r.fitted_c_euclidean, (quad - params.epsilon * pt.t - pt.value) / t3);
    }
    r.holds = std::isfinite(r.fitted_c) && r.first_time > 0.0 &&
              r.fitted_c * r.first_time <= 0.25 * params.gamma;
    return r;
}

/// Number of recorded states where Δu < ½‖F^{1/2}PΔθ‖² − 1e-10.
inline std::size_t utility_lower_bound_violations(const Trajectory& traj, const QuadraticUtility& u,
                                                  const FisherHalf& f, const Projector& p) {
    std::size_t violations = 0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double drift = fisher_half_norm(f, p, traj.displacement(i));
        if (utility_loss(u, traj.states[i]) < 0.5 * drift * drift - 1e-10) ++violations;
    }
    return violations;
}

// ---------------------------------------------------------------------------
// Rotating Fisher field

/// F(θ) = R(φ) F₀ R(φ)ᵀ where R rotates the plane of base eigenvectors
/// (i, j) by φ = rate·‖θ − θ*‖. Lipschitz with L_F = rate·|λ_i − λ_j|.
class RotatingFisherField {
public:
    RotatingFisherField(SymSpectrum base, Vector theta_star, double rate,
                        std::pair<std::size_t, std::size_t> plane)
        : base_(std::move(base)), theta_star_(std::move(theta_star)), rate_(rate), plane_(plane) {
        if (plane_.first >= base_.n() || plane_.second >= base_.n() || plane_.first == plane_.second)
            throw Error("rotation plane indices must be distinct and < n");
        if (theta_star_.size() != base_.n())
            throw DimensionMismatch("RotatingFisherField", base_.n(), theta_star_.size());
        const double floor = -1e-12 * std::max(1.0, std::abs(base_.lambda_max()));
        for (double l : base_.eigenvalues)
            if (l < floor) throw Error("rotating field base spectrum must be PSD");
        f0_ = base_.reconstruct();
    }

    std::size_t n() const noexcept { return base_.n(); }
    const SymSpectrum& base() const noexcept { return base_; }
    const Matrix& base_matrix() const noexcept { return f0_; }
    double rate() const noexcept { return rate_; }
    std::pair<std::size_t, std::size_t> plane() const noexcept { return plane_; }

    double lipschitz() const {
        return rate_ * std::abs(base_.eigenvalues[plane_.first] - base_.eigenvalues[plane_.second]);
    }

    double angle(std::span<const double> theta) const {
        return rate_ * norm(subtract(theta, theta_star_));
    }

    SymMatrix at(std::span<const double> theta) const {
        const double phi = angle(theta);
        const auto [i, j] = plane_;
        const Vector vi = base_.vector(i);
        const Vector vj = base_.vector(j);
        const double li = base_.eigenvalues[i];
        const double lj = base_.eigenvalues[j];
        const double c = std::cos(phi), s = std::sin(phi);
        Vector ri(vi.size()), rj(vj.size());
        for (std::size_t k = 0; k < vi.size(); ++k) {
            ri[k] = c * vi[k] + s * vj[k];
            rj[k] = -s * vi[k] + c * vj[k];
        }
        Matrix m = f0_;
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t q = 0; q < m.cols(); ++q)
                m(r, q) += li * (ri[r] * ri[q] - vi[r] * vi[q]) + lj * (rj[r] * rj[q] - vj[r] * vj[q]);
        return SymMatrix::symmetrized(m);
    }

    /// ½ Δθᵀ F(θ) Δθ
    double loss(std::span<const double> theta) const {
        const Vector delta = subtract(theta, theta_star_);
        return 0.5 * at(theta).quadratic_form(delta);
    }

    /// Largest sampled ‖F(θ) − F(θ′)‖_op / ‖θ − θ′‖ over pairs in the ball of `radius`.
    double sampled_lipschitz(std::size_t pairs, double radius, std::uint64_t seed) const {
        CounterRng rng(seed, streams::perturbation);
        double worst = 0.0;
        auto draw = [&] {
            Vector v(n());
            for (double& x : v) x = rng.normal();
            v = scaled(normalized(v), radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n())));
            return add(theta_star_, v);
        };
        for (std::size_t k = 0; k < pairs; ++k) {
            const Vector a = draw();
            const Vector b = draw();
            const double dist = norm(subtract(a, b));
            if (dist == 0.0) continue;
            worst = std::max(worst, operator_norm(subtract(at(a).matrix(), at(b).matrix())) / dist);
        }
        return worst;
    }

private:
    SymSpectrum base_;
    Vector theta_star_;
    double rate_;
    std::pair<std::size_t, std::size_t> plane_;
    Matrix f0_;
};

struct RotatingDriftResult {
    bool holds = false;  // ρ < γ, so the quartic conclusion applies
    double rho = 0.0;
    double base_gap = 0.0;
    std::size_t states_checked = 0;
    std::size_t states_skipped = 0;             // vanishing gap at that state
    std::size_t lipschitz_violations = 0;       // ‖P(θ) − P₀‖ > 2L_F‖Δθ‖/Λ
    std::size_t davis_kahan_violations = 0;     // geometry davis_kahan_check failures
    double max_distance_ratio = 0.0;            // max ‖P(θ) − P₀‖ / (2L_F‖Δθ‖/Λ)
    Series drift;                               // ‖F₀^{1/2} P(θ(t)) Δθ(t)‖
    Series loss;                                // ½ Δθᵀ F(θ(t)) Δθ
};

/// Drift against the instantaneous top-d projector of F(θ(t)). ρ is the
/// smallest constant making (γ/2)t² − √λ_max ε t − ρt² − Ct³ a lower bound,
/// with C taken from the static check (`static_c`).
inline RotatingDriftResult rotating_drift_check(const Trajectory& traj,
                                                const RotatingFisherField& field,
                                                const AICParams& params, double static_c) {
    const std::size_t d = params.d;
    const FisherHalf f0_half(field.base());
    const SymMatrix f0(field.base_matrix());
    const Projector p0 = top_projector(field.base(), d);
    const double eps_prime = std::sqrt(f0_half.lambda_max()) * params.epsilon;

    RotatingDriftResult r;
    r.base_gap = spectral_gap(field.base(), d);
    const double lf = field.lipschitz();

    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double t = traj.times[i];
        const Vector delta = traj.displacement(i);
        const SymMatrix ft = field.at(traj.states[i]);
        const SymSpectrum st = eigendecompose(ft);
        const Projector pt = top_projector(st, d);
        r.loss.push_back({t, 0.5 * ft.quadratic_form(delta)});
        if (spectral_gap(st, d) <= kDegenerateGap || r.base_gap <= kDegenerateGap) {
            ++r.states_skipped;
            continue;
        }
        ++r.states_checked;

        const double dist = projector_distance(pt, p0);
        const double lip_bound = 2.0 * lf * norm(delta) / r.base_gap;
        if (dist > lip_bound + 1e-10) ++r.lipschitz_violations;
        if (lip_bound > 0.0) r.max_distance_ratio = std::max(r.max_distance_ratio, dist / lip_bound);
        if (!davis_kahan_check(f0, ft, d).holds) ++r.davis_kahan_violations;

        const double drift = fisher_half_norm(f0_half, pt, delta);
        r.drift.push_back({t, drift});
        if (t > 0.0) {
            const double bound = 0.5 * params.gamma * t * t - eps_prime * t - static_c * t * t * t;
            r.rho = std::max(r.rho, (bound - drift) / (t * t));
        }
    }
    r.holds = std::isfinite(r.rho) && params.gamma > r.rho;
    return r;
}

}  // namespace aiclab

#endif  // AICLAB_FLOW_HPP
