#ifndef AICLAB_LANDSCAPE_HPP
#define AICLAB_LANDSCAPE_HPP

// Synthetic alignment utilities and fine-tuning objectives whose instability
// parameters (d, lambda, gamma, epsilon) are exact by construction, plus an
// independent certifier for any (utility, objective) pair.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aiclab/errors.hpp"
#include "aiclab/geometry.hpp"
#include "aiclab/linalg.hpp"
#include "aiclab/random.hpp"

namespace aiclab {

struct AICParams {
    std::size_t d = 1;
    double lambda = 1.0;   // minimum leading curvature
    double gamma = 0.0;    // required coupling
    double epsilon = 0.0;  // shared tail / orthogonality budget

    void validate() const {
        if (d < 1) throw InfeasibleParams("d", "subspace dimension must be >= 1");
        if (!(lambda > 0.0)) throw InfeasibleParams("lambda", "must be > 0");
        if (!(gamma >= 0.0)) throw InfeasibleParams("gamma", "must be >= 0");
        if (!(epsilon >= 0.0)) throw InfeasibleParams("epsilon", "must be >= 0");
    }

    bool operator==(const AICParams&) const = default;
};

/// Δu(θ) = ½ΔθᵀFΔθ + C⟨a, Δθ⟩³ with unit a; the cubic part is bounded by C‖Δθ‖³.
struct QuadraticUtility {
    Vector theta_star;
    SymMatrix fisher;
    double cubic_coeff = 0.0;
    Vector cubic_direction;  // empty when cubic_coeff == 0

    std::size_t n() const noexcept { return theta_star.size(); }
};

inline double utility_loss(const QuadraticUtility& u, std::span<const double> theta) {
    if (theta.size() != u.n()) throw DimensionMismatch("utility_loss", u.n(), theta.size());
    const Vector delta = subtract(theta, u.theta_star);
    double loss = 0.5 * u.fisher.quadratic_form(delta);
    if (u.cubic_coeff != 0.0) {
        const double a = dot(u.cubic_direction, delta);
        loss += u.cubic_coeff * a * a * a;
    }
    return loss;
}

/// Fine-tuning objective with potential
///   φ(θ) = ⟨g0, Δ⟩ + ½ΔᵀHΔ + (s/3) Σ_k w_k ⟨a_k, Δ⟩³,   Δ = θ − θ*,
/// where the a_k are unit vectors and Σ|w_k| = 1, so the third-order part of
/// the gradient is bounded by s‖Δ‖².
struct FineTuneObjective {
    Vector theta_star;
    Vector g0;
    SymMatrix hessian;
    double cubic_tensor_scale = 0.0;
    std::vector<Vector> cubic_directions;
    Vector cubic_weights;
    double ball_radius = 1.0;

    std::size_t n() const noexcept { return theta_star.size(); }
};

inline double potential(const FineTuneObjective& obj, std::span<const double> theta) {
    if (theta.size() != obj.n()) throw DimensionMismatch("potential", obj.n(), theta.size());
    const Vector delta = subtract(theta, obj.theta_star);
    double phi = dot(obj.g0, delta) + 0.5 * obj.hessian.quadratic_form(delta);
    for (std::size_t k = 0; k < obj.cubic_directions.size(); ++k) {
        const double a = dot(obj.cubic_directions[k], delta);
        phi += obj.cubic_tensor_scale / 3.0 * obj.cubic_weights[k] * a * a * a;
    }
    return phi;
}

struct GradientEval {
    Vector value;
    bool extrapolated;  // θ lies outside the working ball
};

inline GradientEval evaluate_gradient(const FineTuneObjective& obj, std::span<const double> theta) {
    if (theta.size() != obj.n()) throw DimensionMismatch("gradient", obj.n(), theta.size());
    const Vector delta = subtract(theta, obj.theta_star);
    Vector g = add(obj.g0, obj.hessian.apply(delta));
    for (std::size_t k = 0; k < obj.cubic_directions.size(); ++k) {
        const double a = dot(obj.cubic_directions[k], delta);
        axpy(obj.cubic_tensor_scale * obj.cubic_weights[k] * a * a, obj.cubic_directions[k], g);
    }
    return {std::move(g), norm(delta) > obj.ball_radius};
}

inline Vector gradient(const FineTuneObjective& obj, std::span<const double> theta) {
    return evaluate_gradient(obj, theta).value;
}

/// Measured AIC quantities plus the three condition flags.
struct AICCertificate {
    double tail_sum = 0.0;        // Σ_{j>d} λ_j
    double lambda_d = 0.0;
    double proj_grad_norm = 0.0;  // ‖P g0‖
    double coupling = 0.0;        // ‖F^{1/2} P H g0‖
    double lambda_max = 0.0;
    double gap = 0.0;             // λ_d − λ_{d+1}
    bool low_rank = false;
    bool orthogonal = false;
    bool coupled = false;
    bool ill_conditioned = false;

    bool all_met() const noexcept { return low_rank && orthogonal && coupled; }
};

/// Comparisons allow a 1e-10 slack scaled to the compared quantities so that
/// exact-by-construction values survive floating-point recomputation.
inline void apply_conditions(AICCertificate& c, const AICParams& p, double g0_norm) {
    const double spectral_slack = 1e-10 * std::max(1.0, c.lambda_max);
    c.low_rank = c.tail_sum <= p.epsilon + spectral_slack && c.lambda_d >= p.lambda - spectral_slack;
    c.orthogonal = c.proj_grad_norm <= p.epsilon + 1e-10 * std::max(1.0, g0_norm);
    c.coupled = c.coupling >= p.gamma - 1e-10 * std::max(1.0, p.gamma);
}

/// ‖F^{1/2} P H g0‖
inline double coupling_gamma(const FisherHalf& f, const Projector& p, const SymMatrix& h,
                             std::span<const double> g0) {
    if (h.n() != f.n()) throw DimensionMismatch("coupling_gamma: hessian", f.n(), h.n());
    if (g0.size() != f.n()) throw DimensionMismatch("coupling_gamma: gradient", f.n(), g0.size());
    return fisher_half_norm(f, p, h.apply(g0));
}

inline double coupling_gamma(const SymMatrix& f, const Projector& p, const SymMatrix& h,
                             std::span<const double> g0) {
    require_spectral(f, p);
    return coupling_gamma(FisherHalf(f), p, h, g0);
}

/// Certificate recomputed from scratch: eigendecompose F, form P, measure.
inline AICCertificate verify_aic(const QuadraticUtility& u, const FineTuneObjective& obj,
                                 const AICParams& params, std::size_t d) {
    if (u.n() != obj.n()) throw DimensionMismatch("verify_aic", u.n(), obj.n());
    if (u.fisher.n() != u.n()) throw DimensionMismatch("verify_aic: fisher", u.n(), u.fisher.n());
    const FisherHalf half(eigendecompose(u.fisher));
    const SymSpectrum& s = half.spectrum();
    const Projector p = top_projector(s, d);

    AICCertificate c;
    for (std::size_t j = d; j < s.n(); ++j) c.tail_sum += s.eigenvalues[j];
    c.lambda_d = s.eigenvalues[d - 1];
    c.lambda_max = s.lambda_max();
    c.gap = d < s.n() ? spectral_gap(s, d) : s.eigenvalues[d - 1];
    c.ill_conditioned = p.ill_conditioned();
    c.proj_grad_norm = norm(p.apply(obj.g0));
    c.coupling = coupling_gamma(half, p, obj.hessian, obj.g0);
    apply_conditions(c, params, norm(obj.g0));
    return c;
}

struct InstanceOptions {
    std::optional<double> gradient_leak;  // ε′; defaults to ε(1 − 1e-3)
    double tail_ratio = 0.5;              // geometric decay of the tail spectrum
    double cubic_coeff = 0.0;             // utility third-order term
    double cubic_tensor_scale = 0.0;      // objective third-order term
    double ball_radius = 1.0;
};

/// A constructed instance together with its construction-side certificate.
struct AICInstance {
    std::size_t n = 0;
    AICParams params;
    std::uint64_t seed = 0;
    double gradient_leak = 0.0;
    Vector eigenvalues;  // construction spectrum in basis order
    Matrix basis;        // orthonormal columns u_1..u_n
    QuadraticUtility utility;
    FineTuneObjective objective;
    AICCertificate certificate;
};

inline constexpr double kBudgetShrink = 1.0 - 1e-3;

namespace detail {

inline Vector seeded_unit(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
    CounterRng rng(seed, stream);
    Vector v(n);
    for (double& x : v) x = rng.normal();
    return normalized(v);
}

inline AICInstance construct_instance(std::size_t n, const AICParams& params, std::uint64_t seed,
                                      double tail_budget, double leak, const InstanceOptions& opt) {
    params.validate();
    if (n < params.d + 1)
        throw InfeasibleParams("n", "need n >= d + 1 (n = " + std::to_string(n) +
                                        ", d = " + std::to_string(params.d) + ")");
    if (!(opt.tail_ratio > 0.0 && opt.tail_ratio < 1.0))
        throw InfeasibleParams("tail_ratio", "must lie in (0, 1)");
    if (!(opt.ball_radius > 0.0)) throw InfeasibleParams("ball_radius", "must be > 0");
    if (opt.cubic_coeff < 0.0 || opt.cubic_tensor_scale < 0.0)
        throw InfeasibleParams("cubic", "cubic scales must be >= 0");

    const std::size_t d = params.d;
    const std::size_t tail_count = n - d;

    Vector eig(n, 0.0);
    std::fill(eig.begin(), eig.begin() + static_cast<std::ptrdiff_t>(d), params.lambda);
    double tail_sum = 0.0;
    if (tail_budget > 0.0) {
        const double r = opt.tail_ratio;
        const double head =
            tail_budget * (1.0 - r) / (1.0 - std::pow(r, static_cast<double>(tail_count)));
        if (head >= params.lambda)
            throw InfeasibleParams("tail_leading_eigenvalue",
                                   "largest tail eigenvalue " + std::to_string(head) +
                                       " would reach lambda " + std::to_string(params.lambda));
        double term = head;
        for (std::size_t j = 0; j < tail_count; ++j) {
            eig[d + j] = term;
            tail_sum += term;
            term *= r;
        }
    }

    AICInstance inst;
    inst.n = n;
    inst.params = params;
    inst.seed = seed;
    inst.gradient_leak = leak;
    inst.eigenvalues = eig;
    inst.basis = orthonormalize_columns(gaussian_matrix(n, n, seed, streams::basis));

    Matrix f(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        if (eig[j] == 0.0) continue;
        const Vector u = inst.basis.column(j);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) f(r, c) += eig[j] * u[r] * u[c];
    }

    // w: unit vector in the orthogonal complement of the leading d basis vectors.
    CounterRng mix(seed, streams::complement_mix);
    Vector w(n, 0.0);
    for (std::size_t j = d; j < n; ++j) axpy(mix.normal(), inst.basis.column(j), w);
    w = normalized(w);
    const Vector u1 = inst.basis.column(0);

    Vector g0 = w;
    axpy(leak, u1, g0);

    // H = β(u₁wᵀ + wu₁ᵀ) gives P H g0 = β⟨g0, w⟩ u₁, hence coupling β√λ⟨g0, w⟩ = γ.
    const double beta = params.gamma / (std::sqrt(params.lambda) * dot(g0, w));
    Matrix h = outer(u1, w);
    h = scaled(add(h, transpose(h)), beta);

    CounterRng theta_rng(seed, streams::matrix);
    Vector theta_star(n);
    for (double& x : theta_star) x = theta_rng.normal();

    inst.utility.theta_star = theta_star;
    inst.utility.fisher = SymMatrix::symmetrized(f);
    inst.utility.cubic_coeff = opt.cubic_coeff;
    if (opt.cubic_coeff > 0.0) inst.utility.cubic_direction = seeded_unit(n, seed, streams::cubic);

    inst.objective.theta_star = theta_star;
    inst.objective.g0 = g0;
    inst.objective.hessian = SymMatrix::symmetrized(h);
    inst.objective.cubic_tensor_scale = opt.cubic_tensor_scale;
    inst.objective.ball_radius = opt.ball_radius;
    if (opt.cubic_tensor_scale > 0.0) {
        CounterRng wr(seed, streams::cubic + 100);
        double total = 0.0;
        for (std::uint64_t k = 0; k < 3; ++k) {
            inst.objective.cubic_directions.push_back(seeded_unit(n, seed, streams::cubic + 1 + k));
            inst.objective.cubic_weights.push_back(wr.uniform(-1.0, 1.0));
            total += std::abs(inst.objective.cubic_weights.back());
        }
        for (double& x : inst.objective.cubic_weights) x /= total;
    }

    AICCertificate& c = inst.certificate;
    c.tail_sum = tail_sum;
    c.lambda_d = params.lambda;
    c.lambda_max = params.lambda;
    c.gap = params.lambda - eig[d];
    c.proj_grad_norm = leak;
    c.coupling = params.gamma;
    c.ill_conditioned = c.gap < kDegenerateGap;
    apply_conditions(c, params, norm(g0));
    return inst;
}

}  // namespace detail

/// Builds an instance satisfying the AIC with the requested parameters:
/// F has λ on d seeded orthonormal directions and a geometric tail summing to
/// ε(1 − 1e-3); g0 = w + ε′u₁ with w ⊥ M; H = β(u₁wᵀ + wu₁ᵀ) with coupling exactly γ.
inline AICInstance build_aic_instance(std::size_t n, const AICParams& params, std::uint64_t seed,
                                      const InstanceOptions& options = {}) {
    params.validate();
    const double budget = params.epsilon * kBudgetShrink;
    const double leak = options.gradient_leak.value_or(budget);
    if (leak < 0.0) throw InfeasibleParams("gradient_leak", "must be >= 0");
    if (leak > budget)
        throw InfeasibleParams("gradient_leak",
                               "requested leak " + std::to_string(leak) +
                                   " exceeds the orthogonality budget epsilon*(1-1e-3) = " +
                                   std::to_string(budget));
    return detail::construct_instance(n, params, seed, budget, leak, options);
}

/// First-order regime: g0 has a component of Fisher-weighted size `c` inside M
/// (so the orthogonality condition is deliberately violated) and the tail
/// spectrum is zero, making Δu ≈ (c²/2)t² at small t.
inline AICInstance build_first_order_instance(std::size_t n, std::size_t d, double lambda,
                                              double gamma, double c, std::uint64_t seed,
                                              const InstanceOptions& options = {}) {
    if (!(c > 0.0)) throw InfeasibleParams("c", "first-order coupling must be > 0");
    const AICParams params{d, lambda, gamma, 0.0};
    return detail::construct_instance(n, params, seed, 0.0, c / std::sqrt(lambda), options);
}

}  // namespace aiclab

#endif  // AICLAB_LANDSCAPE_HPP
