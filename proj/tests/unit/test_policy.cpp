#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "aiclab/policy.hpp"
#include "oracles.hpp"

using namespace aiclab;

namespace {

SkillDistribution uniform_binary() { return SkillDistribution(Vector{1.0}, Matrix{{0.5, 0.5}}); }

Vector seeded_direction(std::size_t n, std::uint64_t seed) {
    CounterRng rng(seed, 900);
    Vector v(n);
    for (double& x : v) x = rng.normal();
    return normalized(v);
}

// Σ_x p(x) Σ_y π*(y|x) log(π*(y|x)/π(y|x)) with plain exponentials.
double plain_kl(const Matrix& ls, const Matrix& lt, const Vector& p) {
    double total = 0.0;
    for (std::size_t x = 0; x < ls.rows(); ++x) {
        double zs = 0.0, zt = 0.0;
        for (std::size_t y = 0; y < ls.cols(); ++y) {
            zs += std::exp(ls(x, y));
            zt += std::exp(lt(x, y));
        }
        for (std::size_t y = 0; y < ls.cols(); ++y) {
            const double a = std::exp(ls(x, y)) / zs, b = std::exp(lt(x, y)) / zt;
            total += p[x] * a * std::log(a / b);
        }
    }
    return total;
}

}  // namespace

TEST(SkillDistribution, Validation) {
    EXPECT_THROW(SkillDistribution(Vector{0.5, 0.4}, Matrix{{1.0}, {1.0}}), Error);
    EXPECT_THROW(SkillDistribution(Vector{1.0}, Matrix{{0.7, 0.2}}), Error);
    EXPECT_THROW(SkillDistribution(Vector{1.0}, Matrix{{1.2, -0.2}}), Error);
    EXPECT_THROW(SkillDistribution(Vector{1.0}, Matrix{{0.5, 0.5}, {0.5, 0.5}}), DimensionMismatch);
    const SkillDistribution s = random_skill(3, 4, 3);
    double total = 0.0;
    for (double v : s.context_probs()) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(FitOptimal, Examples) {
    const TabularPolicy half = fit_optimal(uniform_binary());
    EXPECT_EQ(half.logits()(0, 0), 0.0);
    EXPECT_EQ(half.logits()(0, 1), 0.0);
    EXPECT_EQ(half.probs(0), (Vector{0.5, 0.5}));

    const SkillDistribution skewed(Vector{1.0}, Matrix{{0.8, 0.2}});
    const Vector pi = fit_optimal(skewed).probs(0);
    EXPECT_NEAR(pi[0], 0.8, 1e-15);
    EXPECT_NEAR(pi[1], 0.2, 1e-15);

    const SkillDistribution s = random_skill(3, 4, 3);
    const TabularPolicy opt = fit_optimal(s);
    for (std::size_t x = 0; x < 3; ++x) {
        double kl = 0.0, row_sum = 0.0;
        const Vector p = opt.probs(x);
        for (std::size_t y = 0; y < 4; ++y) {
            kl += s.d(x, y) * std::log(s.d(x, y) / p[y]);
            row_sum += opt.logits()(x, y);
        }
        EXPECT_LE(std::abs(kl), 1e-14);
        EXPECT_NEAR(row_sum, 0.0, 1e-14);
    }
}

TEST(FitOptimal, RejectsZeroReferenceProbability) {
    const SkillDistribution s(Vector{1.0}, Matrix{{1.0, 0.0}});
    try {
        fit_optimal(s);
        FAIL();
    } catch (const SupportError& e) {
        EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
    }
}

TEST(Flatten, RoundTrip) {
    const TabularPolicy p(gaussian_matrix(3, 5, 2, 0));
    const TabularPolicy q = unflatten(flatten(p), 3, 5);
    EXPECT_EQ(p.logits().data(), q.logits().data());
    EXPECT_EQ(flatten(p)[1 * 5 + 2], p.logits()(1, 2));
    EXPECT_THROW(unflatten(flatten(p), 5, 5), DimensionMismatch);
}

TEST(Policy, RejectsNonFiniteLogits) {
    EXPECT_THROW(TabularPolicy(Matrix{{0.0, std::nan("")}}), NonFiniteError);
    const double ninf = -std::numeric_limits<double>::infinity();
    EXPECT_THROW(TabularPolicy(Matrix{{ninf, ninf}}), NonFiniteError);
    EXPECT_EQ(TabularPolicy(Matrix{{0.0, ninf}}).probs(0), (Vector{1.0, 0.0}));
}

TEST(Utility, Examples) {
    EXPECT_DOUBLE_EQ(utility(fit_optimal(uniform_binary()), uniform_binary()), -std::log(2.0));
    const SkillDistribution point(Vector{1.0}, Matrix{{0.0, 1.0, 0.0}});
    const TabularPolicy p(Matrix{{0.3, -0.4, 1.1}});
    EXPECT_NEAR(utility(p, point), std::log(p.probs(0)[1]), 1e-15);
    const double ninf = -std::numeric_limits<double>::infinity();
    EXPECT_EQ(utility(TabularPolicy(Matrix{{0.0, ninf, 0.0}}), point), ninf);
}

TEST(Utility, MatchesDuplicateImplementation) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SkillDistribution s = random_skill(4, 5, seed);
        const TabularPolicy p(gaussian_matrix(4, 5, seed, 3));
        EXPECT_NEAR(utility(p, s), oracle::plain_utility(p.logits(), s.context_probs(), s.conditionals()), 1e-14);
    }
}

TEST(KlDegradation, BinaryClosedForm) {
    const SkillDistribution s = uniform_binary();
    const TabularPolicy star = fit_optimal(s);
    EXPECT_EQ(kl_degradation(star, star, s), 0.0);
    for (double delta : {-0.7, -0.01, 0.05, 0.3, 2.0}) {
        const TabularPolicy p(Matrix{{delta, -delta}});
        const double kl = kl_degradation(star, p, s);
        EXPECT_NEAR(kl, oracle::binary_kl(delta), 1e-15);
        EXPECT_GT(kl, 0.0);
    }
}

TEST(KlDegradation, EqualsUtilityGapAndOracle) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const SkillDistribution s = random_skill(3, 4, seed);
        const TabularPolicy star = fit_optimal(s);
        const TabularPolicy theta = shifted(star, scaled(seeded_direction(12, seed), 0.5));
        const double kl = kl_degradation(star, theta, s);
        EXPECT_NEAR(kl, utility(star, s) - utility(theta, s), 1e-12);
        EXPECT_NEAR(kl, plain_kl(star.logits(), theta.logits(), s.context_probs()), 1e-13);
    }
}

TEST(KlDegradation, GaugeInvariance) {
    const SkillDistribution s = random_skill(3, 4, 8);
    const TabularPolicy star = fit_optimal(s);
    const TabularPolicy theta = shifted(star, scaled(seeded_direction(12, 8), 0.3));
    Vector shift(12, 0.0);
    for (std::size_t y = 0; y < 4; ++y) shift[4 + y] = 1.75;
    const TabularPolicy moved = shifted(theta, shift);
    EXPECT_NEAR(utility(moved, s), utility(theta, s), 1e-14);
    EXPECT_NEAR(kl_degradation(star, moved, s), kl_degradation(star, theta, s), 1e-14);
    EXPECT_NEAR(kl_degradation(shifted(star, shift), theta, s), kl_degradation(star, theta, s), 1e-14);
}

TEST(ExactFisher, BinaryBlock) {
    const SymMatrix f = exact_fisher(fit_optimal(uniform_binary()), uniform_binary());
    EXPECT_EQ(f(0, 0), 0.25);
    EXPECT_EQ(f(0, 1), -0.25);
    EXPECT_EQ(f(1, 1), 0.25);
}

TEST(ExactFisher, DegeneratesTowardOneHot) {
    const TabularPolicy p(Matrix{{20.0, 0.0, 0.0}});
    const SkillDistribution s(Vector{1.0}, Matrix{{0.2, 0.3, 0.5}});
    const double pmin = p.probs(0)[1];
    EXPECT_LE(max_abs(exact_fisher(p, s).matrix()), 2.0 * pmin);
}

TEST(ExactFisher, PsdWithOneNullModePerContext) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SkillDistribution s = random_skill(3, 4, seed);
        const TabularPolicy p(gaussian_matrix(3, 4, seed, 7));
        const SymSpectrum spec = eigendecompose(exact_fisher(p, s));
        std::size_t zeros = 0;
        for (double l : spec.eigenvalues) {
            EXPECT_GE(l, -1e-12);
            if (std::abs(l) <= 1e-12) ++zeros;
        }
        EXPECT_EQ(zeros, 3u);
    }
}

TEST(ExactFisher, MatchesScoreOuterProductExpectation) {
    const SkillDistribution s = random_skill(2, 3, 4);
    const TabularPolicy p(gaussian_matrix(2, 3, 4, 1));
    Matrix expect(6, 6);
    for (std::size_t x = 0; x < 2; ++x) {
        const Vector pi = p.probs(x);
        for (std::size_t y = 0; y < 3; ++y) {
            Vector score(6, 0.0);
            for (std::size_t b = 0; b < 3; ++b) score[3 * x + b] = (b == y ? 1.0 : 0.0) - pi[b];
            expect = add(expect, scaled(outer(score, score), s.p(x) * pi[y]));
        }
    }
    EXPECT_LE(max_abs(subtract(expect, exact_fisher(p, s).matrix())), 1e-15);
}

TEST(QuadraticForm, ZeroScaleAndNullDirection) {
    const SkillDistribution s = random_skill(3, 4, 1);
    const TabularPolicy star = fit_optimal(s);
    Vector null(12, 0.0);
    for (std::size_t y = 0; y < 4; ++y) null[y] = 0.5;
    const QuadraticFormReport r = quadratic_form_check(star, s, {null}, log_scales(1e-3, 1e-1, 12));
    EXPECT_TRUE(r.directions[0].null_direction);
    EXPECT_NEAR(r.directions[0].quad, 0.0, 1e-15);
    const QuadraticFormReport z = quadratic_form_check(star, s, {seeded_direction(12, 1)}, {0.0});
    EXPECT_EQ(z.directions[0].remainder[0].value, 0.0);
}

TEST(QuadraticForm, RandomSkillsHaveCubicRemainder) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SkillDistribution s = random_skill(3, 4, seed);
        const QuadraticFormReport r =
            quadratic_form_check(fit_optimal(s), s, {seeded_direction(12, seed)}, log_scales(1e-3, 1e-1, 16));
        EXPECT_GE(r.directions[0].fit.exponent, 2.9) << seed;
        EXPECT_LE(r.directions[0].fit.exponent, 3.1) << seed;
        EXPECT_GT(r.directions[0].cubic_constant, 0.0);
    }
}

// KL is even in δ for the symmetric binary skill along the logit difference,
// so the s³ term cancels and the leading remainder is quartic.
TEST(QuadraticForm, SymmetricBinaryRemainderIsQuartic) {
    const SkillDistribution s = uniform_binary();
    const Vector v{std::sqrt(0.5), -std::sqrt(0.5)};
    const QuadraticFormReport r = quadratic_form_check(fit_optimal(s), s, {v}, log_scales(1e-2, 1e-1, 16));
    EXPECT_NEAR(r.directions[0].quad, 0.5, 1e-15);
    EXPECT_NEAR(r.directions[0].fit.exponent, 4.0, 0.1);
    for (const auto& pt : r.directions[0].remainder) {
        const double delta = pt.t * std::sqrt(0.5);
        EXPECT_NEAR(pt.value, std::abs(oracle::binary_kl(delta) - 0.25 * pt.t * pt.t), 1e-15);
    }
}

TEST(RelaxedBound, AtOptimumMatchesRemainderScale) {
    const SkillDistribution s = random_skill(3, 4, 2);
    const TabularPolicy star = fit_optimal(s);
    const RelaxedBound wide = relaxed_lb_check(star, s, 400, 1e-1, 5);
    const RelaxedBound narrow = relaxed_lb_check(star, s, 400, 1e-2, 5);
    EXPECT_EQ(wide.violations, 0u);
    EXPECT_EQ(narrow.violations, 0u);
    EXPECT_LT(wide.utility_gradient_norm, 1e-15);
    EXPECT_TRUE(std::isfinite(wide.fitted_c));
    // Cubic remainder: C stays bounded as r shrinks.
    EXPECT_LE(narrow.fitted_c, 2.0 * wide.fitted_c + 1e-6);
}

TEST(RelaxedBound, PerturbedPointHasFiniteConstant) {
    const SkillDistribution s = random_skill(3, 4, 6);
    const TabularPolicy near = shifted(fit_optimal(s), scaled(seeded_direction(12, 6), 1e-2));
    const RelaxedBound r = relaxed_lb_check(near, s, 500, 1e-1, 9);
    EXPECT_TRUE(std::isfinite(r.fitted_c));
    EXPECT_EQ(r.violations, 0u);
    EXPECT_GT(r.utility_gradient_norm, 0.0);
    EXPECT_THROW(relaxed_lb_check(near, s, 10, 0.0, 9), InfeasibleParams);
}

TEST(KlHessian, MatchesFisher) {
    EXPECT_LE(fisher_vs_kl_hessian(fit_optimal(uniform_binary()), uniform_binary()), 1e-6);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SkillDistribution s = random_skill(3, 4, seed);
        EXPECT_LE(fisher_vs_kl_hessian(fit_optimal(s), s), 1e-5);
    }
}

TEST(KlHessian, NullDirectionsVanish) {
    const SkillDistribution s = random_skill(3, 4, 1);
    const TabularPolicy star = fit_optimal(s);
    Vector null(12, 0.0);
    for (std::size_t y = 0; y < 4; ++y) null[8 + y] = 0.5;
    const Matrix h = kl_hessian_fd(star, s);
    EXPECT_NEAR(dot(null, matvec(h, null)), 0.0, 1e-7);
    EXPECT_NEAR(exact_fisher(star, s).quadratic_form(null), 0.0, 1e-15);
}

TEST(ScoreGradients, ShapeAndRowSums) {
    const SkillDistribution s = random_skill(3, 4, 2);
    const TabularPolicy p(gaussian_matrix(3, 4, 2, 5));
    const auto g = score_gradients(p, s, 50, 1);
    ASSERT_EQ(g.size(), 50u);
    for (const Matrix& m : g) {
        std::size_t nonzero_rows = 0;
        for (std::size_t x = 0; x < 3; ++x) {
            double sum = 0.0, mag = 0.0;
            for (double v : m.row(x)) {
                sum += v;
                mag += std::abs(v);
            }
            EXPECT_NEAR(sum, 0.0, 1e-15);
            if (mag > 0.0) ++nonzero_rows;
        }
        EXPECT_EQ(nonzero_rows, 1u);
    }
    EXPECT_EQ(score_gradients(p, s, 5, 1)[3].data(), g[3].data());
}

TEST(KlRemainder, MatchesDirectDifferenceAtModerateScale) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SkillDistribution s = random_skill(3, 4, seed);
        const TabularPolicy star = fit_optimal(s);
        const Vector v = seeded_direction(12, seed);
        const double quad = exact_fisher(star, s).quadratic_form(v);
        for (double t : {0.05, 0.2, 0.7}) {
            const double direct = kl_degradation(star, shifted(star, scaled(v, t)), s) - 0.5 * t * t * quad;
            EXPECT_NEAR(kl_quadratic_remainder(star, s, v, t), direct, 1e-14) << seed << " " << t;
        }
        EXPECT_EQ(kl_quadratic_remainder(star, s, v, 0.0), 0.0);
    }
}

TEST(KlRemainder, BinaryOracleAtSmallScale) {
    const SkillDistribution s = uniform_binary();
    const Vector v{std::sqrt(0.5), -std::sqrt(0.5)};
    for (double t : {1e-4, 1e-3, 1e-2}) {
        const double delta = t * std::sqrt(0.5);
        // binary_kl(δ) − δ²/2 for the symmetric skill is −δ⁴/12 + O(δ⁶).
        const double expected = -std::pow(delta, 4) / 12.0 + std::pow(delta, 6) / 45.0;
        EXPECT_NEAR(kl_quadratic_remainder(fit_optimal(s), s, v, t), expected, 1e-6 * std::abs(expected)) << t;
    }
}
