#include <gtest/gtest.h>

#include <cmath>

#include "aiclab/geometry.hpp"
#include "aiclab/io.hpp"
#include "oracles.hpp"

using namespace aiclab;

namespace {

Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
    const Matrix g = gaussian_matrix(n, n, seed);
    return scaled(add(g, transpose(g)), 0.5);
}

Matrix random_psd(std::size_t n, std::uint64_t seed) {
    const Matrix g = gaussian_matrix(n, n, seed);
    return matmul(g, transpose(g));
}

double max_abs_diff(const Matrix& a, const Matrix& b) { return max_abs(subtract(a, b)); }

}  // namespace

TEST(SymMatrix, RejectsAsymmetryWithMeasuredValue) {
    try {
        SymMatrix(Matrix{{1.0, 2.0}, {2.5, 1.0}});
        FAIL() << "expected AsymmetryError";
    } catch (const AsymmetryError& e) {
        EXPECT_DOUBLE_EQ(e.asymmetry(), 0.5);
    }
}

TEST(SymMatrix, RejectsNonFinite) {
    EXPECT_THROW(SymMatrix(Matrix{{NAN, 0.0}, {0.0, 1.0}}), NonFiniteError);
}

TEST(Eigendecompose, IdentityTwo) {
    const SymSpectrum s = eigendecompose(SymMatrix::identity(2));
    EXPECT_DOUBLE_EQ(s.eigenvalues[0], 1.0);
    EXPECT_DOUBLE_EQ(s.eigenvalues[1], 1.0);
}

TEST(Eigendecompose, AnalyticTwoByTwo) {
    const SymSpectrum s = eigendecompose(SymMatrix(Matrix{{2.0, 1.0}, {1.0, 2.0}}));
    EXPECT_NEAR(s.eigenvalues[0], 3.0, 1e-14);
    EXPECT_NEAR(s.eigenvalues[1], 1.0, 1e-14);
    const double r = 1.0 / std::sqrt(2.0);
    const Vector v0 = s.vector(0), v1 = s.vector(1);
    EXPECT_NEAR(v0[0], r, 1e-14);
    EXPECT_NEAR(v0[1], r, 1e-14);
    // Sign convention: the largest-magnitude entry is positive; ties keep the first.
    EXPECT_NEAR(std::abs(v1[0]), r, 1e-14);
    EXPECT_NEAR(v1[0], -v1[1], 1e-14);
}

TEST(Eigendecompose, SeedSevenMatchesCharacteristicPolynomial) {
    const Matrix a = random_symmetric(5, 7);
    // Frozen from the bisection oracle on det(A − xI).
    const Vector frozen{1.9250142733662079, 1.27890451826728, -0.18038052993363096, -0.61478422168606239,
                        -1.6238439873940131};
    const Vector live = oracle::charpoly_eigenvalues(a);
    const SymSpectrum s = eigendecompose(a);
    ASSERT_EQ(live.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_NEAR(s.eigenvalues[i], frozen[i], 1e-8);
        EXPECT_NEAR(s.eigenvalues[i], live[i], 1e-8);
    }
}

TEST(Eigendecompose, InvariantsOnRandomMatrices) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const std::size_t n = 3 + 4 * seed;
        const Matrix a = random_symmetric(n, seed);
        const SymSpectrum s = eigendecompose(a);
        for (std::size_t i = 1; i < n; ++i) EXPECT_GE(s.eigenvalues[i - 1], s.eigenvalues[i]);
        const Matrix vtv = matmul(transpose(s.eigenvectors), s.eigenvectors);
        EXPECT_LE(max_abs_diff(vtv, Matrix::identity(n)), 1e-10);
        EXPECT_LE(operator_norm(subtract(s.reconstruct(), a)), 1e-8 * operator_norm(a));
        for (std::size_t j = 0; j < n; ++j) {
            const Vector v = s.vector(j);
            std::size_t big = 0;
            for (std::size_t i = 1; i < n; ++i)
                if (std::abs(v[i]) > std::abs(v[big])) big = i;
            EXPECT_GT(v[big], 0.0);
        }
    }
}

TEST(Eigendecompose, Deterministic) {
    const Matrix a = random_symmetric(12, 3);
    const SymSpectrum s1 = eigendecompose(a), s2 = eigendecompose(a);
    EXPECT_EQ(s1.eigenvalues, s2.eigenvalues);
    EXPECT_EQ(s1.eigenvectors, s2.eigenvectors);
}

TEST(TopProjector, DiagThreeOne) {
    const Projector p = top_projector(eigendecompose(SymMatrix::diagonal({3.0, 1.0})), 1);
    EXPECT_LE(max_abs_diff(p.matrix(), Matrix{{1.0, 0.0}, {0.0, 0.0}}), 1e-15);
}

TEST(TopProjector, FullRankIsIdentity) {
    const SymSpectrum s = eigendecompose(random_symmetric(6, 2));
    EXPECT_LE(max_abs_diff(top_projector(s, 6).matrix(), Matrix::identity(6)), 1e-12);
}

TEST(TopProjector, KillsTrailingEigenvector) {
    const SymSpectrum s = eigendecompose(SymMatrix::diagonal({5.0, 4.0, 1.0, 0.5}));
    const Projector p = top_projector(s, 2);
    EXPECT_NEAR(trace(p.matrix()), 2.0, 1e-8);
    EXPECT_LE(max_abs(p.apply(Vector{0, 0, 1, 0})), 1e-15);
}

TEST(TopProjector, RangeErrorsAndDegenerateFlag) {
    const SymSpectrum s = eigendecompose(SymMatrix::diagonal({2.0, 2.0, 1.0}));
    EXPECT_THROW(top_projector(s, 0), Error);
    EXPECT_THROW(top_projector(s, 4), Error);
    EXPECT_TRUE(top_projector(s, 1).ill_conditioned());
    EXPECT_FALSE(top_projector(s, 2).ill_conditioned());
}

TEST(TopProjector, InvariantsAndCommutation) {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const Matrix f = random_psd(10, seed);
        const SymSpectrum s = eigendecompose(f);
        for (std::size_t d = 1; d <= 9; d += 4) {
            const Projector p = top_projector(s, d);
            const Matrix& m = p.matrix();
            EXPECT_LE(max_abs_diff(matmul(m, m), m), 1e-10);
            EXPECT_LE(asymmetry(m), 1e-12);
            EXPECT_NEAR(trace(m), static_cast<double>(d), 1e-8);
            EXPECT_LE(commutator_norm(SymMatrix(f), p), 1e-8 * operator_norm(f));
        }
    }
}

TEST(FisherHalf, SquareRootAndPsdCheck) {
    const Matrix f = random_psd(8, 4);
    const FisherHalf h{SymMatrix(f)};
    EXPECT_LE(operator_norm(subtract(matmul(h.half(), h.half()), f)), 1e-8 * operator_norm(f));
    EXPECT_THROW(FisherHalf(SymMatrix::diagonal({1.0, -0.5})), Error);
}

TEST(FisherHalfNorm, Examples) {
    const FisherHalf f(SymMatrix::diagonal({4.0, 1.0}));
    const Projector p = top_projector(f.spectrum(), 1);
    EXPECT_NEAR(fisher_half_norm(f, p, Vector{3.0, 5.0}), 6.0, 1e-14);
    EXPECT_DOUBLE_EQ(fisher_half_norm(f, p, Vector{0.0, 5.0}), 0.0);
    const FisherHalf id(SymMatrix::identity(3));
    EXPECT_NEAR(fisher_half_norm(id, Projector::identity(3), Vector{1.0, 2.0, 2.0}), 3.0, 1e-14);
    EXPECT_THROW(fisher_half_norm(f, p, Vector{1.0, 2.0, 3.0}), DimensionMismatch);
}

TEST(FisherHalfNorm, OperatorBound) {
    const Matrix m = random_psd(9, 11);
    const FisherHalf f{SymMatrix(m)};
    const Projector p = top_projector(f.spectrum(), 3);
    CounterRng rng(11, 99);
    for (int k = 0; k < 200; ++k) {
        Vector v(9);
        for (double& x : v) x = rng.normal();
        const double q = fisher_half_norm(f, p, v);
        EXPECT_LE(q * q, f.lambda_max() * dot(v, v) * (1 + 1e-12));
    }
}

TEST(RayleighFloor, Examples) {
    const SymMatrix f = SymMatrix::diagonal({9.0, 5.0, 1.0, 0.1});
    const Projector p = top_projector(eigendecompose(f), 2);
    const RayleighFloor top = rayleigh_floor(f, p, 5.0, Vector{1, 0, 0, 0});
    EXPECT_DOUBLE_EQ(top.quad, 9.0);
    EXPECT_TRUE(top.holds);
    const RayleighFloor perp = rayleigh_floor(f, p, 5.0, Vector{0, 0, 2, 1});
    EXPECT_DOUBLE_EQ(perp.floor, 0.0);
    EXPECT_TRUE(perp.holds);

    CounterRng rng(5, 1);
    for (int k = 0; k < 10000; ++k) {
        Vector z(4);
        for (double& x : z) x = rng.normal();
        ASSERT_TRUE(rayleigh_floor(f, p, 5.0, z).holds);
    }
}

TEST(RayleighFloor, RejectsNonSpectralProjector) {
    const SymMatrix f = SymMatrix::diagonal({9.0, 5.0});
    const double r = 1.0 / std::sqrt(2.0);
    Matrix b(2, 1);
    b(0, 0) = r;
    b(1, 0) = r;
    EXPECT_THROW(rayleigh_floor(f, Projector::from_basis(b), 5.0, Vector{1, 0}), NotSpectralError);
}

TEST(SpectralGap, Examples) {
    EXPECT_DOUBLE_EQ(spectral_gap(eigendecompose(SymMatrix::diagonal({3.0, 1.0})), 1), 2.0);
    EXPECT_DOUBLE_EQ(spectral_gap(eigendecompose(SymMatrix::diagonal({2.0, 2.0, 1.0})), 1), 0.0);
    EXPECT_DOUBLE_EQ(spectral_gap(eigendecompose(SymMatrix::diagonal({5.0, 4.0, 1.0})), 2), 3.0);
    EXPECT_THROW(spectral_gap(eigendecompose(SymMatrix::diagonal({5.0, 4.0})), 2), Error);
}

TEST(ProjectorDistance, Examples) {
    const Projector a = top_projector(eigendecompose(SymMatrix::diagonal({1.0, 0.0})), 1);
    const Projector b = top_projector(eigendecompose(SymMatrix::diagonal({0.0, 1.0})), 1);
    EXPECT_NEAR(projector_distance(a, a), 0.0, 1e-12);
    EXPECT_NEAR(projector_distance(a, b), 1.0, 1e-10);
    for (double alpha : {0.1, 0.7, 1.3, 2.5}) {
        Matrix line(2, 1);
        line(0, 0) = std::cos(alpha);
        line(1, 0) = std::sin(alpha);
        EXPECT_NEAR(projector_distance(a, Projector::from_basis(line)), std::abs(std::sin(alpha)), 1e-9);
    }
    EXPECT_THROW(projector_distance(a, Projector::identity(2)), Error);
}

TEST(DavisKahan, IdenticalAndRotated) {
    const SymMatrix f0 = SymMatrix::diagonal({2.0, 1.0});
    const DavisKahanResult same = davis_kahan_check(f0, f0, 1);
    EXPECT_NEAR(same.distance, 0.0, 1e-12);
    EXPECT_TRUE(same.holds);

    const double a = 0.1;
    const Matrix r{{std::cos(a), -std::sin(a)}, {std::sin(a), std::cos(a)}};
    const SymMatrix f1 = SymMatrix::symmetrized(matmul(matmul(r, f0.matrix()), transpose(r)));
    const DavisKahanResult rot = davis_kahan_check(f0, f1, 1);
    EXPECT_NEAR(rot.distance, std::sin(0.1), 1e-9);
    ASSERT_TRUE(rot.bound.has_value());
    EXPECT_TRUE(rot.holds);
}

TEST(DavisKahan, ZeroGapReportsNoBound) {
    const DavisKahanResult r = davis_kahan_check(SymMatrix::diagonal({1.0, 1.0}), SymMatrix::diagonal({1.1, 1.0}), 1);
    EXPECT_FALSE(r.bound.has_value());
}

TEST(DavisKahan, RandomPerturbationsAlwaysHold) {
    const Matrix base = random_psd(16, 21);
    for (std::uint64_t k = 0; k < 100; ++k) {
        const Matrix e = random_symmetric(16, 1000 + k);
        const double scale = 1e-3 * static_cast<double>(k % 10 + 1);
        const DavisKahanResult r = davis_kahan_check(SymMatrix(base), SymMatrix::symmetrized(add(base, scaled(e, scale))), 4);
        ASSERT_TRUE(r.bound.has_value());
        EXPECT_TRUE(r.holds) << "trial " << k;
    }
}

TEST(MatrixIo, CsvAndBinaryRoundTrip) {
    const Matrix m = gaussian_matrix(4, 3, 9);
    std::stringstream csv;
    io::write_csv(csv, m);
    EXPECT_EQ(io::read_csv(csv), m);
    std::stringstream bin;
    io::write_binary(bin, m);
    EXPECT_EQ(io::read_binary(bin), m);
    std::stringstream bad("XXXX");
    EXPECT_THROW(io::read_binary(bad), FormatError);
}
