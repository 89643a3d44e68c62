#ifndef AICLAB_SKETCH_HPP
#define AICLAB_SKETCH_HPP

// Rademacher sketches of per-sample gradient matrices, the projected Fisher
// matrix built from them, and overlap scores of weight updates.
//
// vec convention: row-major, vec(M)[i·d_in + j] = M[i, j]. Under it
// vec(δvᵀ) = δ ⊗ v.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "aiclab/errors.hpp"
#include "aiclab/geometry.hpp"
#include "aiclab/io.hpp"
#include "aiclab/linalg.hpp"
#include "aiclab/parallel.hpp"
#include "aiclab/random.hpp"

namespace aiclab {

inline constexpr const char* kVecConvention = "row-major";
inline constexpr std::size_t kDefaultSketchDim = 4096;
inline constexpr double kNumericalRankThreshold = 1e-8;

enum class Layout : std::uint8_t { dense = 0, factored = 1 };

/// N gradient matrices of shape d_out × d_in, dense or as rank-1 pairs δvᵀ.
class GradientSampleSet {
public:
    GradientSampleSet(std::size_t d_out, std::size_t d_in, Layout layout, std::string source = "")
        : d_out_(d_out), d_in_(d_in), layout_(layout), source_(std::move(source)) {}

    std::size_t size() const noexcept {
        return layout_ == Layout::dense ? dense_.size() : deltas_.size();
    }
    std::size_t d_out() const noexcept { return d_out_; }
    std::size_t d_in() const noexcept { return d_in_; }
    std::size_t dimension() const noexcept { return d_out_ * d_in_; }
    Layout layout() const noexcept { return layout_; }
    const std::string& source() const noexcept { return source_; }

    std::optional<std::size_t> subspace_rank;  // r of a synthesized set
    Matrix subspace_basis;                     // U (d_out × r) of a synthesized set

    void add_dense(Matrix g) {
        if (layout_ != Layout::dense) throw Error("add_dense on a factored sample set");
        if (g.rows() != d_out_ || g.cols() != d_in_)
            throw DimensionMismatch("gradient sample", dimension(), g.rows() * g.cols());
        dense_.push_back(std::move(g));
    }

    void add_factored(Vector delta, Vector v) {
        if (layout_ != Layout::factored) throw Error("add_factored on a dense sample set");
        if (delta.size() != d_out_) throw DimensionMismatch("gradient delta", d_out_, delta.size());
        if (v.size() != d_in_) throw DimensionMismatch("gradient input", d_in_, v.size());
        deltas_.push_back(std::move(delta));
        inputs_.push_back(std::move(v));
    }

    const Vector& delta(std::size_t i) const { return deltas_.at(i); }
    const Vector& input(std::size_t i) const { return inputs_.at(i); }

    Matrix dense(std::size_t i) const {
        if (layout_ == Layout::dense) return dense_.at(i);
        return outer(deltas_.at(i), inputs_.at(i));
    }

    /// Row-major vec of sample i.
    Vector flat(std::size_t i) const { return dense(i).data(); }

private:
    std::size_t d_out_;
    std::size_t d_in_;
    Layout layout_;
    std::string source_;
    std::vector<Matrix> dense_;
    std::vector<Vector> deltas_;
    std::vector<Vector> inputs_;
};

/// k × D matrix with entries ±1/√k from the sign bit of hash(seed, row, column).
class RademacherProjection {
public:
    RademacherProjection(std::uint64_t seed, std::size_t k, std::size_t source_dim)
        : seed_(seed), k_(k), source_dim_(source_dim), scale_(1.0 / std::sqrt(static_cast<double>(k))) {
        if (k < 1) throw Error("sketch dimension must be >= 1");
        if (source_dim < 1) throw Error("sketch source dimension must be >= 1");
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t k() const noexcept { return k_; }
    std::size_t source_dim() const noexcept { return source_dim_; }

    double entry(std::size_t r, std::size_t c) const noexcept {
        return (counter_hash(seed_, r, c) >> 63) ? -scale_ : scale_;
    }

    /// Row r, materialized on demand.
    Vector row(std::size_t r) const {
        Vector out(source_dim_);
        for (std::size_t c = 0; c < source_dim_; ++c) out[c] = entry(r, c);
        return out;
    }

    Vector apply(std::span<const double> x) const {
        if (x.size() != source_dim_) throw DimensionMismatch("projection input", source_dim_, x.size());
        Vector out(k_);
        for (std::size_t r = 0; r < k_; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < source_dim_; ++c)
                s += (counter_hash(seed_, r, c) >> 63) ? -x[c] : x[c];
            out[r] = s * scale_;
        }
        return out;
    }

    Vector apply_transpose(std::span<const double> y) const {
        if (y.size() != k_) throw DimensionMismatch("projection transpose input", k_, y.size());
        Vector out(source_dim_, 0.0);
        for (std::size_t r = 0; r < k_; ++r)
            for (std::size_t c = 0; c < source_dim_; ++c) out[c] += entry(r, c) * y[r];
        return out;
    }

    /// P Pᵀ (k × k).
    Matrix gram() const {
        std::vector<Vector> rows(k_);
        for (std::size_t r = 0; r < k_; ++r) rows[r] = row(r);
        Matrix g(k_, k_);
        for (std::size_t a = 0; a < k_; ++a)
            for (std::size_t b = a; b < k_; ++b) g(a, b) = g(b, a) = dot(rows[a], rows[b]);
        return g;
    }

private:
    std::uint64_t seed_;
    std::size_t k_;
    std::size_t source_dim_;
    double scale_;
};

inline Vector project_flat(const Matrix& m, const RademacherProjection& proj) {
    if (m.rows() * m.cols() != proj.source_dim())
        throw DimensionMismatch("project_flat", proj.source_dim(), m.rows() * m.cols());
    return proj.apply(m.data());
}

/// Pᵀ(PPᵀ)⁻¹z: the minimum-norm source vector whose sketch is exactly z.
inline Vector project_preimage(std::span<const double> z, const RademacherProjection& proj) {
    return proj.apply_transpose(cholesky_solve(cholesky(proj.gram()), z));
}

struct ProjectedFIM {
    SymMatrix fim;
    std::size_t samples = 0;
    std::uint64_t projection_seed = 0;
    std::size_t source_dim = 0;

    std::size_t k() const noexcept { return fim.n(); }
};

namespace detail {

/// (1/N) Σ y_i y_iᵀ with each entry a compensated sum over samples.
inline SymMatrix second_moment_rows(const std::vector<Vector>& ys, std::size_t dim, unsigned threads) {
    Matrix f(dim, dim);
    const double inv = 1.0 / static_cast<double>(ys.size());
    parallel_for(dim, threads, [&](std::size_t a) {
        for (std::size_t b = a; b < dim; ++b) {
            CompensatedSum s;
            for (const Vector& y : ys) s.add(y[a] * y[b]);
            f(a, b) = s.value() * inv;
        }
    });
    for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t b = 0; b < a; ++b) f(a, b) = f(b, a);
    return SymMatrix(std::move(f));
}

}  // namespace detail

/// One pass over the samples sketches each vec(G_i); the k×k second moment is
/// then accumulated entrywise.
inline ProjectedFIM projected_fim(const GradientSampleSet& samples, const RademacherProjection& proj,
                                  unsigned threads = 1) {
    if (samples.size() < 1) throw InsufficientData("projected_fim needs >= 1 sample");
    if (samples.dimension() != proj.source_dim())
        throw DimensionMismatch("projected_fim", proj.source_dim(), samples.dimension());
    std::vector<Vector> ys(samples.size());
    parallel_for(samples.size(), threads, [&](std::size_t i) { ys[i] = proj.apply(samples.flat(i)); });
    return {detail::second_moment_rows(ys, proj.k(), threads), samples.size(), proj.seed(),
            proj.source_dim()};
}

/// Unprojected (D × D) FIM of the flattened samples.
inline SymMatrix dense_fim(const GradientSampleSet& samples, unsigned threads = 1) {
    if (samples.size() < 1) throw InsufficientData("dense_fim needs >= 1 sample");
    std::vector<Vector> ys(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) ys[i] = samples.flat(i);
    return detail::second_moment_rows(ys, samples.dimension(), threads);
}

struct EigenDecay {
    Vector eigenvalues;      // descending, first `top`
    Vector cumulative_mass;  // Σ_{j≤i} λ_j / trace
    double trace = 0.0;
};

inline EigenDecay eigen_decay_report(const ProjectedFIM& f, std::size_t top) {
    if (top > f.k()) throw Error("eigen_decay_report: top " + std::to_string(top) + " > k " + std::to_string(f.k()));
    const SymSpectrum s = eigendecompose(f.fim);
    EigenDecay r;
    r.trace = trace(f.fim.matrix());
    double acc = 0.0;
    for (std::size_t j = 0; j < top; ++j) {
        r.eigenvalues.push_back(s.eigenvalues[j]);
        acc += s.eigenvalues[j];
        r.cumulative_mass.push_back(r.trace > 0.0 ? acc / r.trace : 0.0);
    }
    return r;
}

/// Factored samples δ_i = Uα_i with seeded orthonormal U (d × r), Gaussian α_i
/// and v_i ∈ R^{d_in}. r = 0 gives δ_i = 0.
inline GradientSampleSet synth_lowrank_gradients(std::size_t d, std::size_t r, std::size_t count,
                                                 std::uint64_t seed, std::size_t d_in = 0) {
    if (d < 1) throw InfeasibleParams("d", "must be >= 1");
    if (r > d) throw InfeasibleParams("r", "subspace rank must be <= d");
    if (d_in == 0) d_in = d;
    GradientSampleSet set(d, d_in, Layout::factored, "synthetic");
    set.subspace_rank = r;
    set.subspace_basis = r ? orthonormalize_columns(gaussian_matrix(d, r, seed, streams::synth_basis)) : Matrix(d, 0);
    CounterRng coeff(seed, streams::synth_coeff);
    CounterRng input(seed, streams::synth_input);
    for (std::size_t i = 0; i < count; ++i) {
        Vector alpha(r);
        for (double& a : alpha) a = coeff.normal();
        Vector delta = r ? matvec(set.subspace_basis, alpha) : Vector(d, 0.0);
        Vector v(d_in);
        for (double& x : v) x = input.normal();
        set.add_factored(std::move(delta), std::move(v));
    }
    return set;
}

/// Dense samples G_i = a_i u v_iᵀ + σE_i: one shared output direction u plus
/// Gaussian noise of scale σ. The sketched FIM has about d_in large eigenvalues
/// and a floor near σ².
inline GradientSampleSet synth_spiked_gradients(std::size_t d_out, std::size_t d_in, std::size_t count,
                                                double noise, std::uint64_t seed) {
    GradientSampleSet set(d_out, d_in, Layout::dense, "spiked");
    CounterRng dir(seed, streams::synth_basis);
    Vector u(d_out);
    for (double& x : u) x = dir.normal();
    u = normalized(u);
    set.subspace_rank = 1;
    set.subspace_basis = Matrix(d_out, 1);
    set.subspace_basis.set_column(0, u);
    CounterRng coeff(seed, streams::synth_coeff);
    CounterRng input(seed, streams::synth_input);
    for (std::size_t i = 0; i < count; ++i) {
        const double a = coeff.normal();
        Vector v(d_in);
        for (double& x : v) x = input.normal() / std::sqrt(static_cast<double>(d_in));
        Matrix g = scaled(outer(u, v), a);
        for (double& x : g.data()) x += noise * coeff.normal();
        set.add_dense(std::move(g));
    }
    return set;
}

struct RankCheck {
    std::size_t numerical_rank = 0;
    std::size_t bound = 0;
    bool holds = false;
};

inline std::size_t numerical_rank(const SymMatrix& f) {
    const SymSpectrum s = eigendecompose(f);
    const double top = std::max(0.0, s.lambda_max());
    if (top == 0.0) return 0;
    return static_cast<std::size_t>(std::count_if(s.eigenvalues.begin(), s.eigenvalues.end(),
                                                  [&](double l) { return l > kNumericalRankThreshold * top; }));
}

/// Numerical rank of the (projected or dense) FIM against min(d_in·r, N, ambient).
inline RankCheck rank_bound_check(const GradientSampleSet& samples, const RademacherProjection* proj = nullptr,
                                  std::optional<std::size_t> r = std::nullopt) {
    const auto rank = r ? r : samples.subspace_rank;
    if (!rank) throw Error("rank_bound_check: subspace rank unknown and not supplied");
    RankCheck c;
    std::size_t ambient;
    if (proj) {
        const ProjectedFIM f = projected_fim(samples, *proj);
        c.numerical_rank = numerical_rank(f.fim);
        ambient = proj->k();
    } else {
        c.numerical_rank = numerical_rank(dense_fim(samples));
        ambient = samples.dimension();
    }
    c.bound = std::min({samples.d_in() * *rank, samples.size(), ambient});
    c.holds = c.numerical_rank <= c.bound;
    return c;
}

/// δ ⊗ v
inline Vector kron(std::span<const double> a, std::span<const double> b) {
    Vector out;
    out.reserve(a.size() * b.size());
    for (double x : a)
        for (double y : b) out.push_back(x * y);
    return out;
}

/// max |vec(δvᵀ) − δ⊗v| under the row-major convention.
inline double kron_identity_check(std::span<const double> delta, std::span<const double> v) {
    const Vector lhs = outer(delta, v).data();
    const Vector rhs = kron(delta, v);
    double dev = 0.0;
    for (std::size_t i = 0; i < lhs.size(); ++i) dev = std::max(dev, std::abs(lhs[i] - rhs[i]));
    return dev;
}

struct OverlapEntry {
    std::string block;
    double score = 0.0;            // (P vec ΔW)ᵀ F̂ (P vec ΔW)
    double update_norm = 0.0;      // ‖ΔW‖_F
    double normalized_score = 0.0; // score / ‖ΔW‖², 0 when ΔW = 0
    std::uint64_t projection_seed = 0;
};

struct OverlapReport {
    std::vector<OverlapEntry> entries;
};

inline void require_matching(const RademacherProjection& proj, const ProjectedFIM& f) {
    if (proj.seed() != f.projection_seed)
        throw SeedMismatch("projection seed " + std::to_string(proj.seed()) +
                           " differs from the FIM projection seed " + std::to_string(f.projection_seed));
    if (proj.k() != f.k() || proj.source_dim() != f.source_dim)
        throw SeedMismatch("projection shape does not match the FIM sketch");
}

inline OverlapEntry overlap_entry(const Matrix& delta_w, const RademacherProjection& proj,
                                  const ProjectedFIM& f, std::string block = "") {
    require_matching(proj, f);
    const Vector z = project_flat(delta_w, proj);
    OverlapEntry e;
    e.block = std::move(block);
    e.score = std::max(0.0, f.fim.quadratic_form(z));
    e.update_norm = frobenius_norm(delta_w);
    e.normalized_score = e.update_norm > 0.0 ? e.score / (e.update_norm * e.update_norm) : 0.0;
    e.projection_seed = proj.seed();
    return e;
}

inline double overlap_score(const Matrix& delta_w, const RademacherProjection& proj, const ProjectedFIM& f) {
    return overlap_entry(delta_w, proj, f).score;
}

// ---------------------------------------------------------------------------
// Gradient-sample file: "AICG", u32 version=1, u8 layout, u64 N, u64 d_out,
// u64 d_in, then the samples (little-endian f64).

inline void write_gradients(std::ostream& os, const GradientSampleSet& s) {
    os.write("AICG", 4);
    io::write_le<std::uint32_t>(os, 1);
    io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(s.layout()));
    io::write_le<std::uint64_t>(os, s.size());
    io::write_le<std::uint64_t>(os, s.d_out());
    io::write_le<std::uint64_t>(os, s.d_in());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.layout() == Layout::dense) {
            const Matrix g = s.dense(i);
            for (double x : g.data()) io::write_le<double>(os, x);
        } else {
            for (double x : s.delta(i)) io::write_le<double>(os, x);
            for (double x : s.input(i)) io::write_le<double>(os, x);
        }
    }
}

inline GradientSampleSet read_gradients(std::istream& is) {
    io::expect_magic(is, "AICG");
    const auto version = io::read_le<std::uint32_t>(is);
    if (version != 1) throw FormatError("unsupported gradient file version " + std::to_string(version));
    const auto layout = io::read_le<std::uint8_t>(is);
    if (layout > 1) throw FormatError("unknown gradient layout " + std::to_string(layout));
    const auto n = io::read_le<std::uint64_t>(is);
    const auto d_out = io::read_le<std::uint64_t>(is);
    const auto d_in = io::read_le<std::uint64_t>(is);
    GradientSampleSet s(d_out, d_in, static_cast<Layout>(layout), "file");
    for (std::uint64_t i = 0; i < n; ++i) {
        if (s.layout() == Layout::dense) {
            Matrix g(d_out, d_in);
            for (double& x : g.data()) x = io::read_le<double>(is);
            s.add_dense(std::move(g));
        } else {
            Vector delta(d_out), v(d_in);
            for (double& x : delta) x = io::read_le<double>(is);
            for (double& x : v) x = io::read_le<double>(is);
            s.add_factored(std::move(delta), std::move(v));
        }
    }
    return s;
}

}  // namespace aiclab

#endif  // AICLAB_SKETCH_HPP
