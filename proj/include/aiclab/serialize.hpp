#ifndef AICLAB_SERIALIZE_HPP
#define AICLAB_SERIALIZE_HPP

// JSON mappings for the library's value types (nlohmann::json ADL hooks).

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "aiclab/errors.hpp"
#include "aiclab/flow.hpp"
#include "aiclab/geometry.hpp"
#include "aiclab/landscape.hpp"
#include "aiclab/linalg.hpp"
#include "aiclab/nullmodel.hpp"
#include "aiclab/policy.hpp"
#include "aiclab/scaling.hpp"
#include "aiclab/sketch.hpp"

namespace aiclab {

using json = nlohmann::json;

/// Finite doubles as numbers; ±inf and NaN as the strings "inf", "-inf", "nan".
inline json number(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

inline double to_double(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return INFINITY;
        if (s == "-inf") return -INFINITY;
        if (s == "nan") return NAN;
    }
    throw FormatError("expected a number, got " + j.dump());
}

inline json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (double x : m.row(i)) r.push_back(number(x));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j, std::size_t cols_if_empty = 0) {
    if (!j.is_array()) throw FormatError("matrix must be an array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = rows ? j.at(0).size() : cols_if_empty;
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols) throw FormatError("ragged matrix row " + std::to_string(i));
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = to_double(j[i][c]);
    }
    return m;
}

inline Vector vector_from_json(const json& j) {
    if (!j.is_array()) throw FormatError("vector must be an array");
    Vector v;
    v.reserve(j.size());
    for (const auto& x : j) v.push_back(to_double(x));
    return v;
}

inline void to_json(json& j, const AICParams& p) {
    j = {{"d", p.d}, {"lambda", p.lambda}, {"gamma", p.gamma}, {"epsilon", p.epsilon}};
}

inline void from_json(const json& j, AICParams& p) {
    p.d = j.at("d").get<std::size_t>();
    p.lambda = j.at("lambda").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.epsilon = j.value("epsilon", 0.0);
}

inline void to_json(json& j, const AICCertificate& c) {
    j = {{"tail_sum", c.tail_sum},
         {"lambda_d", c.lambda_d},
         {"proj_grad_norm", c.proj_grad_norm},
         {"coupling", c.coupling},
         {"lambda_max", c.lambda_max},
         {"gap", c.gap},
         {"low_rank", c.low_rank},
         {"orthogonal", c.orthogonal},
         {"coupled", c.coupled},
         {"ill_conditioned", c.ill_conditioned},
         {"all_met", c.all_met()}};
}

/// Instances store the generating spec and the materialized utility and
/// objective; loading uses the materialized data only.
inline json instance_json(const AICInstance& inst) {
    json j;
    j["n"] = inst.n;
    j["params"] = inst.params;
    j["seed"] = inst.seed;
    j["gradient_leak"] = inst.gradient_leak;
    j["eigenvalues"] = inst.eigenvalues;
    j["certificate"] = inst.certificate;
    j["utility"] = {{"theta_star", inst.utility.theta_star},
                    {"fisher", matrix_json(inst.utility.fisher.matrix())},
                    {"cubic_coeff", inst.utility.cubic_coeff},
                    {"cubic_direction", inst.utility.cubic_direction}};
    json dirs = json::array();
    for (const auto& v : inst.objective.cubic_directions) dirs.push_back(v);
    j["objective"] = {{"g0", inst.objective.g0},
                      {"hessian", matrix_json(inst.objective.hessian.matrix())},
                      {"cubic_tensor_scale", inst.objective.cubic_tensor_scale},
                      {"cubic_directions", dirs},
                      {"cubic_weights", inst.objective.cubic_weights},
                      {"ball_radius", inst.objective.ball_radius}};
    return j;
}

struct LoadedInstance {
    AICParams params;
    std::uint64_t seed = 0;
    QuadraticUtility utility;
    FineTuneObjective objective;
};

inline LoadedInstance instance_from_json(const json& j) {
    LoadedInstance li;
    li.params = j.at("params").get<AICParams>();
    li.seed = j.value("seed", std::uint64_t{0});
    const json& u = j.at("utility");
    li.utility.theta_star = vector_from_json(u.at("theta_star"));
    li.utility.fisher = SymMatrix(matrix_from_json(u.at("fisher")));
    li.utility.cubic_coeff = u.value("cubic_coeff", 0.0);
    if (u.contains("cubic_direction")) li.utility.cubic_direction = vector_from_json(u.at("cubic_direction"));
    const json& o = j.at("objective");
    li.objective.theta_star = li.utility.theta_star;
    li.objective.g0 = vector_from_json(o.at("g0"));
    li.objective.hessian = SymMatrix(matrix_from_json(o.at("hessian")));
    li.objective.cubic_tensor_scale = o.value("cubic_tensor_scale", 0.0);
    if (o.contains("cubic_directions"))
        for (const auto& d : o.at("cubic_directions")) li.objective.cubic_directions.push_back(vector_from_json(d));
    if (o.contains("cubic_weights")) li.objective.cubic_weights = vector_from_json(o.at("cubic_weights"));
    li.objective.ball_radius = o.value("ball_radius", 1.0);
    const std::size_t n = li.utility.theta_star.size();
    if (li.utility.fisher.n() != n) throw DimensionMismatch("instance fisher", n, li.utility.fisher.n());
    if (li.objective.g0.size() != n) throw DimensionMismatch("instance g0", n, li.objective.g0.size());
    if (li.objective.hessian.n() != n) throw DimensionMismatch("instance hessian", n, li.objective.hessian.n());
    if (li.objective.cubic_weights.size() != li.objective.cubic_directions.size())
        throw FormatError("cubic_weights and cubic_directions differ in length");
    return li;
}

inline void to_json(json& j, const ScalingFit& f) {
    j = {{"exponent", f.exponent},
         {"coefficient", f.coefficient()},
         {"log_coefficient", f.log_coefficient},
         {"r2", f.r_squared},
         {"window", {f.t_min, f.t_max}},
         {"points", f.points}};
}

inline void to_json(json& j, const MCEstimate& e) {
    j = {{"target", e.target}, {"mean", e.mean}, {"stderr", e.std_error}, {"trials", e.trials}};
}

inline void to_json(json& j, const SkillDistribution& s) {
    j = {{"p", s.context_probs()}, {"conditionals", matrix_json(s.conditionals())}};
}

inline SkillDistribution skill_from_json(const json& j) {
    return {vector_from_json(j.at("p")), matrix_from_json(j.at("conditionals"))};
}

inline void to_json(json& j, const TabularPolicy& p) {
    j = {{"logits", matrix_json(p.logits())}, {"vec", kVecConvention}};
}

inline TabularPolicy policy_from_json(const json& j) { return TabularPolicy(matrix_from_json(j.at("logits"))); }

inline void to_json(json& j, const OverlapEntry& e) {
    j = {{"block", e.block},
         {"os", e.score},
         {"delta_w_norm", e.update_norm},
         {"os_normalized", e.normalized_score},
         {"projection_seed", e.projection_seed}};
}

}  // namespace aiclab

#endif  // AICLAB_SERIALIZE_HPP
