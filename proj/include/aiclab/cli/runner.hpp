#ifndef AICLAB_CLI_RUNNER_HPP
#define AICLAB_CLI_RUNNER_HPP

// Experiment runner: one subcommand per pipeline, JSON configs in, CSV/JSON
// results plus a checksummed manifest out.
//
// Exit codes: 0 pass, 1 check failed, 2 config error, 3 missing input,
// 4 incompatible inputs.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aiclab/errors.hpp"
#include "aiclab/flow.hpp"
#include "aiclab/geometry.hpp"
#include "aiclab/io.hpp"
#include "aiclab/landscape.hpp"
#include "aiclab/nullmodel.hpp"
#include "aiclab/policy.hpp"
#include "aiclab/serialize.hpp"
#include "aiclab/sketch.hpp"

namespace aiclab::cli {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kPass = 0, kCheckFailed = 1, kConfigError = 2, kMissingInput = 3, kIncompatible = 4 };

class ConfigError : public Error {
public:
    using Error::Error;
};

class MissingInput : public Error {
public:
    using Error::Error;
};

enum class Format { csv, json };

struct GlobalOptions {
    fs::path config;
    fs::path out = "aiclab-out";
    Format format = Format::csv;
    unsigned threads = 1;
    std::optional<std::uint64_t> seed_override;
};

/// Replaces every "seed" member, at any depth, with `seed`.
inline void override_seeds(json& j, std::uint64_t seed) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == "seed") it.value() = seed;
            else override_seeds(it.value(), seed);
        }
    } else if (j.is_array()) {
        for (auto& e : j) override_seeds(e, seed);
    }
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw MissingInput("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json load_config(const GlobalOptions& opts) {
    const std::string text = read_file(opts.config);
    json cfg;
    try {
        cfg = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(opts.config.string() + ": " + e.what());
    }
    if (!cfg.is_object()) throw ConfigError(opts.config.string() + ": top level must be an object");
    if (opts.seed_override) override_seeds(cfg, *opts.seed_override);
    return cfg;
}

/// Output sink for one run: every file written is checksummed into the manifest.
class RunContext {
public:
    RunContext(GlobalOptions opts, json config, std::string subcommand, std::ostream& log)
        : opts_(std::move(opts)), config_(std::move(config)), subcommand_(std::move(subcommand)), log_(log) {
        fs::create_directories(opts_.out);
    }

    const GlobalOptions& options() const noexcept { return opts_; }
    const json& config() const noexcept { return config_; }
    std::ostream& log() { return log_; }
    json& extra() { return extra_; }

    fs::path resolve(const std::string& rel) const {
        const fs::path p(rel);
        return p.is_absolute() ? p : opts_.config.parent_path() / p;
    }

    void write_text(const std::string& name, const std::string& content) {
        std::ofstream out(opts_.out / name, std::ios::binary);
        if (!out) throw Error("cannot write " + (opts_.out / name).string());
        out << content;
        outputs_.push_back({name, io::fnv1a_hex(content)});
    }

    void write_json(const std::string& name, const json& j) { write_text(name, j.dump(2) + "\n"); }

    /// Table in the selected format; `stem` gets the .csv or .json suffix.
    void write_table(const std::string& stem, const std::vector<std::string>& header,
                     const std::vector<std::vector<json>>& rows) {
        if (opts_.format == Format::json) {
            json arr = json::array();
            for (const auto& r : rows) {
                json o = json::object();
                for (std::size_t c = 0; c < header.size(); ++c) o[header[c]] = r[c];
                arr.push_back(std::move(o));
            }
            write_json(stem + ".json", arr);
            return;
        }
        std::ostringstream os;
        for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t c = 0; c < r.size(); ++c) {
                if (c) os << ',';
                if (r[c].is_number_float()) os << io::format_double(r[c].get<double>());
                else if (r[c].is_string()) os << r[c].get<std::string>();
                else os << r[c].dump();
            }
            os << '\n';
        }
        write_text(stem + ".csv", os.str());
    }

    void write_binary(const std::string& name, const std::string& bytes) { write_text(name, bytes); }

    void finish(bool passed, double seconds) {
        json m;
        m["subcommand"] = subcommand_;
        m["tool_version"] = kToolVersion;
        m["config_hash"] = io::fnv1a_hex(config_.dump());
        m["passed"] = passed;
        m["wall_clock_seconds"] = seconds;
        json files = json::array();
        for (const auto& [name, sum] : outputs_) files.push_back({{"file", name}, {"fnv1a", sum}});
        m["outputs"] = files;
        for (auto it = extra_.begin(); it != extra_.end(); ++it) m[it.key()] = it.value();
        std::ofstream out(opts_.out / "manifest.json", std::ios::binary);
        out << m.dump(2) << '\n';
    }

private:
    GlobalOptions opts_;
    json config_;
    std::string subcommand_;
    std::ostream& log_;
    json extra_ = json::object();
    std::vector<std::pair<std::string, std::string>> outputs_;
};

// ---------------------------------------------------------------------------
// aic-verify

inline AICInstance build_instance_from_spec(const json& spec) {
    const std::string kind = spec.value("kind", "aic");
    const std::size_t n = spec.at("n").get<std::size_t>();
    const std::uint64_t seed = spec.at("seed").get<std::uint64_t>();
    InstanceOptions opt;
    if (spec.contains("gradient_leak")) opt.gradient_leak = spec.at("gradient_leak").get<double>();
    opt.tail_ratio = spec.value("tail_ratio", opt.tail_ratio);
    opt.cubic_coeff = spec.value("cubic_coeff", opt.cubic_coeff);
    opt.cubic_tensor_scale = spec.value("cubic_tensor_scale", opt.cubic_tensor_scale);
    opt.ball_radius = spec.value("ball_radius", opt.ball_radius);
    if (kind == "aic") {
        const AICParams params{spec.at("d").get<std::size_t>(), spec.at("lambda").get<double>(),
                               spec.at("gamma").get<double>(), spec.value("epsilon", 0.0)};
        return build_aic_instance(n, params, seed, opt);
    }
    if (kind == "first_order")
        return build_first_order_instance(n, spec.at("d").get<std::size_t>(), spec.at("lambda").get<double>(),
                                          spec.at("gamma").get<double>(), spec.at("c").get<double>(), seed, opt);
    throw ConfigError("unknown instance kind '" + kind + "'");
}

inline bool run_aic_verify(RunContext& ctx) {
    const json& cfg = ctx.config();
    const AICInstance inst = build_instance_from_spec(cfg);
    AICParams demanded = inst.params;
    if (cfg.contains("demand")) {
        const json& d = cfg.at("demand");
        demanded.lambda = d.value("lambda", demanded.lambda);
        demanded.gamma = d.value("gamma", demanded.gamma);
        demanded.epsilon = d.value("epsilon", demanded.epsilon);
    }
    const AICCertificate cert = verify_aic(inst.utility, inst.objective, demanded, inst.params.d);
    ctx.write_json("instance.json", instance_json(inst));
    ctx.write_json("certificate.json", json{{"demanded", demanded},
                                            {"verified", cert},
                                            {"construction", inst.certificate},
                                            {"seed", inst.seed}});
    ctx.log() << "low_rank=" << cert.low_rank << " orthogonal=" << cert.orthogonal
              << " coupled=" << cert.coupled << '\n';
    const bool expected = cfg.value("expect_all_met", true);
    return cert.all_met() == expected;
}

// ---------------------------------------------------------------------------
// flow

inline LoadedInstance resolve_instance(RunContext& ctx, const json& ref) {
    if (ref.is_string()) {
        const fs::path p = ctx.resolve(ref.get<std::string>());
        json j;
        try {
            j = json::parse(read_file(p));
        } catch (const json::parse_error& e) {
            throw ConfigError(p.string() + ": " + e.what());
        }
        return instance_from_json(j);
    }
    const AICInstance inst = build_instance_from_spec(ref);
    return {inst.params, inst.seed, inst.utility, inst.objective};
}

inline Regime parse_regime(const std::string& s, const FineTuneObjective& obj, const FisherHalf& f,
                           const Projector& p, double cap) {
    if (s == "second_order") return Regime::second_order;
    if (s == "first_order") return Regime::first_order;
    if (s == "auto") return detect_regime(obj, f, p, cap);
    throw ConfigError("unknown regime '" + s + "'");
}

inline bool run_flow(RunContext& ctx) {
    const json& cfg = ctx.config();
    const LoadedInstance li = resolve_instance(ctx, cfg.at("instance"));
    const std::size_t d = li.params.d;

    const json ic = cfg.value("integrator", json::object());
    IntegratorConfig icfg = IntegratorConfig::defaults(ic.value("horizon", 0.5));
    icfg.step = ic.value("step", icfg.step);
    icfg.record_every = ic.value("record_every", std::size_t{1});
    icfg.ball_radius = li.objective.ball_radius;
    const std::string method = ic.value("method", "rk4_fixed");
    if (method == "euler") icfg.method = Method::euler;
    else if (method != "rk4_fixed") throw ConfigError("unknown method '" + method + "'");

    const FisherHalf half(eigendecompose(li.utility.fisher));
    const Projector p = top_projector(half.spectrum(), d);

    const json wc = cfg.value("window", json::object());
    const double cap = wc.value("t_cap", 1e-1);
    WindowRule rule = WindowRule::for_regime(parse_regime(wc.value("regime", "auto"), li.objective, half, p, cap));
    rule.t_cap = cap;
    rule.t_min = wc.value("t_min", rule.t_min);
    rule.fraction = wc.value("fraction", rule.fraction);

    const Trajectory traj = integrate(li.objective, icfg);
    const Series drift = drift_curve(traj, half, p);
    const Series loss = loss_curve(traj, li.utility);

    std::vector<std::vector<json>> rows;
    const bool states = cfg.value("write_states", false);
    std::vector<std::string> header{"t", "drift", "loss"};
    if (states)
        for (std::size_t k = 0; k < li.objective.n(); ++k) header.push_back("theta_" + std::to_string(k));
    for (std::size_t i = 0; i < traj.size(); ++i) {
        std::vector<json> r{traj.times[i], drift[i].value, loss[i].value};
        if (states)
            for (double x : traj.states[i]) r.push_back(x);
        rows.push_back(std::move(r));
    }
    ctx.write_table("trajectory", header, rows);

    const FitWindow w = data_driven_window(traj, li.objective, half, p, rule);
    const double lin = fisher_half_norm(half, p, li.objective.g0);
    const double coupling = fisher_half_norm(half, p, li.objective.hessian.apply(li.objective.g0));
    const double expected_coeff =
        rule.regime == Regime::first_order ? 0.5 * lin * lin : coupling * coupling / 8.0;
    const double expected_exp = rule.regime == Regime::first_order ? 2.0 : 4.0;

    json fits;
    fits["seed"] = li.seed;
    fits["params"] = li.params;
    fits["regime"] = rule.regime == Regime::first_order ? "first_order" : "second_order";
    fits["window"] = {w.t_min, w.t_max};
    fits["measured_coupling"] = coupling;
    fits["measured_first_order"] = lin;
    fits["expected_loss_exponent"] = expected_exp;
    fits["expected_loss_coefficient"] = expected_coeff;
    fits["exited_ball"] = traj.exited_ball;
    fits["exit_time"] = number(traj.exit_time);
    ctx.extra()["exited_ball"] = traj.exited_ball;

    bool passed = true;
    std::optional<ScalingFit> loss_fit;
    try {
        loss_fit = fit_power_law(loss, w.t_min, w.t_max);
        fits["loss_fit"] = *loss_fit;
        fits["drift_fit"] = fit_power_law(drift, w.t_min, w.t_max);
    } catch (const InsufficientData& e) {
        fits["fit_error"] = e.what();
        passed = false;
    }

    const DriftBoundResult bound = check_drift_bound(traj, half, p, li.params);
    fits["drift_bound"] = {{"holds", bound.holds},
                           {"fitted_c", bound.fitted_c},
                           {"fitted_c_euclidean", bound.fitted_c_euclidean},
                           {"eps_prime", bound.eps_prime}};
    const std::size_t lb = utility_lower_bound_violations(traj, li.utility, half, p);
    fits["utility_lower_bound_violations"] = lb;
    if (li.utility.cubic_coeff == 0.0) passed = passed && lb == 0;
    if (rule.regime == Regime::second_order) passed = passed && bound.holds;

    if (cfg.contains("rotation")) {
        const json& rc = cfg.at("rotation");
        const auto plane = rc.at("plane").get<std::vector<std::size_t>>();
        if (plane.size() != 2) throw ConfigError("rotation plane needs two indices");
        const RotatingFisherField field(half.spectrum(), li.utility.theta_star, rc.at("rate").get<double>(),
                                        {plane[0], plane[1]});
        const RotatingDriftResult rot = rotating_drift_check(traj, field, li.params, bound.fitted_c);
        json rj{{"rho", rot.rho},
                {"holds", rot.holds},
                {"lipschitz", field.lipschitz()},
                {"lipschitz_violations", rot.lipschitz_violations},
                {"davis_kahan_violations", rot.davis_kahan_violations},
                {"states_checked", rot.states_checked},
                {"states_skipped", rot.states_skipped}};
        try {
            rj["loss_fit"] = fit_power_law(rot.loss, w.t_min, w.t_max);
        } catch (const InsufficientData& e) {
            rj["fit_error"] = e.what();
        }
        fits["rotation"] = rj;
        passed = passed && rot.lipschitz_violations == 0;
    }

    if (cfg.contains("expect") && loss_fit) {
        const json& ex = cfg.at("expect");
        const double tol = ex.value("exponent_tolerance", 0.05);
        const double rel = ex.value("coefficient_tolerance", 0.05);
        const bool exp_ok = std::abs(loss_fit->exponent - ex.value("loss_exponent", expected_exp)) <= tol;
        const bool coeff_ok = std::abs(loss_fit->coefficient() / expected_coeff - 1.0) <= rel;
        fits["expectation_met"] = exp_ok && coeff_ok;
        passed = passed && exp_ok && coeff_ok;
    }
    fits["passed"] = passed;
    ctx.write_json("fits.json", fits);
    if (loss_fit)
        ctx.log() << "loss exponent " << loss_fit->exponent << ", coefficient " << loss_fit->coefficient()
                  << " (expected " << expected_coeff << ")\n";
    return passed;
}

// ---------------------------------------------------------------------------
// nullmodel

inline Vector spectrum_from_config(const json& cfg, std::size_t n) {
    const json& s = cfg.at("spectrum");
    if (s.contains("diagonal")) {
        Vector d = s.at("diagonal").get<Vector>();
        if (d.size() != n) throw ConfigError("spectrum.diagonal must have n entries");
        return d;
    }
    Vector d(n, s.value("bulk", 0.0));
    const auto spikes = s.value("spikes", Vector{});
    if (spikes.size() > n) throw ConfigError("more spikes than dimensions");
    std::copy(spikes.begin(), spikes.end(), d.begin());
    return d;
}

inline bool run_nullmodel(RunContext& ctx) {
    const json& cfg = ctx.config();
    const unsigned threads = ctx.options().threads;
    json summary;
    bool passed = true;

    if (cfg.contains("loss")) {
        const json& lc = cfg.at("loss");
        const std::size_t n = lc.at("n").get<std::size_t>();
        const SymMatrix f = SymMatrix::diagonal(spectrum_from_config(lc, n));
        SphereSampler s{n, lc.at("seed").get<std::uint64_t>(), 0};
        const MCEstimate e = expected_loss_mc(f, lc.at("eta").get<double>(), lc.at("trials").get<std::size_t>(), s, threads);
        json j = e;
        j["seed"] = s.seed;
        j["z"] = e.z_score();
        j["pass"] = e.within(3.0);
        summary["loss"] = j;
        passed = passed && e.within(3.0);
    }

    if (cfg.contains("mass")) {
        const json& mc = cfg.at("mass");
        const std::size_t n = mc.at("n").get<std::size_t>();
        const std::size_t d = mc.at("d").get<std::size_t>();
        if (d > n) throw ConfigError("mass.d must be <= n");
        const std::uint64_t seed = mc.at("seed").get<std::uint64_t>();
        Matrix basis(n, d);
        for (std::size_t j = 0; j < d; ++j) basis(j, j) = 1.0;
        const Projector p = Projector::from_basis(basis);
        SphereSampler s{n, seed, 0};
        const std::size_t trials = mc.at("trials").get<std::size_t>();
        const ProjectionMass pm = projection_mass(p, trials, s, threads);
        const double eps = mc.value("eps", 0.5);
        json j{{"n", n}, {"d", d}, {"trials", trials}, {"seed", seed}, {"mean", pm.mean()},
               {"expected", pm.expected()}, {"eps", eps}, {"tail_freq", pm.tail_freq(eps)}};
        bool ok = true;
        if (d == 0 || d == n) {
            const double exact = d == n ? 1.0 : 0.0;
            const bool all_exact = std::all_of(pm.samples.begin(), pm.samples.end(), [&](double v) { return v == exact; });
            j["exact_mass"] = all_exact;
            ok = all_exact;
        } else {
            const double a = 0.5 * static_cast<double>(d), b = 0.5 * static_cast<double>(n - d);
            const auto cdf = [&](double x) { return beta_cdf(x, a, b); };
            const double ks = ks_statistic(pm.samples, cdf);
            const double c = pm.expected();
            const double beta_tail = cdf(c * (1.0 - eps)) + (1.0 - cdf(c * (1.0 + eps)));
            const double slack = 3.0 * std::sqrt(beta_tail * (1.0 - beta_tail) / static_cast<double>(trials));
            j["ks"] = ks;
            j["ks_critical"] = ks_critical_1pct(trials);
            j["beta_tail"] = beta_tail;
            j["tail_slack"] = slack;
            ok = ks <= ks_critical_1pct(trials) && pm.tail_freq(eps) <= beta_tail + slack;
        }
        j["pass"] = ok;
        summary["mass"] = j;
        passed = passed && ok;
        if (mc.value("raw_samples", false)) {
            std::vector<std::vector<json>> rows;
            for (std::size_t i = 0; i < pm.samples.size(); ++i) rows.push_back({i, pm.samples[i]});
            ctx.write_table("mass_samples", {"trial", "mass"}, rows);
        }
    }
    summary["passed"] = passed;
    ctx.write_json("summary.json", summary);
    return passed;
}

// ---------------------------------------------------------------------------
// policy

inline SkillDistribution skill_from_config(const json& s) {
    if (s.contains("conditionals")) return skill_from_json(s);
    return random_skill(s.at("contexts").get<std::size_t>(), s.at("outcomes").get<std::size_t>(),
                        s.at("seed").get<std::uint64_t>());
}

inline Vector seeded_direction(std::size_t n, std::uint64_t seed, std::uint64_t stream, double scale) {
    CounterRng rng(seed, stream);
    Vector v(n);
    for (double& x : v) x = rng.normal();
    return scaled(normalized(v), scale);
}

inline bool run_policy(RunContext& ctx) {
    const json& cfg = ctx.config();
    const SkillDistribution skill = skill_from_config(cfg.at("skill"));
    const TabularPolicy star = fit_optimal(skill);
    const std::size_t n = skill.contexts() * skill.outcomes();
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
    json report;
    report["skill"] = skill;
    report["optimal_policy"] = star;

    // KL identity
    const std::size_t perturbations = cfg.value("perturbations", std::size_t{100});
    const double scale = cfg.value("perturbation_scale", 0.5);
    double kl_gap = 0.0;
    const double u_star = utility(star, skill);
    for (std::size_t k = 0; k < perturbations; ++k) {
        const TabularPolicy theta = shifted(star, seeded_direction(n, seed, streams::perturbation + 16 * (k + 1), scale));
        kl_gap = std::max(kl_gap, std::abs(kl_degradation(star, theta, skill) - (u_star - utility(theta, skill))));
    }
    const bool kl_ok = kl_gap <= 1e-12;
    report["kl_identity"] = {{"max_gap", kl_gap}, {"perturbations", perturbations}, {"pass", kl_ok}};

    // Fisher
    const SymMatrix f = exact_fisher(star, skill);
    const SymSpectrum fs_ = eigendecompose(f);
    std::size_t zeros = 0;
    for (double l : fs_.eigenvalues)
        if (std::abs(l) <= 1e-12) ++zeros;
    const bool psd_ok = fs_.eigenvalues.back() >= -1e-12 && zeros == skill.contexts();
    report["fisher"] = {{"min_eigenvalue", fs_.eigenvalues.back()}, {"zero_modes", zeros}, {"pass", psd_ok}};

    const double h = cfg.value("hessian_step", kHessianStep);
    const double hess_dev = fisher_vs_kl_hessian(star, skill, h);
    const bool hess_ok = hess_dev <= 1e-5;
    report["hessian"] = {{"max_deviation", hess_dev}, {"step", h}, {"pass", hess_ok}};

    // Cubic remainder
    const json rc = cfg.value("remainder", json::object());
    const std::size_t ndir = rc.value("directions", std::size_t{3});
    std::vector<Vector> dirs;
    for (std::size_t k = 0; k < ndir; ++k) dirs.push_back(seeded_direction(n, seed, streams::cubic + 16 * (k + 1), 1.0));
    const auto scales = log_scales(rc.value("s_min", 1e-4), rc.value("s_max", 1e-2), rc.value("count", std::size_t{12}));
    const QuadraticFormReport qf = quadratic_form_check(star, skill, dirs, scales);
    json rem = json::array();
    bool rem_ok = true;
    for (const auto& r : qf.directions) {
        if (r.null_direction) {
            rem.push_back({{"null_direction", true}});
            continue;
        }
        const bool ok = r.fit.exponent >= 2.9 && r.fit.exponent <= 3.1;
        rem_ok = rem_ok && ok;
        rem.push_back({{"exponent", r.fit.exponent}, {"K", r.cubic_constant}, {"r2", r.fit.r_squared}, {"pass", ok}});
    }
    report["remainder"] = rem;

    // Gauge
    Matrix shifted_logits = star.logits();
    for (std::size_t x = 0; x < shifted_logits.rows(); ++x)
        for (double& v : shifted_logits.row(x)) v += static_cast<double>(x + 1);
    const TabularPolicy gauge(shifted_logits);
    const double gauge_dev = std::max(std::abs(utility(gauge, skill) - u_star), std::abs(kl_degradation(star, gauge, skill)));
    const bool gauge_ok = gauge_dev <= 1e-14;
    report["gauge"] = {{"max_deviation", gauge_dev}, {"pass", gauge_ok}};

    // Relaxed lower bound
    const json lc = cfg.value("relaxed", json::object());
    const double radius = lc.value("radius", 0.1);
    const std::size_t trials = lc.value("trials", std::size_t{200});
    const TabularPolicy near = shifted(star, seeded_direction(n, seed, streams::perturbation + 8, lc.value("offset", 1e-2)));
    const RelaxedBound at_star = relaxed_lb_check(star, skill, trials, radius, seed);
    const RelaxedBound at_near = relaxed_lb_check(near, skill, trials, radius, seed);
    const bool relaxed_ok = at_star.violations == 0 && at_near.violations == 0 && std::isfinite(at_near.fitted_c);
    report["relaxed"] = {{"radius", radius},
                         {"at_optimum", {{"fitted_c", at_star.fitted_c}, {"violations", at_star.violations}}},
                         {"near", {{"fitted_c", at_near.fitted_c}, {"violations", at_near.violations},
                                   {"gradient_norm", at_near.utility_gradient_norm}}},
                         {"pass", relaxed_ok}};

    const bool passed = kl_ok && psd_ok && hess_ok && rem_ok && gauge_ok && relaxed_ok;
    report["passed"] = passed;
    ctx.write_json("report.json", report);
    return passed;
}

// ---------------------------------------------------------------------------
// sketch

inline GradientSampleSet gradients_from_config(RunContext& ctx, const json& src) {
    const std::string kind = src.at("kind").get<std::string>();
    if (kind == "synthetic")
        return synth_lowrank_gradients(src.at("d").get<std::size_t>(), src.at("r").get<std::size_t>(),
                                       src.at("N").get<std::size_t>(), src.at("seed").get<std::uint64_t>(),
                                       src.value("d_in", std::size_t{0}));
    if (kind == "spiked")
        return synth_spiked_gradients(src.at("d_out").get<std::size_t>(), src.at("d_in").get<std::size_t>(),
                                      src.at("N").get<std::size_t>(), src.at("noise").get<double>(),
                                      src.at("seed").get<std::uint64_t>());
    if (kind == "policy") {
        const SkillDistribution skill = skill_from_config(src.at("skill"));
        const TabularPolicy star = fit_optimal(skill);
        GradientSampleSet set(skill.contexts(), skill.outcomes(), Layout::dense, "policy");
        for (auto& g : score_gradients(star, skill, src.at("N").get<std::size_t>(), src.at("seed").get<std::uint64_t>()))
            set.add_dense(std::move(g));
        if (src.contains("r")) set.subspace_rank = src.at("r").get<std::size_t>();
        return set;
    }
    if (kind == "file") {
        std::istringstream in(read_file(ctx.resolve(src.at("path").get<std::string>())));
        GradientSampleSet set = read_gradients(in);
        if (src.contains("r")) set.subspace_rank = src.at("r").get<std::size_t>();
        return set;
    }
    throw ConfigError("unknown gradient source '" + kind + "'");
}

inline Matrix update_from_config(RunContext& ctx, const json& u, const RademacherProjection& proj,
                                 const ProjectedFIM& f, std::size_t d_out, std::size_t d_in) {
    const std::string kind = u.at("kind").get<std::string>();
    Matrix m(d_out, d_in);
    if (kind == "zero") return m;
    if (kind == "random") {
        m = gaussian_matrix(d_out, d_in, u.at("seed").get<std::uint64_t>());
    } else if (kind == "top" || kind == "bottom") {
        const SymSpectrum s = eigendecompose(f.fim);
        const std::size_t j = kind == "top" ? u.value("index", std::size_t{0}) : s.n() - 1 - u.value("index", std::size_t{0});
        m.data() = project_preimage(s.vector(j), proj);
    } else if (kind == "file") {
        std::istringstream in(read_file(ctx.resolve(u.at("path").get<std::string>())));
        m = io::read_binary(in);
        if (m.rows() != d_out || m.cols() != d_in) throw DimensionMismatch("update shape", d_out * d_in, m.rows() * m.cols());
        return m;
    } else {
        throw ConfigError("unknown update kind '" + kind + "'");
    }
    if (u.contains("norm")) m = scaled(m, u.at("norm").get<double>() / frobenius_norm(m));
    return m;
}

inline bool run_sketch(RunContext& ctx) {
    const json& cfg = ctx.config();
    const unsigned threads = ctx.options().threads;
    const GradientSampleSet samples = gradients_from_config(ctx, cfg.at("source"));
    const json pc = cfg.at("projection");
    const RademacherProjection proj(pc.at("seed").get<std::uint64_t>(), pc.value("k", kDefaultSketchDim),
                                    samples.dimension());
    const ProjectedFIM f = projected_fim(samples, proj, threads);

    const EigenDecay decay = eigen_decay_report(f, std::min<std::size_t>(cfg.value("top", f.k()), f.k()));
    std::vector<std::vector<json>> rows;
    for (std::size_t j = 0; j < decay.eigenvalues.size(); ++j)
        rows.push_back({j + 1, decay.eigenvalues[j], decay.cumulative_mass[j]});
    ctx.write_table("spectrum", {"index", "eigenvalue", "cumulative_mass"}, rows);

    if (cfg.value("write_gradients", false)) {
        std::ostringstream os;
        write_gradients(os, samples);
        ctx.write_binary("gradients.bin", os.str());
    }

    bool passed = true;
    json summary{{"vec", kVecConvention}, {"k", proj.k()}, {"projection_seed", proj.seed()},
                 {"samples", samples.size()}, {"trace", decay.trace}};
    if (cfg.contains("rank")) {
        const json& rc = cfg.at("rank");
        std::optional<std::size_t> r;
        if (rc.contains("r")) r = rc.at("r").get<std::size_t>();
        const RankCheck c = rank_bound_check(samples, rc.value("projected", false) ? &proj : nullptr, r);
        summary["rank"] = {{"numerical_rank", c.numerical_rank}, {"bound", c.bound}, {"holds", c.holds}};
        passed = passed && c.holds;
    }
    ctx.write_json("sketch.json", summary);

    if (cfg.contains("overlap")) {
        const json& oc = cfg.at("overlap");
        const RademacherProjection os_proj(oc.value("projection_seed", proj.seed()), proj.k(), proj.source_dim());
        OverlapReport report;
        for (const auto& u : oc.at("updates")) {
            const Matrix dw = update_from_config(ctx, u, proj, f, samples.d_out(), samples.d_in());
            report.entries.push_back(overlap_entry(dw, os_proj, f, u.value("block", u.at("kind").get<std::string>())));
        }
        ctx.write_json("overlap.json", json{{"vec", kVecConvention}, {"entries", report.entries}});
    }
    return passed;
}

// ---------------------------------------------------------------------------
// report

inline bool run_report(RunContext& ctx) {
    const json& cfg = ctx.config();
    struct Row {
        std::string run;
        double gamma;
        json fits;
        bool checksum_ok;
    };
    std::vector<Row> table;
    for (const auto& r : cfg.at("runs")) {
        const fs::path dir = ctx.resolve(r.get<std::string>());
        const json manifest = json::parse(read_file(dir / "manifest.json"));
        bool ok = true;
        for (const auto& o : manifest.at("outputs")) {
            const std::string name = o.at("file").get<std::string>();
            const std::string actual = io::fnv1a_hex(read_file(dir / name));
            if (actual != o.at("fnv1a").get<std::string>()) {
                ctx.log() << "warning: checksum mismatch for " << (dir / name).string() << '\n';
                ok = false;
            }
        }
        const json fits = json::parse(read_file(dir / "fits.json"));
        table.push_back({r.get<std::string>(), fits.at("params").at("gamma").get<double>(), fits, ok});
    }
    std::stable_sort(table.begin(), table.end(), [](const Row& a, const Row& b) { return a.gamma < b.gamma; });
    std::vector<std::vector<json>> rows;
    auto field = [](const json& fits, const char* fit, const char* key) -> json {
        if (!fits.contains(fit)) return "nan";
        return fits.at(fit).at(key);
    };
    for (const auto& r : table)
        rows.push_back({r.run, r.gamma, r.fits.at("regime"), field(r.fits, "loss_fit", "exponent"),
                        field(r.fits, "loss_fit", "coefficient"), r.fits.at("expected_loss_coefficient"),
                        field(r.fits, "drift_fit", "exponent"), r.checksum_ok});
    ctx.write_table("fit_table",
                    {"run", "gamma", "regime", "loss_exponent", "loss_coefficient", "expected_coefficient",
                     "drift_exponent", "checksum_ok"},
                    rows);
    return true;
}

// ---------------------------------------------------------------------------

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const json::exception*>(&e) ||
        dynamic_cast<const InfeasibleParams*>(&e) || dynamic_cast<const SupportError*>(&e) ||
        dynamic_cast<const FormatError*>(&e) || dynamic_cast<const AsymmetryError*>(&e))
        return kConfigError;
    if (dynamic_cast<const MissingInput*>(&e)) return kMissingInput;
    if (dynamic_cast<const SeedMismatch*>(&e) || dynamic_cast<const DimensionMismatch*>(&e)) return kIncompatible;
    return kCheckFailed;
}

using Runner = bool (*)(RunContext&);

/// Runs one subcommand with already-parsed options.
inline int run_subcommand(const std::string& name, const GlobalOptions& opts, std::ostream& log) {
    static const std::vector<std::pair<std::string, Runner>> table{
        {"aic-verify", run_aic_verify}, {"flow", run_flow},     {"nullmodel", run_nullmodel},
        {"policy", run_policy},         {"sketch", run_sketch}, {"report", run_report}};
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == name; });
    if (it == table.end()) {
        log << "error: unknown subcommand " << name << '\n';
        return kConfigError;
    }
    try {
        const auto start = std::chrono::steady_clock::now();
        RunContext ctx(opts, load_config(opts), name, log);
        ctx.write_json("config.json", ctx.config());
        const bool passed = it->second(ctx);
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        ctx.finish(passed, elapsed.count());
        log << name << ": " << (passed ? "pass" : "check failed") << '\n';
        return passed ? kPass : kCheckFailed;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& log = std::cerr) {
    CLI::App app{"aiclab: alignment-curvature experiment runner"};
    app.require_subcommand(1);
    GlobalOptions opts;
    std::string format = "csv";
    std::uint64_t seed = 0;
    for (const char* name : {"aic-verify", "flow", "nullmodel", "policy", "sketch", "report"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opts.config, "JSON config path")->required();
        sub->add_option("--out", opts.out, "output directory");
        sub->add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--threads", opts.threads, "worker threads")->check(CLI::Range(1u, 1024u));
        sub->add_option("--seed-override", seed, "replace every seed in the config");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        log << app.help();
        return kPass;
    } catch (const CLI::ParseError& e) {
        log << "error: " << e.what() << '\n';
        return kConfigError;
    }
    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed-override")) opts.seed_override = seed;
    opts.format = format == "json" ? Format::json : Format::csv;
    return run_subcommand(sub->get_name(), opts, log);
}

}  // namespace aiclab::cli

#endif  // AICLAB_CLI_RUNNER_HPP
