#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sinkflow/analysis.hpp"
#include "sinkflow/errors.hpp"
#include "sinkflow/flow.hpp"
#include "sinkflow/gaussian_eot.hpp"
#include "sinkflow/oracle.hpp"

namespace sinkflow {

struct ScenarioConfig {
    std::string id;
    std::string family;  // builtin group; empty for user configs
    Gaussian source;
    Gaussian target;
    double eps;
    double tau;    // <= 0 selects the default step rule
    double t_end;
    Integrator integrator;
    long record_every;
    std::vector<std::string> outputs;  // subset of {trajectory, rates, limit_report, oracle_check}
    std::string provenance;
};

struct OracleCheck {
    double closed_form = 0.0;
    double discrete = 0.0;
    double relative_error = 0.0;
    int nodes = 0;
};

struct RunRow {
    double t, s_eps, s_eps_norm, dissipation, w2;
    Eigen::VectorXd lambdas;  // populated only when source and target commute
};

struct RunSummary {
    std::optional<LimitReport> limit;
    std::optional<RateConstants> rates;
    Eigen::VectorXd lam0, lam_star;  // shared axes, commuting case only
    double fitted_loglog_slope = std::numeric_limits<double>::quiet_NaN();
    long bound_violations = -1;  // -1: not applicable
    std::optional<OracleCheck> oracle;
};

struct RunRecord {
    std::string scenario_id;
    bool commuting = false;
    std::vector<RunRow> rows;
    RunSummary summary;
};

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Config parsing (strict: unknown keys are errors)
// ---------------------------------------------------------------------------

namespace detail {

inline void require_known_keys(const nlohmann::json& j, const std::vector<std::string>& known,
                               const std::string& path) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError(path + ": unknown key '" + it.key() + "'");
    }
}

inline Eigen::VectorXd parse_vector(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array() || j.empty())
        throw ConfigError(path + ": expected a non-empty array of numbers");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(path + ": expected numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

inline Eigen::MatrixXd parse_matrix(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array() || j.empty())
        throw ConfigError(path + ": expected an array of rows");
    const std::size_t rows = j.size();
    Eigen::MatrixXd m;
    for (std::size_t r = 0; r < rows; ++r) {
        const Eigen::VectorXd row = parse_vector(j[r], path + "[" + std::to_string(r) + "]");
        if (r == 0) m.resize(rows, row.size());
        if (row.size() != m.cols())
            throw ConfigError(path + ": ragged rows");
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

}  // namespace detail

inline Gaussian parse_gaussian(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    detail::require_known_keys(j, {"mean", "cov", "eigenvalues", "basis", "angle"}, path);
    if (!j.contains("mean")) throw ConfigError(path + ".mean: missing");
    const Eigen::VectorXd mean = detail::parse_vector(j["mean"], path + ".mean");
    const Eigen::Index d = mean.size();

    if (j.contains("cov") == j.contains("eigenvalues"))
        throw ConfigError(path + ": give exactly one of 'cov' or 'eigenvalues'");

    if (j.contains("cov")) {
        if (j.contains("basis") || j.contains("angle"))
            throw ConfigError(path + ": 'basis'/'angle' only combine with 'eigenvalues'");
        const Eigen::MatrixXd cov = detail::parse_matrix(j["cov"], path + ".cov");
        if (cov.rows() != d || cov.cols() != d)
            throw ConfigError(path + ".cov: must be " + std::to_string(d) + "x" +
                              std::to_string(d));
        const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
        if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw ConfigError(path + ".cov: not symmetric within 1e-12");
        return Gaussian(mean, SymmetricMatrix(cov));
    }

    const Eigen::VectorXd lam = detail::parse_vector(j["eigenvalues"], path + ".eigenvalues");
    if (lam.size() != d)
        throw ConfigError(path + ".eigenvalues: length must match mean");
    if ((lam.array() < 0.0).any())
        throw ConfigError(path + ".eigenvalues: must be nonnegative");
    Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(d, d);
    if (j.contains("basis") && j.contains("angle"))
        throw ConfigError(path + ": give at most one of 'basis' or 'angle'");
    if (j.contains("basis")) {
        basis = detail::parse_matrix(j["basis"], path + ".basis");
        if (basis.rows() != d || basis.cols() != d)
            throw ConfigError(path + ".basis: must be " + std::to_string(d) + "x" +
                              std::to_string(d));
        if ((basis.transpose() * basis - Eigen::MatrixXd::Identity(d, d)).norm() > 1e-8 * d)
            throw ConfigError(path + ".basis: not orthonormal");
    } else if (j.contains("angle")) {
        if (d != 2) throw ConfigError(path + ".angle: only valid in dimension 2");
        if (!j["angle"].is_number()) throw ConfigError(path + ".angle: expected a number");
        const double th = j["angle"].get<double>();
        basis << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    }
    return Gaussian(mean, SymmetricMatrix(basis * lam.asDiagonal() * basis.transpose()));
}

inline Integrator parse_integrator(const std::string& name, const std::string& path) {
    if (name == "euler_congruence") return Integrator::EulerCongruence;
    if (name == "factor_lift") return Integrator::FactorLift;
    if (name == "eigen_axis") return Integrator::EigenAxis;
    throw ConfigError(path + ": unknown integrator '" + name +
                      "' (euler_congruence | factor_lift | eigen_axis)");
}

inline const std::vector<std::string>& known_outputs() {
    static const std::vector<std::string> v{"trajectory", "rates", "limit_report",
                                            "oracle_check"};
    return v;
}

inline ScenarioConfig parse_scenario(const nlohmann::json& j, const std::string& fallback_id) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    detail::require_known_keys(j,
                               {"id", "source", "target", "eps", "tau", "t_end", "integrator",
                                "record_every", "outputs"},
                               "config");
    for (const char* key : {"source", "target", "eps", "t_end"})
        if (!j.contains(key)) throw ConfigError(std::string("config.") + key + ": missing");

    std::string id = j.value("id", fallback_id);
    Gaussian source = parse_gaussian(j["source"], "config.source");
    Gaussian target = parse_gaussian(j["target"], "config.target");
    if (source.dim() != target.dim())
        throw ConfigError("config.target: dimension differs from source");

    if (!j["eps"].is_number() || !(j["eps"].get<double>() > 0.0))
        throw ConfigError("config.eps: expected a positive number");
    const double eps = j["eps"].get<double>();

    double tau = 0.0;
    if (j.contains("tau")) {
        if (!j["tau"].is_number() || !(j["tau"].get<double>() > 0.0))
            throw ConfigError("config.tau: expected a positive number");
        tau = j["tau"].get<double>();
    }
    if (!j["t_end"].is_number() || !(j["t_end"].get<double>() > 0.0))
        throw ConfigError("config.t_end: expected a positive number");
    const double t_end = j["t_end"].get<double>();
    if (tau > t_end) throw ConfigError("config.tau: must not exceed t_end");

    Integrator integ = Integrator::EulerCongruence;
    if (j.contains("integrator")) {
        if (!j["integrator"].is_string())
            throw ConfigError("config.integrator: expected a string");
        integ = parse_integrator(j["integrator"].get<std::string>(), "config.integrator");
    }

    long record_every = 1;
    if (j.contains("record_every")) {
        if (!j["record_every"].is_number_integer() || j["record_every"].get<long>() < 1)
            throw ConfigError("config.record_every: expected an integer >= 1");
        record_every = j["record_every"].get<long>();
    }

    std::vector<std::string> outputs{"trajectory", "rates", "limit_report"};
    if (j.contains("outputs")) {
        if (!j["outputs"].is_array())
            throw ConfigError("config.outputs: expected an array of strings");
        outputs.clear();
        for (const auto& o : j["outputs"]) {
            if (!o.is_string()) throw ConfigError("config.outputs: expected strings");
            const std::string name = o.get<std::string>();
            if (std::find(known_outputs().begin(), known_outputs().end(), name) ==
                known_outputs().end())
                throw ConfigError("config.outputs: unknown output '" + name + "'");
            outputs.push_back(name);
        }
    }

    return ScenarioConfig{std::move(id), "", std::move(source), std::move(target),
                          eps,           tau, t_end,            integ,
                          record_every,  std::move(outputs),    ""};
}

inline ScenarioConfig read_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
    }
    std::string stem = path;
    if (const auto slash = stem.find_last_of("/\\"); slash != std::string::npos)
        stem = stem.substr(slash + 1);
    if (const auto dot = stem.find_last_of('.'); dot != std::string::npos)
        stem = stem.substr(0, dot);
    return parse_scenario(j, stem);
}

// ---------------------------------------------------------------------------
// Builtin scenarios
// ---------------------------------------------------------------------------

namespace detail {

inline ScenarioConfig make_builtin(std::string family, std::string id, Gaussian source,
                                   Gaussian target, double eps, double t_end) {
    // Step size small enough for the per-step monotonicity guarantee.
    const double lam_max = std::max(sym_eig(target.cov).eigenvalues[0], 0.0);
    const double tau = std::min(0.01, (eps / 4.0) / (4.0 * lam_max + 4.0));
    const long n_steps = static_cast<long>(std::floor(t_end / tau + 1e-9));
    const long record_every = std::max<long>(1, n_steps / 1000);
    return ScenarioConfig{std::move(id),
                          std::move(family),
                          std::move(source),
                          std::move(target),
                          eps,
                          tau,
                          t_end,
                          Integrator::EulerCongruence,
                          record_every,
                          {"trajectory", "rates", "limit_report"},
                          "reconstructed: representative covariances for this regime; "
                          "no canonical numeric values exist"};
}

inline Gaussian gaussian2(double m1, double m2, double c11, double c12, double c22) {
    Eigen::VectorXd m(2);
    m << m1, m2;
    Eigen::MatrixXd c(2, 2);
    c << c11, c12, c12, c22;
    return Gaussian(m, SymmetricMatrix(c));
}

inline Gaussian rotated_rank1(double angle, double lam) {
    Eigen::MatrixXd rot(2, 2);
    rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    Eigen::VectorXd diag(2);
    diag << lam, 0.0;
    return Gaussian(Eigen::VectorXd::Zero(2),
                    SymmetricMatrix(rot * diag.asDiagonal() * rot.transpose()));
}

}  // namespace detail

inline const std::vector<std::string>& builtin_families() {
    static const std::vector<std::string> v{
        "fig1_nonsingular", "fig1_singular_target", "fig2_orthogonal", "fig2_rotated",
        "fig3_commuting",   "fig3_noncommuting",    "fig4_eps_sweep"};
    return v;
}

inline std::vector<ScenarioConfig> builtin_scenarios() {
    using detail::gaussian2;
    using detail::make_builtin;

    const Gaussian fig1_source = gaussian2(-1.5, 1.0, 1.0, 0.4, 0.5);
    const Gaussian fig1_target = gaussian2(1.0, -0.5, 0.6, -0.2, 0.9);
    const Gaussian fig1_target_rank1 = gaussian2(1.0, -0.5, 0.8, 0.4, 0.2);

    std::vector<ScenarioConfig> all;
    all.push_back(make_builtin("fig1_nonsingular", "fig1_nonsingular", fig1_source,
                               fig1_target, 1.0, 10.0));
    all.push_back(make_builtin("fig1_singular_target", "fig1_singular_target", fig1_source,
                               fig1_target_rank1, 1.0, 50.0));

    all.push_back(make_builtin("fig2_orthogonal", "fig2_orthogonal",
                               gaussian2(0.0, 0.0, 1.0, 0.0, 0.0),
                               gaussian2(0.0, 0.0, 0.0, 0.0, 1.0), 0.1, 50.0));
    all.push_back(make_builtin("fig2_rotated", "fig2_rotated", detail::rotated_rank1(0.1, 1.0),
                               gaussian2(0.0, 0.0, 0.0, 0.0, 1.0), 0.1, 200.0));

    const std::vector<std::pair<std::string, double>> lam_family{
        {"l050", 0.5}, {"l025", 0.25}, {"l010", 0.1}, {"l005", 0.05}, {"l000", 0.0}};
    const Gaussian fig3_source_comm = gaussian2(0.0, 0.0, 1.0, 0.0, 1.0);
    const Gaussian fig3_source_rot = gaussian2(0.0, 0.0, 1.0, 0.4, 0.5);
    for (const auto& [suffix, lam] : lam_family) {
        const Gaussian tgt = gaussian2(0.0, 0.0, 1.0, 0.0, lam);
        all.push_back(make_builtin("fig3_commuting", "fig3_commuting_" + suffix,
                                   fig3_source_comm, tgt, 1.0, 100.0));
        all.push_back(make_builtin("fig3_noncommuting", "fig3_noncommuting_" + suffix,
                                   fig3_source_rot, tgt, 1.0, 100.0));
    }

    const std::vector<std::pair<std::string, double>> eps_family{
        {"eps_010", 0.1}, {"eps_050", 0.5}, {"eps_100", 1.0}, {"eps_500", 5.0},
        {"eps_1000", 10.0}};
    for (const auto& [suffix, eps] : eps_family)
        all.push_back(make_builtin("fig4_eps_sweep", "fig4_" + suffix, fig1_source,
                                   fig1_target, eps, 30.0));
    return all;
}

// ---------------------------------------------------------------------------
// Running and emitting
// ---------------------------------------------------------------------------

namespace detail {

inline double fitted_loglog_slope(const std::vector<RunRow>& rows, double t_end) {
    // Least-squares slope of log s_eps against log t over the trailing window.
    const double t_min = t_end / 10.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long n = 0;
    for (const auto& r : rows) {
        if (r.t < t_min || r.t <= 0.0 || r.s_eps <= 1e-300) continue;
        const double x = std::log(r.t), y = std::log(r.s_eps);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 3) return std::numeric_limits<double>::quiet_NaN();
    const double denom = n * sxx - sx * sx;
    if (denom <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (n * sxy - sx * sy) / denom;
}

}  // namespace detail

inline RunRecord run_scenario(const ScenarioConfig& cfg) {
    const Epsilon eps(cfg.eps);
    const double tau = cfg.tau > 0.0 ? cfg.tau : default_tau(eps, cfg.target.cov);
    const FlowConfig fc{eps, tau, cfg.t_end, cfg.integrator, cfg.record_every};

    const bool commuting = commute_check(cfg.source.cov, cfg.target.cov, 1e-10);
    std::optional<JointDecomp> jd;
    if (commuting) jd = joint_eig(cfg.source.cov, cfg.target.cov);

    const Trajectory traj = integrate(cfg.source, cfg.target, fc);

    const auto wants = [&](const char* name) {
        return std::find(cfg.outputs.begin(), cfg.outputs.end(), name) != cfg.outputs.end();
    };

    RunRecord rec;
    rec.scenario_id = cfg.id;
    rec.commuting = commuting;

    const double s0 = traj.divergence.front();
    std::vector<RunRow> rows;
    rows.reserve(traj.steps.size());
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        RunRow row;
        row.t = traj.steps[i].t;
        row.s_eps = traj.divergence[i];
        row.s_eps_norm = s0 > 0.0 ? traj.divergence[i] / s0 : 0.0;
        row.dissipation = traj.dissipation[i];
        row.w2 = traj.w2_to_target[i];
        if (commuting)
            row.lambdas = (jd->basis.transpose() * traj.steps[i].state.cov.mat() * jd->basis)
                              .diagonal();
        rows.push_back(std::move(row));
    }

    if (wants("rates")) {
        rec.summary.fitted_loglog_slope = detail::fitted_loglog_slope(rows, cfg.t_end);
        if (commuting) {
            rec.summary.lam0 = jd->a_eigenvalues.cwiseMax(0.0);
            rec.summary.lam_star = jd->b_eigenvalues.cwiseMax(0.0);
            rec.summary.rates = rate_constants(rec.summary.lam0, rec.summary.lam_star, eps);
            const bool centered = (cfg.source.mean - cfg.target.mean).norm() <=
                                  1e-14 * (1.0 + cfg.target.mean.norm());
            if (centered) {
                const double l_max = rec.summary.rates->l.maxCoeff();
                long violations = 0;
                for (const auto& row : rows) {
                    const double bound =
                        functional_bound(row.t, rec.summary.lam0, rec.summary.lam_star, eps);
                    if (row.s_eps > bound + 10.0 * tau * l_max) ++violations;
                }
                rec.summary.bound_violations = violations;
            }
        }
    }
    if (wants("limit_report"))
        rec.summary.limit = predict_limit(cfg.source, cfg.target, eps);
    if (wants("oracle_check")) {
        OracleCheck oc;
        oc.nodes = cfg.source.dim() == 1 ? 400 : 24;
        const DiscreteMeasure da = discretize_gaussian(cfg.source, oc.nodes, 8.0);
        const DiscreteMeasure db = discretize_gaussian(cfg.target, oc.nodes, 8.0);
        oc.closed_form = sinkhorn_divergence(cfg.source, cfg.target, eps);
        oc.discrete = sinkhorn_divergence_discrete(da, db, eps, 100000, 1e-9);
        oc.relative_error =
            std::abs(oc.closed_form - oc.discrete) / std::max(std::abs(oc.closed_form), 1e-12);
        rec.summary.oracle = oc;
    }
    if (wants("trajectory")) rec.rows = std::move(rows);
    return rec;
}

enum class EmitFormat { Csv, Json };

namespace detail {

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

inline nlohmann::json to_json(const Eigen::MatrixXd& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        arr.push_back(std::move(row));
    }
    return arr;
}

}  // namespace detail

inline void emit(const RunRecord& rec, EmitFormat format, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open output file: " + path);

    if (format == EmitFormat::Csv) {
        out << "t,s_eps,s_eps_norm,dissipation,w2";
        if (rec.commuting && !rec.rows.empty())
            for (Eigen::Index i = 0; i < rec.rows.front().lambdas.size(); ++i)
                out << ",lambda_" << (i + 1);
        out << "\n";
        for (const auto& r : rec.rows) {
            out << fmt17(r.t) << ',' << fmt17(r.s_eps) << ',' << fmt17(r.s_eps_norm) << ','
                << fmt17(r.dissipation) << ',' << fmt17(r.w2);
            if (rec.commuting)
                for (Eigen::Index i = 0; i < r.lambdas.size(); ++i)
                    out << ',' << fmt17(r.lambdas[i]);
            out << "\n";
        }
    } else {
        nlohmann::json j;
        j["scenario"] = rec.scenario_id;
        j["commuting"] = rec.commuting;
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : rec.rows) {
            nlohmann::json row{{"t", r.t},
                               {"s_eps", r.s_eps},
                               {"s_eps_norm", r.s_eps_norm},
                               {"dissipation", r.dissipation},
                               {"w2", r.w2}};
            if (rec.commuting) row["lambdas"] = detail::to_json(r.lambdas);
            rows.push_back(std::move(row));
        }
        j["rows"] = std::move(rows);

        nlohmann::json summary;
        if (rec.summary.limit) {
            nlohmann::json lim;
            lim["classification"] = to_string(rec.summary.limit->classification);
            lim["converges_to_target"] = rec.summary.limit->converges_to_target;
            lim["limit_cov"] = rec.summary.limit->limit_cov
                                   ? detail::to_json(rec.summary.limit->limit_cov->mat())
                                   : nlohmann::json();
            summary["limit"] = std::move(lim);
        }
        if (rec.summary.rates) {
            summary["rates"] = {{"c_a", detail::to_json(rec.summary.rates->c_a)},
                                {"c_b", detail::to_json(rec.summary.rates->c_b)},
                                {"l", detail::to_json(rec.summary.rates->l)},
                                {"lam0", detail::to_json(rec.summary.lam0)},
                                {"lam_star", detail::to_json(rec.summary.lam_star)}};
        }
        if (std::isfinite(rec.summary.fitted_loglog_slope))
            summary["fitted_loglog_slope"] = rec.summary.fitted_loglog_slope;
        if (rec.summary.bound_violations >= 0)
            summary["bound_violations"] = rec.summary.bound_violations;
        if (rec.summary.oracle) {
            summary["oracle"] = {{"closed_form", rec.summary.oracle->closed_form},
                                 {"discrete", rec.summary.oracle->discrete},
                                 {"relative_error", rec.summary.oracle->relative_error},
                                 {"nodes", rec.summary.oracle->nodes}};
        }
        j["summary"] = std::move(summary);
        out << j.dump(2) << "\n";
    }
    if (!out) throw IoError("failed while writing: " + path);
}

}  // namespace sinkflow
