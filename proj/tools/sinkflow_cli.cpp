#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <system_error>
#include <vector>

#include "CLI11.hpp"
#include "sinkflow/scenario.hpp"

namespace {

using namespace sinkflow;

EmitFormat parse_format(const std::string& name) {
    return name == "json" ? EmitFormat::Json : EmitFormat::Csv;
}

std::string extension(EmitFormat f) { return f == EmitFormat::Csv ? ".csv" : ".json"; }

void print_summary(const ScenarioConfig& cfg, const RunRecord& rec, const std::string& file) {
    std::printf("%s: %zu rows -> %s\n", cfg.id.c_str(), rec.rows.size(), file.c_str());
    if (rec.summary.limit) {
        std::printf("  limit: %s, converges_to_target=%s\n",
                    to_string(rec.summary.limit->classification),
                    rec.summary.limit->converges_to_target ? "true" : "false");
    }
    if (std::isfinite(rec.summary.fitted_loglog_slope))
        std::printf("  fitted log-log slope: %.4f\n", rec.summary.fitted_loglog_slope);
    if (rec.summary.bound_violations >= 0)
        std::printf("  functional-bound violations: %ld\n", rec.summary.bound_violations);
    if (rec.summary.oracle)
        std::printf("  oracle check: closed=%.6g discrete=%.6g rel.err=%.3g (%d nodes)\n",
                    rec.summary.oracle->closed_form, rec.summary.oracle->discrete,
                    rec.summary.oracle->relative_error, rec.summary.oracle->nodes);
}

void run_and_emit(const ScenarioConfig& cfg, EmitFormat format, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);
    const RunRecord rec = run_scenario(cfg);
    const std::string file = out_dir + "/" + cfg.id + extension(format);
    emit(rec, format, file);
    print_summary(cfg, rec, file);
}

int run_command(const std::string& config_path, const std::string& out_dir,
                const std::string& format) {
    const ScenarioConfig cfg = read_scenario_file(config_path);
    run_and_emit(cfg, parse_format(format), out_dir);
    return 0;
}

int builtin_command(const std::string& name, const std::string& out_dir) {
    std::vector<ScenarioConfig> matched;
    for (auto& cfg : builtin_scenarios())
        if (cfg.family == name || cfg.id == name) matched.push_back(std::move(cfg));
    if (matched.empty())
        throw ConfigError("unknown builtin scenario '" + name + "' (see `list`)");
    for (const auto& cfg : matched) run_and_emit(cfg, EmitFormat::Csv, out_dir);
    return 0;
}

int list_command() {
    for (const auto& family : builtin_families()) {
        std::printf("%s\n", family.c_str());
        for (const auto& cfg : builtin_scenarios())
            if (cfg.family == family && cfg.id != family)
                std::printf("  %s\n", cfg.id.c_str());
    }
    return 0;
}

int oracle_check_command(double eps_value, int nodes) {
    // 1D reference instance N(0,1) vs N(1,2) on +/- 8 standard deviations.
    const Epsilon eps(eps_value);
    Eigen::VectorXd m0(1), m1(1);
    m0 << 0.0;
    m1 << 1.0;
    const Gaussian mu(m0, SymmetricMatrix(Eigen::MatrixXd::Constant(1, 1, 1.0)));
    const Gaussian nu(m1, SymmetricMatrix(Eigen::MatrixXd::Constant(1, 1, 2.0)));

    const double closed = sinkhorn_divergence(mu, nu, eps);
    const DiscreteMeasure da = discretize_gaussian(mu, nodes, 8.0);
    const DiscreteMeasure db = discretize_gaussian(nu, nodes, 8.0);
    const double discrete = sinkhorn_divergence_discrete(da, db, eps, 100000, 1e-9);
    const double rel = std::abs(closed - discrete) / std::max(std::abs(closed), 1e-12);

    std::printf("closed form  S_eps = %.12g\n", closed);
    std::printf("discrete     S_eps = %.12g  (%d nodes)\n", discrete, nodes);
    std::printf("relative error     = %.6g\n", rel);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entropic optimal transport between Gaussians and the Sinkhorn-divergence "
                 "Wasserstein gradient flow"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Integrate a flow scenario from a JSON config");
    std::string config_path, run_out = ".", run_format = "csv";
    run->add_option("config", config_path, "path to the scenario config")->required();
    run->add_option("--out", run_out, "output directory");
    run->add_option("--format", run_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    auto* builtin = app.add_subcommand("builtin", "Run a builtin scenario or family");
    std::string builtin_name, builtin_out = ".";
    builtin->add_option("name", builtin_name, "builtin scenario or family name")->required();
    builtin->add_option("--out", builtin_out, "output directory");

    app.add_subcommand("list", "List builtin scenario names");

    auto* oracle = app.add_subcommand(
        "oracle-check", "Compare the closed form against the discrete solver in 1D");
    double oracle_eps = 0.5;
    int oracle_nodes = 400;
    oracle->add_option("--eps", oracle_eps, "regularization strength")
        ->check(CLI::PositiveNumber);
    oracle->add_option("--nodes", oracle_nodes, "grid nodes")->check(CLI::Range(2, 5000));

    try {
        app.parse(argc, argv);
        if (run->parsed()) return run_command(config_path, run_out, run_format);
        if (builtin->parsed()) return builtin_command(builtin_name, builtin_out);
        if (app.get_subcommand("list")->parsed()) return list_command();
        if (oracle->parsed()) return oracle_check_command(oracle_eps, oracle_nodes);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const sinkflow::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const sinkflow::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const sinkflow::IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 3;
    }
    return 0;
}
