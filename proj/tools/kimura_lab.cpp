#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kimura/experiment.hpp"

namespace fs = std::filesystem;
using namespace kimura;

namespace {

struct GlobalFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out;
};

ExperimentConfig load_with_overrides(const GlobalFlags& g) {
    if (g.config.empty()) throw ValidationError("--config is required for this subcommand");
    ExperimentConfig cfg = load_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    if (g.threads) cfg.threads = *g.threads;
    if (g.out) cfg.output_dir = *g.out;
    cfg.validate();
    return cfg;
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

json classify(const ExperimentConfig& cfg) {
    if (cfg.kind != ModelKind::OneD) throw ValidationError("classify needs a one-dimensional model");
    const auto left = classify_endpoint(cfg.model1d, End::Left).kind;
    const auto right = classify_endpoint(cfg.model1d, End::Right).kind;
    json measures = json::array();
    for (auto k : terminal_boundary_measures(left, right)) measures.push_back(std::string(to_string(k)));
    return {{"left", std::string(to_string(left))},
            {"right", std::string(to_string(right))},
            {"invariant_measures", measures}};
}

/// Density and CDF of the stationary law, or the absorption probability
/// S0 when both ends are tangent.
json invariant(const ExperimentConfig& cfg, int points) {
    if (cfg.kind == ModelKind::Triangle) {
        ArtifactWriter w(cfg.output_dir);
        const auto mu = edge_invariant_2d(cfg.triangle);
        std::vector<double> xs, ds;
        for (int i = 0; i < points; ++i) {
            xs.push_back((i + 0.5) / points);
            ds.push_back(mu(xs.back()));
        }
        w.write_csv("edge_density.csv", {"x", "density"}, {xs, ds}, "reference_density");
        return {{"artifacts", w.artifacts()}};
    }
    const auto& spec = cfg.model1d;
    const auto left = classify_endpoint(spec, End::Left).kind;
    const auto right = classify_endpoint(spec, End::Right).kind;
    ArtifactWriter w(cfg.output_dir);
    std::vector<double> xs;
    for (int i = 0; i < points; ++i) xs.push_back((i + 0.5) / points);
    json out = classify(cfg);
    if (is_transverse(left) && is_transverse(right)) {
        const auto profile = stationary_density(spec);
        const CdfTable table(profile);
        std::vector<double> d, c;
        for (double x : xs) {
            d.push_back(profile(x));
            c.push_back(table.cdf(x));
        }
        w.write_csv("density.csv", {"x", "density", "cdf"}, {xs, d, c}, "reference_density");
        out["normalizer"] = profile.Z();
        out["exponents"] = {profile.left_exponent(), profile.right_exponent()};
    } else if (!is_transverse(left) && !is_transverse(right)) {
        std::vector<double> s;
        for (double x : xs) s.push_back(normalized_scale_function(spec, x));
        w.write_csv("absorption_probability.csv", {"x", "prob_absorbed_at_1"}, {xs, s}, "scale_function");
    }
    out["artifacts"] = w.artifacts();
    return out;
}

json lyapunov(const ExperimentConfig& cfg, std::optional<double> alpha, double beta, bool optimize, bool patched,
              int grid, const std::string& csv) {
    if (cfg.kind == ModelKind::Triangle) {
        const auto c = lyapunov_check_2d(cfg.triangle);
        return {{"max_identity_error", c.max_identity_error},
                {"worst_point", {c.worst_point.x, c.worst_point.y}},
                {"uniform_bound", c.uniform_bound},
                {"rate_window", {c.rate_window.first, c.rate_window.second}},
                {"points_checked", c.points_checked}};
    }
    const auto& spec = cfg.model1d;
    Lambda0Certificate cert;
    json out;
    if (patched) {
        const auto g = assemble_global_lyapunov(spec);
        cert = g.certify(grid);
        out = to_json_report(cert);
        out["candidate"] = std::string("patched global function (") + std::string(to_string(g.topology())) + ")";
    } else {
        LyapunovCandidate1D cand{alpha.value_or(0.5), beta};
        if (optimize) {
            const auto res = optimize_exponent(
                spec, [beta](double c) { return LyapunovCandidate1D{c, beta}; }, 0.0, 1.0, grid);
            cand.alpha = res.exponent;
            cert = res.certificate;
        } else {
            cert = certify_lambda0(spec, cand, grid);
        }
        out = to_json_report(cert);
        out["candidate"] = cand.describe();
        out["alpha"] = cand.alpha;
    }
    if (!csv.empty()) {
        std::ofstream f(csv);
        if (!f) throw IoError("cannot write " + csv);
        f << "x,Lf_over_f\n";
        for (std::size_t i = 0; i < cert.grid.size(); ++i)
            f << format_number(cert.grid[i]) << "," << format_number(cert.values[i]) << "\n";
    }
    return out;
}

json rates(const std::string& series, const std::string& column, std::vector<double> window) {
    const auto table = read_csv(series);
    auto col = [&](const std::string& name) -> const std::vector<double>& {
        for (std::size_t c = 0; c < table.header.size(); ++c)
            if (table.header[c] == name) return table.columns[c];
        throw ValidationError("column '" + name + "' not found in " + series);
    };
    const auto& t = col("t");
    const auto& v = column.empty() ? table.columns.back() : col(column);
    if (window.empty() && !t.empty()) {
        const auto w = default_rate_window(t.back());
        window = {w.first, w.second};
    }
    if (window.size() != 2) throw ValidationError("--window takes two values");
    return to_json_report(fit_exponential_rate(t, v, {window[0], window[1]}));
}

/// simulate1d / simulate2d: the run pipeline with every observation written.
json simulate(ExperimentConfig cfg, ModelKind expected) {
    if (cfg.kind != expected)
        throw ValidationError(expected == ModelKind::OneD ? "simulate1d needs a one-dimensional model"
                                                          : "simulate2d needs a triangle model");
    if (cfg.write_snapshots.empty()) cfg.write_snapshots = cfg.observation_times();
    return run_experiment(cfg).manifest;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and certification of Kimura diffusions"};
    app.require_subcommand(1);
    GlobalFlags g;
    app.add_option("--config", g.config, "Experiment config (JSON)");
    app.add_option("--seed", g.seed, "Override the config seed");
    app.add_option("--threads", g.threads, "Override the worker thread count")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "Override the output directory");

    auto* classify_cmd = app.add_subcommand("classify", "Classify both endpoints and list invariant measures");
    auto* invariant_cmd = app.add_subcommand("invariant", "Write the stationary density or absorption probability");
    int points = 1000;
    invariant_cmd->add_option("--points", points, "Grid size")->check(CLI::PositiveNumber);

    auto* sim1 = app.add_subcommand("simulate1d", "Simulate a 1D ensemble and write snapshots and metrics");
    auto* sim2 = app.add_subcommand("simulate2d", "Simulate a triangle ensemble and write snapshots and metrics");

    auto* rates_cmd = app.add_subcommand("rates", "Fit an exponential rate to a metric series CSV");
    std::string series, column;
    std::vector<double> window;
    rates_cmd->add_option("series", series, "CSV with a t column")->required();
    rates_cmd->add_option("--column", column, "Value column (default: last)");
    rates_cmd->add_option("--window", window, "t_min t_max")->expected(2);

    auto* ly = app.add_subcommand("lyapunov", "Certify a lambda0 bound for a Lyapunov candidate");
    std::optional<double> alpha;
    double beta = 0.0;
    bool optimize = false, patched = false;
    int grid = kDefaultLyapunovGrid;
    std::string ly_csv;
    ly->add_option("--alpha", alpha, "Exponent at x = 0");
    ly->add_option("--beta", beta, "Exponent at x = 1");
    ly->add_flag("--optimize", optimize, "Minimize the bound over alpha in (0,1)");
    ly->add_flag("--patched", patched, "Assemble the global patched function");
    ly->add_option("--grid", grid, "Chebyshev grid size")->check(CLI::Range(2, 1 << 24));
    ly->add_option("--csv", ly_csv, "Write (x, Lf/f) on the grid");

    auto* run_cmd = app.add_subcommand("run", "Run the full pipeline from a config");
    bool dry_run = false;
    run_cmd->add_flag("--dry-run", dry_run, "Validate and print the plan only");

    auto* cmp = app.add_subcommand("compare", "Compare two runs");
    std::string run_a, run_b;
    cmp->add_option("a", run_a, "Run directory or manifest")->required();
    cmp->add_option("b", run_b, "Run directory or manifest")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (classify_cmd->parsed()) {
            print(classify(load_with_overrides(g)));
        } else if (invariant_cmd->parsed()) {
            print(invariant(load_with_overrides(g), points));
        } else if (sim1->parsed()) {
            print(simulate(load_with_overrides(g), ModelKind::OneD).at("summary"));
        } else if (sim2->parsed()) {
            print(simulate(load_with_overrides(g), ModelKind::Triangle).at("summary"));
        } else if (rates_cmd->parsed()) {
            print(rates(series, column, window));
        } else if (ly->parsed()) {
            print(lyapunov(load_with_overrides(g), alpha, beta, optimize, patched, grid, ly_csv));
        } else if (run_cmd->parsed()) {
            const auto r = run_experiment(load_with_overrides(g), {dry_run});
            if (dry_run) {
                std::cout << r.plan;
            } else {
                std::cout << "wrote " << r.manifest.at("artifacts").size() << " artifacts to "
                          << r.manifest.at("config").at("output_dir").get<std::string>() << " (config hash "
                          << r.manifest.at("config_hash").get<std::string>() << ")\n";
            }
        } else if (cmp->parsed()) {
            print(compare_runs(run_a, run_b));
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
