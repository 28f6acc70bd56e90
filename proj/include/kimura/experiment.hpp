#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kimura/errors.hpp"
#include "kimura/invariant_measure.hpp"
#include "kimura/lyapunov.hpp"
#include "kimura/metrics.hpp"
#include "kimura/operator_model.hpp"
#include "kimura/sde1d.hpp"
#include "kimura/sde2d.hpp"

namespace kimura {

using json = nlohmann::json;

inline constexpr int kManifestSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Serialization of the model and scheme types.

inline void to_json(json& j, const Polynomial& p) { j = std::vector<double>(p.coeffs().begin(), p.coeffs().end()); }
inline void from_json(const json& j, Polynomial& p) { p = Polynomial(j.get<std::vector<double>>()); }

inline void to_json(json& j, const OperatorSpec1D& s) {
    j = json{{"type", "1d"}, {"a", s.a}, {"b", s.b}, {"m0", s.m0}, {"m1", s.m1}};
}
inline void from_json(const json& j, OperatorSpec1D& s) {
    s.a = j.at("a").get<Polynomial>();
    s.b = j.at("b").get<Polynomial>();
    s.m0 = j.at("m0").get<int>();
    s.m1 = j.at("m1").get<int>();
}

inline void to_json(json& j, const TriangleSpec& t) {
    j = json{{"type", "triangle"}, {"gamma12", t.gamma12}, {"gamma13", t.gamma13}, {"gamma23", t.gamma23}};
}
inline void from_json(const json& j, TriangleSpec& t) {
    t.gamma12 = j.at("gamma12").get<double>();
    t.gamma13 = j.at("gamma13").get<double>();
    t.gamma23 = j.at("gamma23").get<double>();
}

/// Uniform observation times k·every for k = 0..floor(t_final/every).
inline std::vector<double> uniform_times(double t_final, double every) {
    if (!(every > 0.0)) throw ValidationError("scheme.observe_every must be positive");
    std::vector<double> t;
    const auto n = static_cast<long long>(std::floor(t_final / every + 1e-9));
    for (long long k = 0; k <= n; ++k) t.push_back(static_cast<double>(k) * every);
    return t;
}

struct MetricRequests {
    bool w1_to_density = true;       ///< 1D, needs an absolutely continuous invariant law
    bool w1_to_dirac = true;         ///< 1D
    double dirac_target = 1.0;       ///< endpoint of the Dirac target
    bool mean_one_minus_x_minus_y = true; ///< 2D
    bool w1_marginal = true;         ///< 2D, x-marginal vs the diagonal invariant law
    int histogram_bins = 100;
    int noise_floor_repetitions = 4; ///< 0 disables the noise-floor estimate
};

enum class ModelKind { OneD, Triangle };

/// Everything needed to reproduce a run. `threads` and `output_dir` do not
/// affect results and are excluded from the config hash.
struct ExperimentConfig {
    ModelKind kind = ModelKind::OneD;
    OperatorSpec1D model1d = MixedModel1D{}.spec();
    TriangleSpec triangle;
    SchemeConfig1D scheme1d;
    SchemeConfig2D scheme2d;
    std::optional<double> initial_point = 0.5; ///< 1D; empty means the stationary law
    TriangleState initial2d{0.1, 0.1};
    std::size_t n_particles = 10000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::string output_dir = "run";
    MetricRequests metrics;
    std::optional<std::pair<double, double>> rate_window;
    std::vector<double> write_snapshots; ///< subset of the observation times
    std::size_t snapshot_cap = 0;        ///< reservoir cap on written snapshots; 0 = none

    double t_final() const { return kind == ModelKind::OneD ? scheme1d.t_final : scheme2d.t_final; }
    const std::vector<double>& observation_times() const {
        return kind == ModelKind::OneD ? scheme1d.snapshot_times : scheme2d.snapshot_times;
    }

    void validate() const {
        if (n_particles < 1) throw ValidationError("n_particles must be at least 1");
        if (threads < 1) throw ValidationError("threads must be at least 1");
        if (output_dir.empty()) throw ValidationError("output_dir must not be empty");
        if (kind == ModelKind::OneD) {
            try {
                model1d.validate();
            } catch (const ValidationError& e) {
                throw ValidationError(std::string("model: ") + e.what());
            }
            MixedModel1D::from_spec(model1d);
            scheme1d.validate();
            if (initial_point && !(*initial_point >= 0.0 && *initial_point <= 1.0))
                throw ValidationError("initial.point must lie in [0,1]");
        } else {
            triangle.validate();
            scheme2d.validate();
            if (!initial2d.in_triangle()) throw ValidationError("initial.x, initial.y must lie in the triangle");
        }
        if (metrics.histogram_bins < 1) throw ValidationError("metrics.histogram_bins must be positive");
        if (metrics.dirac_target != 0.0 && metrics.dirac_target != 1.0)
            throw ValidationError("metrics.dirac_target must be 0 or 1");
        if (rate_window && !(rate_window->second > rate_window->first))
            throw ValidationError("rate_window must satisfy t_min < t_max");
        const auto& obs = observation_times();
        for (double t : write_snapshots)
            if (std::none_of(obs.begin(), obs.end(), [&](double s) { return std::abs(s - t) < 1e-12; }))
                throw ValidationError("write_snapshots: time " + std::to_string(t) + " is not an observation time");
    }
};

inline void to_json(json& j, const ExperimentConfig& c) {
    j = json::object();
    if (c.kind == ModelKind::OneD) {
        j["model"] = c.model1d;
        j["scheme"] = {{"dt", c.scheme1d.dt},
                       {"t_final", c.scheme1d.t_final},
                       {"kimura_threshold", c.scheme1d.kimura_threshold},
                       {"quadratic_threshold", c.scheme1d.quadratic_threshold},
                       {"kimura_step", std::string(to_string(c.scheme1d.kimura_step))},
                       {"snapshot_times", c.scheme1d.snapshot_times}};
        j["initial"] = c.initial_point ? json{{"point", *c.initial_point}} : json{{"law", "stationary"}};
    } else {
        j["model"] = c.triangle;
        j["scheme"] = {{"dt", c.scheme2d.dt},
                       {"t_final", c.scheme2d.t_final},
                       {"snapshot_times", c.scheme2d.snapshot_times},
                       {"marginal_bins", c.scheme2d.marginal_bins}};
        j["initial"] = {{"x", c.initial2d.x}, {"y", c.initial2d.y}};
    }
    j["n_particles"] = c.n_particles;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["output_dir"] = c.output_dir;
    j["metrics"] = {{"w1_to_density", c.metrics.w1_to_density},
                    {"w1_to_dirac", c.metrics.w1_to_dirac},
                    {"dirac_target", c.metrics.dirac_target},
                    {"mean_one_minus_x_minus_y", c.metrics.mean_one_minus_x_minus_y},
                    {"w1_marginal", c.metrics.w1_marginal},
                    {"histogram_bins", c.metrics.histogram_bins},
                    {"noise_floor_repetitions", c.metrics.noise_floor_repetitions}};
    j["rate_window"] = c.rate_window ? json::array({c.rate_window->first, c.rate_window->second}) : json(nullptr);
    j["write_snapshots"] = c.write_snapshots;
    j["snapshot_cap"] = c.snapshot_cap;
}

namespace detail {

/// j[key] as T, with a ValidationError naming `path.key` on a type mismatch.
template <class T>
T field(const json& j, const std::string& key, const std::string& path, std::optional<T> fallback = std::nullopt) {
    const std::string name = path.empty() ? key : path + "." + key;
    if (!j.contains(key) || j.at(key).is_null()) {
        if (fallback) return *fallback;
        throw ValidationError("missing config field '" + name + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError("config field '" + name + "' has the wrong type");
    }
}

} // namespace detail

inline void from_json(const json& j, ExperimentConfig& c) {
    using detail::field;
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    const json& model = j.contains("model") ? j.at("model") : throw ValidationError("missing config field 'model'");
    const std::string type = field<std::string>(model, "type", "model", std::string("1d"));
    const json scheme = j.value("scheme", json::object());
    if (type == "1d") {
        c.kind = ModelKind::OneD;
        c.model1d.a = Polynomial(field<std::vector<double>>(model, "a", "model", std::vector<double>{1.0}));
        c.model1d.b = Polynomial(field<std::vector<double>>(model, "b", "model"));
        c.model1d.m0 = field<int>(model, "m0", "model", 1);
        c.model1d.m1 = field<int>(model, "m1", "model", 2);
        auto& s = c.scheme1d;
        s.dt = field<double>(scheme, "dt", "scheme", s.dt);
        s.t_final = field<double>(scheme, "t_final", "scheme", s.t_final);
        s.kimura_threshold = field<double>(scheme, "kimura_threshold", "scheme", s.kimura_threshold);
        s.quadratic_threshold = field<double>(scheme, "quadratic_threshold", "scheme", s.quadratic_threshold);
        s.kimura_step = parse_kimura_step(field<std::string>(scheme, "kimura_step", "scheme", "cir_exact"));
        s.snapshot_times = scheme.contains("snapshot_times")
                               ? field<std::vector<double>>(scheme, "snapshot_times", "scheme")
                               : uniform_times(s.t_final, field<double>(scheme, "observe_every", "scheme", 0.0625));
        const json init = j.value("initial", json{{"point", 0.5}});
        if (init.contains("point")) {
            c.initial_point = field<double>(init, "point", "initial");
        } else if (field<std::string>(init, "law", "initial") == "stationary") {
            c.initial_point.reset();
        } else {
            throw ValidationError("initial.law must be \"stationary\"");
        }
    } else if (type == "triangle") {
        c.kind = ModelKind::Triangle;
        c.triangle.gamma12 = field<double>(model, "gamma12", "model");
        c.triangle.gamma13 = field<double>(model, "gamma13", "model");
        c.triangle.gamma23 = field<double>(model, "gamma23", "model");
        auto& s = c.scheme2d;
        s.dt = field<double>(scheme, "dt", "scheme", s.dt);
        s.t_final = field<double>(scheme, "t_final", "scheme", s.t_final);
        s.marginal_bins = field<int>(scheme, "marginal_bins", "scheme", s.marginal_bins);
        s.snapshot_times = scheme.contains("snapshot_times")
                               ? field<std::vector<double>>(scheme, "snapshot_times", "scheme")
                               : uniform_times(s.t_final, field<double>(scheme, "observe_every", "scheme", 0.0625));
        const json init = j.value("initial", json{{"x", 0.1}, {"y", 0.1}});
        c.initial2d = {field<double>(init, "x", "initial"), field<double>(init, "y", "initial")};
    } else {
        throw ValidationError("model.type must be \"1d\" or \"triangle\"");
    }
    c.n_particles = field<std::size_t>(j, "n_particles", "", c.n_particles);
    c.seed = field<std::uint64_t>(j, "seed", "", c.seed);
    c.threads = field<unsigned>(j, "threads", "", c.threads);
    c.output_dir = field<std::string>(j, "output_dir", "", c.output_dir);
    const json m = j.value("metrics", json::object());
    auto& r = c.metrics;
    r.w1_to_density = field<bool>(m, "w1_to_density", "metrics", r.w1_to_density);
    r.w1_to_dirac = field<bool>(m, "w1_to_dirac", "metrics", r.w1_to_dirac);
    r.dirac_target = field<double>(m, "dirac_target", "metrics", r.dirac_target);
    r.mean_one_minus_x_minus_y = field<bool>(m, "mean_one_minus_x_minus_y", "metrics", r.mean_one_minus_x_minus_y);
    r.w1_marginal = field<bool>(m, "w1_marginal", "metrics", r.w1_marginal);
    r.histogram_bins = field<int>(m, "histogram_bins", "metrics", r.histogram_bins);
    r.noise_floor_repetitions = field<int>(m, "noise_floor_repetitions", "metrics", r.noise_floor_repetitions);
    if (j.contains("rate_window") && !j.at("rate_window").is_null()) {
        const auto w = field<std::vector<double>>(j, "rate_window", "");
        if (w.size() != 2) throw ValidationError("rate_window must have two entries");
        c.rate_window = std::make_pair(w[0], w[1]);
    } else {
        c.rate_window.reset();
    }
    c.write_snapshots = field<std::vector<double>>(j, "write_snapshots", "", std::vector<double>{});
    c.snapshot_cap = field<std::size_t>(j, "snapshot_cap", "", c.snapshot_cap);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return j.get<ExperimentConfig>();
}

/// 64-bit FNV-1a of the canonical JSON of all result-affecting fields.
inline std::string config_hash(const ExperimentConfig& c) {
    json j = c;
    j.erase("threads");
    j.erase("output_dir");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Artifact writing.

/// Shortest round-trip decimal for a double.
inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Time label used in artifact file names, e.g. 0.25 -> "0.25".
inline std::string time_label(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", t);
    return buf;
}

/// Tracks every file written by a run so the manifest lists all artifacts
/// and a failed run can remove its partial output.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path root) : root_(std::move(root)) {
        std::error_code ec;
        created_root_ = !std::filesystem::exists(root_, ec);
        std::filesystem::create_directories(root_, ec);
        if (ec || !std::filesystem::is_directory(root_))
            throw IoError("cannot create output directory " + root_.string());
    }

    const std::filesystem::path& root() const { return root_; }

    void write(const std::string& relative, const std::string& content, const std::string& kind) {
        const auto path = root_ / relative;
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out << content;
        out.close();
        if (!out) throw IoError("failed writing " + path.string());
        artifacts_.push_back({{"path", relative}, {"kind", kind}, {"bytes", content.size()}});
        written_.push_back(path);
    }

    void write_csv(const std::string& relative, const std::vector<std::string>& header,
                   const std::vector<std::vector<double>>& columns, const std::string& kind) {
        std::string s;
        for (std::size_t c = 0; c < header.size(); ++c) s += (c ? "," : "") + header[c];
        s += "\n";
        const std::size_t rows = columns.empty() ? 0 : columns.front().size();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < columns.size(); ++c) {
                if (c) s += ",";
                s += format_number(columns[c][r]);
            }
            s += "\n";
        }
        write(relative, s, kind);
    }

    void write_json(const std::string& relative, const json& j, const std::string& kind) {
        write(relative, j.dump(2) + "\n", kind);
    }

    const json& artifacts() const { return artifacts_; }

    /// Removes everything written so far (and the directory if this run created it).
    void discard() noexcept {
        std::error_code ec;
        for (const auto& p : written_) std::filesystem::remove(p, ec);
        if (created_root_) std::filesystem::remove_all(root_, ec);
    }

private:
    std::filesystem::path root_;
    bool created_root_ = false;
    json artifacts_ = json::array();
    std::vector<std::filesystem::path> written_;
};

/// Deterministic reservoir sample (algorithm R) of at most `cap` values.
inline std::vector<double> reservoir_subsample(std::span<const double> v, std::size_t cap, std::uint64_t seed) {
    if (cap == 0 || v.size() <= cap) return {v.begin(), v.end()};
    const ParticleStream stream(seed);
    std::vector<double> keep(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(cap));
    for (std::size_t i = cap; i < v.size(); ++i) {
        const auto j = static_cast<std::size_t>(stream.uniform(i, 0) * static_cast<double>(i + 1));
        if (j < cap) keep[j] = v[i];
    }
    return keep;
}

/// Indices chosen by the same reservoir rule, for paired (x, y) snapshots.
inline std::vector<std::size_t> reservoir_indices(std::size_t n, std::size_t cap, std::uint64_t seed) {
    std::vector<std::size_t> idx(std::min(n, cap == 0 ? n : cap));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (cap == 0 || n <= cap) return idx;
    const ParticleStream stream(seed);
    for (std::size_t i = cap; i < n; ++i) {
        const auto j = static_cast<std::size_t>(stream.uniform(i, 0) * static_cast<double>(i + 1));
        if (j < cap) idx[j] = i;
    }
    return idx;
}

inline json to_json_report(const RateFitReport& r) {
    return {{"rate", r.rate},
            {"intercept", r.intercept},
            {"r_squared", r.r_squared},
            {"window", {r.window.first, r.window.second}},
            {"points_used", r.points_used},
            {"nonpositive_excluded", r.nonpositive_excluded}};
}

inline json to_json_report(const Lambda0Certificate& c) {
    auto finite_or_string = [](double v) -> json {
        if (std::isfinite(v)) return v;
        return v > 0 ? "+inf" : "-inf";
    };
    return {{"lambda0_bound", finite_or_string(c.lambda0_bound)},
            {"worst_point", c.worst_point},
            {"endpoint_limits", {finite_or_string(c.endpoint_limits.first), finite_or_string(c.endpoint_limits.second)}},
            {"grid_size", c.grid.size()},
            {"status", std::string(to_string(c.status))}};
}

struct RunOptions {
    bool dry_run = false;
};

struct RunResult {
    json manifest;
    std::string plan;
};

namespace detail {

inline bool is_observation_to_write(const ExperimentConfig& c, double t) {
    return std::any_of(c.write_snapshots.begin(), c.write_snapshots.end(),
                       [&](double s) { return std::abs(s - t) < 1e-12; });
}

inline std::string describe_plan(const ExperimentConfig& c) {
    std::ostringstream os;
    const auto& obs = c.observation_times();
    os << "model: " << json(c).at("model").dump() << "\n";
    os << "particles: " << c.n_particles << ", seed: " << c.seed << ", threads: " << c.threads << "\n";
    const double dt = c.kind == ModelKind::OneD ? c.scheme1d.dt : c.scheme2d.dt;
    os << "dt: " << dt << ", t_final: " << c.t_final() << ", observations: " << obs.size() << "\n";
    if (c.kind == ModelKind::OneD) os << "kimura step: " << to_string(c.scheme1d.kimura_step) << "\n";
    os << "snapshot files: " << c.write_snapshots.size() << ", output: " << c.output_dir << "\n";
    os << "config hash: " << config_hash(c) << "\n";
    return os.str();
}

struct Series {
    std::vector<double> t, v;
};

inline void write_series(ArtifactWriter& w, const std::string& name, const Series& s) {
    w.write_csv("metrics/" + name + ".csv", {"t", "value"}, {s.t, s.v}, "metric_series");
}

inline json fit_and_write(ArtifactWriter& w, const std::string& name, const Series& s,
                          std::pair<double, double> window) {
    try {
        const auto rep = fit_exponential_rate(s.t, s.v, window);
        const json j = to_json_report(rep);
        w.write_json("fits/" + name + ".json", j, "rate_fit");
        return j;
    } catch (const ValidationError& e) {
        return {{"error", e.what()}};
    }
}

inline json run_1d(const ExperimentConfig& c, ArtifactWriter& w) {
    const OperatorSpec1D& spec = c.model1d;
    json summary;
    const auto left = classify_endpoint(spec, End::Left).kind;
    const auto right = classify_endpoint(spec, End::Right).kind;
    summary["endpoints"] = {std::string(to_string(left)), std::string(to_string(right))};
    json measures = json::array();
    for (auto k : terminal_boundary_measures(left, right)) measures.push_back(std::string(to_string(k)));
    summary["invariant_measures"] = measures;

    std::optional<DensityProfile> profile;
    std::optional<CdfTable> table;
    if (is_transverse(left) && is_transverse(right)) {
        profile.emplace(stationary_density(spec));
        table.emplace(*profile);
        summary["normalizer"] = profile->Z();
        std::vector<double> xs, ds;
        for (int i = 0; i < 400; ++i) {
            xs.push_back((i + 0.5) / 400.0);
            ds.push_back((*profile)(xs.back()));
        }
        w.write_csv("reference_density.csv", {"x", "density"}, {xs, ds}, "reference_density");
    }

    InitialCondition1D init;
    if (c.initial_point) {
        init = InitialCondition1D::dirac(*c.initial_point);
    } else {
        if (!table) throw ValidationError("initial.law = stationary needs both endpoints transverse");
        const CdfTable* tab = &*table;
        init = InitialCondition1D::from_quantile([tab](double q) { return tab->quantile(q); });
    }

    const bool want_density = c.metrics.w1_to_density && table.has_value();
    const bool want_dirac = c.metrics.w1_to_dirac;
    Series dens, dirac;
    EnsembleOptions opt{c.n_particles, c.seed, c.threads, 0, false};
    const auto counters = simulate_ensemble_1d(spec, c.scheme1d, init, opt, [&](ParticleEnsemble&& snap) {
        std::vector<double> sorted = snap.positions;
        std::sort(sorted.begin(), sorted.end());
        if (want_density) {
            dens.t.push_back(snap.time);
            dens.v.push_back(wasserstein_p_vs_density(sorted, [&](double q) { return table->quantile(q); }, 1.0));
        }
        if (want_dirac) {
            dirac.t.push_back(snap.time);
            dirac.v.push_back(wasserstein_p_to_dirac(sorted, c.metrics.dirac_target, 1.0));
        }
        if (is_observation_to_write(c, snap.time)) {
            const std::string label = time_label(snap.time);
            const auto kept = reservoir_subsample(snap.positions, c.snapshot_cap, c.seed ^ 0x5eed5eed5eedull);
            w.write_csv("snapshots/positions_t" + label + ".csv", {"position"}, {kept}, "snapshot");
            const auto h = histogram(snap.positions, c.metrics.histogram_bins, 0.0, 1.0);
            std::vector<double> lo, hi, cnt, den;
            for (std::size_t k = 0; k < h.counts.size(); ++k) {
                lo.push_back(h.edges[k]);
                hi.push_back(h.edges[k + 1]);
                cnt.push_back(static_cast<double>(h.counts[k]));
                den.push_back(static_cast<double>(h.counts[k]) / h.density_normalization());
            }
            w.write_csv("histograms/hist_t" + label + ".csv", {"bin_left", "bin_right", "count", "density"},
                        {lo, hi, cnt, den}, "histogram");
        }
    });
    summary["counters"] = {{"interior_steps", counters.interior_steps},
                           {"kimura_steps", counters.kimura_steps},
                           {"quadratic_steps", counters.quadratic_steps},
                           {"clamped_low", counters.clamped_low},
                           {"clamped_high", counters.clamped_high}};

    const auto window = c.rate_window.value_or(default_rate_window(c.scheme1d.t_final));
    json fits = json::object();
    if (want_density) {
        write_series(w, "w1_to_density", dens);
        fits["w1_to_density"] = fit_and_write(w, "w1_to_density", dens, window);
        if (c.metrics.noise_floor_repetitions > 0)
            summary["noise_floor_w1"] = sampling_noise_floor([&](double q) { return table->quantile(q); },
                                                             c.n_particles, c.seed ^ 0xf100f100ull,
                                                             c.metrics.noise_floor_repetitions);
    }
    if (want_dirac) {
        write_series(w, "w1_to_dirac", dirac);
        fits["w1_to_dirac"] = fit_and_write(w, "w1_to_dirac", dirac, window);
    }
    summary["rate_fits"] = fits;

    try {
        const auto patched = assemble_global_lyapunov(spec);
        json cert = to_json_report(patched.certify());
        cert["topology"] = std::string(to_string(patched.topology()));
        w.write_json("lyapunov.json", cert, "lyapunov_certificate");
        summary["lyapunov"] = cert;
    } catch (const std::exception& e) {
        summary["lyapunov"] = {{"skipped", e.what()}};
    }
    return summary;
}

inline json run_2d(const ExperimentConfig& c, ArtifactWriter& w) {
    json summary;
    const auto quantile = edge_invariant_2d_quantile(c.triangle);
    Series mean_v, marg;
    EnsembleOptions opt{c.n_particles, c.seed, c.threads, 0, false};
    const auto counters = simulate_ensemble_2d(c.triangle, c.scheme2d, c.initial2d, opt, [&](TriangleSnapshot&& s) {
        if (c.metrics.mean_one_minus_x_minus_y) {
            mean_v.t.push_back(s.time);
            mean_v.v.push_back(s.mean_one_minus_x_minus_y);
        }
        if (c.metrics.w1_marginal) {
            std::vector<double> sorted = s.x;
            std::sort(sorted.begin(), sorted.end());
            marg.t.push_back(s.time);
            marg.v.push_back(wasserstein_p_vs_density(sorted, quantile, 1.0));
        }
        if (is_observation_to_write(c, s.time)) {
            const std::string label = time_label(s.time);
            const auto idx = reservoir_indices(s.x.size(), c.snapshot_cap, c.seed ^ 0x5eed5eed5eedull);
            std::vector<double> xs, ys;
            for (auto i : idx) {
                xs.push_back(s.x[i]);
                ys.push_back(s.y[i]);
            }
            w.write_csv("snapshots/positions_t" + label + ".csv", {"x", "y"}, {xs, ys}, "snapshot");
            const auto h2 = histogram_2d(s.x, s.y, c.metrics.histogram_bins);
            std::vector<double> bx, by, cnt;
            for (int i = 0; i < h2.bins; ++i)
                for (int j = 0; j < h2.bins; ++j) {
                    bx.push_back(i);
                    by.push_back(j);
                    cnt.push_back(static_cast<double>(h2.at(i, j)));
                }
            w.write_csv("histograms/hist2d_t" + label + ".csv", {"bin_x", "bin_y", "count"}, {bx, by, cnt},
                        "histogram2d");
            const auto& h = s.x_marginal;
            std::vector<double> lo, hi, hc, den;
            for (std::size_t k = 0; k < h.counts.size(); ++k) {
                lo.push_back(h.edges[k]);
                hi.push_back(h.edges[k + 1]);
                hc.push_back(static_cast<double>(h.counts[k]));
                den.push_back(static_cast<double>(h.counts[k]) / h.density_normalization());
            }
            w.write_csv("histograms/marginal_x_t" + label + ".csv", {"bin_left", "bin_right", "count", "density"},
                        {lo, hi, hc, den}, "histogram");
        }
    });
    summary["counters"] = {{"cutoffs", counters.cutoffs}, {"rescales", counters.rescales}};

    {
        const auto mu = edge_invariant_2d(c.triangle);
        std::vector<double> xs, ds;
        for (int i = 0; i < 400; ++i) {
            xs.push_back((i + 0.5) / 400.0);
            ds.push_back(mu(xs.back()));
        }
        w.write_csv("reference_density.csv", {"x", "density"}, {xs, ds}, "reference_density");
    }
    const auto window = c.rate_window.value_or(default_rate_window(c.scheme2d.t_final));
    json fits = json::object();
    if (c.metrics.mean_one_minus_x_minus_y) {
        w.write_csv("metrics/diagnostics.csv", {"t", "mean_one_minus_x_minus_y"}, {mean_v.t, mean_v.v},
                    "metric_series");
        fits["mean_one_minus_x_minus_y"] = fit_and_write(w, "mean_one_minus_x_minus_y", mean_v, window);
    }
    if (c.metrics.w1_marginal) {
        write_series(w, "w1_marginal", marg);
        if (c.metrics.noise_floor_repetitions > 0)
            summary["noise_floor_w1"] = sampling_noise_floor(quantile, c.n_particles, c.seed ^ 0xf100f100ull,
                                                             c.metrics.noise_floor_repetitions);
    }
    summary["rate_fits"] = fits;
    const auto lv = lyapunov_check_2d(c.triangle);
    const json cert = {{"max_identity_error", lv.max_identity_error},
                       {"uniform_bound", lv.uniform_bound},
                       {"rate_window", {lv.rate_window.first, lv.rate_window.second}},
                       {"points_checked", lv.points_checked}};
    w.write_json("lyapunov_2d.json", cert, "lyapunov_certificate");
    summary["lyapunov"] = cert;
    return summary;
}

} // namespace detail

/// Runs the configured pipeline and writes all artifacts plus manifest.json
/// under cfg.output_dir. On failure everything written is removed.
inline RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {}) {
    cfg.validate();
    RunResult result;
    result.plan = detail::describe_plan(cfg);
    if (options.dry_run) return result;

    const auto start = std::chrono::steady_clock::now();
    ArtifactWriter writer(cfg.output_dir);
    try {
        json summary = cfg.kind == ModelKind::OneD ? detail::run_1d(cfg, writer) : detail::run_2d(cfg, writer);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        json manifest = {{"schema_version", kManifestSchemaVersion},
                         {"config", cfg},
                         {"config_hash", config_hash(cfg)},
                         {"seed", cfg.seed},
                         {"summary", summary},
                         {"artifacts", writer.artifacts()},
                         {"wall_time_seconds", wall}};
        writer.write("manifest.json", manifest.dump(2) + "\n", "manifest");
        result.manifest = std::move(manifest);
    } catch (...) {
        writer.discard();
        throw;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Run comparison.

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path.string() + " is empty");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.header.push_back(cell);
    }
    t.columns.resize(t.header.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ss, cell, ',')) {
            if (c >= t.columns.size()) throw ValidationError(path.string() + ": row longer than header");
            try {
                t.columns[c++].push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ValidationError(path.string() + ": non-numeric cell '" + cell + "'");
            }
        }
        if (c != t.columns.size()) throw ValidationError(path.string() + ": row shorter than header");
    }
    return t;
}

inline json read_manifest(const std::filesystem::path& path) {
    const auto file = std::filesystem::is_directory(path) ? path / "manifest.json" : path;
    std::ifstream in(file);
    if (!in) throw IoError("cannot open manifest " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("manifest " + file.string() + " is not valid JSON");
    }
    if (!j.contains("schema_version") || !j.contains("artifacts") || !j.contains("config"))
        throw ValidationError("manifest " + file.string() + " does not follow the run manifest schema");
    j["__dir"] = file.parent_path().string();
    return j;
}

/// Config field deltas and, for every metric series present in both runs,
/// the maximum absolute difference per column.
inline json compare_runs(const std::filesystem::path& manifest_a, const std::filesystem::path& manifest_b) {
    const json a = read_manifest(manifest_a), b = read_manifest(manifest_b);
    if (a.at("schema_version") != b.at("schema_version")) throw ValidationError("manifest schema versions differ");
    json report;
    json deltas = json::array();
    const json fa = a.at("config").flatten(), fb = b.at("config").flatten();
    for (auto it = fa.begin(); it != fa.end(); ++it) {
        if (it.key() == "/threads" || it.key() == "/output_dir") continue;
        if (!fb.contains(it.key()))
            deltas.push_back({{"field", it.key()}, {"a", *it}, {"b", nullptr}});
        else if (fb.at(it.key()) != *it)
            deltas.push_back({{"field", it.key()}, {"a", *it}, {"b", fb.at(it.key())}});
    }
    for (auto it = fb.begin(); it != fb.end(); ++it)
        if (!fa.contains(it.key()) && it.key() != "/threads" && it.key() != "/output_dir")
            deltas.push_back({{"field", it.key()}, {"a", nullptr}, {"b", *it}});
    report["config_deltas"] = deltas;
    report["same_config_hash"] = a.at("config_hash") == b.at("config_hash");

    json metrics = json::object();
    bool identical = deltas.empty();
    const std::filesystem::path da = a.at("__dir").get<std::string>(), db = b.at("__dir").get<std::string>();
    for (const auto& art : a.at("artifacts")) {
        if (art.at("kind") != "metric_series") continue;
        const std::string rel = art.at("path");
        const bool in_b = std::any_of(b.at("artifacts").begin(), b.at("artifacts").end(),
                                      [&](const json& x) { return x.at("path") == rel; });
        if (!in_b) {
            metrics[rel] = {{"missing_in", "b"}};
            identical = false;
            continue;
        }
        const auto ta = read_csv(da / rel), tb = read_csv(db / rel);
        if (ta.header != tb.header) throw ValidationError("metric " + rel + " has different columns in the two runs");
        json cols = json::object();
        const std::size_t rows = std::min(ta.columns[0].size(), tb.columns[0].size());
        for (std::size_t c = 0; c < ta.header.size(); ++c) {
            double m = 0.0;
            for (std::size_t r = 0; r < rows; ++r) m = std::max(m, std::abs(ta.columns[c][r] - tb.columns[c][r]));
            cols[ta.header[c]] = m;
            if (m != 0.0) identical = false;
        }
        if (ta.columns[0].size() != tb.columns[0].size()) identical = false;
        metrics[rel] = {{"max_abs_diff", cols}, {"rows_a", ta.columns[0].size()}, {"rows_b", tb.columns[0].size()}};
    }
    report["metrics"] = metrics;
    report["identical"] = identical;
    return report;
}

} // namespace kimura
