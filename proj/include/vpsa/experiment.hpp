#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpsa/assumptions.hpp"
#include "vpsa/dataset.hpp"
#include "vpsa/diagnostics.hpp"
#include "vpsa/dynamics.hpp"
#include "vpsa/gaussian.hpp"
#include "vpsa/oracle.hpp"
#include "vpsa/planner.hpp"

namespace vpsa {

struct DiagnosticsConfig {
    std::uint64_t trace_stride = 0;  // 0: derived default max(1, steps/100)
    bool record_energy = true;
    bool oracle_compare = false;  // quadratic pairwise with B = 1 only
    double epsilon = 0.1;
};

struct BenchConfig {
    std::vector<std::uint64_t> grid_n;
    std::vector<std::uint64_t> grid_steps;
    std::uint64_t batch_size = 1;
    bool baseline = false;
};

struct PlanRequest {
    double epsilon = 0.1;
    std::optional<double> initial_gap;  // KL_0 or E_0; computed for the quadratic case if absent
    std::optional<double> c_lsi;        // required for the regression functional
};

struct ExperimentConfig {
    RunConfig run;
    Functional functional{PairwiseSpec{}};
    DiagnosticsConfig diagnostics;
    std::optional<BenchConfig> bench;
    std::optional<PlanRequest> plan;
    std::optional<double> c_lsi;  // user estimate for checks/planning (regression case)
};

namespace detail {

using nlohmann::json;

inline void require_keys(const json& j, const std::string& context,
                         std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError("config: " + context + " must be an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("config: unknown key '" + item.key() + "' in " + context);
    }
}

inline const json& require(const json& j, const std::string& context, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError("config: missing key '" + std::string(key) + "' in " + context);
    return *it;
}

inline double as_double(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError("config: " + where + " must be a number");
    return j.get<double>();
}

inline std::uint64_t as_count(const json& j, const std::string& where) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
        throw ConfigError("config: " + where + " must be a nonnegative integer");
    return j.get<std::uint64_t>();
}

inline bool as_bool(const json& j, const std::string& where) {
    if (!j.is_boolean()) throw ConfigError("config: " + where + " must be a boolean");
    return j.get<bool>();
}

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                                const std::filesystem::path& base_dir) {
    using detail::as_bool;
    using detail::as_count;
    using detail::as_double;
    using detail::require;
    using detail::require_keys;

    require_keys(j, "top level", {"schema", "functional", "run", "diagnostics", "bench", "plan"});
    if (require(j, "top level", "schema").get<std::string>() != "vpsa-config-v1")
        throw ConfigError("config: schema must be 'vpsa-config-v1'");

    ExperimentConfig cfg;

    const auto& run = require(j, "top level", "run");
    require_keys(run, "run", {"eta", "steps", "particles", "sigma", "batch_size", "master_seed",
                              "dim", "init_mean", "init_scale", "deterministic_flow"});
    cfg.run.eta = as_double(require(run, "run", "eta"), "run.eta");
    cfg.run.steps = as_count(require(run, "run", "steps"), "run.steps");
    cfg.run.particles = as_count(require(run, "run", "particles"), "run.particles");
    cfg.run.sigma = as_double(require(run, "run", "sigma"), "run.sigma");
    cfg.run.master_seed = as_count(require(run, "run", "master_seed"), "run.master_seed");
    cfg.run.dim = static_cast<Eigen::Index>(as_count(require(run, "run", "dim"), "run.dim"));
    if (run.contains("batch_size"))
        cfg.run.batch_size = as_count(run["batch_size"], "run.batch_size");
    if (run.contains("init_scale")) cfg.run.init_scale = as_double(run["init_scale"], "run.init_scale");
    if (run.contains("deterministic_flow"))
        cfg.run.deterministic_flow = as_bool(run["deterministic_flow"], "run.deterministic_flow");
    if (run.contains("init_mean")) {
        const auto& im = run["init_mean"];
        if (im.is_number()) {
            cfg.run.init_mean = Eigen::VectorXd::Constant(cfg.run.dim, im.get<double>());
        } else if (im.is_array()) {
            cfg.run.init_mean.resize(static_cast<Eigen::Index>(im.size()));
            for (Eigen::Index i = 0; i < cfg.run.init_mean.size(); ++i)
                cfg.run.init_mean[i] = as_double(im[static_cast<std::size_t>(i)], "run.init_mean[]");
        } else {
            throw ConfigError("config: run.init_mean must be a number or an array");
        }
    }
    cfg.run.validate();

    const auto& fn = require(j, "top level", "functional");
    const std::string kind = require(fn, "functional", "kind").get<std::string>();
    if (kind == "pairwise-quadratic") {
        require_keys(fn, "functional", {"kind", "lambda_v", "alpha"});
        cfg.functional = PairwiseSpec::quadratic(
            as_double(require(fn, "functional", "lambda_v"), "functional.lambda_v"),
            as_double(require(fn, "functional", "alpha"), "functional.alpha"), cfg.run.sigma,
            cfg.run.dim);
    } else if (kind == "mfnn") {
        require_keys(fn, "functional",
                     {"kind", "dataset_csv", "amplitude", "lambda", "radius", "smoothness", "c_lsi"});
        const std::string csv = require(fn, "functional", "dataset_csv").get<std::string>();
        std::filesystem::path csv_path(csv);
        if (csv_path.is_relative()) csv_path = base_dir / csv_path;
        if (!std::filesystem::exists(csv_path))
            throw ConfigError("config: dataset_csv file does not exist: " + csv_path.string());
        const double radius = as_double(require(fn, "functional", "radius"), "functional.radius");
        Dataset data = load_dataset_csv(csv_path.string(), radius);
        std::optional<double> smoothness;
        if (fn.contains("smoothness"))
            smoothness = as_double(fn["smoothness"], "functional.smoothness");
        if (fn.contains("c_lsi")) cfg.c_lsi = as_double(fn["c_lsi"], "functional.c_lsi");
        cfg.functional = MfnnSpec::make(
            std::move(data.features), std::move(data.labels),
            as_double(require(fn, "functional", "amplitude"), "functional.amplitude"),
            as_double(require(fn, "functional", "lambda"), "functional.lambda"), cfg.run.sigma,
            radius, smoothness);
        if (functional_dim(cfg.functional) != cfg.run.dim)
            throw ConfigError("config: dataset feature dimension does not match run.dim");
    } else {
        throw ConfigError("config: functional.kind must be 'pairwise-quadratic' or 'mfnn'");
    }

    if (j.contains("diagnostics")) {
        const auto& di = j["diagnostics"];
        require_keys(di, "diagnostics",
                     {"trace_stride", "record_energy", "oracle_compare", "epsilon"});
        if (di.contains("trace_stride"))
            cfg.diagnostics.trace_stride = as_count(di["trace_stride"], "diagnostics.trace_stride");
        if (di.contains("record_energy"))
            cfg.diagnostics.record_energy = as_bool(di["record_energy"], "diagnostics.record_energy");
        if (di.contains("oracle_compare"))
            cfg.diagnostics.oracle_compare = as_bool(di["oracle_compare"], "diagnostics.oracle_compare");
        if (di.contains("epsilon")) cfg.diagnostics.epsilon = as_double(di["epsilon"], "diagnostics.epsilon");
        if (cfg.diagnostics.oracle_compare) {
            const auto* pw = std::get_if<PairwiseSpec>(&cfg.functional);
            if (!pw || !pw->is_quadratic() || cfg.run.batch_size != 1 || cfg.run.sigma == 0.0)
                throw ConfigError(
                    "config: oracle_compare needs the quadratic pairwise functional with "
                    "batch_size 1 and sigma > 0");
        }
    }

    if (j.contains("bench")) {
        const auto& be = j["bench"];
        require_keys(be, "bench", {"grid_n", "grid_steps", "batch_size", "baseline"});
        BenchConfig bench;
        for (const auto& v : require(be, "bench", "grid_n")) bench.grid_n.push_back(as_count(v, "bench.grid_n[]"));
        for (const auto& v : require(be, "bench", "grid_steps"))
            bench.grid_steps.push_back(as_count(v, "bench.grid_steps[]"));
        if (be.contains("batch_size")) bench.batch_size = as_count(be["batch_size"], "bench.batch_size");
        if (be.contains("baseline")) bench.baseline = as_bool(be["baseline"], "bench.baseline");
        if (bench.grid_n.empty() || bench.grid_steps.empty())
            throw ConfigError("config: bench grid must be nonempty");
        cfg.bench = std::move(bench);
    }

    if (j.contains("plan")) {
        const auto& pl = j["plan"];
        require_keys(pl, "plan", {"epsilon", "initial_gap", "c_lsi"});
        PlanRequest plan;
        plan.epsilon = as_double(require(pl, "plan", "epsilon"), "plan.epsilon");
        if (pl.contains("initial_gap")) plan.initial_gap = as_double(pl["initial_gap"], "plan.initial_gap");
        if (pl.contains("c_lsi")) plan.c_lsi = as_double(pl["c_lsi"], "plan.c_lsi");
        cfg.plan = plan;
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
    }
    return parse_experiment_config(j, std::filesystem::path(path).parent_path());
}

// ---- schedule planning against the parsed config ----------------------------

inline SchedulePlan plan_from_config(const ExperimentConfig& cfg, const PlanRequest& request) {
    if (const auto* pw = std::get_if<PairwiseSpec>(&cfg.functional)) {
        if (!pw->is_quadratic() && !request.c_lsi)
            throw ConfigError("plan: non-quadratic pairwise specs need a supplied c_lsi");
        const double c_lsi = request.c_lsi ? *request.c_lsi : quadratic_lsi_constant(*pw);
        double kl0;
        if (request.initial_gap) {
            kl0 = *request.initial_gap;
        } else {
            const GaussianSummary init = GaussianSummary::isotropic(
                cfg.run.initial_mean(), cfg.run.init_scale * cfg.run.init_scale, cfg.run.dim);
            kl0 = kl_gaussian(init, quadratic_stationary(*pw));
        }
        return plan_schedule_pairwise(c_lsi, pw->l_v(), pw->l_w(), pw->sigma, pw->dim,
                                      request.epsilon, kl0);
    }
    const auto& mf = std::get<MfnnSpec>(cfg.functional);
    const std::optional<double> c_lsi = request.c_lsi ? request.c_lsi : cfg.c_lsi;
    if (!c_lsi) throw ConfigError("plan: the regression functional needs a supplied c_lsi");
    if (!request.initial_gap)
        throw ConfigError("plan: the regression functional needs a supplied initial_gap (E_0)");
    const double l_u = mfnn_combined_smoothness(mf.bound_b, mf.radius, mf.smoothness, mf.lambda,
                                                mf.bound_m);
    return plan_schedule_mfnn(*c_lsi, l_u, mf.sigma, mf.dim(), request.epsilon,
                              *request.initial_gap, mf.bound_m, mf.radius, mf.bound_b);
}

inline nlohmann::json plan_to_json(const SchedulePlan& plan) {
    return {{"eta", plan.eta},
            {"steps", plan.steps},
            {"epsilon", plan.epsilon},
            {"log_factor", plan.log_factor},
            {"eta_cap", plan.eta_cap},
            {"cap_margin", plan.cap_margin},
            {"c_lsi", plan.c_lsi},
            {"sigma", plan.sigma},
            {"dim", plan.dim},
            {"smoothness", plan.smoothness},
            {"initial_gap", plan.initial_gap},
            {"c0", plan.constants.c0},
            {"multiplier", plan.constants.multiplier}};
}

// ---- output files ------------------------------------------------------------

struct RunArtifacts {
    std::filesystem::path trace_csv;
    std::filesystem::path cloud_csv;
    std::filesystem::path witness_file;
    std::filesystem::path summary_json;
    nlohmann::json summary;
};

namespace detail {

inline std::string trace_csv_text(const DiagnosticsTrace& trace, std::uint64_t hash,
                                  bool pairwise_energy_names) {
    std::string text;
    text += "# schema=v1\n";
    text += "# config_hash=" + hash_hex(hash) + "\n";
    text += pairwise_energy_names ? "# energy_columns=v_part,w_part\n"
                                  : "# energy_columns=loss,ridge\n";
    text += "step,evals,mean_norm,cov_trace,energy_a,energy_b,entropy,oracle_kl,oracle_w2\n";
    auto cell = [](const std::optional<double>& v) { return v ? format_g17(*v) : std::string(); };
    for (const auto& row : trace.rows) {
        text += std::to_string(row.step) + ',' + std::to_string(row.eval_count_cumulative) + ',' +
                format_g17(row.empirical_mean_norm) + ',' + format_g17(row.empirical_cov_trace) +
                ',' + cell(row.energy_a) + ',' + cell(row.energy_b) + ',' +
                cell(row.entropy_estimate) + ',' + cell(row.oracle_kl) + ',' +
                cell(row.oracle_w2) + '\n';
    }
    return text;
}

inline std::string cloud_csv_text(const ParticleCloud& cloud, std::uint64_t hash) {
    std::string text;
    text += "# schema=v1\n";
    text += "# config_hash=" + hash_hex(hash) + "\n";
    for (Eigen::Index r = 0; r < cloud.dim(); ++r)
        text += (r ? "," : "") + std::string("x") + std::to_string(r);
    text += '\n';
    for (Eigen::Index c = 0; c < cloud.size(); ++c) {
        for (Eigen::Index r = 0; r < cloud.dim(); ++r)
            text += (r ? "," : "") + format_g17(cloud.positions(r, c));
        text += '\n';
    }
    return text;
}

}  // namespace detail

// Executes a configured run: virtual-particle dynamics, trace and cloud CSVs,
// the serialized witness, and a JSON summary carrying the assumption report
// and (for the quadratic case) the oracle comparison and a planner echo.
inline RunArtifacts run_experiment(const ExperimentConfig& cfg,
                                   const std::filesystem::path& out_dir, bool quiet = true) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string());

    const std::uint64_t hash = config_hash(cfg.run, cfg.functional);
    RunOptions options;
    options.trace.stride = cfg.diagnostics.trace_stride
                               ? cfg.diagnostics.trace_stride
                               : std::max<std::uint64_t>(1, cfg.run.steps / 100);
    options.trace.record_energy = cfg.diagnostics.record_energy;

    VpsaResult result = vpsa_run(cfg.run, cfg.functional, options);

    const auto* pw = std::get_if<PairwiseSpec>(&cfg.functional);
    const bool oracle_ok = cfg.diagnostics.oracle_compare && pw && pw->is_quadratic() &&
                           cfg.run.batch_size == 1 && cfg.run.sigma > 0.0;
    std::optional<double> oracle_kl_final, oracle_w2_final;
    if (oracle_ok) {
        const auto laws = affine_recursion_oracle(cfg.run, *pw);
        const GaussianSummary pi = quadratic_stationary(*pw);
        for (auto& row : result.trace.rows) {
            row.oracle_kl = kl_gaussian(laws[row.step], pi);
            row.oracle_w2 = w2_gaussian(laws[row.step], pi);
        }
        oracle_kl_final = result.trace.rows.back().oracle_kl;
        oracle_w2_final = result.trace.rows.back().oracle_w2;
    }

    RunArtifacts artifacts;
    artifacts.trace_csv = out_dir / "trace.csv";
    artifacts.cloud_csv = out_dir / "cloud.csv";
    artifacts.witness_file = out_dir / "witness.bin";
    artifacts.summary_json = out_dir / "summary.json";

    detail::write_text_file(artifacts.trace_csv,
                            detail::trace_csv_text(result.trace, hash, pw != nullptr));
    detail::write_text_file(artifacts.cloud_csv, detail::cloud_csv_text(result.cloud, hash));
    save_witness(result.witness, artifacts.witness_file.string());

    nlohmann::json summary;
    summary["schema"] = "vpsa-summary-v1";
    summary["subcommand"] = "run";
    summary["config_hash"] = hash_hex(hash);
    summary["timestamp_utc"] = detail::iso8601_now();
    const auto& last = result.trace.rows.back();
    summary["elapsed_s"] = last.elapsed_wall_s;
    summary["final"] = {{"step", last.step},
                        {"eval_count", last.eval_count_cumulative},
                        {"predicted_eval_count",
                         eval_count(cfg.run.particles, cfg.run.steps, cfg.run.batch_size)},
                        {"mean_norm", last.empirical_mean_norm},
                        {"cov_trace", last.empirical_cov_trace}};
    if (last.energy_a) summary["final"]["energy_a"] = *last.energy_a;
    if (last.energy_b) summary["final"]["energy_b"] = *last.energy_b;
    if (oracle_kl_final) summary["final"]["oracle_kl"] = *oracle_kl_final;
    if (oracle_w2_final) summary["final"]["oracle_w2"] = *oracle_w2_final;
    summary["epsilon"] = cfg.diagnostics.epsilon;
    summary["assumptions"] = check_assumptions(cfg.functional, cfg.c_lsi).to_json();

    summary["planner"] = nullptr;
    if (oracle_ok) {
        try {
            PlanRequest request;
            request.epsilon = cfg.diagnostics.epsilon;
            summary["planner"] = plan_to_json(plan_from_config(cfg, request));
        } catch (const ConfigError& e) {
            summary["planner_note"] = e.what();
        }
    }

    detail::write_text_file(artifacts.summary_json, summary.dump(2) + "\n");
    artifacts.summary = std::move(summary);
    if (!quiet) std::fprintf(stderr, "run: wrote %s\n", out_dir.string().c_str());
    return artifacts;
}

struct BenchRow {
    std::uint64_t n = 0, steps = 0, batch_size = 1;
    std::uint64_t predicted = 0, measured = 0;
    std::optional<std::uint64_t> baseline_measured;
    double wall_s = 0.0;
    std::uint64_t config_hash = 0;
};

struct BenchArtifacts {
    std::vector<BenchRow> rows;
    double loglog_slope = 0.0;
    bool slope_consistent = false;  // within +-15% of the eval-count predictor
    std::filesystem::path csv;
    std::filesystem::path summary_json;
};

// Sweeps the (n, T) grid, checking measured estimator invocations against the
// closed-form count and recording wall time per cell. The wall-time slope
// against the predictor is reported, not enforced; counts are the contract.
inline BenchArtifacts benchmark_complexity(const ExperimentConfig& cfg,
                                           const std::filesystem::path& out_dir) {
    if (!cfg.bench) throw ConfigError("bench: config has no bench section");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string());

    BenchArtifacts artifacts;
    std::vector<std::uint64_t> ns = cfg.bench->grid_n;
    std::vector<std::uint64_t> ts = cfg.bench->grid_steps;
    std::sort(ns.begin(), ns.end());
    std::sort(ts.begin(), ts.end());

    for (const auto n : ns) {
        for (const auto steps : ts) {
            RunConfig rc = cfg.run;
            rc.particles = n;
            rc.steps = steps;
            rc.batch_size = cfg.bench->batch_size;
            BenchRow row;
            row.n = n;
            row.steps = steps;
            row.batch_size = rc.batch_size;
            row.predicted = eval_count(n, steps, rc.batch_size);
            row.config_hash = config_hash(rc, cfg.functional);
            const auto result = vpsa_run(rc, cfg.functional, {});
            row.measured = result.trace.final_eval_count;
            row.wall_s = result.trace.rows.back().elapsed_wall_s;
            if (cfg.bench->baseline && n >= 1) {
                RunConfig bc = rc;
                bc.batch_size = 1;
                const auto baseline = pmkv_run(bc, cfg.functional, {});
                row.baseline_measured = baseline.trace.final_eval_count;
            }
            artifacts.rows.push_back(row);
        }
    }

    // log-log fit of wall time against predicted evals
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (const auto& row : artifacts.rows) {
        if (row.predicted == 0 || row.wall_s <= 0.0) continue;
        const double x = std::log(static_cast<double>(row.predicted));
        const double y = std::log(row.wall_s);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++m;
    }
    if (m >= 2 && sxx * static_cast<double>(m) - sx * sx > 1e-12) {
        artifacts.loglog_slope = (static_cast<double>(m) * sxy - sx * sy) /
                                 (static_cast<double>(m) * sxx - sx * sx);
        artifacts.slope_consistent = std::abs(artifacts.loglog_slope - 1.0) <= 0.15;
    }

    std::string csv =
        "# schema=v1\n"
        "n,steps,batch_size,predicted_evals,measured_evals,baseline_evals,wall_time_s,config_hash\n";
    for (const auto& row : artifacts.rows) {
        csv += std::to_string(row.n) + ',' + std::to_string(row.steps) + ',' +
               std::to_string(row.batch_size) + ',' + std::to_string(row.predicted) + ',' +
               std::to_string(row.measured) + ',' +
               (row.baseline_measured ? std::to_string(*row.baseline_measured) : std::string()) +
               ',' + detail::format_g17(row.wall_s) + ',' + hash_hex(row.config_hash) + '\n';
    }
    artifacts.csv = out_dir / "bench.csv";
    detail::write_text_file(artifacts.csv, csv);

    nlohmann::json summary;
    summary["schema"] = "vpsa-summary-v1";
    summary["subcommand"] = "bench";
    summary["timestamp_utc"] = detail::iso8601_now();
    summary["cells"] = artifacts.rows.size();
    bool all_exact = true;
    for (const auto& row : artifacts.rows) all_exact = all_exact && row.measured == row.predicted;
    summary["counts_exact"] = all_exact;
    summary["loglog_slope"] = artifacts.loglog_slope;
    summary["slope_consistent"] = artifacts.slope_consistent;
    artifacts.summary_json = out_dir / "bench_summary.json";
    detail::write_text_file(artifacts.summary_json, summary.dump(2) + "\n");
    return artifacts;
}

// Replays a stored witness into a fresh cloud CSV after verifying that it was
// produced under the same (config, functional).
inline std::filesystem::path resample_experiment(const ExperimentConfig& cfg,
                                                 const std::string& witness_path,
                                                 std::uint64_t n_extra, std::uint64_t seed_offset,
                                                 const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string());

    const WitnessPath witness = load_witness(witness_path);
    const auto replay = replay_from_witness(witness, n_extra, cfg.run, cfg.functional, seed_offset);
    const auto path = out_dir / "resampled.csv";
    detail::write_text_file(path, detail::cloud_csv_text(replay.cloud, witness.config_hash));
    return path;
}

}  // namespace vpsa
