// Experiment runner for the virtual-particle sampler: executes configured
// runs, witness resampling, complexity benchmarks, assumption checks, and
// schedule planning, emitting machine-readable CSV/JSON outputs.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "vpsa/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    bool quiet = false;
    std::int64_t seed_override = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON experiment config")->required();
    cmd->add_option("--out-dir", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed_override, "override run.master_seed");
    cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

vpsa::ExperimentConfig load(const CommonArgs& args) {
    auto cfg = vpsa::load_experiment_config(args.config_path);
    if (args.seed_override >= 0)
        cfg.run.master_seed = static_cast<std::uint64_t>(args.seed_override);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"virtual particle stochastic approximation toolkit"};
    app.require_subcommand(1);

    CommonArgs run_args, resample_args, bench_args, check_args, plan_args;
    std::string witness_path;
    std::uint64_t n_extra = 0, seed_offset = 0;

    auto* run_cmd = app.add_subcommand("run", "execute a configured run");
    add_common(run_cmd, run_args);

    auto* resample_cmd = app.add_subcommand("resample", "draw fresh samples from a stored witness");
    add_common(resample_cmd, resample_args);
    resample_cmd->add_option("--witness", witness_path, "witness file from a previous run")->required();
    resample_cmd->add_option("--n-extra", n_extra, "number of fresh samples")->required();
    resample_cmd->add_option("--seed-offset", seed_offset,
                             "first real-particle substream index for the replays");

    auto* bench_cmd = app.add_subcommand("bench", "evaluation-count and wall-time grid");
    add_common(bench_cmd, bench_args);

    auto* check_cmd = app.add_subcommand("check", "assumption checker (report only)");
    add_common(check_cmd, check_args);

    auto* plan_cmd = app.add_subcommand("plan", "step-size/step-count schedule planner");
    add_common(plan_cmd, plan_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            const auto cfg = load(run_args);
            const auto artifacts = vpsa::run_experiment(cfg, run_args.out_dir, run_args.quiet);
            if (!run_args.quiet)
                std::printf("%s\n", artifacts.summary.dump(2).c_str());
        } else if (resample_cmd->parsed()) {
            const auto cfg = load(resample_args);
            const auto path = vpsa::resample_experiment(cfg, witness_path, n_extra, seed_offset,
                                                        resample_args.out_dir);
            if (!resample_args.quiet) std::printf("wrote %s\n", path.string().c_str());
        } else if (bench_cmd->parsed()) {
            const auto cfg = load(bench_args);
            const auto artifacts = vpsa::benchmark_complexity(cfg, bench_args.out_dir);
            if (!bench_args.quiet)
                std::printf("bench: %zu cells, slope %.3f\n", artifacts.rows.size(),
                            artifacts.loglog_slope);
        } else if (check_cmd->parsed()) {
            const auto cfg = load(check_args);
            auto j = vpsa::check_assumptions(cfg.functional, cfg.c_lsi).to_json();
            j["config_hash"] = vpsa::hash_hex(vpsa::config_hash(cfg.run, cfg.functional));
            std::filesystem::create_directories(check_args.out_dir);
            vpsa::detail::write_text_file(std::filesystem::path(check_args.out_dir) / "check.json",
                                          j.dump(2) + "\n");
            if (!check_args.quiet) std::printf("%s\n", j.dump(2).c_str());
        } else if (plan_cmd->parsed()) {
            const auto cfg = load(plan_args);
            if (!cfg.plan) throw vpsa::ConfigError("plan: config has no plan section");
            auto j = vpsa::plan_to_json(vpsa::plan_from_config(cfg, *cfg.plan));
            j["config_hash"] = vpsa::hash_hex(vpsa::config_hash(cfg.run, cfg.functional));
            std::filesystem::create_directories(plan_args.out_dir);
            vpsa::detail::write_text_file(std::filesystem::path(plan_args.out_dir) / "plan.json",
                                          j.dump(2) + "\n");
            if (!plan_args.quiet) std::printf("%s\n", j.dump(2).c_str());
        }
    } catch (const vpsa::WitnessMismatchError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const vpsa::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const vpsa::DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDivergence;
    } catch (const vpsa::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
