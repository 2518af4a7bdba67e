// Command-line front door for the domain-generalization laboratory. Every
// subcommand is a thin wrapper over the library run drivers: parse flags,
// load the config, call the driver, print a short summary. The files written
// under --out carry the actual results, together with a manifest that makes
// the run replayable.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dglab/errors.hpp"
#include "dglab/io.hpp"
#include "dglab/runner.hpp"

namespace {

using dglab::k_exit_divergence;
using dglab::k_exit_invariant;
using dglab::k_exit_ok;
using dglab::k_exit_parse;
using dglab::k_exit_verification;

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    return dglab::detail::parse_config_text(dglab::read_text_file(path), path);
}

std::filesystem::path resolve_out(const std::string& out, const std::string& subcommand) {
    if (!out.empty()) return out;
    return std::filesystem::path("out") / subcommand;
}

int run_geometry_command(const std::string& config_path, bool worked_example,
                         const std::string& out) {
    const auto config =
        worked_example ? dglab::worked_example_geometry_config() : load_config(config_path);
    const auto out_dir = resolve_out(out, "geometry");
    const auto report = dglab::run_geometry(config, out_dir);

    for (const auto& fx : report.at("fixtures")) {
        std::cout << fx.at("name").get<std::string>()
                  << ": max pairwise divergence " << fx.at("max_pairwise").get<double>();
        if (fx.contains("target")) {
            const auto& condition = fx.at("target").at("condition");
            std::cout << ", condition slack " << condition.at("slack").get<double>()
                      << (condition.at("holds").get<bool>() ? " (holds)" : " (violated)");
        }
        std::cout << '\n';
    }
    std::cout << "wrote report.json, pairwise.csv, manifest.json to " << out_dir.string()
              << '\n';
    return k_exit_ok;
}

int run_train_command(const std::string& config_path, const std::string& mode,
                      std::optional<std::uint64_t> seed, const std::string& out) {
    const auto out_dir = resolve_out(out, "train");
    const auto result = dglab::run_train(load_config(config_path), out_dir,
                                         dglab::train_mode_from_string(mode), seed);

    const auto& last = result.epochs.back();
    std::cout << mode << " trained " << result.epochs.size() << " epochs: task loss "
              << last.mean_task_loss;
    if (last.target_accuracy >= 0.0) std::cout << ", target accuracy " << last.target_accuracy;
    std::cout << '\n'
              << "wrote metrics.csv, metrics.jsonl, checkpoint.json, manifest.json to "
              << out_dir.string() << '\n';
    return k_exit_ok;
}

int run_bound_command(const std::string& config_path, std::optional<std::uint64_t> seed,
                      const std::string& out) {
    auto config = load_config(config_path);
    if (seed) config["seed"] = *seed;
    const auto out_dir = resolve_out(out, "bound");
    const auto report = dglab::run_bound(config, out_dir);

    for (const char* key : {"mixture_hull", "ball_intersection"}) {
        const auto& r = report.at(key);
        std::cout << r.at("object_mode").get<std::string>() << ": total bound "
                  << r.at("total_bound").get<double>() << ", observed target error "
                  << r.at("observed_target_error").get<double>() << '\n';
    }
    std::cout << "wrote bound_report.json, bound_report.csv, manifest.json to "
              << out_dir.string() << '\n';
    return k_exit_ok;
}

int run_verify_command(const std::vector<std::string>& suites, std::size_t cases,
                       const std::string& out) {
    const auto known = dglab::suite_names();
    for (const auto& name : suites) {
        const bool ok = name == "prop2" ||
                        std::find(known.begin(), known.end(), name) != known.end();
        if (!ok) {
            std::cerr << "unknown verification suite: " << name << "\nknown suites:";
            for (const auto& k : known) std::cerr << ' ' << k;
            std::cerr << " prop2\n";
            return k_exit_parse;
        }
    }

    const auto out_dir = resolve_out(out, "verify");
    const auto outcome = dglab::run_verify(suites, out_dir, cases);
    for (const auto& result : outcome.results) {
        std::cout << result.suite << ":\n";
        for (const auto& line : result.lines) std::cout << "  " << line << '\n';
        std::cout << "  " << (result.checks - result.failures) << '/' << result.checks
                  << " checks passed\n";
    }
    std::cout << (outcome.ok ? "all suites passed" : "FAILURES detected") << '\n';
    return outcome.ok ? k_exit_ok : k_exit_verification;
}

int run_gen_data_command(const std::string& config_path, std::optional<std::uint64_t> seed,
                         const std::string& out) {
    const auto out_dir = resolve_out(out, "gen-data");
    const auto summary = dglab::run_gen_data(load_config(config_path), out_dir, seed);
    std::cout << "generated " << summary.at("source_count").get<std::size_t>()
              << " source domains plus target\n"
              << "wrote dataset.csv, dataset.json, manifest.json to " << out_dir.string()
              << '\n';
    return k_exit_ok;
}

int run_sweep_command(const std::string& config_path, const std::string& out) {
    const auto out_dir = resolve_out(out, "sweep");
    const auto summary = dglab::run_sweep(load_config(config_path), out_dir);
    std::cout << "completed " << summary.at("runs").size() << " runs\n"
              << "wrote summary.csv, summary.json, manifest.json to " << out_dir.string()
              << '\n';
    return k_exit_ok;
}

int run_replay_command(const std::string& manifest_path, const std::string& out) {
    const auto out_dir = resolve_out(out, "replay");
    const auto outcome = dglab::replay_run(manifest_path, out_dir);
    if (outcome.identical()) {
        std::cout << "replay of '" << outcome.manifest.subcommand
                  << "' run is byte identical\n";
        return k_exit_ok;
    }
    std::cerr << "replay differs from the original in " << outcome.differing.size()
              << " file(s):";
    for (const auto& name : outcome.differing) std::cerr << ' ' << name;
    std::cerr << '\n';
    return k_exit_verification;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exactly computable domain-generalization experiments"};
    app.require_subcommand(0, 1);

    std::string replay_manifest;
    std::string replay_out;
    app.add_option("--replay", replay_manifest,
                   "Rerun a finished run from its manifest.json and compare outputs");
    app.add_option("--out", replay_out, "Output directory for the replay")
        ->envname("DGLAB_OUT");

    std::string geometry_config, geometry_out;
    bool worked_example = false;
    auto* geometry = app.add_subcommand(
        "geometry", "Exact divergence geometry over histogram fixtures");
    auto* geometry_config_opt =
        geometry->add_option("--config", geometry_config, "Fixture file (JSON)");
    geometry->add_flag("--worked-example", worked_example,
                       "Use the built-in disjoint-uniforms fixture")
        ->excludes(geometry_config_opt);
    geometry->add_option("--out", geometry_out, "Output directory")->envname("DGLAB_OUT");

    std::string train_config, train_out, train_mode = "erm";
    std::uint64_t train_seed = 0;
    auto* train = app.add_subcommand("train", "Train on a synthetic multi-domain task");
    train->add_option("--config", train_config, "Run config (JSON)");
    train->add_option("--mode", train_mode, "Training mode")
        ->check(CLI::IsMember({"erm", "dann", "dannce"}));
    auto* train_seed_opt = train->add_option("--seed", train_seed, "Seed override");
    train->add_option("--out", train_out, "Output directory")->envname("DGLAB_OUT");

    std::string bound_config, bound_out;
    std::uint64_t bound_seed = 0;
    auto* bound = app.add_subcommand(
        "bound", "Target-error bound reports for both candidate objects");
    bound->add_option("--config", bound_config, "Bound instance (JSON)");
    auto* bound_seed_opt = bound->add_option("--seed", bound_seed, "Seed override");
    bound->add_option("--out", bound_out, "Output directory")->envname("DGLAB_OUT");

    std::vector<std::string> verify_suites;
    std::size_t verify_cases = 0;
    std::string verify_out;
    auto* verify = app.add_subcommand("verify", "Run self-check property suites");
    verify->add_option("suites", verify_suites, "Suite names (default: all)");
    verify->add_option("--cases", verify_cases, "Override the per-suite case count");
    verify->add_option("--out", verify_out, "Output directory")->envname("DGLAB_OUT");

    std::string gen_config, gen_out;
    std::uint64_t gen_seed = 0;
    auto* gen_data = app.add_subcommand("gen-data", "Materialize a synthetic task as files");
    gen_data->add_option("--config", gen_config, "Domain specs (JSON)");
    auto* gen_seed_opt = gen_data->add_option("--seed", gen_seed, "Seed override");
    gen_data->add_option("--out", gen_out, "Output directory")->envname("DGLAB_OUT");

    std::string sweep_config, sweep_out;
    auto* sweep = app.add_subcommand("sweep", "Fan a seed-by-mode grid across workers");
    sweep->add_option("--config", sweep_config, "Sweep config (JSON)");
    sweep->add_option("--out", sweep_out, "Output directory")->envname("DGLAB_OUT");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? k_exit_ok : k_exit_parse;
    }

    try {
        if (geometry->parsed())
            return run_geometry_command(geometry_config, worked_example, geometry_out);
        if (train->parsed())
            return run_train_command(
                train_config, train_mode,
                train_seed_opt->count() ? std::optional<std::uint64_t>(train_seed)
                                        : std::nullopt,
                train_out);
        if (bound->parsed())
            return run_bound_command(bound_config,
                                     bound_seed_opt->count()
                                         ? std::optional<std::uint64_t>(bound_seed)
                                         : std::nullopt,
                                     bound_out);
        if (verify->parsed()) return run_verify_command(verify_suites, verify_cases, verify_out);
        if (gen_data->parsed())
            return run_gen_data_command(
                gen_config,
                gen_seed_opt->count() ? std::optional<std::uint64_t>(gen_seed) : std::nullopt,
                gen_out);
        if (sweep->parsed()) return run_sweep_command(sweep_config, sweep_out);
        if (!replay_manifest.empty()) return run_replay_command(replay_manifest, replay_out);
        std::cerr << app.help();
        return k_exit_parse;
    } catch (const dglab::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return k_exit_parse;
    } catch (const dglab::TrainingDivergenceError& e) {
        std::cerr << "training diverged: " << e.what();
        if (e.epoch >= 0) std::cerr << " (epoch " << e.epoch << ")";
        std::cerr << '\n';
        return k_exit_divergence;
    } catch (const dglab::DegenerateObjectError& e) {
        std::cerr << "degenerate object: " << e.what() << '\n';
        return k_exit_divergence;
    } catch (const dglab::InvalidInputError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return k_exit_invariant;
    } catch (const dglab::ContractViolation& e) {
        std::cerr << "contract violation: " << e.what() << '\n';
        return k_exit_invariant;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
