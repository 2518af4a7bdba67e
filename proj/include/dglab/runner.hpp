#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dglab/bounds.hpp"
#include "dglab/contraction.hpp"
#include "dglab/divergence.hpp"
#include "dglab/errors.hpp"
#include "dglab/histogram.hpp"
#include "dglab/io.hpp"
#include "dglab/manifest.hpp"
#include "dglab/rng.hpp"
#include "dglab/synthetic.hpp"
#include "dglab/training.hpp"
#include "dglab/verify.hpp"

namespace dglab {

// ============================================================================
// Run drivers shared by the command-line tool and the test suites. Each
// driver takes a JSON config and an output directory, writes its reports plus
// a manifest, and returns the report for the caller to print. Runs are
// deterministic functions of (config, seed, mode), which is what makes
// manifest replay meaningful.
// ============================================================================

inline constexpr int k_exit_ok = 0;
inline constexpr int k_exit_parse = 2;
inline constexpr int k_exit_invariant = 3;
inline constexpr int k_exit_divergence = 4;
inline constexpr int k_exit_verification = 5;

inline constexpr std::uint64_t k_data_seed_tag = 0xda7au;
inline constexpr std::uint64_t k_init_seed_tag = 0x791eu;

namespace detail {

inline nlohmann::json parse_config_text(const std::string& text, const std::string& what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(what + ": " + e.what());
    }
}

// Field extraction with ParseError on shape mismatches, so malformed configs
// exit as parse failures rather than internal errors.
template <typename T>
T get_field(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config field '" + key + "': " + e.what());
    }
}

template <typename T>
T require_field(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw ParseError("config is missing required field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config field '" + key + "': " + e.what());
    }
}

}  // namespace detail

// ----------------------------------------------------------------------------
// geometry: exact divergence geometry over histogram fixtures.
// ----------------------------------------------------------------------------

// The two disjoint unit uniforms with the straddling target: the fixture the
// documentation walks through, available without a config file.
inline nlohmann::json worked_example_geometry_config() {
    const nlohmann::json u02 = HistogramDistribution::uniform(0.0, 2.0);
    const nlohmann::json u24 = HistogramDistribution::uniform(2.0, 4.0);
    const nlohmann::json u13 = HistogramDistribution::uniform(1.0, 3.0);
    return nlohmann::json{
        {"fixtures", nlohmann::json::array({nlohmann::json{{"name", "disjoint-uniforms"},
                                                           {"sources", {u02, u24}},
                                                           {"target", u13}}})}};
}

inline nlohmann::json run_geometry(const nlohmann::json& config,
                                   const std::filesystem::path& out_dir,
                                   std::size_t mixture_resolution = 50) {
    const auto fixtures = detail::get_field<nlohmann::json>(config, "fixtures",
                                                            nlohmann::json::array());
    if (!fixtures.is_array()) throw ParseError("geometry config: 'fixtures' must be an array");

    nlohmann::json report = nlohmann::json::array();
    std::ostringstream pairwise_csv;
    pairwise_csv << "fixture,source_i,source_j,divergence\n";

    for (const auto& fx : fixtures) {
        const std::string name = detail::get_field<std::string>(fx, "name", "fixture");
        auto sources = detail::require_field<std::vector<HistogramDistribution>>(fx, "sources");
        if (sources.size() < 2)
            throw InvalidInputError("geometry fixture '" + name + "': need >= 2 sources");
        const std::size_t k = sources.size();

        auto phi = detail::get_field<std::vector<double>>(fx, "phi", {});
        if (phi.empty()) phi = uniform_weights(k);
        const SourceCollection collection = SourceCollection::with_uniform_weights(sources);

        nlohmann::json entry;
        entry["name"] = name;
        entry["source_count"] = k;

        nlohmann::json pairwise = nlohmann::json::array();
        double rho = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t j = 0; j < k; ++j) {
                const double d =
                    i == j ? 0.0 : exact_interval_divergence(sources[i], sources[j]).value;
                row.push_back(d);
                rho = std::max(rho, d);
                if (i < j)
                    pairwise_csv << name << ',' << i << ',' << j << ',' << format_double(d)
                                 << '\n';
            }
            pairwise.push_back(std::move(row));
        }
        entry["pairwise"] = std::move(pairwise);
        entry["max_pairwise"] = rho;

        if (fx.contains("target")) {
            const auto target = detail::require_field<HistogramDistribution>(fx, "target");
            nlohmann::json tgt;
            nlohmann::json divergences = nlohmann::json::array();
            for (const auto& s : sources)
                divergences.push_back(exact_interval_divergence(s, target).value);
            tgt["source_divergences"] = std::move(divergences);

            double mixture_min = std::numeric_limits<double>::infinity();
            for (const auto& w : simplex_grid(k, mixture_resolution))
                mixture_min = std::min(
                    mixture_min, exact_interval_divergence(mixture(collection, w), target).value);
            tgt["mixture_min_divergence"] = mixture_min;

            const auto condition = check_condition(collection, target, phi);
            tgt["condition"] = nlohmann::json{{"lhs", condition.lhs},
                                              {"rhs", condition.rhs},
                                              {"slack", condition.slack},
                                              {"holds", condition.holds}};
            tgt["in_ball_intersection"] = intersection_membership(collection, target);
            entry["target"] = std::move(tgt);
        }
        report.push_back(std::move(entry));
    }

    const nlohmann::json full = nlohmann::json{{"fixtures", report}};
    write_text_file(out_dir / "report.json", full.dump(2) + "\n");
    write_text_file(out_dir / "pairwise.csv", pairwise_csv.str());

    RunManifest manifest;
    manifest.subcommand = "geometry";
    manifest.config = config;
    manifest.config_sha256 = sha256_hex(config.dump());
    record_output(manifest, out_dir, "report.json");
    record_output(manifest, out_dir, "pairwise.csv");
    write_manifest(manifest, out_dir);
    return full;
}

// ----------------------------------------------------------------------------
// train: one training run on a synthetic multi-domain task.
// ----------------------------------------------------------------------------

inline TrainingConfig parse_training_config(const nlohmann::json& j) {
    TrainingConfig config;
    config.epochs = detail::get_field<int>(j, "epochs", config.epochs);
    config.batch_size = detail::get_field<int>(j, "batch_size", config.batch_size);
    config.learning_rate = detail::get_field<double>(j, "learning_rate", config.learning_rate);
    config.lr_decay_factor =
        detail::get_field<double>(j, "lr_decay_factor", config.lr_decay_factor);
    config.lr_decay_fraction =
        detail::get_field<double>(j, "lr_decay_fraction", config.lr_decay_fraction);
    config.kappa = detail::get_field<double>(j, "kappa", config.kappa);
    config.entropy_weight = detail::get_field<double>(j, "entropy_weight", config.entropy_weight);
    if (j.contains("lambda_schedule"))
        config.lambda_schedule =
            lambda_schedule_from_string(detail::require_field<std::string>(j, "lambda_schedule"));
    config.lambda_value = detail::get_field<double>(j, "lambda_value", config.lambda_value);
    config.phi = detail::get_field<std::vector<double>>(j, "phi", {});
    config.track_pairwise_proxy =
        detail::get_field<bool>(j, "track_pairwise_proxy", config.track_pairwise_proxy);
    if (j.contains("cooperative")) {
        const auto& c = j.at("cooperative");
        config.cooperative.fraction =
            detail::get_field<double>(c, "fraction", config.cooperative.fraction);
        config.cooperative.steps = detail::get_field<int>(c, "steps", config.cooperative.steps);
        config.cooperative.step_size =
            detail::get_field<double>(c, "step_size", config.cooperative.step_size);
        config.cooperative.anchor_weight =
            detail::get_field<double>(c, "anchor_weight", config.cooperative.anchor_weight);
        config.cooperative.use_anchor =
            detail::get_field<bool>(c, "use_anchor", config.cooperative.use_anchor);
    }
    return config;
}

inline std::vector<DomainSpec> parse_domain_specs(const nlohmann::json& config) {
    if (!config.contains("domains")) return default_benchmark_specs();
    return detail::require_field<std::vector<DomainSpec>>(config, "domains");
}

namespace detail {

inline std::string metrics_csv(const std::vector<EpochMetrics>& epochs) {
    std::ostringstream out;
    out << "epoch,lambda,learning_rate,task_loss,domain_loss,entropy";
    const std::size_t k = epochs.empty() ? 0 : epochs.front().source_accuracies.size();
    for (std::size_t i = 0; i < k; ++i) out << ",source_accuracy_" << i;
    out << ",target_accuracy,cooperative_domain_loss_original,cooperative_domain_loss_updated,"
           "cooperative_min_batch_slack,cooperative_descent_ok,mean_anchor_drift";
    const std::size_t proxies = epochs.empty() ? 0 : epochs.front().pairwise_proxy.size();
    for (std::size_t i = 0; i < proxies; ++i) out << ",pairwise_proxy_" << i;
    out << '\n';
    for (const auto& m : epochs) {
        out << m.epoch << ',' << format_double(m.lambda) << ',' << format_double(m.learning_rate)
            << ',' << format_double(m.mean_task_loss) << ',' << format_double(m.mean_domain_loss)
            << ',' << format_double(m.mean_entropy);
        for (double a : m.source_accuracies) out << ',' << format_double(a);
        out << ',' << format_double(m.target_accuracy) << ','
            << format_double(m.cooperative_domain_loss_original) << ','
            << format_double(m.cooperative_domain_loss_updated) << ','
            << format_double(m.cooperative_min_batch_slack) << ','
            << (m.cooperative_descent_ok ? 1 : 0) << ',' << format_double(m.mean_anchor_drift);
        for (double p : m.pairwise_proxy) out << ',' << format_double(p);
        out << '\n';
    }
    return out.str();
}

}  // namespace detail

inline TrainResult run_train(const nlohmann::json& config, const std::filesystem::path& out_dir,
                             TrainMode mode, std::optional<std::uint64_t> seed_override = {}) {
    const std::uint64_t seed =
        seed_override ? *seed_override : detail::get_field<std::uint64_t>(config, "seed", 0);

    const BenchmarkTask task =
        config.contains("dataset")
            ? read_dataset(detail::require_field<std::string>(config, "dataset"))
            : generate_benchmark(parse_domain_specs(config), derive_seed(seed, k_data_seed_tag));

    TripleArchitecture arch;
    arch.input_dim = task.specs.front().feature_dim();
    arch.class_count = static_cast<std::size_t>(task.specs.front().classes);
    arch.domain_count = task.source_count();
    if (config.contains("architecture")) {
        const auto& a = config.at("architecture");
        arch.hidden_width = detail::get_field<std::size_t>(a, "hidden_width", arch.hidden_width);
        arch.representation_dim =
            detail::get_field<std::size_t>(a, "representation_dim", arch.representation_dim);
        arch.head_hidden_width =
            detail::get_field<std::size_t>(a, "head_hidden_width", arch.head_hidden_width);
    }
    Rng init_rng(derive_seed(seed, k_init_seed_tag));
    NetworkTriple triple = make_triple(arch, init_rng);

    TrainingConfig training =
        parse_training_config(detail::get_field<nlohmann::json>(config, "training",
                                                                nlohmann::json::object()));
    training.seed = seed;

    TrainResult result = train(std::move(triple), task.sources, &task.target, training, mode);

    write_text_file(out_dir / "metrics.csv", detail::metrics_csv(result.epochs));

    std::ostringstream jsonl;
    for (const auto& m : result.epochs) {
        nlohmann::json mj;
        to_json(mj, m);
        jsonl << mj.dump() << '\n';
    }
    write_text_file(out_dir / "metrics.jsonl", jsonl.str());

    nlohmann::json checkpoint;
    checkpoint["mode"] = to_string(mode);
    checkpoint["seed"] = seed;
    checkpoint["epochs_trained"] = result.epochs.size();
    checkpoint["triple"] = result.triple;
    write_text_file(out_dir / "checkpoint.json", checkpoint.dump(2) + "\n");

    RunManifest manifest;
    manifest.subcommand = "train";
    manifest.mode = to_string(mode);
    manifest.seed = seed;
    manifest.config = config;
    manifest.config_sha256 = sha256_hex(config.dump());
    record_output(manifest, out_dir, "metrics.csv");
    record_output(manifest, out_dir, "metrics.jsonl");
    record_output(manifest, out_dir, "checkpoint.json");
    write_manifest(manifest, out_dir);
    return result;
}

// ----------------------------------------------------------------------------
// bound: target-error bound reports, both candidate objects side by side.
// ----------------------------------------------------------------------------

inline nlohmann::json worked_example_bound_config() {
    return nlohmann::json{{"sources", {HistogramDistribution::uniform(0.0, 2.0),
                                       HistogramDistribution::uniform(2.0, 4.0)}},
                          {"source_cuts", {1.0, 3.0}},
                          {"target", HistogramDistribution::uniform(1.0, 3.0)},
                          {"target_cut", 2.0},
                          {"hypothesis_cut", 2.0}};
}

inline nlohmann::json run_bound(const nlohmann::json& raw_config,
                                const std::filesystem::path& out_dir) {
    const nlohmann::json config =
        raw_config.is_object() && !raw_config.empty() ? raw_config
                                                      : worked_example_bound_config();

    HistogramBoundInstance instance{
        .sources = detail::require_field<std::vector<HistogramDistribution>>(config, "sources"),
        .target = detail::require_field<HistogramDistribution>(config, "target"),
        .source_cuts = detail::require_field<std::vector<double>>(config, "source_cuts"),
        .target_cut = detail::require_field<double>(config, "target_cut"),
        .phi = detail::get_field<std::vector<double>>(config, "phi", {})};
    const double hypothesis_cut = detail::require_field<double>(config, "hypothesis_cut");
    const std::size_t resolution =
        detail::get_field<std::size_t>(config, "grid_resolution", 50);
    const std::size_t perturbations =
        detail::get_field<std::size_t>(config, "perturbations", 200);
    const std::uint64_t seed = detail::get_field<std::uint64_t>(config, "seed", 0);

    nlohmann::json report;
    report["hypothesis_cut"] = hypothesis_cut;
    std::ostringstream csv;
    csv << "object_mode,lambda_phi,weighted_source_error,min_divergence_to_target,"
           "max_pairwise_source_divergence,total_bound,observed_target_error\n";

    const auto emit = [&](const BoundReport& r) {
        csv << r.object_mode << ',' << format_double(r.lambda_phi) << ','
            << format_double(r.weighted_source_error) << ','
            << format_double(r.min_divergence_to_target) << ','
            << format_double(r.max_pairwise_source_divergence) << ','
            << format_double(r.total_bound) << ',' << format_double(r.observed_target_error)
            << '\n';
    };

    for (const auto mode : {ObjectMode::mixture_hull, ObjectMode::ball_intersection}) {
        BoundReport r;
        try {
            r = histogram_bound_report(instance, hypothesis_cut, mode, resolution, perturbations,
                                       seed);
        } catch (const DegenerateObjectError& e) {
            throw DegenerateObjectError(std::string(e.what()) + " (object_mode=" +
                                        to_string(mode) + ", grid_resolution=" +
                                        std::to_string(resolution) + ")");
        }
        report[to_string(mode) == "mixture-hull" ? "mixture_hull" : "ball_intersection"] = r;
        emit(r);
    }

    nlohmann::json pairs = nlohmann::json::array();
    for (std::size_t i = 0; i < instance.sources.size(); ++i) {
        const auto r = histogram_pair_bound_report(instance.sources[i], instance.source_cuts[i],
                                                   instance.target, instance.target_cut,
                                                   hypothesis_cut);
        pairs.push_back(r);
        emit(r);
    }
    report["pairs"] = std::move(pairs);

    write_text_file(out_dir / "bound_report.json", report.dump(2) + "\n");
    write_text_file(out_dir / "bound_report.csv", csv.str());

    RunManifest manifest;
    manifest.subcommand = "bound";
    manifest.seed = seed;
    manifest.config = config;
    manifest.config_sha256 = sha256_hex(config.dump());
    record_output(manifest, out_dir, "bound_report.json");
    record_output(manifest, out_dir, "bound_report.csv");
    write_manifest(manifest, out_dir);
    return report;
}

// ----------------------------------------------------------------------------
// verify: named property suites with per-property pass counts.
// ----------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const SuiteResult& r) {
    j = nlohmann::json{
        {"suite", r.suite}, {"checks", r.checks}, {"failures", r.failures}, {"lines", r.lines}};
}

struct VerifyOutcome {
    std::vector<SuiteResult> results;
    bool ok = true;
};

inline VerifyOutcome run_verify(const std::vector<std::string>& names,
                                const std::filesystem::path& out_dir, std::size_t cases = 0) {
    const auto selected = names.empty() ? suite_names() : names;

    VerifyOutcome outcome;
    for (const auto& name : selected) {
        outcome.results.push_back(run_suite(name, cases));
        outcome.ok = outcome.ok && outcome.results.back().ok();
    }

    nlohmann::json report;
    report["suites"] = outcome.results;
    report["ok"] = outcome.ok;
    write_text_file(out_dir / "verify_report.json", report.dump(2) + "\n");

    nlohmann::json config;
    config["suites"] = selected;
    if (cases != 0) config["cases"] = cases;

    RunManifest manifest;
    manifest.subcommand = "verify";
    manifest.config = config;
    manifest.config_sha256 = sha256_hex(config.dump());
    record_output(manifest, out_dir, "verify_report.json");
    write_manifest(manifest, out_dir);
    return outcome;
}

// ----------------------------------------------------------------------------
// gen-data: materialize a synthetic task as a dataset file that the train
// subcommand can consume via its "dataset" config key.
// ----------------------------------------------------------------------------

inline nlohmann::json run_gen_data(const nlohmann::json& config,
                                   const std::filesystem::path& out_dir,
                                   std::optional<std::uint64_t> seed_override = {}) {
    const std::uint64_t seed =
        seed_override ? *seed_override : detail::get_field<std::uint64_t>(config, "seed", 0);
    const auto specs = parse_domain_specs(config);
    const BenchmarkTask task = generate_benchmark(specs, derive_seed(seed, k_data_seed_tag));

    write_dataset(out_dir / "dataset.csv", task);

    nlohmann::json summary;
    summary["seed"] = seed;
    summary["specs"] = task.specs;
    summary["source_count"] = task.source_count();
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& s : task.sources) counts.push_back(s.size());
    summary["source_points"] = std::move(counts);
    summary["target_points"] = task.target.size();
    write_text_file(out_dir / "dataset.json", summary.dump(2) + "\n");

    RunManifest manifest;
    manifest.subcommand = "gen-data";
    manifest.seed = seed;
    manifest.config = config;
    manifest.config_sha256 = sha256_hex(config.dump());
    record_output(manifest, out_dir, "dataset.csv");
    record_output(manifest, out_dir, "dataset.json");
    write_manifest(manifest, out_dir);
    return summary;
}

// ----------------------------------------------------------------------------
// sweep: a mode-by-seed grid of training runs across worker threads. Each
// individual run is single-threaded and seeded, so the fan-out changes only
// wall time, never results.
// ----------------------------------------------------------------------------

struct SweepTask {
    std::size_t index = 0;
    TrainMode mode = TrainMode::erm;
    std::uint64_t seed = 0;
};

inline nlohmann::json run_sweep(const nlohmann::json& config,
                                const std::filesystem::path& out_dir) {
    const auto mode_names = detail::get_field<std::vector<std::string>>(
        config, "modes", {"erm", "dann", "dannce"});
    std::vector<TrainMode> modes;
    for (const auto& name : mode_names) modes.push_back(train_mode_from_string(name));
    const auto seeds =
        detail::get_field<std::vector<std::uint64_t>>(config, "seeds", {1, 2, 3, 4, 5});
    if (modes.empty() || seeds.empty())
        throw ParseError("sweep config: 'modes' and 'seeds' must be nonempty");
    const nlohmann::json train_config =
        detail::get_field<nlohmann::json>(config, "train", nlohmann::json::object());
    const std::size_t worker_count = std::max<std::size_t>(
        1, detail::get_field<std::size_t>(config, "workers",
                                          std::thread::hardware_concurrency()));

    std::vector<SweepTask> tasks;
    for (std::size_t si = 0; si < seeds.size(); ++si)
        for (std::size_t mi = 0; mi < modes.size(); ++mi)
            tasks.push_back(SweepTask{si * modes.size() + mi, modes[mi], seeds[si]});

    std::vector<std::optional<TrainResult>> results(tasks.size());
    std::vector<std::exception_ptr> failures(tasks.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            char run_name[16];
            std::snprintf(run_name, sizeof(run_name), "run_%03zu", tasks[i].index);
            try {
                results[i] = run_train(train_config, out_dir / run_name, tasks[i].mode,
                                       tasks[i].seed);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };

    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(worker_count, tasks.size()); ++w)
        pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    for (const auto& failure : failures)
        if (failure) std::rethrow_exception(failure);

    std::ostringstream csv;
    csv << "index,mode,seed,final_target_accuracy,final_task_loss,final_domain_loss,run_dir\n";
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& last = results[i]->epochs.back();
        char run_name[16];
        std::snprintf(run_name, sizeof(run_name), "run_%03zu", tasks[i].index);
        csv << tasks[i].index << ',' << to_string(tasks[i].mode) << ',' << tasks[i].seed << ','
            << format_double(last.target_accuracy) << ',' << format_double(last.mean_task_loss)
            << ',' << format_double(last.mean_domain_loss) << ',' << run_name << '\n';
        rows.push_back(nlohmann::json{{"index", tasks[i].index},
                                      {"mode", to_string(tasks[i].mode)},
                                      {"seed", tasks[i].seed},
                                      {"final_target_accuracy", last.target_accuracy},
                                      {"final_task_loss", last.mean_task_loss},
                                      {"final_domain_loss", last.mean_domain_loss},
                                      {"run_dir", run_name}});
    }
    const nlohmann::json summary = nlohmann::json{{"runs", rows}};
    write_text_file(out_dir / "summary.csv", csv.str());
    write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");

    RunManifest manifest;
    manifest.subcommand = "sweep";
    manifest.config = config;
    manifest.config_sha256 = sha256_hex(config.dump());
    record_output(manifest, out_dir, "summary.csv");
    record_output(manifest, out_dir, "summary.json");
    write_manifest(manifest, out_dir);
    return summary;
}

// ----------------------------------------------------------------------------
// replay: rerun a manifest into a fresh directory and compare byte for byte.
// ----------------------------------------------------------------------------

struct ReplayOutcome {
    RunManifest manifest;
    std::vector<std::string> differing;  // empty means identical

    bool identical() const { return differing.empty(); }
};

inline ReplayOutcome replay_run(const std::filesystem::path& manifest_path,
                                const std::filesystem::path& replay_dir) {
    const RunManifest manifest = load_manifest(manifest_path);
    const auto original_dir = manifest_path.parent_path();

    if (manifest.subcommand == "geometry") {
        run_geometry(manifest.config, replay_dir);
    } else if (manifest.subcommand == "train") {
        run_train(manifest.config, replay_dir, train_mode_from_string(manifest.mode),
                  manifest.seed);
    } else if (manifest.subcommand == "bound") {
        run_bound(manifest.config, replay_dir);
    } else if (manifest.subcommand == "verify") {
        const auto names =
            detail::get_field<std::vector<std::string>>(manifest.config, "suites", {});
        const auto cases = detail::get_field<std::size_t>(manifest.config, "cases", 0);
        run_verify(names, replay_dir, cases);
    } else if (manifest.subcommand == "gen-data") {
        run_gen_data(manifest.config, replay_dir, manifest.seed);
    } else if (manifest.subcommand == "sweep") {
        run_sweep(manifest.config, replay_dir);
    } else {
        throw ParseError("manifest: unknown subcommand '" + manifest.subcommand + "'");
    }

    ReplayOutcome outcome{manifest, compare_run_outputs(manifest, original_dir, replay_dir)};
    if (read_text_file(manifest_path) != read_text_file(replay_dir / "manifest.json"))
        outcome.differing.push_back("manifest.json");
    return outcome;
}

}  // namespace dglab
