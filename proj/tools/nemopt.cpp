// Command-line front end: scenario runs, sweeps, the bound alone, lattice
// certification, timing and the forecast-noise study.
//
// Exit codes: 0 success, 2 invalid input or failed certification,
// 3 solver non-convergence, 1 anything else.

#include "nemopt/harness/experiments.hpp"
#include "nemopt/harness/results.hpp"
#include "nemopt/harness/scenario.hpp"
#include "nemopt/oracle.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

using namespace nemopt;
using namespace nemopt::harness;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitSolver = 3;

struct Common {
    std::string config;
    std::string trace;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string format = "records";
    unsigned parallel = 1;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--config", c.config, "scenario config (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--trace", c.trace, "CSV trace, overrides the config's trace")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "output directory (default: stdout)");
    cmd->add_option("--seed", c.seed, "overrides the config seed");
    cmd->add_option("--format", c.format, "stdout format")
        ->check(CLI::IsMember({"records", "table"}));
    cmd->add_option("--parallel", c.parallel, "worker threads for sweeps")
        ->check(CLI::Range(1u, 256u));
}

ScenarioSpec load(const Common& c)
{
    ScenarioSpec spec = c.config.empty() ? ScenarioSpec{} : load_scenario(c.config);
    if (!c.trace.empty()) {
        spec.trace_csv = std::filesystem::path(c.trace);
    }
    if (c.seed) {
        spec.seed = *c.seed;
    }
    spec.validate();
    return spec;
}

std::optional<std::filesystem::path> out_dir(const Common& c)
{
    if (c.out.empty()) {
        return std::nullopt;
    }
    return std::filesystem::path(c.out);
}

// With --out every artifact is written; otherwise only the chosen format
// goes to stdout.
void publish(const Common& c, std::string records, std::string table, std::string timings = {})
{
    const bool as_table = output_format_from_string(c.format) == OutputFormat::table;
    if (c.out.empty()) {
        emit(std::nullopt, {{"", as_table ? table : records}});
        return;
    }
    std::vector<Artifact> arts{{"records.jsonl", std::move(records)},
                               {"summary.txt", std::move(table)}};
    if (!timings.empty()) {
        arts.push_back({"timings.jsonl", std::move(timings)});
    }
    emit(out_dir(c), arts);
}

int gap_exit(const std::vector<GapReport>& reports)
{
    for (const auto& r : reports) {
        if (!r.oracle_dominates) {
            std::cerr << "error: a policy beat the upper bound in scenario '" << r.scenario
                      << "' (" << r.axis << " = " << r.axis_value << ")\n";
            return kExitInvalid;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Demand and battery co-optimization under net metering with demand charges"};
    app.require_subcommand(1);

    Common run_opts, sweep_opts, oracle_opts, bench_opts, noise_opts, validate_opts;

    auto* run = app.add_subcommand("run", "run one scenario and score it against the bound");
    add_common(run, run_opts);

    auto* sw = app.add_subcommand("sweep", "run every value of the config's sweep axis");
    add_common(sw, sweep_opts);

    auto* orc = app.add_subcommand("oracle", "perfect-foresight upper bound only");
    add_common(orc, oracle_opts);

    auto* bench = app.add_subcommand("bench", "LSPS and oracle wall-clock against horizon");
    add_common(bench, bench_opts);
    std::vector<std::size_t> horizons{240, 2400, 24000};
    std::size_t oracle_max = 240;
    std::size_t repeats = 5;
    bench->add_option("--horizons", horizons, "horizon lengths")->delimiter(',');
    bench->add_option("--oracle-max", oracle_max, "largest horizon for timing the oracle");
    bench->add_option("--repeats", repeats, "timing repeats (minimum is kept)")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1000}));

    auto* noise = app.add_subcommand("noise", "LSPS surplus against forecast noise");
    add_common(noise, noise_opts);
    std::vector<double> sigmas{0.0, 0.1, 0.2, 0.4};
    std::size_t seeds = 30;
    noise->add_option("--sigmas", sigmas, "relative noise levels")->delimiter(',');
    noise->add_option("--seeds", seeds, "seeds per level")
        ->check(CLI::Range(std::size_t{2}, std::size_t{100000}));

    auto* val = app.add_subcommand("validate", "structural certification on lattice instances");
    add_common(val, validate_opts);
    std::size_t instances = 20;
    val->add_option("--instances", instances, "random instances per suite")
        ->check(CLI::Range(std::size_t{1}, std::size_t{10000}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInvalid;
    }

    try {
        if (run->parsed()) {
            const auto spec = load(run_opts);
            std::vector<GapReport> reports{run_scenario(spec)};
            publish(run_opts, gap_records(spec, reports), gap_table(reports), gap_timings(reports));
            return gap_exit(reports);
        }
        if (sw->parsed()) {
            const auto spec = load(sweep_opts);
            const auto reports = sweep(spec, sweep_opts.parallel);
            publish(sweep_opts, gap_records(spec, reports), gap_table(reports),
                    gap_timings(reports));
            return gap_exit(reports);
        }
        if (orc->parsed()) {
            const auto spec = load(oracle_opts);
            const auto sol = oracle::deterministic_upper_bound(build_problem(spec, resolve_trace(spec)));
            publish(oracle_opts, oracle_records(spec, sol), oracle_table(sol));
            return 0;
        }
        if (bench->parsed()) {
            const auto spec = load(bench_opts);
            const auto rep = timing_benchmark(spec, horizons, oracle_max, repeats);
            publish(bench_opts, timing_records(rep), timing_table(rep));
            return 0;
        }
        if (noise->parsed()) {
            const auto spec = load(noise_opts);
            const auto study = noise_study(spec, sigmas, seeds);
            publish(noise_opts, noise_records(spec, study), noise_table(study));
            return 0;
        }
        if (val->parsed()) {
            const std::uint64_t seed = validate_opts.seed.value_or(1);
            const auto cert = certify_random(instances, seed);
            const auto cross = cross_oracle_random(instances, seed + 1);
            const auto nm = dpv::nonmyopia_counterexamples();
            publish(validate_opts, certification_records(cert, cross, nm),
                    certification_table(cert, cross, nm));
            bool ok = nm.passed();
            for (const auto& c : cert) {
                ok = ok && c.passed();
            }
            for (const auto& c : cross) {
                ok = ok && c.within_bound && c.ub_dominates;
            }
            if (!ok) {
                std::cerr << "error: certification failed\n";
            }
            return ok ? 0 : kExitInvalid;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const oracle::SolverError& e) {
        std::cerr << "error: " << e.what() << " (status " << e.diagnostics.status << ", "
                  << e.diagnostics.iterations << " iterations)\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
