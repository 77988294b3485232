#include "nemopt/harness/experiments.hpp"

#include "nemopt/baselines.hpp"
#include "nemopt/lsps.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace nemopt::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<ControlAction> applied_actions(const EpisodeLedger& ledger)
{
    std::vector<ControlAction> out;
    out.reserve(ledger.steps.size());
    for (const auto& step : ledger.steps) {
        out.push_back(step.applied);
    }
    return out;
}

double replay_surplus(const std::vector<ControlAction>& actions, const Problem& problem)
{
    return simulate_episode(replay_policy(actions), problem, problem.initial_soc).total_reward;
}

void cross_check(const std::string& what, double reported, double replayed)
{
    const double diff = std::abs(reported - replayed);
    if (!(diff <= kLedgerTolerance * std::max(1.0, std::abs(reported)))) {
        throw std::logic_error(what + ": reported surplus " + std::to_string(reported) +
                               " differs from its replay " + std::to_string(replayed));
    }
}

PolicyRow simulate_row(PolicyKind kind, const Problem& problem, const ScenarioSpec& spec)
{
    PolicyRow row;
    row.policy = std::string(to_string(kind));
    const auto start = Clock::now();
    EpisodeLedger ledger;
    if (kind == PolicyKind::lsps) {
        std::optional<std::vector<double>> forecast;
        if (spec.noise_sigma > 0.0) {
            forecast = inject_noise(problem.trace.generation, spec.noise_sigma, spec.seed);
        }
        auto res = lsps::schedule(problem, forecast);
        row.computed_peak = res.schedule.computed_peak;
        ledger = std::move(res.ledger);
        row.clip_count = res.schedule.clip_count;
    } else {
        baselines::BaselineConfig cfg{spec.demand_rule, std::nullopt};
        Policy pol = kind == PolicyKind::ratp ? baselines::make_ratp_policy(problem, cfg)
                                              : baselines::make_backup_policy(problem, cfg);
        ledger = simulate_episode(pol, problem, problem.initial_soc);
        row.clip_count = ledger.clip_count;
    }
    row.seconds = seconds_since(start);
    row.surplus = ledger.total_reward;
    row.realized_peak = ledger.realized_peak();
    if (kind != PolicyKind::lsps) {
        row.computed_peak = row.realized_peak;
    }
    cross_check(row.policy, row.surplus, replay_surplus(applied_actions(ledger), problem));
    return row;
}

}  // namespace

const PolicyRow* GapReport::row(std::string_view policy) const
{
    for (const auto& r : rows) {
        if (r.policy == policy) {
            return &r;
        }
    }
    return nullptr;
}

GapReport run_scenario(const ScenarioSpec& spec)
{
    spec.validate();
    const Problem problem = build_problem(spec, resolve_trace(spec));

    GapReport rep;
    rep.scenario = spec.name;
    rep.sigma = spec.noise_sigma;
    rep.seed = spec.seed;
    rep.horizon = problem.horizon();

    PolicyRow orow;
    orow.policy = "oracle";
    const auto start = Clock::now();
    const auto sol = oracle::deterministic_upper_bound(problem);
    orow.seconds = seconds_since(start);
    orow.surplus = sol.objective;
    orow.computed_peak = sol.peak;
    rep.oracle_diagnostics = sol.diagnostics;
    {
        const auto actions = sol.actions();
        const auto ledger = simulate_episode(replay_policy(actions), problem, problem.initial_soc);
        orow.realized_peak = ledger.realized_peak();
        orow.clip_count = ledger.clip_count;
        // Netting simultaneous charge and discharge changes the losses, so the
        // replay only reproduces plans without it.
        if (sol.diagnostics.simultaneous_steps == 0) {
            cross_check("oracle", orow.surplus, ledger.total_reward);
        }
    }
    rep.rows.push_back(orow);

    for (PolicyKind kind : spec.policies) {
        rep.rows.push_back(simulate_row(kind, problem, spec));
    }

    const double ub = orow.surplus;
    const double slack = 1e-6 * std::max(1.0, std::abs(ub));
    for (auto& r : rep.rows) {
        r.gap_abs = ub - r.surplus;
        r.gap_pct = ub != 0.0 ? 100.0 * r.gap_abs / std::abs(ub) : 0.0;
        if (r.surplus > ub + slack) {
            rep.oracle_dominates = false;
        }
    }
    return rep;
}

std::vector<GapReport> sweep(const ScenarioSpec& spec, unsigned workers)
{
    spec.validate();
    std::vector<ScenarioSpec> cells;
    if (spec.sweep_axis == SweepAxis::none) {
        cells.push_back(spec);
    } else {
        for (double v : spec.sweep_values) {
            cells.push_back(apply_sweep(spec, v));
        }
    }
    std::vector<GapReport> out(cells.size());
    std::vector<std::exception_ptr> errors(cells.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                out[i] = run_scenario(cells[i]);
                out[i].axis = std::string(to_string(spec.sweep_axis));
                out[i].axis_value =
                    spec.sweep_axis == SweepAxis::none ? 0.0 : spec.sweep_values[i];
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned n = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(cells.size()));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < n; ++w) {
        pool.emplace_back(work);
    }
    work();
    for (auto& th : pool) {
        th.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return out;
}

std::vector<AxisSummary> summarize(const std::vector<GapReport>& reports)
{
    std::vector<AxisSummary> out;
    for (const auto& rep : reports) {
        for (const auto& row : rep.rows) {
            if (row.policy == "oracle") {
                continue;
            }
            auto it = std::find_if(out.begin(), out.end(), [&](const AxisSummary& s) {
                return s.axis == rep.axis && s.policy == row.policy;
            });
            if (it == out.end()) {
                out.push_back({rep.axis, row.policy, 0.0, 0});
                it = std::prev(out.end());
            }
            it->mean_gap_pct += row.gap_pct;
            ++it->cells;
        }
    }
    for (auto& s : out) {
        s.mean_gap_pct /= static_cast<double>(s.cells);
    }
    return out;
}

NoiseStudy noise_study(const ScenarioSpec& spec, const std::vector<double>& sigmas,
                       std::size_t seeds)
{
    spec.validate();
    if (seeds < 2) {
        throw ValidationError("noise study needs at least two seeds");
    }
    for (double s : sigmas) {
        if (!(s >= 0.0)) {
            throw ValidationError("noise sigma must be non-negative");
        }
    }
    const Problem problem = build_problem(spec, resolve_trace(spec));

    NoiseStudy out;
    out.scenario = spec.name;
    out.seeds = seeds;
    out.oracle_surplus = oracle::deterministic_upper_bound(problem).objective;
    for (double sigma : sigmas) {
        NoisePoint pt;
        pt.sigma = sigma;
        std::vector<double> values;
        for (std::size_t k = 0; k < seeds; ++k) {
            const auto forecast = inject_noise(problem.trace.generation, sigma, spec.seed + k);
            const auto res = lsps::schedule(problem, forecast);
            values.push_back(res.ledger.total_reward);
            pt.mean_computed_peak += res.schedule.computed_peak;
            pt.mean_realized_peak += res.schedule.realized_peak;
            pt.mean_peak_deviation +=
                std::abs(res.schedule.realized_peak - res.schedule.computed_peak);
        }
        const double n = static_cast<double>(seeds);
        double mean = 0.0;
        for (double v : values) {
            mean += v;
        }
        mean /= n;
        double var = 0.0;
        for (double v : values) {
            var += (v - mean) * (v - mean);
        }
        var /= n - 1.0;
        pt.mean_surplus = mean;
        pt.std_error = std::sqrt(var / n);
        pt.mean_computed_peak /= n;
        pt.mean_realized_peak /= n;
        pt.mean_peak_deviation /= n;
        out.points.push_back(pt);
    }
    for (std::size_t i = 0; i + 1 < out.points.size(); ++i) {
        const auto& a = out.points[i];
        const auto& b = out.points[i + 1];
        if (b.mean_surplus > a.mean_surplus + std::max(a.std_error, b.std_error)) {
            out.nonincreasing = false;
        }
    }
    return out;
}

TimingReport timing_benchmark(const ScenarioSpec& spec, const std::vector<std::size_t>& horizons,
                              std::size_t oracle_max_T, std::size_t repeats)
{
    spec.validate();
    repeats = std::max<std::size_t>(repeats, 1);
    TimingReport out;
    for (std::size_t T : horizons) {
        ScenarioSpec cell = spec;
        cell.trace_csv.reset();
        cell.synthetic.hours = T;
        const Problem problem = build_problem(cell, resolve_trace(cell));

        TimingPoint pt;
        pt.horizon = T;
        pt.lsps_seconds = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < repeats; ++r) {
            const auto start = Clock::now();
            const auto res = lsps::schedule(problem);
            const double dt = seconds_since(start);
            if (!(res.ledger.steps.size() == T)) {
                throw std::logic_error("schedule length mismatch");
            }
            pt.lsps_seconds = std::min(pt.lsps_seconds, dt);
        }
        if (T <= oracle_max_T) {
            const auto start = Clock::now();
            oracle::deterministic_upper_bound(problem);
            pt.oracle_seconds = seconds_since(start);
        }
        out.points.push_back(pt);
    }

    const double n = static_cast<double>(out.points.size());
    if (out.points.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        for (const auto& p : out.points) {
            const double x = static_cast<double>(p.horizon);
            const double y = p.lsps_seconds;
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            syy += y * y;
        }
        const double cov = sxy - sx * sy / n;
        const double vx = sxx - sx * sx / n;
        const double vy = syy - sy * sy / n;
        out.slope = vx > 0.0 ? cov / vx : 0.0;
        out.intercept = (sy - out.slope * sx) / n;
        out.r_squared = vx > 0.0 && vy > 0.0 ? cov * cov / (vx * vy) : 1.0;
        for (std::size_t i = 0; i + 1 < out.points.size(); ++i) {
            out.ratios.push_back(out.points[i + 1].lsps_seconds / out.points[i].lsps_seconds);
        }
    }
    return out;
}

Problem to_problem(const dpv::DpInstance& inst)
{
    if (!inst.generation.is_deterministic()) {
        throw ValidationError("only a deterministic chain maps to a planning problem");
    }
    std::vector<double> g;
    for (const auto& lv : inst.generation.levels) {
        g.push_back(lv.front());
    }
    return Problem{inst.tariff, inst.fleet, inst.battery, ExogenousTrace{std::move(g), std::nullopt, 1.0},
                   inst.initial_soc};
}

std::vector<CertificationRow> certify_random(std::size_t count, std::uint64_t seed,
                                             const dpv::LatticeSpec& grids)
{
    std::mt19937_64 rng(seed);
    std::vector<CertificationRow> out;
    for (std::size_t i = 0; i < count; ++i) {
        const bool stochastic = i % 2 == 1;
        const auto inst = random_tiny_instance(rng, stochastic);
        const auto table = dpv::backward_induction(inst, grids);
        CertificationRow row;
        row.index = i;
        row.stochastic = stochastic;
        row.horizon = inst.horizon();
        row.devices = inst.fleet.size();
        row.concavity = dpv::check_concavity(table);
        row.monotonicity = dpv::check_monotonicity(table);
        row.thresholds = dpv::extract_thresholds(table, inst);
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<CrossOracleRow> cross_oracle_random(std::size_t count, std::uint64_t seed,
                                                const dpv::LatticeSpec& grids)
{
    std::mt19937_64 rng(seed);
    std::vector<CrossOracleRow> out;
    for (std::size_t i = 0; i < count; ++i) {
        const Problem prob = to_problem(random_tiny_instance(rng, false));
        const auto ub = oracle::deterministic_upper_bound(prob);
        const auto dp = oracle::brute_force_dp(prob, grids);
        CrossOracleRow row;
        row.index = i;
        row.horizon = prob.horizon();
        row.upper_bound = ub.objective;
        row.lattice_value = dp.value;
        row.bound = dp.discretization_bound;
        row.within_bound = ub.objective - dp.value <= dp.discretization_bound + 1e-9;
        row.ub_dominates = dp.value <= ub.objective + 1e-6 * std::max(1.0, std::abs(ub.objective));
        out.push_back(row);
    }
    return out;
}

}  // namespace nemopt::harness
