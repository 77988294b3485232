#include "nemopt/lsps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nemopt::lsps {

namespace {

constexpr double kPeakTolerance = 1e-9;
constexpr std::size_t kMaxBisection = 200;

}  // namespace

PeakSearch::PeakSearch(const TariffSchedule& tariff, const DeviceFleet& fleet,
                       const BatterySpec& battery, std::vector<double> generation)
    : tariff_(tariff),
      helper_(fleet, battery, tariff.salvage(), generation.size()),
      generation_(std::move(generation))
{
    const std::size_t T = generation_.size();
    if (T == 0) {
        throw ValidationError("peak search needs a non-empty trace");
    }
    if (tariff.horizon() != T) {
        throw ValidationError("tariff horizon differs from forecast horizon");
    }
    dagger_.resize(T);
    candidates_.resize(T);
    floor_.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        const double g = generation_[t];
        const auto& step = helper_.step(t);
        dagger_[t] = v_dagger(g, t);
        candidates_[t] = std::min(dagger_[t] - g, step.v_max() - g);
        floor_[t] = step.v_min() - g;
    }
}

double PeakSearch::v_dagger(double g, std::size_t t) const
{
    const auto& step = helper_.step(t);
    const double export_point = step.inverse_marginal(tariff_.sell(t));
    if (export_point < g) {
        return export_point;
    }
    const double import_point = step.inverse_marginal(tariff_.buy(t));
    if (g < import_point) {
        return import_point;
    }
    return g;
}

double PeakSearch::fixed_peak_policy(double g, std::size_t t, double c) const
{
    const auto& step = helper_.step(t);
    const double v = v_dagger(g, t);
    const double cap = std::min(c + g, step.v_max());
    // The lower box wins when the peak bound is below it.
    return std::max(step.v_min(), std::min(v, cap));
}

double PeakSearch::step_objective(double v, double g, std::size_t t) const
{
    const double x = v - g;
    return helper_.h_value(v, t) - tariff_.buy(t) * pos_part(x) + tariff_.sell(t) * neg_part(x);
}

double PeakSearch::J_prime(double c) const
{
    if (c < 0.0) {
        throw std::domain_error("J_prime: peak bound must be non-negative");
    }
    double slope = -tariff_.demand_price();
    for (std::size_t t = 0; t < generation_.size(); ++t) {
        if (active(t, c)) {
            slope += helper_.h_prime(c + generation_[t], t) - tariff_.buy(t);
        }
    }
    return slope;
}

double PeakSearch::J_value(double c) const
{
    double total = -tariff_.demand_price() * c;
    for (std::size_t t = 0; t < generation_.size(); ++t) {
        const double g = generation_[t];
        total += step_objective(fixed_peak_policy(g, t, c), g, t);
    }
    return total;
}

PeakSearchReport PeakSearch::find_c_star() const
{
    PeakSearchReport report;
    report.candidates = candidates_;
    std::sort(report.candidates.begin(), report.candidates.end());
    // Below the largest floor some step cannot meet the bound at all.
    const double lowest = std::max(0.0, *std::max_element(floor_.begin(), floor_.end()));
    const double top = std::max(lowest, report.candidates.back());

    if (tariff_.demand_price() == 0.0) {
        // No pressure on the peak: every bound at or above the largest
        // candidate is optimal.
        report.c_star = top;
    } else if (J_prime(lowest) > 0.0) {
        double lo = lowest;
        double hi = top;
        while (hi - lo > kPeakTolerance && report.iterations < kMaxBisection) {
            const double mid = 0.5 * (lo + hi);
            if (J_prime(mid) > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
            ++report.iterations;
        }
        report.c_star = 0.5 * (lo + hi);
    } else {
        report.c_star = lowest;
    }

    report.c1 = 0.0;
    report.c2 = report.c_star;
    bool have_upper = false;
    for (double b : report.candidates) {
        if (b >= 0.0 && b <= report.c_star) {
            report.c1 = std::max(report.c1, b);
        }
        if (b >= report.c_star && (!have_upper || b < report.c2)) {
            report.c2 = b;
            have_upper = true;
        }
    }
    for (std::size_t t = 0; t < generation_.size(); ++t) {
        if (active(t, report.c1)) {
            report.active_set.push_back(t);
        }
    }
    report.J_star = J_value(report.c_star);
    return report;
}

namespace {

ControlAction clip_to_soc(ControlAction a, double soc, const BatterySpec& battery, bool& clipped)
{
    const auto [lo, hi] = feasible_battery_interval(soc, battery);
    const double e = std::clamp(a.battery, lo, hi);
    clipped = e != a.battery;
    a.battery = e;
    return a;
}

ControlAction split_action(const PeakSearch& search, double v, std::size_t t)
{
    alloc::AllocationResult r = search.helper().split_allocation(v, t);
    return ControlAction{r.battery, std::move(r.demand)};
}

}  // namespace

Policy make_policy(const PeakSearch& search, double c_star, const Problem& problem)
{
    const BatterySpec battery = problem.battery;
    return [&search, c_star, battery](const SystemState& state, std::size_t t) {
        const double v = search.fixed_peak_policy(state.generation, t, c_star);
        bool clipped = false;
        return clip_to_soc(split_action(search, v, t), state.soc, battery, clipped);
    };
}

ScheduleResult schedule(const Problem& problem, const std::optional<std::vector<double>>& forecast)
{
    problem.validate();
    const std::size_t T = problem.horizon();
    std::vector<double> plan_trace = forecast.value_or(problem.trace.generation);
    if (plan_trace.size() != T) {
        throw ValidationError("forecast length differs from the realized trace");
    }
    for (double g : plan_trace) {
        if (!(g >= 0.0) || !std::isfinite(g)) {
            throw ValidationError("forecast generation must be finite and >= 0");
        }
    }

    PeakSearch search(problem.tariff, problem.fleet, problem.battery, std::move(plan_trace));
    ScheduleResult out;
    LspsSchedule& sched = out.schedule;
    sched.search = search.find_c_star();
    sched.computed_peak = sched.search.c_star;

    std::vector<ControlAction> actions;
    actions.reserve(T);
    sched.steps.reserve(T);
    double soc = problem.initial_soc;
    for (std::size_t t = 0; t < T; ++t) {
        const double g = problem.trace.generation[t];
        StepPlan step;
        step.v_dagger = search.v_dagger(g, t);
        step.v_star = search.fixed_peak_policy(g, t, sched.search.c_star);
        step.planned = split_action(search, step.v_star, t);
        step.action = clip_to_soc(step.planned, soc, problem.battery, step.clipped);
        sched.clip_count += step.clipped ? 1 : 0;
        soc = std::clamp(soc_step(soc, step.action.battery, problem.battery), 0.0,
                         problem.battery.capacity);
        actions.push_back(step.action);
        sched.steps.push_back(std::move(step));
    }
    out.ledger = simulate_episode(replay_policy(std::move(actions)), problem, problem.initial_soc);
    sched.realized_peak = out.ledger.realized_peak();
    return out;
}

}  // namespace nemopt::lsps
