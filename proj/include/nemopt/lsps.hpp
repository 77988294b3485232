#pragma once

// Large-storage peak searching.
//
// With the SoC dynamics relaxed and the peak bound c fixed, each step solves
//   max_v  h_t(v) - buy_t [v - g_t]^+ + sell_t [v - g_t]^-
//   s.t.   v_min_t <= v <= min(c + g_t, v_max_t)
// independently. The optimal total J(c), including -demand_price * c, is
// concave in c, so the best bound c* is the root of its monotone derivative.
// Actions are then split between devices and battery and the battery is
// clipped forward in time so the SoC stays feasible.

#include "nemopt/allocation.hpp"
#include "nemopt/model.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace nemopt::lsps {

struct PeakSearchReport {
    std::vector<double> candidates;   // sorted, duplicates kept
    double c1 = 0.0;                  // lower end of the bracket around c*
    double c2 = 0.0;                  // upper end of the bracket around c*
    double c_star = 0.0;
    double J_star = 0.0;
    std::vector<std::size_t> active_set;  // steps with a binding peak bound at c1
    std::size_t iterations = 0;
};

struct StepPlan {
    double v_dagger = 0.0;
    double v_star = 0.0;
    ControlAction planned;   // straight from the allocation split
    ControlAction action;    // after SoC clipping
    bool clipped = false;
};

struct LspsSchedule {
    std::vector<StepPlan> steps;
    PeakSearchReport search;
    double computed_peak = 0.0;
    double realized_peak = 0.0;
    std::size_t clip_count = 0;
};

struct ScheduleResult {
    LspsSchedule schedule;
    EpisodeLedger ledger;
};

/// Relaxed fixed-peak problem for one instance. Holds the per-step helper
/// functions and the unconstrained optima, so each query is cheap.
class PeakSearch {
public:
    /// `generation` is the forecast used for planning.
    PeakSearch(const TariffSchedule& tariff, const DeviceFleet& fleet, const BatterySpec& battery,
               std::vector<double> generation);

    std::size_t horizon() const { return generation_.size(); }
    const alloc::HelperFunction& helper() const { return helper_; }

    double v_dagger(double g, std::size_t t) const;
    double fixed_peak_policy(double g, std::size_t t, double c) const;

    /// min(v_dagger - g, v_max - g) per step, in step order.
    const std::vector<double>& candidates() const { return candidates_; }

    /// Right derivative of J at c >= 0.
    double J_prime(double c) const;
    double J_value(double c) const;

    PeakSearchReport find_c_star() const;

private:
    double step_objective(double v, double g, std::size_t t) const;
    bool active(std::size_t t, double c) const
    {
        return c < candidates_[t] && c >= floor_[t];
    }

    const TariffSchedule& tariff_;
    alloc::HelperFunction helper_;
    std::vector<double> generation_;
    std::vector<double> dagger_;
    std::vector<double> candidates_;
    std::vector<double> floor_;  // v_min - g: below this the peak bound cannot bind
};

/// Plans on `forecast` and evaluates on the problem's own (realized) trace.
/// The per-step decision observes the realized generation and the cached c*.
ScheduleResult schedule(const Problem& problem,
                        const std::optional<std::vector<double>>& forecast = std::nullopt);

/// Policy form of the same controller, with c* taken from `search`.
Policy make_policy(const PeakSearch& search, double c_star, const Problem& problem);

}  // namespace nemopt::lsps
