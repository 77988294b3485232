#pragma once

// Domain types and exact dynamics for a behind-the-meter prosumer with
// flexible devices, rooftop generation and a battery, billed under a
// net-metering tariff with a non-coincident peak demand charge.
//
// Units: one step is one hour by default, so kW and kWh-per-step are used
// interchangeably. Money is in tariff currency.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nemopt {

/// Raised when an instance violates a documented invariant.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline double pos_part(double x) { return x > 0.0 ? x : 0.0; }
inline double neg_part(double x) { return x < 0.0 ? -x : 0.0; }

/// Per-step import/export rates plus the demand charge and terminal salvage
/// value of stored energy.
class TariffSchedule {
public:
    TariffSchedule(std::vector<double> buy, std::vector<double> sell,
                   double demand_price, double salvage, double fixed_charge = 0.0);

    /// Time-invariant rates over `horizon` steps.
    static TariffSchedule flat(std::size_t horizon, double buy, double sell,
                               double demand_price, double salvage,
                               double fixed_charge = 0.0);

    std::size_t horizon() const { return buy_.size(); }
    double buy(std::size_t t) const { return buy_.at(t); }
    double sell(std::size_t t) const { return sell_.at(t); }
    std::span<const double> buy_rates() const { return buy_; }
    std::span<const double> sell_rates() const { return sell_; }
    double demand_price() const { return demand_price_; }
    double salvage() const { return salvage_; }
    double fixed_charge() const { return fixed_charge_; }

private:
    std::vector<double> buy_;
    std::vector<double> sell_;
    double demand_price_;
    double salvage_;
    double fixed_charge_;
};

struct BatterySpec {
    double capacity = 0.0;         // kWh
    double charge_limit = 0.0;     // kW
    double discharge_limit = 0.0;  // kW
    double eff_charge = 1.0;
    double eff_discharge = 1.0;

    void validate() const;
};

/// One flexible (or inflexible, when d_min == d_max) load with quadratic
/// utility U(d) = alpha*d - beta*d^2/2 at every step.
struct Device {
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> d_max;
    std::vector<double> d_min;  // empty means zero lower bound

    double lower(std::size_t t) const { return d_min.empty() ? 0.0 : d_min[t]; }
    double upper(std::size_t t) const { return d_max[t]; }
    double utility(std::size_t t, double d) const
    {
        return alpha[t] * d - 0.5 * beta[t] * d * d;
    }
    double marginal(std::size_t t, double d) const { return alpha[t] - beta[t] * d; }
};

class DeviceFleet {
public:
    DeviceFleet() = default;
    DeviceFleet(std::vector<Device> devices, std::size_t horizon);

    /// Same utility parameters and cap at every step.
    static DeviceFleet constant(std::size_t horizon, double alpha, double beta, double d_max);

    std::size_t size() const { return devices_.size(); }
    std::size_t horizon() const { return horizon_; }
    const Device& device(std::size_t k) const { return devices_.at(k); }
    std::span<const Device> devices() const { return devices_; }

    double utility(std::size_t t, std::span<const double> demand) const;
    double total_lower(std::size_t t) const;
    double total_upper(std::size_t t) const;

private:
    std::vector<Device> devices_;
    std::size_t horizon_ = 0;
};

struct ExogenousTrace {
    std::vector<double> generation;                   // kWh per step
    std::optional<std::vector<double>> reference_demand;
    double step_hours = 1.0;

    std::size_t horizon() const { return generation.size(); }
    void validate() const;
};

struct SystemState {
    double soc = 0.0;
    double generation = 0.0;
    double peak = 0.0;
};

struct ControlAction {
    double battery = 0.0;        // + charge, - discharge
    std::vector<double> demand;  // per device
};

/// Everything needed to simulate or plan one billing horizon.
struct Problem {
    TariffSchedule tariff;
    DeviceFleet fleet;
    BatterySpec battery;
    ExogenousTrace trace;
    double initial_soc = 0.0;

    std::size_t horizon() const { return trace.horizon(); }
    void validate() const;
};

struct StepRecord {
    SystemState state;
    ControlAction requested;
    ControlAction applied;
    double net_consumption = 0.0;
    double payment = 0.0;
    double utility = 0.0;
    double reward = 0.0;
    bool clipped = false;
};

struct EpisodeLedger {
    std::vector<StepRecord> steps;
    SystemState final_state;
    double stage_total = 0.0;
    double terminal_reward = 0.0;
    double total_reward = 0.0;
    std::size_t clip_count = 0;

    double realized_peak() const { return final_state.peak; }
};

using Policy = std::function<ControlAction(const SystemState&, std::size_t)>;

/// NEM payment for one step with the demand charge in rolling form.
double payment(double z, double c, std::size_t t, const TariffSchedule& tariff);

/// Next state of charge for battery power `e` over one step.
double soc_step(double s, double e, const BatterySpec& spec);

/// Battery powers keeping the next SoC in [0, capacity].
std::pair<double, double> feasible_battery_interval(double s, const BatterySpec& spec);

inline double peak_step(double z, double c) { return z > c ? z : c; }

/// Runs `policy` over steps [begin, end) of the problem's trace starting from
/// `initial`. Actions are clipped to the battery interval and demand boxes.
/// The terminal salvage reward is added only when `end` is the horizon.
EpisodeLedger simulate_episode(const Policy& policy, const Problem& problem,
                               const SystemState& initial, std::size_t begin,
                               std::size_t end);

/// Full-horizon run from SoC `s0` with zero recorded peak.
EpisodeLedger simulate_episode(const Policy& policy, const Problem& problem, double s0);

/// Policy that replays a fixed action sequence.
Policy replay_policy(std::vector<ControlAction> actions);

}  // namespace nemopt
