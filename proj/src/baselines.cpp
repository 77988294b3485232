#include "nemopt/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace nemopt::baselines {

std::string_view to_string(DemandRule rule)
{
    switch (rule) {
    case DemandRule::myopic_retail:
        return "myopic_retail";
    case DemandRule::reference_trace:
        return "reference_trace";
    }
    return "unknown";
}

DemandRule demand_rule_from_string(std::string_view name)
{
    if (name == "myopic_retail") {
        return DemandRule::myopic_retail;
    }
    if (name == "reference_trace") {
        return DemandRule::reference_trace;
    }
    throw ValidationError("unknown demand rule '" + std::string(name) + "'");
}

std::vector<double> myopic_demand(std::size_t t, const TariffSchedule& tariff,
                                  const DeviceFleet& fleet)
{
    std::vector<double> d(fleet.size());
    const double price = tariff.buy(t);
    for (std::size_t k = 0; k < fleet.size(); ++k) {
        const Device& dev = fleet.device(k);
        d[k] = std::clamp((dev.alpha[t] - price) / dev.beta[t], dev.lower(t), dev.upper(t));
    }
    return d;
}

std::vector<double> reference_demand(std::size_t t, const Problem& problem)
{
    if (!problem.trace.reference_demand) {
        throw ValidationError("reference_trace demand rule needs a recorded demand column");
    }
    const DeviceFleet& fleet = problem.fleet;
    const double total = (*problem.trace.reference_demand)[t];
    const double cap = fleet.total_upper(t);
    std::vector<double> d(fleet.size(), 0.0);
    for (std::size_t k = 0; k < fleet.size(); ++k) {
        const Device& dev = fleet.device(k);
        const double share = cap > 0.0 ? dev.upper(t) / cap : 1.0 / fleet.size();
        d[k] = std::clamp(total * share, dev.lower(t), dev.upper(t));
    }
    return d;
}

std::vector<double> baseline_demand(std::size_t t, const Problem& problem,
                                    const BaselineConfig& config)
{
    if (config.demand_rule == DemandRule::reference_trace) {
        return reference_demand(t, problem);
    }
    return myopic_demand(t, problem.tariff, problem.fleet);
}

ControlAction backup_policy(const SystemState& state, std::size_t t, const Problem& problem,
                            const BaselineConfig& config)
{
    const BatterySpec& bat = problem.battery;
    const double target = config.backup_target_soc.value_or(bat.capacity);
    if (target < 0.0 || target > bat.capacity) {
        throw ValidationError("backup target SoC outside [0, capacity]");
    }
    ControlAction a;
    a.demand = baseline_demand(t, problem, config);
    const double load = std::accumulate(a.demand.begin(), a.demand.end(), 0.0);
    const double surplus = pos_part(state.generation - load);
    const double room = pos_part(target - state.soc) / bat.eff_charge;
    a.battery = std::min({bat.charge_limit, room, surplus});
    return a;
}

ControlAction ratp_policy(const SystemState& state, std::size_t t,
                          const std::vector<double>& d_hat, const Problem& problem)
{
    (void)t;
    const BatterySpec& bat = problem.battery;
    ControlAction a;
    a.demand = d_hat;
    const double adjusted = std::accumulate(d_hat.begin(), d_hat.end(), 0.0) - state.generation;
    if (adjusted > 0.0) {
        a.battery = std::max({-bat.discharge_limit, -bat.eff_discharge * state.soc, -adjusted});
    } else {
        a.battery = std::min({bat.charge_limit, (bat.capacity - state.soc) / bat.eff_charge,
                              -adjusted});
    }
    return a;
}

Policy make_backup_policy(const Problem& problem, const BaselineConfig& config)
{
    return [&problem, config](const SystemState& state, std::size_t t) {
        return backup_policy(state, t, problem, config);
    };
}

Policy make_ratp_policy(const Problem& problem, const BaselineConfig& config)
{
    return [&problem, config](const SystemState& state, std::size_t t) {
        return ratp_policy(state, t, baseline_demand(t, problem, config), problem);
    };
}

}  // namespace nemopt::baselines
