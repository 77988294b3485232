#pragma once

// Reference controllers: backup mode (store surplus renewables, never
// discharge) and the renewable-adjusted threshold policy (RATP), each
// paired with a fixed demand rule.

#include "nemopt/model.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace nemopt::baselines {

enum class DemandRule {
    myopic_retail,    // marginal utility equals the buy rate
    reference_trace,  // recorded demand split across devices by capacity
};

std::string_view to_string(DemandRule rule);
DemandRule demand_rule_from_string(std::string_view name);

struct BaselineConfig {
    DemandRule demand_rule = DemandRule::myopic_retail;
    std::optional<double> backup_target_soc;  // defaults to capacity
};

/// d_k = clip((alpha_k - buy_t) / beta_k, d_min, d_max) for every device.
std::vector<double> myopic_demand(std::size_t t, const TariffSchedule& tariff,
                                  const DeviceFleet& fleet);

/// Recorded demand at step t shared in proportion to device caps, clipped to
/// the device boxes.
std::vector<double> reference_demand(std::size_t t, const Problem& problem);

std::vector<double> baseline_demand(std::size_t t, const Problem& problem,
                                    const BaselineConfig& config);

ControlAction backup_policy(const SystemState& state, std::size_t t, const Problem& problem,
                            const BaselineConfig& config = {});

ControlAction ratp_policy(const SystemState& state, std::size_t t,
                          const std::vector<double>& d_hat, const Problem& problem);

Policy make_backup_policy(const Problem& problem, const BaselineConfig& config = {});
Policy make_ratp_policy(const Problem& problem, const BaselineConfig& config = {});

}  // namespace nemopt::baselines
