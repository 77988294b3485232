#pragma once

// Scenario description and its JSON config format (see README).

#include "nemopt/baselines.hpp"
#include "nemopt/harness/instances.hpp"
#include "nemopt/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nemopt::harness {

enum class SweepAxis { none, battery_capacity, salvage, export_rate, peak_price };
enum class PolicyKind { lsps, ratp, backup };

std::string_view to_string(SweepAxis axis);
std::string_view to_string(PolicyKind kind);
SweepAxis sweep_axis_from_string(std::string_view name);
PolicyKind policy_from_string(std::string_view name);

struct ScenarioSpec {
    std::string name = "scenario";

    // Exactly one source: a CSV path or the synthetic profile.
    std::optional<std::filesystem::path> trace_csv;
    SyntheticSpec synthetic;

    double buy = 0.12;
    double sell = 0.06;
    double demand_price = 10.0;
    double salvage = 0.09;
    double fixed_charge = 0.0;

    BatterySpec battery{5.0, 1.0, 1.0, 0.95, 0.95};
    double initial_soc = 0.0;  // clipped to the capacity after sweeps

    double elasticity = -0.1;
    std::optional<double> baseline_price;   // defaults to the buy rate
    double dmax_factor = 2.0;
    std::optional<double> baseline_demand;  // defaults to the trace's demand column

    std::vector<PolicyKind> policies{PolicyKind::lsps, PolicyKind::ratp, PolicyKind::backup};
    baselines::DemandRule demand_rule = baselines::DemandRule::myopic_retail;

    SweepAxis sweep_axis = SweepAxis::none;
    std::vector<double> sweep_values;

    double noise_sigma = 0.0;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Parses the JSON config; relative CSV paths resolve against `base_dir`.
ScenarioSpec parse_scenario(std::string_view json_text,
                            const std::filesystem::path& base_dir = {});
ScenarioSpec load_scenario(const std::filesystem::path& path);

/// Canonical JSON form of the spec (all keys, fixed order).
std::string scenario_to_json(const ScenarioSpec& spec);

/// The realized trace: CSV contents or the synthetic profile.
ExogenousTrace resolve_trace(const ScenarioSpec& spec);

/// Spec with one sweep value applied to its axis.
ScenarioSpec apply_sweep(const ScenarioSpec& spec, double value);

/// Tariff, calibrated fleet and battery for `trace`.
Problem build_problem(const ScenarioSpec& spec, const ExogenousTrace& trace);

}  // namespace nemopt::harness
