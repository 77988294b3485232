#include "nemopt/harness/scenario.hpp"

#include "nemopt/harness/trace_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace nemopt::harness {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void only_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> keys)
{
    if (!obj.is_object()) {
        throw ValidationError("config: '" + std::string(where) + "' must be an object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ValidationError("config: unknown key '" + key + "' in '" + std::string(where) +
                                  "'");
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out)
{
    if (!obj.contains(key)) {
        return;
    }
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config: bad value for '") + key + "'");
    }
}

template <typename T>
void read(const json& obj, const char* key, std::optional<T>& out)
{
    if (!obj.contains(key) || obj.at(key).is_null()) {
        return;
    }
    T v{};
    read(obj, key, v);
    out = v;
}

}  // namespace

std::string_view to_string(SweepAxis axis)
{
    switch (axis) {
    case SweepAxis::none:
        return "none";
    case SweepAxis::battery_capacity:
        return "battery_capacity";
    case SweepAxis::salvage:
        return "salvage";
    case SweepAxis::export_rate:
        return "export_rate";
    case SweepAxis::peak_price:
        return "peak_price";
    }
    return "none";
}

std::string_view to_string(PolicyKind kind)
{
    switch (kind) {
    case PolicyKind::lsps:
        return "lsps";
    case PolicyKind::ratp:
        return "ratp";
    case PolicyKind::backup:
        return "backup";
    }
    return "unknown";
}

SweepAxis sweep_axis_from_string(std::string_view name)
{
    for (SweepAxis a : {SweepAxis::none, SweepAxis::battery_capacity, SweepAxis::salvage,
                        SweepAxis::export_rate, SweepAxis::peak_price}) {
        if (to_string(a) == name) {
            return a;
        }
    }
    throw ValidationError("unknown sweep axis '" + std::string(name) + "'");
}

PolicyKind policy_from_string(std::string_view name)
{
    for (PolicyKind p : {PolicyKind::lsps, PolicyKind::ratp, PolicyKind::backup}) {
        if (to_string(p) == name) {
            return p;
        }
    }
    throw ValidationError("unknown policy '" + std::string(name) + "'");
}

void ScenarioSpec::validate() const
{
    if (!(buy >= sell && sell >= 0.0)) {
        throw ValidationError("tariff must satisfy buy >= sell >= 0");
    }
    if (!(demand_price >= 0.0) || !(salvage >= 0.0) || !std::isfinite(fixed_charge)) {
        throw ValidationError("demand price and salvage must be non-negative");
    }
    battery.validate();
    if (!(initial_soc >= 0.0)) {
        throw ValidationError("initial SoC must be non-negative");
    }
    if (policies.empty()) {
        throw ValidationError("at least one policy is required");
    }
    if (sweep_axis != SweepAxis::none && sweep_values.empty()) {
        throw ValidationError("sweep axis given without values");
    }
    if (!(noise_sigma >= 0.0)) {
        throw ValidationError("noise sigma must be non-negative");
    }
    for (double v : sweep_values) {
        apply_sweep(*this, v);
    }
}

ScenarioSpec parse_scenario(std::string_view text, const std::filesystem::path& base_dir)
{
    json doc;
    try {
        doc = json::parse(text.begin(), text.end(), nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    only_keys(doc, "<root>",
              {"name", "trace", "tariff", "battery", "fleet", "policies", "demand_rule", "sweep",
               "noise", "seed"});
    ScenarioSpec spec;
    read(doc, "name", spec.name);
    read(doc, "seed", spec.seed);

    if (doc.contains("trace")) {
        const json& tr = doc.at("trace");
        only_keys(tr, "trace", {"csv", "synthetic"});
        if (tr.contains("csv") == tr.contains("synthetic")) {
            throw ValidationError("config: 'trace' needs exactly one of 'csv' or 'synthetic'");
        }
        if (tr.contains("csv")) {
            std::string p;
            read(tr, "csv", p);
            std::filesystem::path path(p);
            spec.trace_csv = path.is_relative() ? base_dir / path : path;
        } else {
            const json& syn = tr.at("synthetic");
            only_keys(syn, "trace.synthetic",
                      {"hours", "peak_generation", "baseline_demand", "jitter"});
            read(syn, "hours", spec.synthetic.hours);
            read(syn, "peak_generation", spec.synthetic.peak_generation);
            read(syn, "baseline_demand", spec.synthetic.baseline_demand);
            read(syn, "jitter", spec.synthetic.jitter);
        }
    }
    if (doc.contains("tariff")) {
        const json& t = doc.at("tariff");
        only_keys(t, "tariff", {"buy", "sell", "demand_price", "salvage", "fixed_charge"});
        read(t, "buy", spec.buy);
        read(t, "sell", spec.sell);
        read(t, "demand_price", spec.demand_price);
        read(t, "salvage", spec.salvage);
        read(t, "fixed_charge", spec.fixed_charge);
    }
    if (doc.contains("battery")) {
        const json& b = doc.at("battery");
        only_keys(b, "battery",
                  {"capacity", "charge_limit", "discharge_limit", "eff_charge", "eff_discharge",
                   "initial_soc"});
        read(b, "capacity", spec.battery.capacity);
        read(b, "charge_limit", spec.battery.charge_limit);
        read(b, "discharge_limit", spec.battery.discharge_limit);
        read(b, "eff_charge", spec.battery.eff_charge);
        read(b, "eff_discharge", spec.battery.eff_discharge);
        read(b, "initial_soc", spec.initial_soc);
    }
    if (doc.contains("fleet")) {
        const json& f = doc.at("fleet");
        only_keys(f, "fleet", {"elasticity", "baseline_price", "dmax_factor", "baseline_demand"});
        read(f, "elasticity", spec.elasticity);
        read(f, "baseline_price", spec.baseline_price);
        read(f, "dmax_factor", spec.dmax_factor);
        read(f, "baseline_demand", spec.baseline_demand);
    }
    if (doc.contains("policies")) {
        std::vector<std::string> names;
        read(doc, "policies", names);
        spec.policies.clear();
        for (const auto& n : names) {
            spec.policies.push_back(policy_from_string(n));
        }
    }
    if (doc.contains("demand_rule")) {
        std::string rule;
        read(doc, "demand_rule", rule);
        spec.demand_rule = baselines::demand_rule_from_string(rule);
    }
    if (doc.contains("sweep")) {
        const json& s = doc.at("sweep");
        only_keys(s, "sweep", {"axis", "values"});
        std::string axis = "none";
        read(s, "axis", axis);
        spec.sweep_axis = sweep_axis_from_string(axis);
        read(s, "values", spec.sweep_values);
    }
    if (doc.contains("noise")) {
        const json& n = doc.at("noise");
        only_keys(n, "noise", {"sigma"});
        read(n, "sigma", spec.noise_sigma);
    }
    spec.validate();
    return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.parent_path());
}

std::string scenario_to_json(const ScenarioSpec& spec)
{
    ordered_json doc;
    doc["name"] = spec.name;
    if (spec.trace_csv) {
        doc["trace"]["csv"] = spec.trace_csv->string();
    } else {
        ordered_json syn;
        syn["hours"] = spec.synthetic.hours;
        syn["peak_generation"] = spec.synthetic.peak_generation;
        syn["baseline_demand"] = spec.synthetic.baseline_demand;
        syn["jitter"] = spec.synthetic.jitter;
        doc["trace"]["synthetic"] = syn;
    }
    doc["tariff"] = {{"buy", spec.buy},
                     {"sell", spec.sell},
                     {"demand_price", spec.demand_price},
                     {"salvage", spec.salvage},
                     {"fixed_charge", spec.fixed_charge}};
    doc["battery"] = {{"capacity", spec.battery.capacity},
                      {"charge_limit", spec.battery.charge_limit},
                      {"discharge_limit", spec.battery.discharge_limit},
                      {"eff_charge", spec.battery.eff_charge},
                      {"eff_discharge", spec.battery.eff_discharge},
                      {"initial_soc", spec.initial_soc}};
    ordered_json fleet;
    fleet["elasticity"] = spec.elasticity;
    fleet["baseline_price"] = spec.baseline_price ? ordered_json(*spec.baseline_price) : nullptr;
    fleet["dmax_factor"] = spec.dmax_factor;
    fleet["baseline_demand"] =
        spec.baseline_demand ? ordered_json(*spec.baseline_demand) : nullptr;
    doc["fleet"] = fleet;
    ordered_json pol = ordered_json::array();
    for (PolicyKind p : spec.policies) {
        pol.push_back(std::string(to_string(p)));
    }
    doc["policies"] = pol;
    doc["demand_rule"] = std::string(baselines::to_string(spec.demand_rule));
    doc["sweep"] = {{"axis", std::string(to_string(spec.sweep_axis))},
                    {"values", spec.sweep_values}};
    doc["noise"] = {{"sigma", spec.noise_sigma}};
    doc["seed"] = spec.seed;
    return doc.dump(2);
}

ExogenousTrace resolve_trace(const ScenarioSpec& spec)
{
    if (spec.trace_csv) {
        return load_trace(*spec.trace_csv).trace;
    }
    SyntheticSpec syn = spec.synthetic;
    syn.seed = spec.seed;
    return synthetic_trace(syn);
}

ScenarioSpec apply_sweep(const ScenarioSpec& spec, double v)
{
    ScenarioSpec out = spec;
    switch (spec.sweep_axis) {
    case SweepAxis::none:
        break;
    case SweepAxis::battery_capacity:
        if (!(v >= 0.0)) {
            throw ValidationError("battery capacity sweep values must be non-negative");
        }
        out.battery.capacity = v;
        break;
    case SweepAxis::salvage:
        if (!(v >= 0.0)) {
            throw ValidationError("salvage sweep values must be non-negative");
        }
        out.salvage = v;
        break;
    case SweepAxis::export_rate:
        if (!(v >= 0.0 && v <= spec.buy)) {
            throw ValidationError("export rate sweep values must lie in [0, buy]");
        }
        out.sell = v;
        break;
    case SweepAxis::peak_price:
        if (!(v >= 0.0)) {
            throw ValidationError("peak price sweep values must be non-negative");
        }
        out.demand_price = v;
        break;
    }
    out.sweep_axis = SweepAxis::none;
    out.sweep_values.clear();
    return out;
}

Problem build_problem(const ScenarioSpec& spec, const ExogenousTrace& trace)
{
    const std::size_t T = trace.horizon();
    std::vector<double> baseline;
    if (spec.baseline_demand) {
        baseline.assign(T, *spec.baseline_demand);
    } else if (trace.reference_demand) {
        baseline = *trace.reference_demand;
    } else {
        throw ValidationError("fleet calibration needs fleet.baseline_demand or a demand column");
    }
    const double p0 = spec.baseline_price.value_or(spec.buy);
    Problem prob{TariffSchedule::flat(T, spec.buy, spec.sell, spec.demand_price, spec.salvage,
                                      spec.fixed_charge),
                 calibrate_fleet(baseline, p0, spec.elasticity, spec.dmax_factor), spec.battery,
                 trace, std::min(spec.initial_soc, spec.battery.capacity)};
    prob.validate();
    return prob;
}

}  // namespace nemopt::harness
