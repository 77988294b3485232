#include "nemopt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nemopt {

namespace {

constexpr double kSocSlack = 1e-9;

[[noreturn]] void fail(const std::string& what) { throw ValidationError(what); }

void require_finite(double x, const char* name)
{
    if (!std::isfinite(x)) {
        fail(std::string(name) + " must be finite");
    }
}

}  // namespace

TariffSchedule::TariffSchedule(std::vector<double> buy, std::vector<double> sell,
                               double demand_price, double salvage, double fixed_charge)
    : buy_(std::move(buy)),
      sell_(std::move(sell)),
      demand_price_(demand_price),
      salvage_(salvage),
      fixed_charge_(fixed_charge)
{
    if (buy_.size() != sell_.size()) {
        fail("tariff buy and sell rates differ in length");
    }
    for (std::size_t t = 0; t < buy_.size(); ++t) {
        require_finite(buy_[t], "buy rate");
        require_finite(sell_[t], "sell rate");
        if (sell_[t] < 0.0 || buy_[t] < sell_[t]) {
            std::ostringstream os;
            os << "tariff at step " << t << " violates buy >= sell >= 0 (buy=" << buy_[t]
               << ", sell=" << sell_[t] << ")";
            fail(os.str());
        }
    }
    require_finite(demand_price_, "demand price");
    require_finite(salvage_, "salvage rate");
    require_finite(fixed_charge_, "fixed charge");
    if (demand_price_ < 0.0) {
        fail("demand price must be non-negative");
    }
    if (salvage_ < 0.0) {
        fail("salvage rate must be non-negative");
    }
}

TariffSchedule TariffSchedule::flat(std::size_t horizon, double buy, double sell,
                                    double demand_price, double salvage, double fixed_charge)
{
    return TariffSchedule(std::vector<double>(horizon, buy), std::vector<double>(horizon, sell),
                          demand_price, salvage, fixed_charge);
}

void BatterySpec::validate() const
{
    if (std::isnan(capacity) || capacity < 0.0) {
        fail("battery capacity must be non-negative");
    }
    require_finite(charge_limit, "charge limit");
    require_finite(discharge_limit, "discharge limit");
    if (charge_limit < 0.0 || discharge_limit < 0.0) {
        fail("battery power limits must be non-negative");
    }
    if (!(eff_charge > 0.0 && eff_charge <= 1.0) ||
        !(eff_discharge > 0.0 && eff_discharge <= 1.0)) {
        fail("battery efficiencies must lie in (0, 1]");
    }
}

DeviceFleet::DeviceFleet(std::vector<Device> devices, std::size_t horizon)
    : devices_(std::move(devices)), horizon_(horizon)
{
    for (std::size_t k = 0; k < devices_.size(); ++k) {
        const Device& dev = devices_[k];
        if (dev.alpha.size() != horizon_ || dev.beta.size() != horizon_ ||
            dev.d_max.size() != horizon_ || (!dev.d_min.empty() && dev.d_min.size() != horizon_)) {
            fail("device " + std::to_string(k) + " parameter length differs from horizon");
        }
        for (std::size_t t = 0; t < horizon_; ++t) {
            require_finite(dev.alpha[t], "alpha");
            require_finite(dev.beta[t], "beta");
            require_finite(dev.d_max[t], "d_max");
            if (dev.alpha[t] < 0.0) {
                fail("device alpha must be non-negative");
            }
            if (!(dev.beta[t] > 0.0)) {
                fail("device beta must be strictly positive");
            }
            if (dev.d_max[t] < 0.0 || dev.lower(t) < 0.0 || dev.lower(t) > dev.d_max[t]) {
                fail("device bounds must satisfy 0 <= d_min <= d_max");
            }
        }
    }
}

DeviceFleet DeviceFleet::constant(std::size_t horizon, double alpha, double beta, double d_max)
{
    Device dev{std::vector<double>(horizon, alpha), std::vector<double>(horizon, beta),
               std::vector<double>(horizon, d_max), {}};
    return DeviceFleet({std::move(dev)}, horizon);
}

double DeviceFleet::utility(std::size_t t, std::span<const double> demand) const
{
    double u = 0.0;
    for (std::size_t k = 0; k < devices_.size(); ++k) {
        u += devices_[k].utility(t, demand[k]);
    }
    return u;
}

double DeviceFleet::total_lower(std::size_t t) const
{
    double s = 0.0;
    for (const Device& dev : devices_) {
        s += dev.lower(t);
    }
    return s;
}

double DeviceFleet::total_upper(std::size_t t) const
{
    double s = 0.0;
    for (const Device& dev : devices_) {
        s += dev.upper(t);
    }
    return s;
}

void ExogenousTrace::validate() const
{
    for (std::size_t t = 0; t < generation.size(); ++t) {
        if (!std::isfinite(generation[t]) || generation[t] < 0.0) {
            fail("generation at step " + std::to_string(t) + " must be finite and >= 0");
        }
    }
    if (reference_demand && reference_demand->size() != generation.size()) {
        fail("reference demand length differs from generation length");
    }
    if (!(step_hours > 0.0)) {
        fail("step length must be positive");
    }
}

void Problem::validate() const
{
    trace.validate();
    battery.validate();
    const std::size_t T = trace.horizon();
    if (T == 0) {
        fail("empty trace");
    }
    if (tariff.horizon() != T) {
        fail("tariff horizon " + std::to_string(tariff.horizon()) +
             " differs from trace horizon " + std::to_string(T));
    }
    if (fleet.horizon() != T && fleet.size() > 0) {
        fail("fleet horizon differs from trace horizon");
    }
    if (!(initial_soc >= 0.0 && initial_soc <= battery.capacity)) {
        fail("initial SoC outside [0, capacity]");
    }
}

double payment(double z, double c, std::size_t t, const TariffSchedule& tariff)
{
    if (t >= tariff.horizon()) {
        throw std::out_of_range("payment: step index " + std::to_string(t) + " out of range");
    }
    return tariff.buy(t) * pos_part(z) - tariff.sell(t) * neg_part(z) +
           tariff.demand_price() * pos_part(z - c) + tariff.fixed_charge();
}

double soc_step(double s, double e, const BatterySpec& spec)
{
    return s + spec.eff_charge * pos_part(e) - neg_part(e) / spec.eff_discharge;
}

std::pair<double, double> feasible_battery_interval(double s, const BatterySpec& spec)
{
    if (!(s >= -kSocSlack && s <= spec.capacity + kSocSlack)) {
        throw std::domain_error("feasible_battery_interval: SoC " + std::to_string(s) +
                                " outside [0, capacity]");
    }
    s = std::clamp(s, 0.0, spec.capacity);
    const double lo = std::max(-spec.discharge_limit, -spec.eff_discharge * s);
    const double hi = std::min(spec.charge_limit, (spec.capacity - s) / spec.eff_charge);
    return {lo, hi};
}

EpisodeLedger simulate_episode(const Policy& policy, const Problem& problem,
                               const SystemState& initial, std::size_t begin, std::size_t end)
{
    problem.validate();
    const std::size_t T = problem.horizon();
    if (begin > end || end > T) {
        throw std::out_of_range("simulate_episode: step range outside horizon");
    }
    const BatterySpec& bat = problem.battery;
    const DeviceFleet& fleet = problem.fleet;
    const std::size_t K = fleet.size();

    EpisodeLedger ledger;
    ledger.steps.reserve(end - begin);
    SystemState state = initial;
    for (std::size_t t = begin; t < end; ++t) {
        state.generation = problem.trace.generation[t];
        StepRecord rec;
        rec.state = state;
        rec.requested = policy(state, t);
        if (rec.requested.demand.size() != K) {
            throw std::invalid_argument("policy returned demand vector of size " +
                                        std::to_string(rec.requested.demand.size()) +
                                        ", fleet has " + std::to_string(K));
        }
        rec.applied = rec.requested;
        const auto [lo, hi] = feasible_battery_interval(state.soc, bat);
        const double e = std::clamp(rec.requested.battery, lo, hi);
        // rounding-level adjustments are applied but not counted
        bool clipped = std::abs(e - rec.requested.battery) > kSocSlack;
        rec.applied.battery = e;
        double load = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const Device& dev = fleet.device(k);
            const double d = std::clamp(rec.requested.demand[k], dev.lower(t), dev.upper(t));
            clipped = clipped || std::abs(d - rec.requested.demand[k]) > kSocSlack;
            rec.applied.demand[k] = d;
            load += d;
        }
        rec.clipped = clipped;
        rec.net_consumption = load + e - state.generation;
        rec.payment = payment(rec.net_consumption, state.peak, t, problem.tariff);
        rec.utility = fleet.utility(t, rec.applied.demand);
        rec.reward = rec.utility - rec.payment;

        ledger.stage_total += rec.reward;
        ledger.clip_count += clipped ? 1 : 0;
        state.soc = std::clamp(soc_step(state.soc, e, bat), 0.0, bat.capacity);
        state.peak = peak_step(rec.net_consumption, state.peak);
        ledger.steps.push_back(std::move(rec));
    }
    if (end == T) {
        ledger.terminal_reward = problem.tariff.salvage() * state.soc;
    }
    if (end < T) {
        state.generation = problem.trace.generation[end];
    }
    ledger.final_state = state;
    ledger.total_reward = ledger.stage_total + ledger.terminal_reward;
    return ledger;
}

EpisodeLedger simulate_episode(const Policy& policy, const Problem& problem, double s0)
{
    SystemState initial{s0, 0.0, 0.0};
    return simulate_episode(policy, problem, initial, 0, problem.horizon());
}

Policy replay_policy(std::vector<ControlAction> actions)
{
    return [actions = std::move(actions)](const SystemState&, std::size_t t) {
        return actions.at(t);
    };
}

}  // namespace nemopt
