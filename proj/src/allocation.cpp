#include "nemopt/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nemopt::alloc {

namespace {

constexpr double kDomainSlack = 1e-9;

}  // namespace

StepAllocator::StepAllocator(const DeviceFleet& fleet, const BatterySpec& battery,
                             double salvage, std::size_t t)
    : salvage_(salvage), e_lo_(-battery.discharge_limit), e_hi_(battery.charge_limit)
{
    devices_.reserve(fleet.size());
    double lo_sum = 0.0;
    double hi_sum = 0.0;
    for (const Device& dev : fleet.devices()) {
        devices_.push_back({dev.alpha[t], dev.beta[t], dev.lower(t), dev.upper(t)});
        lo_sum += dev.lower(t);
        hi_sum += dev.upper(t);
    }
    v_min_ = e_lo_ + lo_sum;
    v_max_ = e_hi_ + hi_sum;

    // Breakpoints of the aggregate allocation curve, scanned from the highest
    // price down so that the knots come out with v nondecreasing.
    std::vector<double> prices;
    prices.reserve(2 * devices_.size() + 1);
    for (const Dev& d : devices_) {
        if (d.hi > d.lo) {
            prices.push_back(d.alpha - d.beta * d.lo);
            prices.push_back(d.alpha - d.beta * d.hi);
        }
    }
    if (e_hi_ > e_lo_) {
        prices.push_back(salvage_);
    }
    std::sort(prices.begin(), prices.end(), std::greater<>());
    prices.erase(std::unique(prices.begin(), prices.end()), prices.end());

    knots_.reserve(2 * prices.size());
    for (double p : prices) {
        for (bool high : {false, true}) {
            Knot k{total_at(p, high), p};
            if (!knots_.empty() && knots_.back().v == k.v && knots_.back().price == k.price) {
                continue;
            }
            // Guard against rounding making the chain non-monotone in v.
            if (!knots_.empty() && k.v < knots_.back().v) {
                k.v = knots_.back().v;
            }
            knots_.push_back(k);
        }
    }
}

double StepAllocator::total_at(double price, bool battery_high) const
{
    double total = 0.0;
    for (const Dev& d : devices_) {
        total += std::clamp((d.alpha - price) / d.beta, d.lo, d.hi);
    }
    if (price < salvage_) {
        total += e_hi_;
    } else if (price > salvage_) {
        total += e_lo_;
    } else {
        total += battery_high ? e_hi_ : e_lo_;
    }
    return total;
}

void StepAllocator::check_domain(double v, const char* who) const
{
    if (!(v >= v_min_ - kDomainSlack && v <= v_max_ + kDomainSlack)) {
        throw std::domain_error(std::string(who) + ": v=" + std::to_string(v) +
                                " outside [" + std::to_string(v_min_) + ", " +
                                std::to_string(v_max_) + "]");
    }
}

double StepAllocator::marginal(double v) const
{
    check_domain(v, "h_prime");
    if (knots_.empty()) {
        return 0.0;
    }
    auto it = std::lower_bound(knots_.begin(), knots_.end(), v,
                               [](const Knot& k, double x) { return k.v < x; });
    if (it == knots_.begin()) {
        return it->price;
    }
    if (it == knots_.end()) {
        return knots_.back().price;
    }
    const Knot& b = *it;
    const Knot& a = *(it - 1);
    const double w = (v - a.v) / (b.v - a.v);
    return a.price + w * (b.price - a.price);
}

double StepAllocator::inverse_marginal(double price) const
{
    return std::clamp(total_at(price, true), v_min_, v_max_);
}

AllocationResult StepAllocator::split(double v) const
{
    check_domain(v, "split_allocation");
    v = std::clamp(v, v_min_, v_max_);
    AllocationResult out;
    out.marginal = marginal(v);
    out.demand.resize(devices_.size());
    double load = 0.0;
    double utility = 0.0;
    for (std::size_t k = 0; k < devices_.size(); ++k) {
        const Dev& d = devices_[k];
        const double dk = std::clamp((d.alpha - out.marginal) / d.beta, d.lo, d.hi);
        out.demand[k] = dk;
        load += dk;
        utility += d.alpha * dk - 0.5 * d.beta * dk * dk;
    }
    out.battery = std::clamp(v - load, e_lo_, e_hi_);
    out.value = utility + salvage_ * out.battery;
    return out;
}

double StepAllocator::value(double v) const { return split(v).value; }

std::vector<MarginalSegment> StepAllocator::segments() const
{
    std::vector<MarginalSegment> out;
    for (std::size_t k = 0; k < devices_.size(); ++k) {
        const Dev& d = devices_[k];
        if (d.hi > d.lo) {
            out.push_back({k, d.alpha - d.beta * d.lo, d.alpha - d.beta * d.hi, d.hi - d.lo});
        }
    }
    if (e_hi_ > e_lo_) {
        out.push_back({MarginalSegment::kBattery, salvage_, salvage_, e_hi_ - e_lo_});
    }
    std::sort(out.begin(), out.end(), [](const MarginalSegment& a, const MarginalSegment& b) {
        return a.price_high > b.price_high;
    });
    return out;
}

HelperFunction::HelperFunction(const DeviceFleet& fleet, const BatterySpec& battery,
                               double salvage, std::size_t horizon)
{
    steps_.reserve(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
        steps_.emplace_back(fleet, battery, salvage, t);
    }
}

}  // namespace nemopt::alloc
