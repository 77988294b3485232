#pragma once

// Optimal split of a net quantity v (consumption plus battery power, before
// generation) between the devices and the battery, valuing battery power at
// the salvage rate:
//
//   h_t(v) = max { U_t(d) + salvage * e : sum(d) + e = v, boxes on d and e }.
//
// Solved exactly by water-filling on the common marginal value.

#include "nemopt/model.hpp"

#include <vector>

namespace nemopt::alloc {

/// One linear piece of the marginal-value curve, in decreasing price order.
struct MarginalSegment {
    static constexpr std::size_t kBattery = static_cast<std::size_t>(-1);

    std::size_t source = kBattery;  // device index, or kBattery
    double price_high = 0.0;
    double price_low = 0.0;
    double width = 0.0;
};

struct AllocationResult {
    double battery = 0.0;
    std::vector<double> demand;
    double value = 0.0;
    double marginal = 0.0;
};

/// Water-filling solver for a single step.
class StepAllocator {
public:
    StepAllocator(const DeviceFleet& fleet, const BatterySpec& battery, double salvage,
                  std::size_t t);

    double v_min() const { return v_min_; }
    double v_max() const { return v_max_; }

    double value(double v) const;
    /// Common marginal value; left limit at kinks.
    double marginal(double v) const;
    /// Largest v whose marginal is at least `price`, clipped to the domain.
    double inverse_marginal(double price) const;
    AllocationResult split(double v) const;

    std::vector<MarginalSegment> segments() const;

private:
    struct Dev {
        double alpha, beta, lo, hi;
    };
    struct Knot {
        double v;
        double price;
    };

    /// Total allocation at marginal price `price`; the battery takes its
    /// upper bound when price == salvage if `battery_high`.
    double total_at(double price, bool battery_high) const;
    void check_domain(double v, const char* who) const;

    std::vector<Dev> devices_;
    double salvage_;
    double e_lo_;
    double e_hi_;
    double v_min_;
    double v_max_;
    std::vector<Knot> knots_;
};

/// Horizon-wide view: one allocator per step.
class HelperFunction {
public:
    HelperFunction(const DeviceFleet& fleet, const BatterySpec& battery, double salvage,
                   std::size_t horizon);

    std::size_t horizon() const { return steps_.size(); }
    const StepAllocator& step(std::size_t t) const { return steps_.at(t); }

    double h_value(double v, std::size_t t) const { return step(t).value(v); }
    double h_prime(double v, std::size_t t) const { return step(t).marginal(v); }
    double h_prime_inv(double price, std::size_t t) const
    {
        return step(t).inverse_marginal(price);
    }
    AllocationResult split_allocation(double v, std::size_t t) const { return step(t).split(v); }

private:
    std::vector<StepAllocator> steps_;
};

}  // namespace nemopt::alloc
