#pragma once

// Instance construction: utility calibration from a demand elasticity,
// the synthetic daily generation profile, forecast noise, and random
// instance generators used by the property checks.

#include "nemopt/dp_validator.hpp"
#include "nemopt/model.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace nemopt::harness {

inline constexpr double kMinBeta = 1e-6;

/// One device per building with per-step quadratic utility such that the
/// marginal utility equals `baseline_price` at the baseline demand and the
/// price elasticity of demand there is `elasticity`:
///   beta_t = -p0 / (eps * d0_t),  alpha_t = p0 + beta_t * d0_t.
/// The cap is `dmax_factor` times the baseline demand.
DeviceFleet calibrate_fleet(const std::vector<double>& baseline_demand, double baseline_price,
                            double elasticity, double dmax_factor = 2.0);

struct SyntheticSpec {
    std::size_t hours = 24;
    double peak_generation = 3.0;  // kW at solar noon
    double baseline_demand = 1.0;  // kW, constant
    double jitter = 0.0;           // relative, uniform in [-jitter, jitter]
    std::uint64_t seed = 1;
};

/// g_t = G * max(0, sin(pi (t - 6) / 12)) * (1 + jitter * u_t), repeating
/// daily, with the constant baseline recorded as reference demand.
ExogenousTrace synthetic_trace(const SyntheticSpec& spec);

/// g~_t = max(0, g_t (1 + sigma xi_t)), xi_t i.i.d. standard normal.
std::vector<double> inject_noise(const std::vector<double>& generation, double sigma,
                                 std::uint64_t seed);

/// Random instance for the relaxed-problem checks: 1 to 3 devices with
/// time-varying parameters, per-step tariffs and a lossy battery.
Problem random_problem(std::mt19937_64& rng, std::size_t horizon);

/// Random lattice-sized instance: T in [2, 4], up to 2 devices, and either a
/// deterministic trace or a stochastically monotone 2-3 level chain.
dpv::DpInstance random_tiny_instance(std::mt19937_64& rng, bool stochastic);

}  // namespace nemopt::harness
