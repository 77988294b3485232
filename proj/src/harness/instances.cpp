#include "nemopt/harness/instances.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nemopt::harness {

DeviceFleet calibrate_fleet(const std::vector<double>& baseline_demand, double baseline_price,
                            double elasticity, double dmax_factor)
{
    if (!(elasticity < 0.0)) {
        throw ValidationError("elasticity must be negative");
    }
    if (!(baseline_price > 0.0)) {
        throw ValidationError("baseline price must be positive");
    }
    if (!(dmax_factor >= 1.0)) {
        throw ValidationError("dmax_factor must be at least 1");
    }
    const std::size_t T = baseline_demand.size();
    Device dev;
    dev.alpha.resize(T);
    dev.beta.resize(T);
    dev.d_max.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        const double d0 = baseline_demand[t];
        if (!(d0 > 0.0)) {
            throw ValidationError("baseline demand must be positive at step " + std::to_string(t));
        }
        const double beta = -baseline_price / (elasticity * d0);
        if (!(beta > kMinBeta)) {
            throw ValidationError("calibrated beta below the minimum at step " +
                                  std::to_string(t));
        }
        dev.beta[t] = beta;
        dev.alpha[t] = baseline_price + beta * d0;
        dev.d_max[t] = dmax_factor * d0;
    }
    return DeviceFleet({std::move(dev)}, T);
}

ExogenousTrace synthetic_trace(const SyntheticSpec& spec)
{
    if (spec.hours == 0) {
        throw ValidationError("synthetic trace needs at least one hour");
    }
    if (!(spec.peak_generation >= 0.0) || !(spec.baseline_demand > 0.0) ||
        !(spec.jitter >= 0.0 && spec.jitter <= 1.0)) {
        throw ValidationError("synthetic trace parameters out of range");
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    ExogenousTrace tr;
    tr.generation.resize(spec.hours);
    for (std::size_t t = 0; t < spec.hours; ++t) {
        const double hour = static_cast<double>(t % 24);
        const double shape = std::max(0.0, std::sin(std::numbers::pi * (hour - 6.0) / 12.0));
        const double u = unit(rng);
        tr.generation[t] = spec.peak_generation * shape * (1.0 + spec.jitter * u);
    }
    tr.reference_demand = std::vector<double>(spec.hours, spec.baseline_demand);
    return tr;
}

std::vector<double> inject_noise(const std::vector<double>& generation, double sigma,
                                 std::uint64_t seed)
{
    if (!(sigma >= 0.0)) {
        throw ValidationError("noise sigma must be non-negative");
    }
    std::vector<double> out = generation;
    if (sigma == 0.0) {
        return out;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> xi(0.0, 1.0);
    for (double& g : out) {
        g = std::max(0.0, g * (1.0 + sigma * xi(rng)));
    }
    return out;
}

Problem random_problem(std::mt19937_64& rng, std::size_t T)
{
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::uniform_int_distribution<int> devices(1, 3);
    const int K = devices(rng);
    std::vector<Device> fleet;
    for (int k = 0; k < K; ++k) {
        Device d;
        for (std::size_t t = 0; t < T; ++t) {
            d.alpha.push_back(0.2 + U(rng));
            d.beta.push_back(0.3 + 1.5 * U(rng));
            d.d_max.push_back(0.5 + 1.5 * U(rng));
        }
        fleet.push_back(std::move(d));
    }
    std::vector<double> buy(T), sell(T), gen(T);
    for (std::size_t t = 0; t < T; ++t) {
        buy[t] = 0.08 + 0.2 * U(rng);
        sell[t] = buy[t] * U(rng);
        gen[t] = 3.0 * U(rng) * U(rng);
    }
    const double demand_price = 2.0 * U(rng);
    const double salvage = 0.1 * U(rng);
    BatterySpec bat{1.0 + 9.0 * U(rng), 0.5 + U(rng), 0.5 + U(rng), 0.85 + 0.15 * U(rng),
                    0.85 + 0.15 * U(rng)};
    const double s0 = bat.capacity * U(rng);
    return Problem{TariffSchedule(std::move(buy), std::move(sell), demand_price, salvage),
                   DeviceFleet(std::move(fleet), T), bat, ExogenousTrace{std::move(gen), std::nullopt, 1.0}, s0};
}

dpv::DpInstance random_tiny_instance(std::mt19937_64& rng, bool stochastic)
{
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::uniform_int_distribution<int> horizon(2, 4);
    std::uniform_int_distribution<int> devices(0, 2);
    std::uniform_int_distribution<int> levels(2, 3);
    const std::size_t T = static_cast<std::size_t>(horizon(rng));
    const int K = devices(rng);

    std::vector<Device> fleet;
    for (int k = 0; k < K; ++k) {
        Device d;
        for (std::size_t t = 0; t < T; ++t) {
            d.alpha.push_back(0.2 + 0.8 * U(rng));
            d.beta.push_back(0.5 + U(rng));
            d.d_max.push_back(0.5 + U(rng));
        }
        fleet.push_back(std::move(d));
    }
    std::vector<double> buy(T), sell(T);
    for (std::size_t t = 0; t < T; ++t) {
        buy[t] = 0.1 + 0.2 * U(rng);
        sell[t] = buy[t] * U(rng);
    }
    BatterySpec bat{2.0, 0.5 + 0.5 * U(rng), 0.5 + 0.5 * U(rng), 0.9 + 0.1 * U(rng),
                    0.9 + 0.1 * U(rng)};

    dpv::MarkovChain chain;
    if (!stochastic) {
        std::vector<double> g(T);
        for (double& x : g) {
            x = 2.0 * U(rng);
        }
        chain = dpv::MarkovChain::deterministic(g);
    } else {
        const std::size_t n = static_cast<std::size_t>(levels(rng));
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<double> lv(n);
            double base = 0.0;
            for (double& x : lv) {
                base += 0.2 + 0.8 * U(rng);
                x = base;
            }
            chain.levels.push_back(std::move(lv));
        }
        // Rows mix a low-biased and a high-biased distribution with a weight
        // rising in the current level, which makes the chain stochastically
        // monotone.
        for (std::size_t t = 0; t + 1 < T; ++t) {
            std::vector<double> weight(n);
            for (double& w : weight) {
                w = U(rng);
            }
            std::sort(weight.begin(), weight.end());
            const double norm = static_cast<double>(n * (n + 1)) / 2.0;
            std::vector<std::vector<double>> rows(n, std::vector<double>(n));
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double low = static_cast<double>(n - j) / norm;
                    const double high = static_cast<double>(j + 1) / norm;
                    rows[i][j] = (1.0 - weight[i]) * low + weight[i] * high;
                }
            }
            chain.transition.push_back(std::move(rows));
        }
        chain.initial.assign(n, 1.0 / static_cast<double>(n));
    }
    return dpv::DpInstance{
        TariffSchedule(std::move(buy), std::move(sell), 1.5 * U(rng), 0.08 * U(rng)),
        DeviceFleet(std::move(fleet), T), bat, std::move(chain), bat.capacity * 0.5};
}

}  // namespace nemopt::harness
