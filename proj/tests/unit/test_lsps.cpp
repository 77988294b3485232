#include "nemopt/lsps.hpp"
#include "nemopt/oracle.hpp"

#include "../support/gen.hpp"
#include "../support/reference.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace nemopt;

namespace {

Problem lab_problem(std::vector<double> g, double buy = 0.12, double sell = 0.06,
                    double demand_price = 10.0, BatterySpec bat = {10.0, 1.0, 1.0, 0.95, 0.95})
{
    const std::size_t T = g.size();
    return Problem{TariffSchedule::flat(T, buy, sell, demand_price, 0.09),
                   DeviceFleet::constant(T, 1.0, 1.0, 1.0), bat,
                   ExogenousTrace{std::move(g), std::nullopt, 1.0}, 0.0};
}

struct RefStep {
    std::vector<ref::Dev> devs;
    double e_lo, e_hi, gamma, buy, sell;

    RefStep(const Problem& p, std::size_t t)
        : devs(ref::devices_at(p.fleet, t)),
          e_lo(-p.battery.discharge_limit),
          e_hi(p.battery.charge_limit),
          gamma(p.tariff.salvage()),
          buy(p.tariff.buy(t)),
          sell(p.tariff.sell(t))
    {
    }

    double v_min() const
    {
        double s = e_lo;
        for (const auto& d : devs) {
            s += d.lo;
        }
        return s;
    }
    double v_max() const
    {
        double s = e_hi;
        for (const auto& d : devs) {
            s += d.hi;
        }
        return s;
    }
    double objective(double v, double g) const
    {
        const double x = v - g;
        const double h = ref::helper_by_active_sets(devs, e_lo, e_hi, gamma, v).value;
        return h - buy * std::max(x, 0.0) + sell * std::max(-x, 0.0);
    }
    // golden-section search of the concave step objective on [lo, hi]
    double argmax(double g, double lo, double hi) const
    {
        const double r = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = lo, b = hi;
        while (b - a > 1e-11) {
            const double x1 = b - r * (b - a), x2 = a + r * (b - a);
            if (objective(x1, g) < objective(x2, g)) {
                a = x1;
            } else {
                b = x2;
            }
        }
        return 0.5 * (a + b);
    }
};

// J(c) from independent per-step maximizations.
double reference_J(const Problem& p, double c)
{
    double total = -p.tariff.demand_price() * c;
    for (std::size_t t = 0; t < p.horizon(); ++t) {
        const RefStep s(p, t);
        const double g = p.trace.generation[t];
        const double hi = std::max(s.v_min(), std::min(s.v_max(), c + g));
        total += s.objective(s.argmax(g, s.v_min(), hi), g);
    }
    return total;
}

}  // namespace

TEST_SUITE("lsps")
{
    TEST_CASE("unconstrained optimum: the three price regimes")
    {
        auto p = lab_problem({3.0, 1.0});
        lsps::PeakSearch search(p.tariff, p.fleet, p.battery, p.trace.generation);
        CHECK(search.v_dagger(3.0, 0) == doctest::Approx(1.94));
        CHECK(search.v_dagger(1.0, 1) == doctest::Approx(1.0));
        CHECK(search.v_dagger(0.0, 0) == doctest::Approx(0.0));  // inside the band

        auto q = lab_problem({0.2}, 0.5, 0.06, 10.0, BatterySpec{10.0, 1.0, 0.0, 1.0, 1.0});
        lsps::PeakSearch nodis(q.tariff, q.fleet, q.battery, q.trace.generation);
        CHECK(nodis.v_dagger(0.2, 0) == doctest::Approx(0.5));

        for (double g : {3.0, 1.0, 0.0}) {
            const RefStep s(p, 0);
            CHECK(search.v_dagger(g, 0) == doctest::Approx(s.argmax(g, s.v_min(), s.v_max())).epsilon(1e-7));
        }
    }

    TEST_CASE("fixed-peak policy clips to the peak bound and the box")
    {
        auto p = lab_problem({3.0, 0.0, 0.0});
        lsps::PeakSearch search(p.tariff, p.fleet, p.battery, p.trace.generation);
        CHECK(search.fixed_peak_policy(3.0, 0, 10.0) == doctest::Approx(1.94));
        // equal buy and sell rates: the unconstrained optimum is 1.94 for any g
        auto q = lab_problem({0.0, 0.0}, 0.06, 0.06);
        lsps::PeakSearch flat(q.tariff, q.fleet, q.battery, q.trace.generation);
        CHECK(flat.v_dagger(0.0, 0) == doctest::Approx(1.94));
        CHECK(flat.fixed_peak_policy(0.0, 0, 0.5) == doctest::Approx(0.5));
        CHECK(flat.fixed_peak_policy(0.0, 0, 10.0) == doctest::Approx(1.94));
        CHECK(flat.fixed_peak_policy(0.0, 1, 0.0) == doctest::Approx(0.0));
        // a floor device: the lower box wins over the peak bound
        Device floor_dev{{1.0}, {1.0}, {1.5}, {1.5}};
        Problem r{TariffSchedule::flat(1, 0.12, 0.06, 10.0, 0.09), DeviceFleet({floor_dev}, 1),
                  BatterySpec{1.0, 0.5, 0.5, 1.0, 1.0}, ExogenousTrace{{0.0}, std::nullopt, 1.0}, 0.0};
        lsps::PeakSearch pinned(r.tariff, r.fleet, r.battery, r.trace.generation);
        CHECK(pinned.fixed_peak_policy(0.0, 0, 0.2) == doctest::Approx(1.0));
    }

    TEST_CASE("candidate set examples")
    {
        auto one = lab_problem({0.0}, 0.06, 0.06);
        lsps::PeakSearch s1(one.tariff, one.fleet, one.battery, one.trace.generation);
        REQUIRE(s1.candidates().size() == 1);
        CHECK(s1.candidates()[0] == doctest::Approx(1.94));

        auto two = lab_problem({0.0, 3.0}, 0.06, 0.06);
        lsps::PeakSearch s2(two.tariff, two.fleet, two.battery, two.trace.generation);
        REQUIRE(s2.candidates().size() == 2);
        CHECK(s2.candidates()[0] == doctest::Approx(1.94));
        CHECK(s2.candidates()[1] == doctest::Approx(1.94 - 3.0));  // min(-1.06, 2 - 3)

        CHECK_THROWS_AS(lsps::PeakSearch(two.tariff, two.fleet, two.battery, {}), ValidationError);
    }

    TEST_CASE("candidates match a direct recomputation")
    {
        gen::Rng rng(31);
        for (int rep = 0; rep < 20; ++rep) {
            const auto p = gen::problem(rng, 6);
            lsps::PeakSearch search(p.tariff, p.fleet, p.battery, p.trace.generation);
            for (std::size_t t = 0; t < 6; ++t) {
                const RefStep s(p, t);
                const double g = p.trace.generation[t];
                const double v = s.argmax(g, s.v_min(), s.v_max());
                CHECK(search.candidates()[t] ==
                      doctest::Approx(std::min(v - g, s.v_max() - g)).epsilon(1e-6));
            }
        }
    }

    TEST_CASE("derivative of J: limits and finite differences")
    {
        // candidates 1.44 and 1.94, so the bound binds on part of the range
        auto p = lab_problem({0.5, 0.0}, 0.06, 0.06);
        lsps::PeakSearch search(p.tariff, p.fleet, p.battery, p.trace.generation);
        const double top = *std::max_element(search.candidates().begin(), search.candidates().end());
        CHECK(search.J_prime(top + 1.0) == doctest::Approx(-10.0));
        CHECK_THROWS(search.J_prime(-1.0));

        CHECK(search.J_prime(1.2) > search.J_prime(1.6));
        for (double c : {0.1, 0.4, 0.9, 1.3, 1.6}) {
            const double eps = 1e-6;
            const double fd = (reference_J(p, c + eps) - reference_J(p, c)) / eps;
            CHECK(search.J_prime(c) == doctest::Approx(fd).epsilon(1e-4));
            CHECK(search.J_value(c) == doctest::Approx(reference_J(p, c)).epsilon(1e-9));
        }

        auto free = lab_problem({0.5, 2.0}, 0.12, 0.06, 0.0);
        lsps::PeakSearch fs(free.tariff, free.fleet, free.battery, free.trace.generation);
        CHECK(fs.J_prime(0.2) >= 0.0);
    }

    TEST_CASE("peak search: no demand charge picks the largest candidate")
    {
        auto p = lab_problem({0.0, 3.0, 1.0}, 0.12, 0.06, 0.0);
        lsps::PeakSearch search(p.tariff, p.fleet, p.battery, p.trace.generation);
        const auto rep = search.find_c_star();
        const double top = *std::max_element(search.candidates().begin(), search.candidates().end());
        CHECK(rep.c_star == doctest::Approx(std::max(0.0, top)));
        const auto scan = oracle::relaxed_grid_scan(p, {0.0, 0.5, 1.0, 1.5, 1.94, 2.5, 3.0});
        CHECK(scan.J.back() == doctest::Approx(scan.J[4]));  // flat beyond the largest candidate
    }

    TEST_CASE("peak search: single step closed form")
    {
        const std::size_t T = 1;
        Problem p{TariffSchedule::flat(T, 0.12, 0.06, 10.0, 0.0), DeviceFleet::constant(T, 20.0, 1.0, 20.0),
                  BatterySpec{0.0, 0.0, 0.0, 1.0, 1.0}, ExogenousTrace{{0.0}, std::nullopt, 1.0}, 0.0};
        lsps::PeakSearch search(p.tariff, p.fleet, p.battery, p.trace.generation);
        const auto rep = search.find_c_star();
        // h'(c) = 20 - c must equal the demand price plus the buy rate
        CHECK(rep.c_star == doctest::Approx(20.0 - 10.12).epsilon(1e-8));
        CHECK(rep.c1 <= rep.c_star);
        CHECK(rep.c_star <= rep.c2);
    }

    TEST_CASE("random instances: c* maximizes J, J is concave, J' is monotone")
    {
        gen::Rng rng(32);
        for (int rep = 0; rep < 25; ++rep) {
            const auto p = gen::problem(rng, 24);
            lsps::PeakSearch search(p.tariff, p.fleet, p.battery, p.trace.generation);
            const auto r = search.find_c_star();
            CHECK(r.c_star >= 0.0);

            std::vector<double> cands = search.candidates();
            std::sort(cands.begin(), cands.end());
            for (std::size_t i = 1; i < cands.size(); ++i) {
                if (cands[i - 1] >= 0.0) {
                    CHECK(search.J_prime(cands[i]) <= search.J_prime(cands[i - 1]) + 1e-12);
                }
            }
            // J is defined where every step can meet the bound
            double lowest = 0.0;
            for (std::size_t t = 0; t < 24; ++t) {
                lowest = std::max(lowest, RefStep(p, t).v_min() - p.trace.generation[t]);
            }
            const double top = std::max(cands.back(), lowest) + 1.0;
            const double h = (top - lowest) / 400.0;
            double best = -1e300;
            for (int i = 0; i <= 400; ++i) {
                const double c = lowest + i * h;
                best = std::max(best, search.J_value(c));
                if (i >= 2) {
                    const double d2 = search.J_value(c) - 2 * search.J_value(c - h) +
                                      search.J_value(c - 2 * h);
                    CHECK(d2 <= 1e-9);
                }
            }
            CHECK(r.J_star >= best - 1e-9 * std::max(1.0, std::abs(best)));
            CHECK(r.J_star == doctest::Approx(reference_J(p, r.c_star)).epsilon(1e-8));
        }
    }

    TEST_CASE("fixed peak: per-step solutions match independent maximizations")
    {
        gen::Rng rng(33);
        for (int rep = 0; rep < 10; ++rep) {
            const auto p = gen::problem(rng, 8);
            lsps::PeakSearch search(p.tariff, p.fleet, p.battery, p.trace.generation);
            const double c = gen::uniform(rng, 0.0, 2.0);
            for (std::size_t t = 0; t < 8; ++t) {
                const RefStep s(p, t);
                const double g = p.trace.generation[t];
                const double hi = std::max(s.v_min(), std::min(s.v_max(), c + g));
                const double v_ref = s.argmax(g, s.v_min(), hi);
                const double v = search.fixed_peak_policy(g, t, c);
                CHECK(s.objective(v, g) >= s.objective(v_ref, g) - 1e-9);
                CHECK(v <= hi + 1e-12);
            }
        }
    }

    TEST_CASE("schedule: large lossless storage reaches the relaxed optimum")
    {
        gen::Rng rng(34);
        for (int rep = 0; rep < 10; ++rep) {
            auto p = gen::problem(rng, 24);
            p.battery.eff_charge = p.battery.eff_discharge = 1.0;
            const double throughput = 24 * std::max(p.battery.charge_limit, p.battery.discharge_limit);
            p.battery.capacity = 2 * throughput + 1.0;
            p.initial_soc = throughput + 0.5;
            const auto res = lsps::schedule(p);
            CHECK(res.schedule.clip_count == 0);
            CHECK(res.ledger.total_reward ==
                  doctest::Approx(res.schedule.search.J_star + p.tariff.salvage() * p.initial_soc)
                      .epsilon(1e-6));
            CHECK(res.schedule.realized_peak <= res.schedule.computed_peak + 1e-9);
        }
    }

    TEST_CASE("schedule: battery-only arbitrage matches the lattice optimum")
    {
        // charge when the buy rate is under the salvage rate, discharge when
        // the sell rate is above it
        Problem p{TariffSchedule({0.05, 0.3, 0.05}, {0.04, 0.2, 0.04}, 0.0, 0.1), DeviceFleet{},
                  BatterySpec{2.0, 1.0, 1.0, 1.0, 1.0}, ExogenousTrace{{0.0, 0.0, 0.0}, std::nullopt, 1.0},
                  1.0};
        const auto res = lsps::schedule(p);
        CHECK(res.schedule.steps[0].action.battery == doctest::Approx(1.0));
        CHECK(res.schedule.steps[1].action.battery == doctest::Approx(-1.0));
        CHECK(res.schedule.steps[2].action.battery == doctest::Approx(1.0));
        const auto dp = oracle::brute_force_dp(p);
        CHECK(res.ledger.total_reward == doctest::Approx(dp.value).epsilon(1e-9));
    }

    TEST_CASE("schedule: actions respect every box and the SoC stays in range")
    {
        gen::Rng rng(35);
        for (int rep = 0; rep < 30; ++rep) {
            const auto p = gen::problem(rng, 24);
            const auto res = lsps::schedule(p);
            const double c = res.schedule.computed_peak;
            for (std::size_t t = 0; t < 24; ++t) {
                const auto& st = res.schedule.steps[t];
                const auto& rec = res.ledger.steps[t];
                const RefStep s(p, t);
                CHECK(st.v_star <= std::min(c + p.trace.generation[t], s.v_max()) + 1e-9);
                CHECK(st.v_star >= s.v_min() - 1e-9);
                CHECK(rec.state.soc >= 0.0);
                CHECK(rec.state.soc <= p.battery.capacity);
                CHECK_FALSE(rec.clipped);
                CHECK(rec.applied.battery == st.action.battery);
            }
            CHECK(res.ledger.clip_count == 0);
        }
    }

    TEST_CASE("schedule: a noisy forecast keeps c* and records the realized peak")
    {
        auto p = lab_problem({0.0, 0.5, 2.0, 3.0, 2.0, 0.5, 0.0, 0.0});
        std::vector<double> forecast = {0.0, 0.7, 2.6, 3.3, 1.2, 0.1, 0.0, 0.0};
        const auto res = lsps::schedule(p, forecast);
        lsps::PeakSearch planned(p.tariff, p.fleet, p.battery, forecast);
        CHECK(res.schedule.computed_peak == doctest::Approx(planned.find_c_star().c_star));
        CHECK(res.schedule.realized_peak == res.ledger.realized_peak());
        CHECK_THROWS_AS(lsps::schedule(p, std::vector<double>{1.0}), ValidationError);
    }
}
