#include "nemopt/dp_validator.hpp"

#include "nemopt/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace nemopt::dpv {

namespace {

constexpr double kTie = 1e-12;
constexpr double kSnap = 1e-9;
constexpr double kMonotoneTol = 1e-9;

std::vector<double> uniform_grid(double lo, double hi, std::size_t n)
{
    if (hi <= lo || n <= 1) {
        return {lo};
    }
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) {
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    grid.back() = hi;
    return grid;
}

double cell(const std::vector<double>& grid)
{
    return grid.size() > 1 ? grid[1] - grid[0] : 0.0;
}

struct Combo {
    double load;
    double utility;
    std::vector<double> demand;
};

std::vector<Combo> demand_combos(const DeviceFleet& fleet, std::size_t t, std::size_t levels)
{
    std::vector<Combo> combos{{0.0, 0.0, {}}};
    for (const Device& dev : fleet.devices()) {
        const std::vector<double> grid = uniform_grid(dev.lower(t), dev.upper(t), levels);
        std::vector<Combo> next;
        next.reserve(combos.size() * grid.size());
        for (const Combo& base : combos) {
            for (double d : grid) {
                Combo c = base;
                c.load += d;
                c.utility += dev.utility(t, d);
                c.demand.push_back(d);
                next.push_back(std::move(c));
            }
        }
        combos = std::move(next);
    }
    return combos;
}

std::string location(std::size_t t, std::size_t s, std::size_t g, std::size_t c)
{
    std::ostringstream os;
    os << "t=" << t << " s=" << s << " g=" << g << " c=" << c;
    return os.str();
}

}  // namespace

MarkovChain MarkovChain::deterministic(const std::vector<double>& g)
{
    MarkovChain chain;
    for (double x : g) {
        chain.levels.push_back({x});
    }
    if (!g.empty()) {
        chain.transition.assign(g.size() - 1, {{1.0}});
    }
    chain.initial = {1.0};
    return chain;
}

bool MarkovChain::is_deterministic() const
{
    return std::all_of(levels.begin(), levels.end(),
                       [](const std::vector<double>& l) { return l.size() == 1; });
}

void MarkovChain::validate() const
{
    const std::size_t T = levels.size();
    if (T == 0) {
        throw ValidationError("generation chain is empty");
    }
    if (transition.size() != T - 1) {
        throw ValidationError("generation chain needs T-1 transition matrices");
    }
    auto check_dist = [](const std::vector<double>& row, std::size_t n, const char* what) {
        if (row.size() != n) {
            throw ValidationError(std::string(what) + " has the wrong length");
        }
        double sum = 0.0;
        for (double p : row) {
            if (!(p >= 0.0)) {
                throw ValidationError(std::string(what) + " has a negative entry");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw ValidationError(std::string(what) + " does not sum to one");
        }
    };
    for (std::size_t t = 0; t < T; ++t) {
        if (levels[t].empty()) {
            throw ValidationError("generation chain step without levels");
        }
        for (std::size_t i = 0; i < levels[t].size(); ++i) {
            if (!(levels[t][i] >= 0.0) || !std::isfinite(levels[t][i])) {
                throw ValidationError("generation levels must be finite and >= 0");
            }
            if (i > 0 && levels[t][i] <= levels[t][i - 1]) {
                throw ValidationError("generation levels must be strictly increasing");
            }
        }
    }
    check_dist(initial, levels[0].size(), "initial distribution");
    for (std::size_t t = 0; t + 1 < T; ++t) {
        if (transition[t].size() != levels[t].size()) {
            throw ValidationError("transition matrix row count differs from levels");
        }
        for (const auto& row : transition[t]) {
            check_dist(row, levels[t + 1].size(), "transition row");
        }
    }
}

void DpInstance::validate() const
{
    generation.validate();
    battery.validate();
    const std::size_t T = horizon();
    if (tariff.horizon() != T) {
        throw ValidationError("tariff horizon differs from generation chain horizon");
    }
    if (fleet.size() > 0 && fleet.horizon() != T) {
        throw ValidationError("fleet horizon differs from generation chain horizon");
    }
    if (!(initial_soc >= 0.0 && initial_soc <= battery.capacity)) {
        throw ValidationError("initial SoC outside [0, capacity]");
    }
}

ValueTable backward_induction(const DpInstance& inst, const LatticeSpec& grids)
{
    inst.validate();
    const std::size_t T = inst.horizon();
    const BatterySpec& bat = inst.battery;
    const TariffSchedule& tariff = inst.tariff;
    if (T > kMaxHorizon) {
        throw ValidationError("lattice DP limited to T <= " + std::to_string(kMaxHorizon));
    }
    if (inst.fleet.size() > kMaxDevices) {
        throw ValidationError("lattice DP limited to " + std::to_string(kMaxDevices) + " devices");
    }
    if (grids.soc_levels > kMaxLevels || grids.peak_levels > kMaxLevels ||
        grids.demand_levels > kMaxLevels || grids.soc_levels == 0 || grids.peak_levels == 0) {
        throw ValidationError("lattice grids need between 1 and " + std::to_string(kMaxLevels) +
                              " levels");
    }

    ValueTable tab;
    tab.salvage = tariff.salvage();
    tab.g_levels = inst.generation.levels;
    tab.deterministic_g = inst.generation.is_deterministic();
    tab.soc_grid = uniform_grid(0.0, bat.capacity, grids.soc_levels);

    double c_max = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const double top = inst.fleet.total_upper(t) + bat.charge_limit - tab.g_levels[t].front();
        c_max = std::max(c_max, top);
    }
    tab.peak_grid = uniform_grid(0.0, c_max, grids.peak_levels);

    const std::size_t ns = tab.soc_grid.size();
    const std::size_t nc = tab.peak_grid.size();
    const bool exact_demand = grids.demand_levels == 0;
    const BatterySpec no_battery{};
    std::vector<std::vector<Combo>> combos(T);
    std::vector<alloc::StepAllocator> loads;
    double work = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        double per_state = static_cast<double>(ns) * nc;
        if (exact_demand) {
            loads.emplace_back(inst.fleet, no_battery, 0.0, t);
        } else {
            combos[t] = demand_combos(inst.fleet, t, grids.demand_levels);
            per_state = static_cast<double>(ns) * combos[t].size();
        }
        work += static_cast<double>(ns) * tab.g_levels[t].size() * nc * per_state;
    }
    if (work > kMaxWork) {
        throw ValidationError("lattice DP exceeds the work guardrail");
    }
    tab.work = work;

    tab.values.resize(T + 1);
    tab.policy.resize(T);
    tab.values[T].resize(ns * nc);
    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t c = 0; c < nc; ++c) {
            tab.values[T][tab.index(T, s, 0, c)] = tab.salvage * tab.soc_grid[s];
        }
    }

    const double p = tariff.demand_price();
    for (std::size_t tt = T; tt-- > 0;) {
        const std::size_t ng = tab.g_levels[tt].size();
        tab.values[tt].assign(ns * ng * nc, 0.0);
        tab.policy[tt].assign(ns * ng * nc, StageDecision{});
        auto stage_payment = [&](double z, double c, std::size_t c2) {
            return tariff.buy(tt) * pos_part(z) - tariff.sell(tt) * neg_part(z) +
                   p * (tab.peak_grid[c2] - c) + tariff.fixed_charge();
        };

        // Unconstrained best aggregate demand for each sign of z, as in the
        // single-step problem with the battery power fixed.
        double load_export = 0.0, load_import = 0.0, load_lo = 0.0, load_hi = 0.0;
        if (exact_demand) {
            const alloc::StepAllocator& la = loads[tt];
            load_export = la.inverse_marginal(tariff.sell(tt));
            load_import = la.inverse_marginal(tariff.buy(tt));
            load_lo = la.v_min();
            load_hi = la.v_max();
        }

        for (std::size_t gi = 0; gi < ng; ++gi) {
            // Expected continuation value for each (s', c') given today's g.
            std::vector<double> cont(ns * nc, 0.0);
            for (std::size_t s2 = 0; s2 < ns; ++s2) {
                for (std::size_t c2 = 0; c2 < nc; ++c2) {
                    double ev = 0.0;
                    if (tt + 1 == T) {
                        ev = tab.value(T, s2, 0, c2);
                    } else {
                        const auto& row = inst.generation.transition[tt][gi];
                        for (std::size_t gj = 0; gj < row.size(); ++gj) {
                            ev += row[gj] * tab.value(tt + 1, s2, gj, c2);
                        }
                    }
                    cont[s2 * nc + c2] = ev;
                }
            }

            const double g = tab.g_levels[tt][gi];
            for (std::size_t si = 0; si < ns; ++si) {
                const double s = tab.soc_grid[si];
                for (std::size_t ci = 0; ci < nc; ++ci) {
                    const double c = tab.peak_grid[ci];
                    double best = -std::numeric_limits<double>::infinity();
                    StageDecision dec;
                    double best_load = 0.0;
                    std::size_t best_combo = 0;
                    auto consider = [&](double total, double e, std::size_t s2, std::size_t c2,
                                        double z) {
                        if (total > best + kTie ||
                            (total >= best - kTie && std::abs(e) < std::abs(dec.battery))) {
                            best = std::max(best, total);
                            dec.battery = e;
                            dec.next_soc = s2;
                            dec.next_peak = c2;
                            dec.net = z;
                            return true;
                        }
                        return false;
                    };
                    for (std::size_t s2 = 0; s2 < ns; ++s2) {
                        const double ds = tab.soc_grid[s2] - s;
                        const double e = ds >= 0.0 ? ds / bat.eff_charge : ds * bat.eff_discharge;
                        if (e > bat.charge_limit + kTie || e < -bat.discharge_limit - kTie) {
                            continue;
                        }
                        const double x = e - g;
                        if (exact_demand) {
                            double free_load = x + load_export < 0.0   ? load_export
                                               : x + load_import > 0.0 ? load_import
                                                                       : -x;
                            free_load = std::clamp(free_load, load_lo, load_hi);
                            // Choose the next peak level and cap z by it.
                            for (std::size_t c2 = ci; c2 < nc; ++c2) {
                                const double cap = tab.peak_grid[c2] - x;
                                if (cap < load_lo - kTie) {
                                    continue;
                                }
                                const double L = std::clamp(std::min(free_load, cap), load_lo,
                                                            load_hi);
                                const double z = L + x;
                                const double total = loads[tt].value(L) -
                                                     stage_payment(z, c, c2) +
                                                     cont[s2 * nc + c2];
                                if (consider(total, e, s2, c2, z)) {
                                    best_load = L;
                                }
                                if (L < cap) {
                                    break;  // larger peak levels only cost more
                                }
                            }
                            continue;
                        }
                        for (std::size_t k = 0; k < combos[tt].size(); ++k) {
                            const Combo& combo = combos[tt][k];
                            const double z = combo.load + x;
                            const double peak = std::max(z, c);
                            auto it = std::lower_bound(tab.peak_grid.begin(), tab.peak_grid.end(),
                                                       peak - kSnap);
                            const std::size_t c2 = it == tab.peak_grid.end()
                                                       ? nc - 1
                                                       : static_cast<std::size_t>(
                                                             it - tab.peak_grid.begin());
                            const double total =
                                combo.utility - stage_payment(z, c, c2) + cont[s2 * nc + c2];
                            if (consider(total, e, s2, c2, z)) {
                                best_combo = k;
                            }
                        }
                    }
                    dec.demand = exact_demand ? loads[tt].split(best_load).demand
                                              : combos[tt][best_combo].demand;
                    const std::size_t idx = tab.index(tt, si, gi, ci);
                    tab.values[tt][idx] = best;
                    tab.policy[tt][idx] = std::move(dec);
                }
            }
        }
    }

    // Less stored energy never helps, so snapping the start down keeps the
    // lattice value a lower bound.
    std::size_t s0 = 0;
    for (std::size_t i = 0; i < ns; ++i) {
        if (tab.soc_grid[i] <= inst.initial_soc + kSnap) {
            s0 = i;
        }
    }
    tab.snapped_soc = tab.soc_grid[s0];
    for (std::size_t gi = 0; gi < tab.g_levels[0].size(); ++gi) {
        tab.root_value += inst.generation.initial[gi] * tab.value(0, s0, gi, 0);
    }

    // Objective Lipschitz constants times lattice cells.
    const double ds = cell(tab.soc_grid);
    const double eff = std::min(bat.eff_charge, bat.eff_discharge);
    double bound = p * cell(tab.peak_grid) + tab.salvage * ds +
                   tab.salvage * (inst.initial_soc - tab.snapped_soc);
    for (std::size_t t = 0; t < T; ++t) {
        const double lz = tariff.buy(t) + p;
        bound += lz * 2.0 * ds / eff;
        for (const Device& dev : inst.fleet.devices()) {
            const double dd = dev.upper(t) > dev.lower(t) && !exact_demand
                                  ? (dev.upper(t) - dev.lower(t)) / (grids.demand_levels - 1)
                                  : 0.0;
            const double lu = std::max(std::abs(dev.marginal(t, dev.lower(t))),
                                       std::abs(dev.marginal(t, dev.upper(t))));
            bound += (lu + lz) * 0.5 * dd;
        }
    }
    tab.discretization_bound = bound;
    return tab;
}

PropertyReport check_concavity(const ValueTable& tab, bool strict)
{
    PropertyReport rep;
    rep.property = "concavity";
    const std::size_t ns = tab.soc_grid.size();
    const std::size_t nc = tab.peak_grid.size();
    for (std::size_t t = 0; t < tab.horizon(); ++t) {
        for (std::size_t g = 0; g < tab.g_count(t); ++g) {
            double vmin = std::numeric_limits<double>::infinity();
            double vmax = -vmin;
            for (std::size_t s = 0; s < ns; ++s) {
                for (std::size_t c = 0; c < nc; ++c) {
                    vmin = std::min(vmin, tab.value(t, s, g, c));
                    vmax = std::max(vmax, tab.value(t, s, g, c));
                }
            }
            const double range = vmax - vmin;
            const double slack_s = strict || ns < 2 ? 0.0 : range / static_cast<double>(ns - 1);
            const double slack_c = strict || nc < 2 ? 0.0 : range / static_cast<double>(nc - 1);
            const double slack_d = std::max(slack_s, slack_c);

            auto probe = [&](std::size_t s, std::size_t c, int ds, int dc, double slack) {
                const double mid = tab.value(t, s, g, c);
                const double a = tab.value(t, s - ds, g, c - dc);
                const double b = tab.value(t, s + ds, g, c + dc);
                const double viol = std::max(0.0, 0.5 * (a + b) - mid);
                const double allow = 1e-9 + slack;
                ++rep.checks;
                rep.tolerance = std::max(rep.tolerance, allow);
                if (viol > rep.worst_violation) {
                    rep.worst_violation = viol;
                    rep.worst_location = location(t, s, g, c);
                }
                if (viol > allow) {
                    ++rep.violations;
                }
            };
            for (std::size_t s = 0; s < ns; ++s) {
                for (std::size_t c = 0; c < nc; ++c) {
                    const bool si = s > 0 && s + 1 < ns;
                    const bool ci = c > 0 && c + 1 < nc;
                    if (si) {
                        probe(s, c, 1, 0, slack_s);
                    }
                    if (ci) {
                        probe(s, c, 0, 1, slack_c);
                    }
                    if (si && ci) {
                        probe(s, c, 1, 1, slack_d);
                        probe(s, c, 1, -1, slack_d);
                    }
                }
            }
        }
    }
    return rep;
}

PropertyReport check_monotonicity(const ValueTable& tab)
{
    PropertyReport rep;
    rep.property = "monotonicity";
    rep.tolerance = kMonotoneTol;
    const std::size_t ns = tab.soc_grid.size();
    const std::size_t nc = tab.peak_grid.size();
    auto compare = [&](double lo, double hi, const std::string& where) {
        const double viol = std::max(0.0, lo - hi);
        ++rep.checks;
        if (viol > rep.worst_violation) {
            rep.worst_violation = viol;
            rep.worst_location = where;
        }
        if (viol > kMonotoneTol) {
            ++rep.violations;
        }
    };
    for (std::size_t t = 0; t <= tab.horizon(); ++t) {
        const std::size_t ng = tab.g_count(t);
        for (std::size_t s = 0; s < ns; ++s) {
            for (std::size_t g = 0; g < ng; ++g) {
                for (std::size_t c = 0; c < nc; ++c) {
                    const double v = tab.value(t, s, g, c);
                    if (s + 1 < ns) {
                        compare(v, tab.value(t, s + 1, g, c), location(t, s, g, c) + " along s");
                    }
                    if (g + 1 < ng) {
                        compare(v, tab.value(t, s, g + 1, c), location(t, s, g, c) + " along g");
                    }
                    if (c + 1 < nc) {
                        compare(v, tab.value(t, s, g, c + 1), location(t, s, g, c) + " along c");
                    }
                }
            }
        }
    }
    return rep;
}

ThresholdReport extract_thresholds(const ValueTable& tab, const DpInstance& inst)
{
    ThresholdReport rep;
    const BatterySpec& bat = inst.battery;
    const std::size_t ns = tab.soc_grid.size();
    const std::size_t nc = tab.peak_grid.size();
    const double eff = std::min(bat.eff_charge, bat.eff_discharge);
    rep.tolerance = cell(tab.soc_grid) / eff + 2.0 * cell(tab.peak_grid) + kMonotoneTol;
    for (std::size_t t = 0; t < tab.horizon(); ++t) {
        for (std::size_t g = 0; g < tab.g_count(t); ++g) {
            for (std::size_t c = 0; c < nc; ++c) {
                ++rep.slices;
                for (std::size_t s = 0; s < ns; ++s) {
                    const StageDecision& d = tab.decision(t, s, g, c);
                    if (d.battery <= -bat.discharge_limit + kSnap ||
                        (d.battery < 0.0 && d.next_soc == 0)) {
                        ++rep.lower_face;
                    } else if (d.battery >= bat.charge_limit - kSnap ||
                               (d.battery > 0.0 && d.next_soc + 1 == ns)) {
                        ++rep.upper_face;
                    } else if (c > 0 && std::abs(d.net - tab.peak_grid[c]) <= kSnap) {
                        ++rep.peak_face;
                    } else {
                        ++rep.interior;
                    }
                    if (s == 0) {
                        continue;
                    }
                    const StageDecision& prev = tab.decision(t, s - 1, g, c);
                    const double rise = d.battery - prev.battery;
                    bool bad = false;
                    if (d.next_soc < prev.next_soc) {
                        ++rep.next_soc_violations;
                        bad = true;
                    }
                    if (rise > kMonotoneTol) {
                        ++rep.action_reversals;
                        rep.worst_reversal = std::max(rep.worst_reversal, rise);
                        bad = bad || rise > rep.tolerance;
                    }
                    if (bad) {
                        ++rep.monotonicity_violations;
                        if (rep.worst_location.empty()) {
                            rep.worst_location = location(t, s, g, c);
                        }
                    }
                }
            }
        }
    }
    return rep;
}

namespace {

/// Exhaustive search over first/second-step battery moves for the
/// demand-charge-free two-step example.
std::pair<double, double> scenario_b(double sell0, double sell1)
{
    const TariffSchedule tariff({0.2, 0.2}, {sell0, sell1}, 0.0, 0.0);
    const double e_lim = 1.0;
    const double capacity = 1.0;
    const int steps = 20;  // lattice of 0.05 kWh
    double best = -std::numeric_limits<double>::infinity();
    std::pair<double, double> arg{0.0, 0.0};
    for (int i = -steps; i <= steps; ++i) {
        const double e0 = e_lim * i / steps;
        const double s1 = e_lim + e0;  // starts at s = discharge limit
        if (s1 < -kTie || s1 > capacity + kTie) {
            continue;
        }
        for (int j = -steps; j <= steps; ++j) {
            const double e1 = e_lim * j / steps;
            const double s2 = s1 + e1;
            if (s2 < -kTie || s2 > capacity + kTie) {
                continue;
            }
            const double r = -payment(e0, 0.0, 0, tariff) - payment(e1, 0.0, 1, tariff);
            if (r > best + kTie) {
                best = r;
                arg = {e0, e1};
            }
        }
    }
    return arg;
}

/// Exhaustive search over (v0, v1) for the SoC-free two-step example with a
/// demand charge. h is itself computed by a grid search over battery power.
std::pair<double, double> scenario_a(double g0, double g1)
{
    const double alpha = 1.0, beta = 1.0, d_max = 2.0;
    const double e_lim = 0.2, salvage = 0.09;
    const double buy = 0.12, sell = 0.06, demand_price = 0.2;
    const double dv = 0.01, de = 0.001;
    const int nv = static_cast<int>(std::lround((d_max + 2 * e_lim) / dv));
    const int ne = static_cast<int>(std::lround(2 * e_lim / de));

    std::vector<double> h(nv + 1, -std::numeric_limits<double>::infinity());
    for (int i = 0; i <= nv; ++i) {
        const double v = -e_lim + dv * i;
        for (int k = 0; k <= ne; ++k) {
            const double e = -e_lim + de * k;
            const double d = v - e;
            if (d < -kTie || d > d_max + kTie) {
                continue;
            }
            h[i] = std::max(h[i], alpha * d - 0.5 * beta * d * d + salvage * e);
        }
    }
    auto stage = [&](int i, double g) {
        const double z = -e_lim + dv * i - g;
        return h[i] - buy * pos_part(z) + sell * neg_part(z);
    };
    double best = -std::numeric_limits<double>::infinity();
    std::pair<double, double> arg{0.0, 0.0};
    for (int i = 0; i <= nv; ++i) {
        for (int j = 0; j <= nv; ++j) {
            const double z0 = -e_lim + dv * i - g0;
            const double z1 = -e_lim + dv * j - g1;
            const double r = stage(i, g0) + stage(j, g1) -
                             demand_price * std::max({0.0, z0, z1});
            if (r > best + kTie) {
                best = r;
                arg = {-e_lim + dv * i, -e_lim + dv * j};
            }
        }
    }
    return arg;
}

}  // namespace

NonmyopiaReport nonmyopia_counterexamples()
{
    NonmyopiaReport rep;
    std::tie(rep.a_v0_equal, rep.a_v1_equal) = scenario_a(0.6, 0.6);
    std::tie(rep.a_v0_lower, rep.a_v1_lower) = scenario_a(0.6, 0.3);
    rep.a_flipped = std::abs(rep.a_v0_lower - rep.a_v0_equal) > 0.005;

    std::tie(rep.b_e0_first, rep.b_e1_first) = scenario_b(0.1, 0.05);
    std::tie(rep.b_e0_second, rep.b_e1_second) = scenario_b(0.05, 0.1);
    rep.b_flipped = std::abs(rep.b_e0_first - rep.b_e0_second) > 1e-9;
    auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
    rep.b_matches_pairs = near(rep.b_e0_first, -1.0) && near(rep.b_e1_first, 0.0) &&
                          near(rep.b_e0_second, 0.0) && near(rep.b_e1_second, -1.0);
    return rep;
}

}  // namespace nemopt::dpv
