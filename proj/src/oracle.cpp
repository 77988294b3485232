#include "nemopt/oracle.hpp"

#include "nemopt/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nemopt::oracle {

namespace {

constexpr double kSimultaneous = 1e-7;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Variable layout per step: K demands, e+, e-, z+, z-, s_{t+1}; the peak
// bound c is the last variable.
struct Layout {
    std::size_t K;
    std::size_t T;
    std::size_t per_step() const { return K + 5; }
    Eigen::Index n() const { return static_cast<Eigen::Index>(T * per_step() + 1); }
    Eigen::Index d(std::size_t t, std::size_t k) const { return at(t, k); }
    Eigen::Index ep(std::size_t t) const { return at(t, K); }
    Eigen::Index em(std::size_t t) const { return at(t, K + 1); }
    Eigen::Index zp(std::size_t t) const { return at(t, K + 2); }
    Eigen::Index zm(std::size_t t) const { return at(t, K + 3); }
    Eigen::Index s(std::size_t t) const { return at(t, K + 4); }  // SoC after step t
    Eigen::Index c() const { return n() - 1; }

private:
    Eigen::Index at(std::size_t t, std::size_t j) const
    {
        return static_cast<Eigen::Index>(t * per_step() + j);
    }
};

qp::QuadraticProgram build_program(const Problem& prob, const Layout& L)
{
    const std::size_t T = L.T;
    const BatterySpec& bat = prob.battery;
    const TariffSchedule& tar = prob.tariff;
    const auto& g = prob.trace.generation;
    const Eigen::Index n = L.n();
    const Eigen::Index m = static_cast<Eigen::Index>(3 * T) + n;

    qp::QuadraticProgram qp;
    qp.q = qp::Vector::Zero(n);
    qp.l = qp::Vector::Zero(m);
    qp.u = qp::Vector::Zero(m);
    std::vector<Eigen::Triplet<double>> pt, at;

    double c_max = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        c_max = std::max(c_max, prob.fleet.total_upper(t) + bat.charge_limit - g[t]);
    }

    auto box = [&](Eigen::Index j, double lo, double hi) {
        const Eigen::Index r = static_cast<Eigen::Index>(3 * T) + j;
        at.emplace_back(r, j, 1.0);
        qp.l[r] = lo;
        qp.u[r] = hi;
    };

    for (std::size_t t = 0; t < T; ++t) {
        const Eigen::Index rb = static_cast<Eigen::Index>(3 * t);
        const Eigen::Index rp = rb + 1;
        const Eigen::Index rs = rb + 2;

        for (std::size_t k = 0; k < L.K; ++k) {
            const Device& dev = prob.fleet.device(k);
            pt.emplace_back(L.d(t, k), L.d(t, k), dev.beta[t]);
            qp.q[L.d(t, k)] = -dev.alpha[t];
            at.emplace_back(rb, L.d(t, k), 1.0);
            box(L.d(t, k), dev.lower(t), dev.upper(t));
        }
        // Balance: sum d + e+ - e- - (z+ - z-) = g.
        at.emplace_back(rb, L.ep(t), 1.0);
        at.emplace_back(rb, L.em(t), -1.0);
        at.emplace_back(rb, L.zp(t), -1.0);
        at.emplace_back(rb, L.zm(t), 1.0);
        qp.l[rb] = qp.u[rb] = g[t];

        // Peak: z+ - z- - c <= 0.
        at.emplace_back(rp, L.zp(t), 1.0);
        at.emplace_back(rp, L.zm(t), -1.0);
        at.emplace_back(rp, L.c(), -1.0);
        qp.l[rp] = -kInf;
        qp.u[rp] = 0.0;

        // SoC: s_{t+1} - s_t - tau e+ + e-/rho = 0.
        at.emplace_back(rs, L.s(t), 1.0);
        if (t > 0) {
            at.emplace_back(rs, L.s(t - 1), -1.0);
        }
        at.emplace_back(rs, L.ep(t), -bat.eff_charge);
        at.emplace_back(rs, L.em(t), 1.0 / bat.eff_discharge);
        qp.l[rs] = qp.u[rs] = t == 0 ? prob.initial_soc : 0.0;

        qp.q[L.zp(t)] = tar.buy(t);
        qp.q[L.zm(t)] = -tar.sell(t);
        box(L.ep(t), 0.0, bat.charge_limit);
        box(L.em(t), 0.0, bat.discharge_limit);
        box(L.zp(t), 0.0, prob.fleet.total_upper(t) + bat.charge_limit);
        box(L.zm(t), 0.0, g[t] + bat.discharge_limit);
        box(L.s(t), 0.0, bat.capacity);
    }
    qp.q[L.s(T - 1)] -= tar.salvage();
    qp.q[L.c()] = tar.demand_price();
    box(L.c(), 0.0, std::max(0.0, c_max));

    qp.P.resize(n, n);
    qp.P.setFromTriplets(pt.begin(), pt.end());
    qp.A.resize(m, n);
    qp.A.setFromTriplets(at.begin(), at.end());
    return qp;
}

}  // namespace

std::vector<ControlAction> DeterministicSolution::actions() const
{
    std::vector<ControlAction> out(e_plus.size());
    for (std::size_t t = 0; t < out.size(); ++t) {
        out[t].battery = e_plus[t] - e_minus[t];
        out[t].demand = demand[t];
    }
    return out;
}

double split_objective(const Problem& prob, const DeterministicSolution& sol)
{
    const TariffSchedule& tar = prob.tariff;
    double total = 0.0;
    double peak = 0.0;
    for (std::size_t t = 0; t < prob.horizon(); ++t) {
        double load = 0.0;
        for (double d : sol.demand[t]) {
            load += d;
        }
        const double z = load + sol.e_plus[t] - sol.e_minus[t] - prob.trace.generation[t];
        peak = std::max(peak, z);
        total += prob.fleet.utility(t, sol.demand[t]) - tar.buy(t) * pos_part(z) +
                 tar.sell(t) * neg_part(z) - tar.fixed_charge();
    }
    return total - tar.demand_price() * peak + tar.salvage() * sol.soc.back();
}

DeterministicSolution deterministic_upper_bound(const Problem& prob, const qp::Settings& settings)
{
    prob.validate();
    const Layout L{prob.fleet.size(), prob.horizon()};
    const qp::QuadraticProgram program = build_program(prob, L);
    const qp::Result res = qp::solve(program, settings);

    DeterministicSolution sol;
    SolverDiagnostics& diag = sol.diagnostics;
    diag.status = std::string(qp::to_string(res.status));
    diag.iterations = res.iterations;
    diag.refactorizations = res.refactorizations;
    diag.primal_residual = res.prim_res;
    diag.dual_residual = res.dual_res;
    diag.objective_change = res.objective_change;
    diag.solver_objective = -res.objective;
    if (res.status == qp::Status::max_iterations) {
        throw SolverError("upper-bound solver did not converge in " +
                              std::to_string(res.iterations) + " iterations",
                          diag);
    }

    // Repair to exact feasibility: clip boxes, then walk the SoC forward and
    // trim whichever side of the split pushed it out of range.
    const BatterySpec& bat = prob.battery;
    const std::size_t T = L.T;
    sol.e_plus.resize(T);
    sol.e_minus.resize(T);
    sol.demand.resize(T);
    sol.net.resize(T);
    sol.soc.assign(T + 1, prob.initial_soc);
    double shift = 0.0;
    auto take = [&](Eigen::Index j, double lo, double hi) {
        const double v = std::clamp(res.x[j], lo, hi);
        shift = std::max(shift, std::abs(v - res.x[j]));
        return v;
    };
    for (std::size_t t = 0; t < T; ++t) {
        sol.demand[t].resize(L.K);
        double load = 0.0;
        for (std::size_t k = 0; k < L.K; ++k) {
            const Device& dev = prob.fleet.device(k);
            sol.demand[t][k] = take(L.d(t, k), dev.lower(t), dev.upper(t));
            load += sol.demand[t][k];
        }
        double ep = take(L.ep(t), 0.0, bat.charge_limit);
        double em = take(L.em(t), 0.0, bat.discharge_limit);
        const double s = sol.soc[t];
        double next = s + bat.eff_charge * ep - em / bat.eff_discharge;
        if (next > bat.capacity) {
            const double cut = std::min(ep, (next - bat.capacity) / bat.eff_charge);
            ep -= cut;
            next = s + bat.eff_charge * ep - em / bat.eff_discharge;
            if (next > bat.capacity) {
                em = std::min(bat.discharge_limit, em + (next - bat.capacity) * bat.eff_discharge);
            }
        } else if (next < 0.0) {
            const double cut = std::min(em, -next * bat.eff_discharge);
            em -= cut;
            next = s + bat.eff_charge * ep - em / bat.eff_discharge;
            if (next < 0.0) {
                ep = std::min(bat.charge_limit, ep - next / bat.eff_charge);
            }
        }
        shift = std::max({shift, std::abs(ep - std::clamp(res.x[L.ep(t)], 0.0, bat.charge_limit)),
                          std::abs(em - std::clamp(res.x[L.em(t)], 0.0, bat.discharge_limit))});
        sol.e_plus[t] = ep;
        sol.e_minus[t] = em;
        sol.soc[t + 1] =
            std::clamp(s + bat.eff_charge * ep - em / bat.eff_discharge, 0.0, bat.capacity);
        sol.net[t] = load + ep - em - prob.trace.generation[t];
        sol.peak = std::max(sol.peak, sol.net[t]);
        if (ep > kSimultaneous && em > kSimultaneous) {
            ++diag.simultaneous_steps;
        }
    }
    diag.repair_shift = shift;
    sol.objective = split_objective(prob, sol);
    return sol;
}

GridScanResult relaxed_grid_scan(const Problem& prob, const std::vector<double>& c_grid)
{
    if (c_grid.empty()) {
        throw std::invalid_argument("relaxed_grid_scan: empty peak grid");
    }
    prob.validate();
    const std::size_t T = prob.horizon();
    const TariffSchedule& tar = prob.tariff;
    const alloc::HelperFunction helper(prob.fleet, prob.battery, tar.salvage(), T);
    const auto& g = prob.trace.generation;

    auto phi = [&](std::size_t t, double v) {
        const double x = v - g[t];
        return helper.h_value(v, t) - tar.buy(t) * pos_part(x) + tar.sell(t) * neg_part(x);
    };

    GridScanResult out;
    out.c_grid = c_grid;
    out.step_optimum.resize(T);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (std::size_t t = 0; t < T; ++t) {
        const auto& step = helper.step(t);
        double a = step.v_min();
        double b = step.v_max();
        double x1 = b - inv_phi * (b - a);
        double x2 = a + inv_phi * (b - a);
        double f1 = phi(t, x1);
        double f2 = phi(t, x2);
        while (b - a > 1e-11) {
            if (f1 < f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = phi(t, x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = phi(t, x1);
            }
        }
        // Compare against the endpoints so a maximum on the boundary is kept.
        double best = 0.5 * (a + b);
        for (double cand : {step.v_min(), step.v_max()}) {
            if (phi(t, cand) > phi(t, best)) {
                best = cand;
            }
        }
        out.step_optimum[t] = best;
    }

    out.J.resize(c_grid.size());
    out.best_J = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c_grid.size(); ++i) {
        const double c = c_grid[i];
        double J = -tar.demand_price() * c;
        for (std::size_t t = 0; t < T; ++t) {
            const auto& step = helper.step(t);
            const double hi = std::min(c + g[t], step.v_max());
            if (hi < step.v_min()) {
                J = -std::numeric_limits<double>::infinity();
                break;
            }
            J += phi(t, std::clamp(out.step_optimum[t], step.v_min(), hi));
        }
        out.J[i] = J;
        if (J > out.best_J) {
            out.best_J = J;
            out.best_c = c;
        }
    }
    return out;
}

BruteForceResult brute_force_dp(const Problem& prob, const dpv::LatticeSpec& grids)
{
    prob.validate();
    dpv::DpInstance inst{prob.tariff, prob.fleet, prob.battery,
                         dpv::MarkovChain::deterministic(prob.trace.generation), prob.initial_soc};
    BruteForceResult out;
    out.table = dpv::backward_induction(inst, grids);
    out.value = out.table.root_value;
    out.discretization_bound = out.table.discretization_bound;
    return out;
}

}  // namespace nemopt::oracle
