#pragma once

// Reference computations for the tests. Each one is written from the
// problem definition and shares no code with the library beyond the data
// types.

#include "nemopt/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace ref {

struct Dev {
    double alpha, beta, lo, hi;
};

inline std::vector<Dev> devices_at(const nemopt::DeviceFleet& fleet, std::size_t t)
{
    std::vector<Dev> out;
    for (const auto& d : fleet.devices()) {
        out.push_back({d.alpha[t], d.beta[t], d.lower(t), d.upper(t)});
    }
    return out;
}

struct Split {
    bool feasible = false;
    double value = -std::numeric_limits<double>::infinity();
    double battery = 0.0;
    std::vector<double> demand;
};

inline double split_value(const std::vector<Dev>& devs, double gamma, const Split& s)
{
    double v = gamma * s.battery;
    for (std::size_t k = 0; k < devs.size(); ++k) {
        const double d = s.demand[k];
        v += devs[k].alpha * d - 0.5 * devs[k].beta * d * d;
    }
    return v;
}

/// max sum U_k(d_k) + gamma e  s.t.  sum d + e = v, boxes. Every variable is
/// at its lower bound, at its upper bound or free; free devices share one
/// marginal value (equal to gamma if the battery is free). The best feasible
/// candidate over all patterns is the optimum.
inline Split helper_by_active_sets(const std::vector<Dev>& devs, double e_lo, double e_hi,
                                   double gamma, double v, double tol = 1e-10)
{
    const std::size_t K = devs.size();
    std::size_t combos = 1;
    for (std::size_t i = 0; i <= K; ++i) {
        combos *= 3;
    }
    Split best;
    for (std::size_t code = 0; code < combos; ++code) {
        std::vector<int> state(K + 1);
        std::size_t c = code;
        for (auto& s : state) {
            s = static_cast<int>(c % 3);
            c /= 3;
        }
        Split cand;
        cand.demand.assign(K, 0.0);
        double fixed = 0.0;
        double inv_beta = 0.0, alpha_over_beta = 0.0;
        bool any_free_dev = false;
        for (std::size_t k = 0; k < K; ++k) {
            if (state[k] == 0) {
                cand.demand[k] = devs[k].lo;
                fixed += devs[k].lo;
            } else if (state[k] == 1) {
                cand.demand[k] = devs[k].hi;
                fixed += devs[k].hi;
            } else {
                any_free_dev = true;
                inv_beta += 1.0 / devs[k].beta;
                alpha_over_beta += devs[k].alpha / devs[k].beta;
            }
        }
        const int bs = state[K];
        double lambda = gamma;
        if (bs == 2) {
            double free_sum = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                if (state[k] == 2) {
                    cand.demand[k] = (devs[k].alpha - gamma) / devs[k].beta;
                    free_sum += cand.demand[k];
                }
            }
            cand.battery = v - fixed - free_sum;
        } else {
            cand.battery = bs == 0 ? e_lo : e_hi;
            const double rest = v - fixed - cand.battery;
            if (any_free_dev) {
                // sum (alpha_k - lambda) / beta_k = rest
                lambda = (alpha_over_beta - rest) / inv_beta;
                for (std::size_t k = 0; k < K; ++k) {
                    if (state[k] == 2) {
                        cand.demand[k] = (devs[k].alpha - lambda) / devs[k].beta;
                    }
                }
            } else if (std::abs(rest) > tol) {
                continue;
            }
        }
        bool ok = cand.battery >= e_lo - tol && cand.battery <= e_hi + tol;
        for (std::size_t k = 0; k < K && ok; ++k) {
            ok = cand.demand[k] >= devs[k].lo - tol && cand.demand[k] <= devs[k].hi + tol;
        }
        if (!ok) {
            continue;
        }
        cand.feasible = true;
        cand.value = split_value(devs, gamma, cand);
        if (cand.value > best.value) {
            best = cand;
        }
    }
    return best;
}

/// Same maximization by a shrinking grid search over the device powers,
/// the battery taking the remainder. The objective is concave, so zooming
/// in on the best grid point converges to the maximum.
inline Split helper_by_grid(const std::vector<Dev>& devs, double e_lo, double e_hi, double gamma,
                            double v, int points = 17, int levels = 45)
{
    const std::size_t K = devs.size();
    Split best;
    if (K == 0) {
        if (v >= e_lo - 1e-12 && v <= e_hi + 1e-12) {
            best.feasible = true;
            best.battery = v;
            best.value = gamma * v;
        }
        return best;
    }
    std::vector<double> center(K), half(K);
    for (std::size_t k = 0; k < K; ++k) {
        center[k] = 0.5 * (devs[k].lo + devs[k].hi);
        half[k] = 0.5 * (devs[k].hi - devs[k].lo);
    }
    std::vector<int> idx(K);
    std::vector<double> d(K);
    for (int level = 0; level < levels; ++level) {
        std::fill(idx.begin(), idx.end(), 0);
        Split level_best = best;
        for (;;) {
            double sum = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const double x = center[k] - half[k] + 2.0 * half[k] * idx[k] / (points - 1);
                d[k] = std::clamp(x, devs[k].lo, devs[k].hi);
                sum += d[k];
            }
            const double e = v - sum;
            if (e >= e_lo - 1e-12 && e <= e_hi + 1e-12) {
                Split s;
                s.feasible = true;
                s.battery = e;
                s.demand = d;
                s.value = split_value(devs, gamma, s);
                if (s.value > level_best.value) {
                    level_best = s;
                }
            }
            std::size_t k = 0;
            while (k < K && ++idx[k] == points) {
                idx[k] = 0;
                ++k;
            }
            if (k == K) {
                break;
            }
        }
        if (level_best.feasible) {
            best = level_best;
            for (std::size_t k = 0; k < K; ++k) {
                center[k] = best.demand[k];
            }
        }
        for (auto& h : half) {
            h *= 0.5;
        }
    }
    return best;
}

/// Net-metering bill for one step with a rolling demand charge.
inline double step_payment(double z, double c, double buy, double sell, double demand_price,
                           double fixed = 0.0)
{
    const double imp = z > 0.0 ? z : 0.0;
    const double exp = z < 0.0 ? -z : 0.0;
    const double over = z > c ? z - c : 0.0;
    return buy * imp - sell * exp + demand_price * over + fixed;
}

/// Total reward of an action sequence with the simulator's clipping rules:
/// battery power to the SoC-feasible interval, demands to their boxes.
inline double episode_reward(const nemopt::Problem& p, const std::vector<nemopt::ControlAction>& a)
{
    const auto& b = p.battery;
    double s = p.initial_soc, c = 0.0, total = 0.0;
    for (std::size_t t = 0; t < p.horizon(); ++t) {
        const double lo = std::max(-b.discharge_limit, -b.eff_discharge * s);
        const double hi = std::min(b.charge_limit, (b.capacity - s) / b.eff_charge);
        const double e = std::min(std::max(a[t].battery, lo), hi);
        double load = 0.0, util = 0.0;
        for (std::size_t k = 0; k < p.fleet.size(); ++k) {
            const auto& dev = p.fleet.device(k);
            const double d = std::min(std::max(a[t].demand[k], dev.lower(t)), dev.upper(t));
            load += d;
            util += dev.alpha[t] * d - 0.5 * dev.beta[t] * d * d;
        }
        const double z = load + e - p.trace.generation[t];
        total += util - step_payment(z, c, p.tariff.buy(t), p.tariff.sell(t),
                                     p.tariff.demand_price(), p.tariff.fixed_charge());
        c = std::max(c, z);
        s = e >= 0.0 ? s + b.eff_charge * e : s + e / b.eff_discharge;
        s = std::min(std::max(s, 0.0), b.capacity);
    }
    return total + p.tariff.salvage() * s;
}

/// Small dense QP  min 0.5 x'Px + q'x  s.t.  l <= Ax <= u, solved by trying
/// every active set. Exponential, for a handful of rows only.
struct DenseQpSolution {
    bool found = false;
    Eigen::VectorXd x;
    double objective = std::numeric_limits<double>::infinity();
};

inline DenseQpSolution dense_qp_by_active_sets(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                                               const Eigen::MatrixXd& A, const Eigen::VectorXd& l,
                                               const Eigen::VectorXd& u)
{
    const Eigen::Index n = q.size(), m = l.size();
    std::size_t combos = 1;
    for (Eigen::Index i = 0; i < m; ++i) {
        combos *= 3;
    }
    DenseQpSolution best;
    for (std::size_t code = 0; code < combos; ++code) {
        std::vector<int> st(static_cast<std::size_t>(m));
        std::size_t c = code;
        std::vector<Eigen::Index> rows;
        bool skip = false;
        for (Eigen::Index i = 0; i < m; ++i) {
            st[i] = static_cast<int>(c % 3);
            c /= 3;
            if (st[i] == 1 && !std::isfinite(l[i])) {
                skip = true;
            }
            if (st[i] == 2 && !std::isfinite(u[i])) {
                skip = true;
            }
            if (st[i] == 2 && l[i] == u[i]) {
                skip = true;  // equality rows use state 1 only
            }
            if (st[i] != 0) {
                rows.push_back(i);
            }
        }
        if (skip) {
            continue;
        }
        const Eigen::Index na = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + na, n + na);
        Eigen::VectorXd rhs(n + na);
        K.topLeftCorner(n, n) = P;
        rhs.head(n) = -q;
        for (Eigen::Index k = 0; k < na; ++k) {
            const Eigen::Index i = rows[k];
            K.block(n + k, 0, 1, n) = A.row(i);
            K.block(0, n + k, n, 1) = A.row(i).transpose();
            rhs[n + k] = st[i] == 1 ? l[i] : u[i];
        }
        const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
        if ((K * sol - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) {
            continue;
        }
        const Eigen::VectorXd x = sol.head(n);
        const Eigen::VectorXd Ax = A * x;
        bool ok = true;
        for (Eigen::Index i = 0; i < m && ok; ++i) {
            ok = Ax[i] >= l[i] - 1e-9 && Ax[i] <= u[i] + 1e-9;
        }
        if (!ok) {
            continue;
        }
        const double obj = 0.5 * x.dot(P * x) + q.dot(x);
        if (obj < best.objective) {
            best.found = true;
            best.objective = obj;
            best.x = x;
        }
    }
    return best;
}

}  // namespace ref
