#pragma once

// Reference solvers used to score the controllers and to test them:
//   - the perfect-foresight convex program with charge and discharge split
//     into separate variables (an upper bound on any causal policy),
//   - exact lattice DP on tiny instances,
//   - a grid scan of the relaxed fixed-peak problem.

#include "nemopt/dp_validator.hpp"
#include "nemopt/model.hpp"
#include "nemopt/qp.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace nemopt::oracle {

struct SolverDiagnostics {
    std::string status;
    int iterations = 0;
    int refactorizations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double objective_change = 0.0;
    double solver_objective = 0.0;  // before feasibility repair
    double repair_shift = 0.0;      // largest change made by the repair
    std::size_t simultaneous_steps = 0;  // steps with both charge and discharge > 0
};

struct DeterministicSolution {
    std::vector<double> e_plus;
    std::vector<double> e_minus;
    std::vector<std::vector<double>> demand;
    std::vector<double> soc;  // T + 1 entries
    std::vector<double> net;  // z_t
    double peak = 0.0;
    double objective = 0.0;
    SolverDiagnostics diagnostics;

    /// Battery power e+ - e- per step with the solved demands.
    std::vector<ControlAction> actions() const;
};

/// Thrown when the solver cannot meet its tolerances.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, SolverDiagnostics diag)
        : std::runtime_error(what), diagnostics(std::move(diag))
    {
    }
    SolverDiagnostics diagnostics;
};

/// Objective of a split-variable plan recomputed from its raw variables.
double split_objective(const Problem& problem, const DeterministicSolution& sol);

DeterministicSolution deterministic_upper_bound(const Problem& problem,
                                                const qp::Settings& settings = {});

struct GridScanResult {
    std::vector<double> c_grid;
    std::vector<double> J;
    double best_c = 0.0;
    double best_J = 0.0;
    std::vector<double> step_optimum;  // unconstrained per-step maximizer v
};

/// Evaluates the relaxed fixed-peak objective on `c_grid`. Each step's
/// concave one-dimensional problem is solved by golden-section search.
GridScanResult relaxed_grid_scan(const Problem& problem, const std::vector<double>& c_grid);

struct BruteForceResult {
    double value = 0.0;
    double discretization_bound = 0.0;
    dpv::ValueTable table;
};

/// Lattice optimum of the problem with its generation trace taken as known.
BruteForceResult brute_force_dp(const Problem& problem, const dpv::LatticeSpec& grids = {});

}  // namespace nemopt::oracle
