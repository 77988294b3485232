#pragma once

// Exact backward induction on a finite lattice of (SoC, generation, peak)
// states, plus checks of the structural properties the continuous problem
// is known to have: concavity in (s, c), monotonicity in s, g and c,
// threshold-type optimal battery actions, and the two-step examples showing
// that no myopic rule is optimal once either coupling constraint is active.
//
// The lattice problem is a restriction of the true one: battery moves land
// on SoC grid points and the peak state lives on a grid, with the demand
// charge billed on the grid value at or above the realized net consumption.
// Its optimum is therefore a lower bound on the continuous optimum.

#include "nemopt/model.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace nemopt::dpv {

/// Finite Markov chain for generation. levels[t][i] is the i-th value at
/// step t; transition[t][i][j] moves from levels[t][i] to levels[t+1][j].
struct MarkovChain {
    std::vector<std::vector<double>> levels;
    std::vector<std::vector<std::vector<double>>> transition;
    std::vector<double> initial;

    static MarkovChain deterministic(const std::vector<double>& g);

    std::size_t horizon() const { return levels.size(); }
    bool is_deterministic() const;
    void validate() const;
};

struct LatticeSpec {
    std::size_t soc_levels = 21;
    std::size_t peak_levels = 21;
    // 0: demands follow the exact best response to the battery move and the
    // chosen peak level; otherwise a per-device grid with this many points.
    std::size_t demand_levels = 0;
};

struct DpInstance {
    TariffSchedule tariff;
    DeviceFleet fleet;
    BatterySpec battery;
    MarkovChain generation;
    double initial_soc = 0.0;

    std::size_t horizon() const { return generation.horizon(); }
    void validate() const;
};

/// Guardrails: T <= 6, at most 2 devices, at most 50 levels per grid, and a
/// bound on the total number of transitions evaluated.
inline constexpr std::size_t kMaxHorizon = 6;
inline constexpr std::size_t kMaxDevices = 2;
inline constexpr std::size_t kMaxLevels = 50;
inline constexpr double kMaxWork = 4e9;

struct StageDecision {
    double battery = 0.0;
    std::vector<double> demand;
    std::size_t next_soc = 0;
    std::size_t next_peak = 0;
    double net = 0.0;
};

struct ValueTable {
    std::vector<double> soc_grid;
    std::vector<double> peak_grid;
    std::vector<std::vector<double>> g_levels;  // per step 0..T-1
    // values[t] holds V_t on (s, g, c), row-major in that order; the terminal
    // stage T carries a single g slot.
    std::vector<std::vector<double>> values;
    std::vector<std::vector<StageDecision>> policy;  // t < T, same layout as values[t]
    double salvage = 0.0;
    double root_value = 0.0;     // expected V_0 at the snapped initial SoC and zero peak
    double snapped_soc = 0.0;
    double discretization_bound = 0.0;
    double work = 0.0;
    bool deterministic_g = true;

    std::size_t horizon() const { return policy.size(); }
    std::size_t g_count(std::size_t t) const { return t < g_levels.size() ? g_levels[t].size() : 1; }
    std::size_t index(std::size_t t, std::size_t s, std::size_t g, std::size_t c) const
    {
        return (s * g_count(t) + g) * peak_grid.size() + c;
    }
    double value(std::size_t t, std::size_t s, std::size_t g, std::size_t c) const
    {
        return values[t][index(t, s, g, c)];
    }
    const StageDecision& decision(std::size_t t, std::size_t s, std::size_t g, std::size_t c) const
    {
        return policy[t][index(t, s, g, c)];
    }
};

/// Throws ValidationError on guardrail or instance violations.
ValueTable backward_induction(const DpInstance& instance, const LatticeSpec& grids = {});

struct PropertyReport {
    std::string property;
    double worst_violation = 0.0;  // raw, before tolerance
    double tolerance = 0.0;        // largest allowance used at any check
    std::size_t checks = 0;
    std::size_t violations = 0;    // checks exceeding their allowance
    std::string worst_location;

    bool passed() const { return violations == 0; }
};

/// Midpoint concavity along the s axis, the c axis and both diagonals of
/// every (t, g) slice. Allowance is 1e-9 plus, unless `strict`, a lattice
/// slack equal to the slice value range divided by the number of cells.
PropertyReport check_concavity(const ValueTable& table, bool strict = false);

/// V nondecreasing along s, g and c, to 1e-9.
PropertyReport check_monotonicity(const ValueTable& table);

struct ThresholdReport {
    std::size_t slices = 0;
    std::size_t lower_face = 0;   // discharging at a limit or emptying the battery
    std::size_t upper_face = 0;   // charging at a limit or filling the battery
    std::size_t peak_face = 0;    // net consumption pinned at the current peak
    std::size_t interior = 0;
    std::size_t next_soc_violations = 0;  // next SoC decreasing in s
    std::size_t action_reversals = 0;     // battery power increasing in s by more than 1e-9
    std::size_t monotonicity_violations = 0;  // next-SoC violations plus reversals beyond tolerance
    double worst_reversal = 0.0;
    double tolerance = 0.0;  // allowance for reversals
    std::string worst_location;

    bool passed() const { return monotonicity_violations == 0; }
};

/// In every (t, g, c) slice the greedy next SoC must be nondecreasing in s
/// (exactly) and the battery power nonincreasing in s. On the lattice the
/// latter holds only up to rounding of the battery move and of the peak, so
/// reversals count as violations only beyond one SoC cell (in power units)
/// plus two peak cells. Each state is also classified by the face it sits on.
ThresholdReport extract_thresholds(const ValueTable& table, const DpInstance& instance);

struct NonmyopiaReport {
    // Scenario A: SoC coupling relaxed, demand charge kept.
    double a_v0_equal = 0.0;  // first-step optimum with g1 == g0
    double a_v1_equal = 0.0;
    double a_v0_lower = 0.0;  // first-step optimum with g1 < g0
    double a_v1_lower = 0.0;
    bool a_flipped = false;
    // Scenario B: demand charge relaxed, SoC coupling kept.
    double b_e0_first = 0.0;  // sell rate falling over time
    double b_e1_first = 0.0;
    double b_e0_second = 0.0;  // sell rate rising over time
    double b_e1_second = 0.0;
    bool b_flipped = false;
    bool b_matches_pairs = false;

    bool passed() const { return a_flipped && b_flipped && b_matches_pairs; }
};

NonmyopiaReport nonmyopia_counterexamples();

}  // namespace nemopt::dpv
