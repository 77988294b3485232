#pragma once

// Scenario runs scored against the perfect-foresight bound, parameter
// sweeps, the forecast-noise study and the timing benchmark.

#include "nemopt/harness/scenario.hpp"
#include "nemopt/oracle.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace nemopt::harness {

/// Largest allowed difference between a reported surplus and its replay
/// through the simulator.
inline constexpr double kLedgerTolerance = 1e-9;

struct PolicyRow {
    std::string policy;  // "oracle" for the bound
    double surplus = 0.0;
    double gap_abs = 0.0;
    double gap_pct = 0.0;  // 100 (oracle - surplus) / |oracle|, 0 when the oracle is 0
    double computed_peak = 0.0;
    double realized_peak = 0.0;
    std::size_t clip_count = 0;
    double seconds = 0.0;  // wall clock, never part of the records
};

struct GapReport {
    std::string scenario;
    std::string axis = "none";
    double axis_value = 0.0;
    double sigma = 0.0;
    std::uint64_t seed = 1;
    std::size_t horizon = 0;
    std::vector<PolicyRow> rows;  // oracle first
    bool oracle_dominates = true;
    oracle::SolverDiagnostics oracle_diagnostics;

    const PolicyRow* row(std::string_view policy) const;
};

/// Runs the oracle and every policy of `spec` (sweep ignored). Policy
/// surpluses are replayed through the simulator and must agree to
/// kLedgerTolerance; throws std::logic_error otherwise.
GapReport run_scenario(const ScenarioSpec& spec);

/// One report per sweep value, in value order. Runs on up to `workers`
/// threads; results do not depend on the worker count.
std::vector<GapReport> sweep(const ScenarioSpec& spec, unsigned workers = 1);

struct AxisSummary {
    std::string axis;
    std::string policy;
    double mean_gap_pct = 0.0;
    std::size_t cells = 0;
};

/// Mean gap per (axis, policy), in first-seen order.
std::vector<AxisSummary> summarize(const std::vector<GapReport>& reports);

struct NoisePoint {
    double sigma = 0.0;
    double mean_surplus = 0.0;
    double std_error = 0.0;
    double mean_computed_peak = 0.0;
    double mean_realized_peak = 0.0;
    double mean_peak_deviation = 0.0;  // |realized - computed|
};

struct NoiseStudy {
    std::string scenario;
    double oracle_surplus = 0.0;
    std::size_t seeds = 0;
    std::vector<NoisePoint> points;
    bool nonincreasing = true;  // mean surplus, one standard error of slack
};

/// LSPS planned on noisy forecasts and scored on the realized trace. Seed k
/// is shared across all sigma values.
NoiseStudy noise_study(const ScenarioSpec& spec, const std::vector<double>& sigmas,
                       std::size_t seeds = 30);

struct TimingPoint {
    std::size_t horizon = 0;
    double lsps_seconds = 0.0;
    double oracle_seconds = -1.0;  // negative when skipped
};

struct TimingReport {
    std::vector<TimingPoint> points;
    double slope = 0.0;  // seconds per step, least squares on the LSPS times
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<double> ratios;  // consecutive LSPS time ratios
};

/// Minimum over `repeats` of the full LSPS planning and evaluation time on
/// synthetic traces of each length. The oracle is timed for T <= oracle_max_T.
TimingReport timing_benchmark(const ScenarioSpec& spec, const std::vector<std::size_t>& horizons,
                              std::size_t oracle_max_T = 0, std::size_t repeats = 5);

struct CertificationRow {
    std::size_t index = 0;
    bool stochastic = false;
    std::size_t horizon = 0;
    std::size_t devices = 0;
    dpv::PropertyReport concavity;
    dpv::PropertyReport monotonicity;
    dpv::ThresholdReport thresholds;

    bool passed() const
    {
        return concavity.passed() && monotonicity.passed() && thresholds.passed();
    }
};

/// Structural checks on `count` random lattice instances, alternating
/// deterministic and stochastic generation.
std::vector<CertificationRow> certify_random(std::size_t count, std::uint64_t seed,
                                             const dpv::LatticeSpec& grids = {});

struct CrossOracleRow {
    std::size_t index = 0;
    std::size_t horizon = 0;
    double upper_bound = 0.0;
    double lattice_value = 0.0;
    double bound = 0.0;  // lattice discretization bound
    bool within_bound = false;   // ub - lattice <= bound
    bool ub_dominates = false;   // lattice <= ub (1 + 1e-6)
};

/// The convex upper bound against lattice DP on random deterministic tiny
/// instances.
std::vector<CrossOracleRow> cross_oracle_random(std::size_t count, std::uint64_t seed,
                                                const dpv::LatticeSpec& grids = {});

/// Deterministic lattice instance as a planning problem.
Problem to_problem(const dpv::DpInstance& instance);

}  // namespace nemopt::harness
