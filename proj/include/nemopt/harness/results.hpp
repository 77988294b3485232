#pragma once

// Result serialization. Records are one JSON object per line with a fixed
// key order and no timing data, so identical inputs give identical bytes.
// Wall-clock times go to a separate stream.

#include "nemopt/harness/experiments.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nemopt::harness {

enum class OutputFormat { records, table };

OutputFormat output_format_from_string(std::string_view name);

/// Describes the trace source, including the synthetic formula when used.
std::string trace_disclosure(const ScenarioSpec& spec);

std::string gap_records(const ScenarioSpec& spec, const std::vector<GapReport>& reports);
std::string gap_table(const std::vector<GapReport>& reports);
std::string summary_table(const std::vector<AxisSummary>& summary);
std::string gap_timings(const std::vector<GapReport>& reports);

std::string oracle_records(const ScenarioSpec& spec, const oracle::DeterministicSolution& sol);
std::string oracle_table(const oracle::DeterministicSolution& sol);

std::string noise_records(const ScenarioSpec& spec, const NoiseStudy& study);
std::string noise_table(const NoiseStudy& study);

// Timing data is the payload here, so these are not byte-stable.
std::string timing_records(const TimingReport& report);
std::string timing_table(const TimingReport& report);

std::string certification_records(const std::vector<CertificationRow>& cert,
                                   const std::vector<CrossOracleRow>& cross,
                                   const dpv::NonmyopiaReport& nonmyopia);
std::string certification_table(const std::vector<CertificationRow>& cert,
                                const std::vector<CrossOracleRow>& cross,
                                const dpv::NonmyopiaReport& nonmyopia);

/// One output artifact: written as `dir/file_name` when `dir` is set and to
/// stdout otherwise.
struct Artifact {
    std::string file_name;
    std::string content;
};

/// Throws std::runtime_error on I/O failure.
void emit(const std::optional<std::filesystem::path>& dir, const std::vector<Artifact>& artifacts);

}  // namespace nemopt::harness
