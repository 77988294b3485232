#pragma once

// CSV ingestion for generation (and optional demand) traces.
//
// Header: timestamp,generation_kwh[,demand_kwh]; extra columns are ignored.
// Values are average power over the row's interval, so rows finer than an
// hour are averaged into hourly steps.

#include "nemopt/model.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string_view>

namespace nemopt::harness {

/// Longest run of missing hours that is forward-filled.
inline constexpr std::size_t kMaxFilledGap = 3;

/// Seconds since the Unix epoch for an ISO-8601 date-time such as
/// 2023-06-01T13:00, 2023-06-01 13:00:00Z or 2023-06-01T13:00:00+02:00.
std::int64_t parse_iso8601(std::string_view text);

struct LoadedTrace {
    ExogenousTrace trace;
    std::int64_t first_hour = 0;  // epoch seconds of the first step
    std::size_t raw_rows = 0;
    std::size_t filled_steps = 0;
};

LoadedTrace read_trace(std::istream& in, std::string_view source_name = "<stream>");
LoadedTrace load_trace(const std::filesystem::path& path);

}  // namespace nemopt::harness
