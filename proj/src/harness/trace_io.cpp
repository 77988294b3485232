#include "nemopt/harness/trace_io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace nemopt::harness {

namespace {

int read_int(std::string_view s, std::size_t pos, std::size_t len, std::string_view whole)
{
    int v = 0;
    if (pos + len > s.size()) {
        throw ValidationError("bad timestamp '" + std::string(whole) + "'");
    }
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (ec != std::errc{} || p != s.data() + pos + len) {
        throw ValidationError("bad timestamp '" + std::string(whole) + "'");
    }
    return v;
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) {
        s.remove_prefix(1);
    }
    while (!s.empty() &&
           (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_row(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::optional<double> read_value(std::string_view cell, std::string_view src, std::size_t line)
{
    if (cell.empty()) {
        return std::nullopt;
    }
    double v = 0.0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || p != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ValidationError(std::string(src) + ":" + std::to_string(line) + ": bad number '" +
                              std::string(cell) + "'");
    }
    return v;
}

struct Bucket {
    double gen_sum = 0.0;
    std::size_t gen_n = 0;
    double dem_sum = 0.0;
    std::size_t dem_n = 0;
};

}  // namespace

std::int64_t parse_iso8601(std::string_view text)
{
    const std::string_view s = trim(text);
    // YYYY-MM-DD[T ]HH:MM[:SS[.frac]][Z|+HH:MM|-HH:MM]
    if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
        s[13] != ':') {
        throw ValidationError("bad timestamp '" + std::string(text) + "'");
    }
    const int year = read_int(s, 0, 4, text);
    const int month = read_int(s, 5, 2, text);
    const int day = read_int(s, 8, 2, text);
    const int hour = read_int(s, 11, 2, text);
    const int minute = read_int(s, 14, 2, text);
    int second = 0;
    std::size_t pos = 16;
    if (pos < s.size() && s[pos] == ':') {
        second = read_int(s, pos + 1, 2, text);
        pos += 3;
        if (pos < s.size() && s[pos] == '.') {
            ++pos;
            while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
                ++pos;
            }
        }
    }
    int offset = 0;
    if (pos < s.size()) {
        if (s[pos] == 'Z' && pos + 1 == s.size()) {
            pos += 1;
        } else if ((s[pos] == '+' || s[pos] == '-') && s.size() == pos + 6 && s[pos + 3] == ':') {
            const int sign = s[pos] == '+' ? 1 : -1;
            offset = sign * (read_int(s, pos + 1, 2, text) * 3600 + read_int(s, pos + 4, 2, text) * 60);
            pos += 6;
        } else {
            throw ValidationError("bad timestamp '" + std::string(text) + "'");
        }
    }
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                             std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) {
        throw ValidationError("bad timestamp '" + std::string(text) + "'");
    }
    const std::int64_t days = sys_days{ymd}.time_since_epoch().count();
    return days * 86400 + hour * 3600 + minute * 60 + second - offset;
}

LoadedTrace read_trace(std::istream& in, std::string_view src)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError(std::string(src) + ": empty file");
    }
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
    }
    const auto header = split_row(line);
    int col_time = -1, col_gen = -1, col_dem = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "timestamp") {
            col_time = static_cast<int>(i);
        } else if (header[i] == "generation_kwh") {
            col_gen = static_cast<int>(i);
        } else if (header[i] == "demand_kwh") {
            col_dem = static_cast<int>(i);
        }
    }
    if (col_time < 0 || col_gen < 0) {
        throw ValidationError(std::string(src) +
                              ": header must contain timestamp and generation_kwh columns");
    }

    LoadedTrace out;
    std::map<std::int64_t, Bucket> buckets;
    std::optional<std::int64_t> last_time;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split_row(line);
        const std::size_t need =
            static_cast<std::size_t>(std::max({col_time, col_gen, col_dem})) + 1;
        if (cells.size() < need) {
            throw ValidationError(std::string(src) + ":" + std::to_string(line_no) +
                                  ": missing columns");
        }
        const std::int64_t ts = parse_iso8601(cells[col_time]);
        if (last_time && ts <= *last_time) {
            throw ValidationError(std::string(src) + ":" + std::to_string(line_no) +
                                  ": timestamps must be strictly increasing");
        }
        last_time = ts;
        ++out.raw_rows;

        const std::int64_t hour = ts >= 0 ? ts / 3600 : -((-ts + 3599) / 3600);
        Bucket& b = buckets[hour];
        if (auto g = read_value(cells[col_gen], src, line_no)) {
            if (*g < 0.0) {
                throw ValidationError(std::string(src) + ":" + std::to_string(line_no) +
                                      ": negative generation");
            }
            b.gen_sum += *g;
            ++b.gen_n;
        }
        if (col_dem >= 0) {
            if (auto d = read_value(cells[col_dem], src, line_no)) {
                if (*d < 0.0) {
                    throw ValidationError(std::string(src) + ":" + std::to_string(line_no) +
                                          ": negative demand");
                }
                b.dem_sum += *d;
                ++b.dem_n;
            }
        }
    }
    if (buckets.empty()) {
        throw ValidationError(std::string(src) + ": no data rows");
    }

    const std::int64_t first = buckets.begin()->first;
    const std::int64_t last = buckets.rbegin()->first;
    std::vector<double> gen, dem;
    std::optional<double> prev_gen, prev_dem;
    std::size_t gen_run = 0, dem_run = 0;
    auto fail_gap = [&](std::int64_t h) {
        throw ValidationError(std::string(src) + ": gap of more than " +
                              std::to_string(kMaxFilledGap) + " hours ending near hour offset " +
                              std::to_string(h - first));
    };
    for (std::int64_t h = first; h <= last; ++h) {
        auto it = buckets.find(h);
        const bool has_gen = it != buckets.end() && it->second.gen_n > 0;
        if (has_gen) {
            prev_gen = it->second.gen_sum / static_cast<double>(it->second.gen_n);
            gen_run = 0;
        } else {
            if (!prev_gen || ++gen_run > kMaxFilledGap) {
                fail_gap(h);
            }
            ++out.filled_steps;
        }
        gen.push_back(*prev_gen);

        if (col_dem >= 0) {
            const bool has_dem = it != buckets.end() && it->second.dem_n > 0;
            if (has_dem) {
                prev_dem = it->second.dem_sum / static_cast<double>(it->second.dem_n);
                dem_run = 0;
            } else if (!prev_dem || ++dem_run > kMaxFilledGap) {
                fail_gap(h);
            }
            dem.push_back(*prev_dem);
        }
    }

    out.first_hour = first * 3600;
    out.trace.generation = std::move(gen);
    if (col_dem >= 0) {
        out.trace.reference_demand = std::move(dem);
    }
    out.trace.validate();
    return out;
}

LoadedTrace load_trace(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open trace file " + path.string());
    }
    return read_trace(in, path.string());
}

}  // namespace nemopt::harness
