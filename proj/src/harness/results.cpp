#include "nemopt/harness/results.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace nemopt::harness {

using nlohmann::ordered_json;

namespace {

std::string fmt(double v, const char* spec = "%.4f")
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// Column-aligned plain text; first column left aligned, the rest right.
class Table {
public:
    explicit Table(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
    void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

    std::string str() const
    {
        std::vector<std::size_t> width;
        for (const auto& r : rows_) {
            width.resize(std::max(width.size(), r.size()), 0);
            for (std::size_t i = 0; i < r.size(); ++i) {
                width[i] = std::max(width[i], r[i].size());
            }
        }
        std::ostringstream os;
        for (std::size_t k = 0; k < rows_.size(); ++k) {
            const auto& r = rows_[k];
            for (std::size_t i = 0; i < r.size(); ++i) {
                const std::string pad(width[i] - r[i].size(), ' ');
                if (i > 0) {
                    os << "  ";
                }
                os << (i == 0 ? r[i] + pad : pad + r[i]);
            }
            os << '\n';
            if (k == 0) {
                std::size_t total = 0;
                for (std::size_t w : width) {
                    total += w;
                }
                os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
            }
        }
        return os.str();
    }

private:
    std::vector<std::vector<std::string>> rows_;
};

std::string lines(const std::vector<ordered_json>& recs)
{
    std::string out;
    for (const auto& r : recs) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

ordered_json scenario_record(const ScenarioSpec& spec, std::string_view kind)
{
    ordered_json r;
    r["record"] = "scenario";
    r["run"] = std::string(kind);
    r["name"] = spec.name;
    r["trace"] = trace_disclosure(spec);
    r["seed"] = spec.seed;
    return r;
}

ordered_json diagnostics_json(const oracle::SolverDiagnostics& d)
{
    ordered_json r;
    r["status"] = d.status;
    r["iterations"] = d.iterations;
    r["refactorizations"] = d.refactorizations;
    r["primal_residual"] = d.primal_residual;
    r["dual_residual"] = d.dual_residual;
    r["objective_change"] = d.objective_change;
    r["repair_shift"] = d.repair_shift;
    r["simultaneous_steps"] = d.simultaneous_steps;
    return r;
}

}  // namespace

OutputFormat output_format_from_string(std::string_view name)
{
    if (name == "records") {
        return OutputFormat::records;
    }
    if (name == "table") {
        return OutputFormat::table;
    }
    throw ValidationError("unknown output format '" + std::string(name) + "'");
}

std::string trace_disclosure(const ScenarioSpec& spec)
{
    if (spec.trace_csv) {
        return "csv:" + spec.trace_csv->filename().string();
    }
    const auto& s = spec.synthetic;
    return "synthetic: g_t = " + fmt(s.peak_generation, "%g") +
           " * max(0, sin(pi (t mod 24 - 6) / 12)) * (1 + " + fmt(s.jitter, "%g") +
           " u_t), u_t ~ U[-1, 1]; demand " + fmt(s.baseline_demand, "%g") + " kWh; T = " +
           std::to_string(s.hours);
}

std::string gap_records(const ScenarioSpec& spec, const std::vector<GapReport>& reports)
{
    std::vector<ordered_json> recs{scenario_record(spec, "gap")};
    for (const auto& rep : reports) {
        for (const auto& row : rep.rows) {
            ordered_json r;
            r["record"] = "policy";
            r["scenario"] = rep.scenario;
            r["axis"] = rep.axis;
            r["axis_value"] = rep.axis_value;
            r["sigma"] = rep.sigma;
            r["seed"] = rep.seed;
            r["horizon"] = rep.horizon;
            r["policy"] = row.policy;
            r["surplus"] = row.surplus;
            r["gap_abs"] = row.gap_abs;
            r["gap_pct"] = row.gap_pct;
            r["computed_peak"] = row.computed_peak;
            r["realized_peak"] = row.realized_peak;
            r["clip_count"] = row.clip_count;
            recs.push_back(std::move(r));
        }
        ordered_json d;
        d["record"] = "oracle_diagnostics";
        d["scenario"] = rep.scenario;
        d["axis"] = rep.axis;
        d["axis_value"] = rep.axis_value;
        d["oracle_dominates"] = rep.oracle_dominates;
        d["solver"] = diagnostics_json(rep.oracle_diagnostics);
        recs.push_back(std::move(d));
    }
    for (const auto& s : summarize(reports)) {
        ordered_json r;
        r["record"] = "summary";
        r["axis"] = s.axis;
        r["policy"] = s.policy;
        r["mean_gap_pct"] = s.mean_gap_pct;
        r["cells"] = s.cells;
        recs.push_back(std::move(r));
    }
    return lines(recs);
}

std::string gap_table(const std::vector<GapReport>& reports)
{
    Table t({"axis", "value", "policy", "surplus", "gap", "gap%", "peak(plan)", "peak(real)",
             "clips"});
    for (const auto& rep : reports) {
        for (const auto& row : rep.rows) {
            t.add({rep.axis, fmt(rep.axis_value, "%g"), row.policy, fmt(row.surplus),
                   fmt(row.gap_abs), fmt(row.gap_pct, "%.2f"), fmt(row.computed_peak),
                   fmt(row.realized_peak), std::to_string(row.clip_count)});
        }
    }
    return t.str() + "\n" + summary_table(summarize(reports));
}

std::string summary_table(const std::vector<AxisSummary>& summary)
{
    Table t({"axis", "policy", "mean gap%", "cells"});
    for (const auto& s : summary) {
        t.add({s.axis, s.policy, fmt(s.mean_gap_pct, "%.2f"), std::to_string(s.cells)});
    }
    return t.str();
}

std::string gap_timings(const std::vector<GapReport>& reports)
{
    std::vector<ordered_json> recs;
    for (const auto& rep : reports) {
        for (const auto& row : rep.rows) {
            ordered_json r;
            r["record"] = "timing";
            r["scenario"] = rep.scenario;
            r["axis_value"] = rep.axis_value;
            r["policy"] = row.policy;
            r["seconds"] = row.seconds;
            recs.push_back(std::move(r));
        }
    }
    return lines(recs);
}

std::string oracle_records(const ScenarioSpec& spec, const oracle::DeterministicSolution& sol)
{
    std::vector<ordered_json> recs{scenario_record(spec, "oracle")};
    ordered_json r;
    r["record"] = "oracle";
    r["objective"] = sol.objective;
    r["peak"] = sol.peak;
    r["solver"] = diagnostics_json(sol.diagnostics);
    recs.push_back(std::move(r));
    for (std::size_t t = 0; t < sol.net.size(); ++t) {
        ordered_json s;
        s["record"] = "oracle_step";
        s["t"] = t;
        s["battery"] = sol.e_plus[t] - sol.e_minus[t];
        s["demand"] = sol.demand[t];
        s["net"] = sol.net[t];
        s["soc_next"] = sol.soc[t + 1];
        recs.push_back(std::move(s));
    }
    return lines(recs);
}

std::string oracle_table(const oracle::DeterministicSolution& sol)
{
    Table t({"t", "battery", "demand", "net", "soc"});
    for (std::size_t k = 0; k < sol.net.size(); ++k) {
        double d = 0.0;
        for (double x : sol.demand[k]) {
            d += x;
        }
        t.add({std::to_string(k), fmt(sol.e_plus[k] - sol.e_minus[k]), fmt(d), fmt(sol.net[k]),
               fmt(sol.soc[k + 1])});
    }
    std::ostringstream os;
    os << "objective " << fmt(sol.objective, "%.6f") << "  peak " << fmt(sol.peak) << "  status "
       << sol.diagnostics.status << "  iterations " << sol.diagnostics.iterations << "\n\n"
       << t.str();
    return os.str();
}

std::string noise_records(const ScenarioSpec& spec, const NoiseStudy& study)
{
    std::vector<ordered_json> recs{scenario_record(spec, "noise")};
    for (const auto& p : study.points) {
        ordered_json r;
        r["record"] = "noise";
        r["sigma"] = p.sigma;
        r["seeds"] = study.seeds;
        r["mean_surplus"] = p.mean_surplus;
        r["std_error"] = p.std_error;
        r["mean_computed_peak"] = p.mean_computed_peak;
        r["mean_realized_peak"] = p.mean_realized_peak;
        r["mean_peak_deviation"] = p.mean_peak_deviation;
        r["oracle_surplus"] = study.oracle_surplus;
        recs.push_back(std::move(r));
    }
    ordered_json r;
    r["record"] = "noise_trend";
    r["nonincreasing"] = study.nonincreasing;
    recs.push_back(std::move(r));
    return lines(recs);
}

std::string noise_table(const NoiseStudy& study)
{
    Table t({"sigma", "mean surplus", "std err", "peak(plan)", "peak(real)", "|dev|"});
    for (const auto& p : study.points) {
        t.add({fmt(p.sigma, "%g"), fmt(p.mean_surplus), fmt(p.std_error), fmt(p.mean_computed_peak),
               fmt(p.mean_realized_peak), fmt(p.mean_peak_deviation)});
    }
    return "oracle surplus " + fmt(study.oracle_surplus) + ", " + std::to_string(study.seeds) +
           " seeds\n\n" + t.str() + "trend nonincreasing: " +
           (study.nonincreasing ? "yes" : "no") + "\n";
}

std::string timing_records(const TimingReport& report)
{
    std::vector<ordered_json> recs;
    for (const auto& p : report.points) {
        ordered_json r;
        r["record"] = "timing";
        r["horizon"] = p.horizon;
        r["lsps_seconds"] = p.lsps_seconds;
        r["oracle_seconds"] = p.oracle_seconds >= 0.0 ? ordered_json(p.oracle_seconds) : nullptr;
        recs.push_back(std::move(r));
    }
    ordered_json fit;
    fit["record"] = "timing_fit";
    fit["slope"] = report.slope;
    fit["intercept"] = report.intercept;
    fit["r_squared"] = report.r_squared;
    fit["ratios"] = report.ratios;
    recs.push_back(std::move(fit));
    return lines(recs);
}

std::string timing_table(const TimingReport& report)
{
    Table t({"T", "lsps s", "oracle s"});
    for (const auto& p : report.points) {
        t.add({std::to_string(p.horizon), fmt(p.lsps_seconds, "%.3e"),
               p.oracle_seconds >= 0.0 ? fmt(p.oracle_seconds, "%.3e") : "-"});
    }
    std::ostringstream os;
    os << t.str() << "linear fit: slope " << fmt(report.slope, "%.3e") << " s/step, R^2 "
       << fmt(report.r_squared, "%.4f") << "\nratios:";
    for (double r : report.ratios) {
        os << ' ' << fmt(r, "%.2f");
    }
    os << '\n';
    return os.str();
}

std::string certification_records(const std::vector<CertificationRow>& cert,
                                   const std::vector<CrossOracleRow>& cross,
                                   const dpv::NonmyopiaReport& nm)
{
    std::vector<ordered_json> recs;
    auto prop = [](const dpv::PropertyReport& p) {
        ordered_json r;
        r["checks"] = p.checks;
        r["violations"] = p.violations;
        r["worst_violation"] = p.worst_violation;
        r["tolerance"] = p.tolerance;
        return r;
    };
    for (const auto& c : cert) {
        ordered_json r;
        r["record"] = "certification";
        r["instance"] = c.index;
        r["stochastic"] = c.stochastic;
        r["horizon"] = c.horizon;
        r["devices"] = c.devices;
        r["concavity"] = prop(c.concavity);
        r["monotonicity"] = prop(c.monotonicity);
        ordered_json th;
        th["slices"] = c.thresholds.slices;
        th["lower_face"] = c.thresholds.lower_face;
        th["upper_face"] = c.thresholds.upper_face;
        th["peak_face"] = c.thresholds.peak_face;
        th["interior"] = c.thresholds.interior;
        th["next_soc_violations"] = c.thresholds.next_soc_violations;
        th["action_reversals"] = c.thresholds.action_reversals;
        th["violations"] = c.thresholds.monotonicity_violations;
        th["worst_reversal"] = c.thresholds.worst_reversal;
        th["tolerance"] = c.thresholds.tolerance;
        r["thresholds"] = th;
        r["passed"] = c.passed();
        recs.push_back(std::move(r));
    }
    for (const auto& c : cross) {
        ordered_json r;
        r["record"] = "cross_oracle";
        r["instance"] = c.index;
        r["horizon"] = c.horizon;
        r["upper_bound"] = c.upper_bound;
        r["lattice_value"] = c.lattice_value;
        r["bound"] = c.bound;
        r["within_bound"] = c.within_bound;
        r["ub_dominates"] = c.ub_dominates;
        recs.push_back(std::move(r));
    }
    ordered_json r;
    r["record"] = "nonmyopia";
    r["a_equal"] = {nm.a_v0_equal, nm.a_v1_equal};
    r["a_lower"] = {nm.a_v0_lower, nm.a_v1_lower};
    r["a_flipped"] = nm.a_flipped;
    r["b_first"] = {nm.b_e0_first, nm.b_e1_first};
    r["b_second"] = {nm.b_e0_second, nm.b_e1_second};
    r["b_flipped"] = nm.b_flipped;
    r["b_matches_pairs"] = nm.b_matches_pairs;
    recs.push_back(std::move(r));
    return lines(recs);
}

std::string certification_table(const std::vector<CertificationRow>& cert,
                                 const std::vector<CrossOracleRow>& cross,
                                 const dpv::NonmyopiaReport& nm)
{
    Table a({"inst", "chain", "T", "K", "concave viol", "monotone viol", "threshold viol",
             "worst rev", "faces l/u/p/i", "ok"});
    for (const auto& c : cert) {
        const auto& th = c.thresholds;
        a.add({std::to_string(c.index), c.stochastic ? "markov" : "fixed",
               std::to_string(c.horizon), std::to_string(c.devices),
               std::to_string(c.concavity.violations), std::to_string(c.monotonicity.violations),
               std::to_string(th.monotonicity_violations), fmt(th.worst_reversal, "%.3g"),
               std::to_string(th.lower_face) + "/" + std::to_string(th.upper_face) + "/" +
                   std::to_string(th.peak_face) + "/" + std::to_string(th.interior),
               c.passed() ? "yes" : "NO"});
    }
    Table b({"inst", "T", "upper bound", "lattice", "gap", "bound", "ok"});
    for (const auto& c : cross) {
        b.add({std::to_string(c.index), std::to_string(c.horizon), fmt(c.upper_bound, "%.6f"),
               fmt(c.lattice_value, "%.6f"), fmt(c.upper_bound - c.lattice_value, "%.2e"),
               fmt(c.bound, "%.2e"), c.within_bound && c.ub_dominates ? "yes" : "NO"});
    }
    std::ostringstream os;
    os << a.str() << '\n' << b.str() << '\n';
    os << "two-step example A (peak coupling): g1 = g0 -> (" << fmt(nm.a_v0_equal, "%g") << ", "
       << fmt(nm.a_v1_equal, "%g") << "), g1 < g0 -> (" << fmt(nm.a_v0_lower, "%g") << ", "
       << fmt(nm.a_v1_lower, "%g") << ")  flipped: " << (nm.a_flipped ? "yes" : "no") << '\n';
    os << "two-step example B (SoC coupling): (" << fmt(nm.b_e0_first, "%g") << ", "
       << fmt(nm.b_e1_first, "%g") << ") vs (" << fmt(nm.b_e0_second, "%g") << ", "
       << fmt(nm.b_e1_second, "%g") << ")  flipped: " << (nm.b_flipped ? "yes" : "no") << '\n';
    return os.str();
}

void emit(const std::optional<std::filesystem::path>& dir, const std::vector<Artifact>& artifacts)
{
    if (!dir) {
        for (const auto& a : artifacts) {
            std::cout << a.content;
        }
        std::cout.flush();
        if (!std::cout) {
            throw std::runtime_error("failed writing to stdout");
        }
        return;
    }
    std::error_code ec;
    std::filesystem::create_directories(*dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory " + dir->string() + ": " +
                                 ec.message());
    }
    for (const auto& a : artifacts) {
        const auto path = *dir / a.file_name;
        std::ofstream out(path, std::ios::binary);
        out << a.content;
        out.close();
        if (!out) {
            throw std::runtime_error("failed writing " + path.string());
        }
    }
}

}  // namespace nemopt::harness
