#pragma once

// File formats and run artifacts: the JSON problem format (tree, per-scenario
// QP blocks with sparse triplets, or a hydro shorthand), schedule configs,
// the metrics CSV, solution/manifest output, a content-hash keyed reference
// cache, and quartile aggregation over repeated runs.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hedge/algorithms.hpp"
#include "hedge/hydro.hpp"

namespace hedge {

using nlohmann::json;

// --- problem files ---------------------------------------------------------

std::pair<ScenarioTree, std::vector<QpScenarioProblem>> problem_from_json(const json& doc);
json problem_to_json(const ScenarioTree& tree, const std::vector<QpScenarioProblem>& problems);
std::pair<ScenarioTree, std::vector<QpScenarioProblem>> load_problem(const std::string& path);
void save_problem(const std::string& path, const ScenarioTree& tree,
                  const std::vector<QpScenarioProblem>& problems);

HydroParams hydro_params_from_json(const json& doc);
json hydro_params_to_json(const HydroParams& params);

// --- schedules -------------------------------------------------------------

SimSchedule schedule_from_json(const json& doc);
json schedule_to_json(const SimSchedule& schedule);
SimSchedule load_schedule(const std::string& path);

// --- metrics ---------------------------------------------------------------

// Fixed column order, '.' decimal, shortest round-trip formatting; optional
// fields left empty. Identical rows serialize to identical bytes.
std::string metrics_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);

// --- run artifacts ---------------------------------------------------------

json solution_to_json(const RunRecord& record);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// --- reference cache -------------------------------------------------------

std::uint64_t fnv1a(const std::string& data);
std::string content_hash_hex(const std::string& data);

// Extensive-form reference, cached beside the problem file under
// <path>.<hash>.ref.json; recomputed when the problem bytes change.
Reference reference_for(const std::string& problem_path, const ScenarioTree& tree,
                        const std::vector<QpScenarioProblem>& problems);

// --- repetition aggregation ------------------------------------------------

struct QuartileRow {
    double t = 0.0;  // right edge of the time bin
    double q1 = 0.0, med = 0.0, q3 = 0.0;
    long n = 0;  // runs contributing to the bin
};

// Logarithmic time bins over the union of run horizons; per bin, each run
// contributes its last value at or before the bin edge (carried forward),
// and quartiles are taken across runs.
std::vector<QuartileRow> aggregate_runs(const std::vector<std::vector<MetricsRow>>& runs,
                                        double (*extract)(const MetricsRow&), int num_bins);

std::string quartiles_csv(const std::vector<QuartileRow>& rows, const std::string& metric_name);

}  // namespace hedge
