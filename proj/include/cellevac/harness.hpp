#pragma once

#include "cellevac/controller.hpp"
#include "cellevac/fd.hpp"
#include "cellevac/optimizer.hpp"
#include "cellevac/safety.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cellevac {

// Immutable per-scenario context shared by concurrent runs.
struct SimContext {
    Scenario scenario;
    DistanceTable dist;
    std::vector<ExitDynamics> dynamics; // per exit, ascending id
    MotionParams motion;
    double gamma = 5.0;

    std::vector<double> critical_density() const;
    std::vector<SafetyThresholds> safety_thresholds() const;
    void validate() const;
};

SimContext make_context(Scenario scn, std::vector<ExitDynamics> dynamics,
                        MotionParams motion = {}, double gamma = 5.0);

struct RunConfig {
    BetaConfig behavior;       // non-compliant population group
    double compliance = 0.0;   // fraction following indications
    ControllerMode controller_mode = ControllerMode::Off;
    BetaConfig controller_betas;
    std::shared_ptr<const cgp::Evaluator> controller_rule; // CGP mode
    double controller_period_s = 5.0;
    double decision_period_s = 5.0;
    double measure_period_s = 2.0;
    bool use_flows = true; // honor scenario.external_flows
    std::optional<std::string> trajectory_path; // per-step CSV dump
    std::optional<std::string> map_trace_path;  // controller map CSV dump

    uint64_t fingerprint(const std::string& scenario_name) const;
};

struct RunResult {
    double evac_time_min = 0.0;
    double cap_min = 0.0;
    std::vector<double> sample_times;            // shared 2 s grid
    std::vector<std::vector<double>> density;    // [exit][sample]
    std::vector<std::vector<double>> flow;       // [exit][sample]
    SafetyReport safety;
    std::vector<int64_t> evac_counts;            // per exit
    int64_t spawned = 0;
    int64_t injected = 0;
    int64_t remaining = 0;
    std::map<int, int> decision_change_hist;     // changes -> pedestrians
    double decision_change_mean = 0.0;
    std::vector<int> inflow_exits;
    std::vector<int> blocked_exits;
    uint64_t seed = 0;
    uint64_t fingerprint = 0;

    RunMetrics metrics() const;
    // Full-precision canonical serialization (determinism checks, exports).
    std::string to_json() const;
};

RunResult run_simulation(const SimContext& ctx, const RunConfig& cfg, uint64_t seed);

int default_workers(); // CELLEVAC_WORKERS env var or hardware concurrency

// Runs f(0..n-1) on a small pool; results must be written by index.
void parallel_for(int n, int workers, const std::function<void(int)>& f);

// --- Experiment suites ---

struct SweepRow {
    double param_value = 0.0;
    ReplicationStats stats;
};

enum class SweepParam { BetaD, BetaP };

struct SweepSpec {
    SweepParam param = SweepParam::BetaD;
    std::vector<double> grid;
    ReplicationPolicy policy;
    uint64_t seed = 1;
};

std::vector<SweepRow> sensitivity_sweep(const SimContext& ctx, const RunConfig& base,
                                        const SweepSpec& spec, int workers = 0);

struct SuiteResult {
    std::vector<RunResult> runs; // ordered by run index
};

SuiteResult performance_suite(const SimContext& ctx, const RunConfig& cfg,
                              int n_runs, uint64_t seed, int workers = 0);

struct ComplianceRow {
    double level = 0.0;
    SuiteResult suite;
};

std::vector<ComplianceRow> compliance_sweep(const SimContext& ctx,
                                            const RunConfig& base,
                                            const std::vector<double>& levels,
                                            int runs_per_level, uint64_t seed,
                                            int workers = 0);

// --- Exports (plain CSV / JSON) ---

void write_suite_csv(const SuiteResult& suite, const std::string& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& param_name,
                     const std::string& path);
void write_compliance_csv(const std::vector<ComplianceRow>& rows,
                          const std::string& path);
void write_run_safety_csv(const RunResult& run, const SimContext& ctx,
                          const std::string& path);
void write_run_summary_json(const RunResult& run, const std::string& path);

} // namespace cellevac
