#include "cellevac/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace cellevac {

using nlohmann::json;

std::vector<double> SimContext::critical_density() const {
    std::vector<double> out;
    for (const ExitDynamics& d : dynamics) out.push_back(d.rho_crit);
    return out;
}

std::vector<SafetyThresholds> SimContext::safety_thresholds() const {
    std::vector<SafetyThresholds> out;
    for (const ExitDynamics& d : dynamics) out.push_back({d.rho_sf, d.rho_lock});
    return out;
}

void SimContext::validate() const {
    if (static_cast<int>(dynamics.size()) != scenario.n_exits())
        throw ConfigError("context: calibration does not cover every exit");
    for (int e = 0; e < scenario.n_exits(); ++e) {
        if (dynamics[e].exit_id != e + 1)
            throw ConfigError("context: calibration exit ids do not match scenario");
        dynamics[e].validate();
    }
}

SimContext make_context(Scenario scn, std::vector<ExitDynamics> dynamics,
                        MotionParams motion, double gamma) {
    SimContext ctx;
    ctx.scenario = std::move(scn);
    ctx.dist = build_distance_table(ctx.scenario);
    ctx.dynamics = std::move(dynamics);
    ctx.motion = motion;
    ctx.gamma = gamma;
    ctx.validate();
    return ctx;
}

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

void append_beta(std::ostringstream& out, const BetaConfig& b) {
    out << b.beta_d << "," << b.beta_g << "," << b.beta_e << "," << b.beta_w << ","
        << b.beta_p << "," << b.beta_sys;
}

} // namespace

uint64_t RunConfig::fingerprint(const std::string& scenario_name) const {
    std::ostringstream out;
    out.precision(17);
    out << scenario_name << "|behavior=";
    append_beta(out, behavior);
    out << "|compliance=" << compliance << "|controller=";
    switch (controller_mode) {
        case ControllerMode::Off: out << "off"; break;
        case ControllerMode::Mlm: out << "mlm:"; append_beta(out, controller_betas); break;
        case ControllerMode::Cgp: out << "cgp"; break;
    }
    out << "|period=" << controller_period_s << "|decision=" << decision_period_s
        << "|measure=" << measure_period_s << "|flows=" << use_flows;
    return fnv1a(out.str());
}

RunMetrics RunResult::metrics() const {
    RunMetrics m;
    m.evac_time_min = evac_time_min;
    m.sf = safety.sf;
    m.sf_var = safety.sf_var;
    m.decision_change_mean = decision_change_mean;
    m.remaining = remaining;
    return m;
}

std::string RunResult::to_json() const {
    json j;
    j["evac_time_min"] = evac_time_min;
    j["cap_min"] = cap_min;
    j["sample_times"] = sample_times;
    j["density"] = density;
    j["flow"] = flow;
    j["sf_exit"] = safety.sf_exit;
    j["sf"] = safety.sf;
    j["sf_var"] = safety.sf_var;
    j["gamma"] = safety.gamma;
    j["evac_counts"] = evac_counts;
    j["spawned"] = spawned;
    j["injected"] = injected;
    j["remaining"] = remaining;
    json hist = json::object();
    for (auto [k, v] : decision_change_hist) hist[std::to_string(k)] = v;
    j["decision_change_hist"] = hist;
    j["decision_change_mean"] = decision_change_mean;
    j["inflow_exits"] = inflow_exits;
    j["blocked_exits"] = blocked_exits;
    j["seed"] = seed;
    j["fingerprint"] = fingerprint;
    return j.dump();
}

namespace {

// Draw k distinct values from `pool` (ascending ids) without replacement.
std::vector<int> sample_distinct(std::vector<int> pool, int k, Rng& rng) {
    std::vector<int> out;
    for (int i = 0; i < k && !pool.empty(); ++i) {
        size_t pick = static_cast<size_t>(rng.below(pool.size()));
        out.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

RunResult run_simulation(const SimContext& sim, const RunConfig& cfg, uint64_t seed) {
    const Scenario& scn = sim.scenario;
    const MotionParams& mp = sim.motion;

    RunResult result;
    result.seed = seed;
    result.fingerprint = cfg.fingerprint(scn.name);
    result.cap_min = scn.sim_time_cap_s / 60.0;

    std::vector<PedestrianState> initial = spawn_population(scn, seed);
    int n_initial = static_cast<int>(initial.size());

    // Compliance split: an exact fraction, selected by seeded shuffle.
    Rng rng_sel = derive_stream(seed, "selection");
    {
        std::vector<int> order(initial.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng_sel.below(i)]);
        int n_compliant = static_cast<int>(std::llround(cfg.compliance * n_initial));
        for (int i = 0; i < n_compliant; ++i) initial[order[i]].compliant = true;
    }

    SimState state = make_sim_state(scn, std::move(initial));
    WallIndex walls(scn, mp.neighbor_cutoff);

    // External-flow selection (random per run, or fixed from config).
    bool flows_enabled = cfg.use_flows && scn.flows.rate_peds_per_min > 0.0 &&
                         scn.flows.n_inflow > 0;
    std::vector<int> inflow_ids;
    std::vector<int> blocked_ids;
    if (cfg.use_flows && (scn.flows.n_inflow > 0 || scn.flows.n_blocked > 0)) {
        if (scn.flows.random_selection) {
            std::vector<int> with_entry;
            for (const ExitGate& e : scn.exits)
                if (e.entry_point) with_entry.push_back(e.id);
            inflow_ids = sample_distinct(with_entry, scn.flows.n_inflow, rng_sel);
            std::vector<int> rest;
            for (const ExitGate& e : scn.exits)
                if (std::find(inflow_ids.begin(), inflow_ids.end(), e.id) == inflow_ids.end())
                    rest.push_back(e.id);
            blocked_ids = sample_distinct(rest, scn.flows.n_blocked, rng_sel);
        } else {
            inflow_ids = scn.flows.inflow_exits;
            blocked_ids = scn.flows.blocked_exits;
        }
    }
    for (int id : blocked_ids) block_exit(state, id);
    result.inflow_exits = inflow_ids;
    result.blocked_exits = blocked_ids;

    Rng rng_decide = derive_stream(seed, "decide");
    std::vector<Rng> rng_inflow;
    for (int id : inflow_ids)
        rng_inflow.push_back(derive_stream(seed, "inflow-" + std::to_string(id)));

    const int64_t steps_per_decision =
        std::max<int64_t>(1, std::llround(cfg.decision_period_s / mp.dt));
    const int64_t steps_per_controller =
        std::max<int64_t>(1, std::llround(cfg.controller_period_s / mp.dt));
    const int64_t steps_per_measure =
        std::max<int64_t>(1, std::llround(cfg.measure_period_s / mp.dt));

    std::vector<double> critical = sim.critical_density();
    ControllerMap map;
    bool have_map = false;

    std::ofstream traj;
    if (cfg.trajectory_path) {
        traj.open(*cfg.trajectory_path);
        traj << "t,ped,x,y,target\n";
    }
    std::ofstream map_trace;
    if (cfg.map_trace_path) {
        map_trace.open(*cfg.map_trace_path);
        map_trace << "t,cell,exit\n";
    }

    result.density.assign(scn.n_exits(), {});
    result.flow.assign(scn.n_exits(), {});

    double end_time = 0.0;
    for (;;) {
        double t = static_cast<double>(state.step) * mp.dt;
        bool flows_on = flows_enabled && t < scn.flows.duration_s;
        if (t >= scn.sim_time_cap_s) {
            end_time = scn.sim_time_cap_s;
            break;
        }
        if (state.active.empty() && !flows_on) {
            end_time = t;
            break;
        }

        // Controller issuance, broadcast, then the decision cycle.
        bool controller_tick = cfg.controller_mode != ControllerMode::Off &&
                               state.step % steps_per_controller == 0;
        bool decision_tick = state.step % steps_per_decision == 0;
        if (controller_tick || decision_tick) {
            DecisionContext dctx =
                make_decision_context(state, scn, sim.dist, critical,
                                      have_map ? &map.assignment : nullptr, n_initial);
            if (controller_tick) {
                if (cfg.controller_mode == ControllerMode::Mlm) {
                    map = allocate_mlm(dctx, cfg.controller_betas,
                                       have_map ? &map : nullptr);
                } else {
                    map = allocate_cgp(dctx, *cfg.controller_rule,
                                       have_map ? &map : nullptr);
                }
                map.issued_at = t;
                have_map = true;
                broadcast(map, state, scn);
                dctx.controller_assignment = &map.assignment;
                if (map_trace.is_open())
                    for (int c = 0; c < scn.n_cells(); ++c)
                        map_trace << t << "," << (c + 1) << "," << map.assignment[c] << "\n";
            }
            if (decision_tick) decision_cycle(state, dctx, cfg.behavior, rng_decide);
        }

        if (flows_on) {
            std::vector<int> fresh;
            for (size_t i = 0; i < inflow_ids.size(); ++i) {
                auto created = inject_external_flow(state, scn, inflow_ids[i],
                                                    scn.flows.rate_peds_per_min, mp.dt,
                                                    rng_inflow[i], mp);
                for (int id : created) {
                    state.peds[id].compliant = rng_inflow[i].uniform() < cfg.compliance;
                    fresh.push_back(id);
                }
            }
            if (!fresh.empty()) {
                DecisionContext dctx =
                    make_decision_context(state, scn, sim.dist, critical,
                                          have_map ? &map.assignment : nullptr, n_initial);
                for (int id : fresh) {
                    PedestrianState& ped = state.peds[id];
                    if (have_map)
                        ped.system_exit = map.assignment[locate_cell(ped.position, scn) - 1];
                    ped.target_exit = 0; // provisional target superseded by a real choice
                    decide_pedestrian(ped, dctx, cfg.behavior, rng_decide);
                }
            }
        }

        sfm_step(state, scn, walls, mp);

        if (traj.is_open()) {
            for (int id : state.active) {
                const PedestrianState& p = state.peds[id];
                traj << state.clock << "," << id << "," << p.position.x << ","
                     << p.position.y << "," << p.target_exit << "\n";
            }
        }

        if (state.step % steps_per_measure == 0) {
            if (!conservation_holds(state))
                throw SimError("run_simulation: conservation violated at t=" +
                               std::to_string(state.clock));
            auto samples = measure(state, scn, cfg.measure_period_s);
            result.sample_times.push_back(state.clock);
            for (const DensitySample& s : samples) {
                result.density[s.exit_id - 1].push_back(s.density);
                result.flow[s.exit_id - 1].push_back(s.flow);
            }
        }
    }

    result.evac_time_min = end_time / 60.0;
    result.evac_counts = state.evac_count;
    result.spawned = state.spawned;
    result.injected = state.injected;
    result.remaining = state.active_count();

    int64_t total_peds = state.spawned + state.injected;
    int64_t total_changes = 0;
    for (const PedestrianState& p : state.peds) {
        result.decision_change_hist[p.decision_changes] += 1;
        total_changes += p.decision_changes;
    }
    result.decision_change_mean =
        total_peds > 0 ? static_cast<double>(total_changes) / total_peds : 0.0;

    auto thresholds = sim.safety_thresholds();
    result.safety.gamma = sim.gamma;
    result.safety.sf_exit.assign(scn.n_exits(), 0.0);
    result.safety.n_samples.assign(scn.n_exits(), 0);
    if (!result.sample_times.empty()) {
        result.safety = safety_report(result.density, thresholds, sim.gamma);
    }
    return result;
}

int default_workers() {
    if (const char* env = std::getenv("CELLEVAC_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, int workers, const std::function<void(int)>& f) {
    if (workers <= 0) workers = default_workers();
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (;;) {
                    int i = next.fetch_add(1);
                    if (i >= n) return;
                    f(i);
                }
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<SweepRow> sensitivity_sweep(const SimContext& ctx, const RunConfig& base,
                                        const SweepSpec& spec, int workers) {
    if (spec.grid.empty()) throw ConfigError("sweep: empty grid");
    std::vector<SweepRow> rows(spec.grid.size());
    parallel_for(static_cast<int>(spec.grid.size()), workers, [&](int i) {
        double value = spec.grid[i];
        RunConfig cfg = base;
        if (spec.param == SweepParam::BetaD) cfg.behavior.beta_d = value;
        else cfg.behavior.beta_p = value;

        std::ostringstream tag;
        tag << "sweep-" << (spec.param == SweepParam::BetaD ? "betaD" : "betaP")
            << "-" << value;
        Rng seeds = derive_stream(spec.seed, tag.str());
        auto eval = [&](uint64_t run_seed) -> RunMetrics {
            try {
                return run_simulation(ctx, cfg, run_seed).metrics();
            } catch (const SimError&) {
                RunMetrics m;
                m.failed = true;
                return m;
            }
        };
        rows[i].param_value = value;
        rows[i].stats = replicate(eval, spec.policy, seeds);
    });
    return rows;
}

SuiteResult performance_suite(const SimContext& ctx, const RunConfig& cfg,
                              int n_runs, uint64_t seed, int workers) {
    if (n_runs < 1) throw ConfigError("suite: n_runs must be >= 1");
    SuiteResult out;
    out.runs.resize(n_runs);
    parallel_for(n_runs, workers, [&](int i) {
        uint64_t run_seed = derive_seed(seed, "run-" + std::to_string(i));
        out.runs[i] = run_simulation(ctx, cfg, run_seed);
    });
    return out;
}

std::vector<ComplianceRow> compliance_sweep(const SimContext& ctx,
                                            const RunConfig& base,
                                            const std::vector<double>& levels,
                                            int runs_per_level, uint64_t seed,
                                            int workers) {
    if (levels.empty()) throw ConfigError("compliance sweep: empty level list");
    std::vector<ComplianceRow> rows(levels.size());
    for (size_t li = 0; li < levels.size(); ++li) {
        RunConfig cfg = base;
        cfg.compliance = levels[li];
        rows[li].level = levels[li];
        // Common random numbers across levels: same seeds as a pure suite.
        rows[li].suite = performance_suite(ctx, cfg, runs_per_level, seed, workers);
    }
    return rows;
}

namespace {

void write_metric_rows(std::ofstream& out, int run_id, const RunResult& r) {
    auto row = [&](const std::string& metric, double value) {
        out << run_id << "," << r.seed << "," << r.fingerprint << "," << metric << ","
            << value << "\n";
    };
    row("evac_time_min", r.evac_time_min);
    row("sf", r.safety.sf);
    row("sf_var", r.safety.sf_var);
    row("decision_change_mean", r.decision_change_mean);
    row("remaining", static_cast<double>(r.remaining));
    for (size_t e = 0; e < r.evac_counts.size(); ++e)
        row("evac_count_exit_" + std::to_string(e + 1),
            static_cast<double>(r.evac_counts[e]));
}

} // namespace

void write_suite_csv(const SuiteResult& suite, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << "run,seed,fingerprint,metric,value\n";
    for (size_t i = 0; i < suite.runs.size(); ++i)
        write_metric_rows(out, static_cast<int>(i), suite.runs[i]);
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& param_name,
                     const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << "param,value,rep,metric,metric_value\n";
    for (const SweepRow& row : rows) {
        for (size_t k = 0; k < row.stats.runs.size(); ++k) {
            const RunMetrics& m = row.stats.runs[k];
            auto emit = [&](const std::string& metric, double v) {
                out << param_name << "," << row.param_value << "," << k << "," << metric
                    << "," << v << "\n";
            };
            emit("evac_time_min", m.evac_time_min);
            emit("sf", m.sf);
            emit("sf_var", m.sf_var);
            emit("decision_change_mean", m.decision_change_mean);
            emit("remaining", static_cast<double>(m.remaining));
        }
    }
}

void write_compliance_csv(const std::vector<ComplianceRow>& rows,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << "level,run,seed,fingerprint,metric,value\n";
    for (const ComplianceRow& row : rows) {
        for (size_t i = 0; i < row.suite.runs.size(); ++i) {
            const RunResult& r = row.suite.runs[i];
            auto emit = [&](const std::string& metric, double v) {
                out << row.level << "," << i << "," << r.seed << "," << r.fingerprint
                    << "," << metric << "," << v << "\n";
            };
            emit("evac_time_min", r.evac_time_min);
            emit("sf", r.safety.sf);
            emit("sf_var", r.safety.sf_var);
            emit("decision_change_mean", r.decision_change_mean);
            emit("remaining", static_cast<double>(r.remaining));
        }
    }
}

void write_run_safety_csv(const RunResult& run, const SimContext& ctx,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << "t,exit,density,normalized_density,running_sf\n";
    auto thr = ctx.safety_thresholds();
    for (size_t e = 0; e < run.density.size(); ++e) {
        double acc_mean = 0.0;
        std::vector<double> norm;
        for (size_t i = 0; i < run.density[e].size(); ++i) {
            double nd = normalize_density(run.density[e][i], thr[e].rho_sf, thr[e].rho_lock);
            norm.push_back(nd);
            acc_mean += nd;
            double m = acc_mean / static_cast<double>(norm.size());
            double var = 0.0;
            for (double x : norm) var += (x - m) * (x - m);
            var /= static_cast<double>(norm.size());
            double sf = (-m - ctx.gamma * var) * 100.0;
            out << run.sample_times[i] << "," << (e + 1) << "," << run.density[e][i]
                << "," << nd << "," << sf << "\n";
        }
    }
}

void write_run_summary_json(const RunResult& run, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    json j;
    j["evac_time_min"] = run.evac_time_min;
    j["sf_exit"] = run.safety.sf_exit;
    j["sf"] = run.safety.sf;
    j["sf_var"] = run.safety.sf_var;
    j["gamma"] = run.safety.gamma;
    j["decision_change_mean"] = run.decision_change_mean;
    j["evac_counts"] = run.evac_counts;
    j["spawned"] = run.spawned;
    j["injected"] = run.injected;
    j["remaining"] = run.remaining;
    j["inflow_exits"] = run.inflow_exits;
    j["blocked_exits"] = run.blocked_exits;
    j["seed"] = run.seed;
    j["fingerprint"] = run.fingerprint;
    out << j.dump(2) << "\n";
}

} // namespace cellevac
