#include "cellevac/fd.hpp"

#include "cellevac/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace cellevac {

using nlohmann::json;

void ExitDynamics::validate() const {
    if (!(rho_crit > 0.0 && rho_crit < rho_over && rho_over < rho_lock))
        throw ThresholdError("exit " + std::to_string(exit_id) +
                             ": thresholds must satisfy 0 < rho_crit < rho_over < rho_lock");
    if (!(rho_sf > rho_crit && rho_sf < rho_over))
        throw ThresholdError("exit " + std::to_string(exit_id) +
                             ": rho_sf must lie in (rho_crit, rho_over)");
}

double default_peak_flow(double gate_width) {
    return std::clamp(3.0 * gate_width, 4.0, 12.0);
}

double fd_injection_rate(double t, double peak_flow, const FDProtocolConfig& cfg) {
    if (t < 0.0 || t >= cfg.horizon_s) return 0.0;
    double cycle_len = cfg.horizon_s / cfg.cycles;
    double tc = std::fmod(t, cycle_len);
    double half = cycle_len / 2.0;
    double shape = tc < half ? tc / half : (cycle_len - tc) / half;
    return (peak_flow / 4.0) * shape;
}

FDSampleSet run_fd_protocol(const Scenario& scn, int exit_id, double peak_flow,
                            uint64_t seed, const FDProtocolConfig& cfg,
                            const MotionParams& mp) {
    if (exit_id < 1 || exit_id > scn.n_exits())
        throw SimError("run_fd_protocol: unknown exit id");

    SimState state = make_sim_state(scn, {});
    WallIndex walls(scn, mp.neighbor_cutoff);

    const auto& source_cells = scn.measurement_cells[exit_id - 1];
    std::vector<Vec2> sources;
    for (int cid : source_cells) sources.push_back(scn.cells[cid - 1].center);
    std::vector<int64_t> backlog(sources.size(), 0);
    std::vector<Rng> stream_rng;
    for (size_t s = 0; s < sources.size(); ++s)
        stream_rng.push_back(derive_stream(seed, "fd-stream-" + std::to_string(s)));

    FDSampleSet out;
    out.exit_id = exit_id;
    out.cadence_s = cfg.sample_period_s;

    int64_t steps = static_cast<int64_t>(std::llround(cfg.horizon_s / mp.dt));
    int64_t sample_every = static_cast<int64_t>(std::llround(cfg.sample_period_s / mp.dt));
    int64_t lock_step = static_cast<int64_t>(std::llround(cfg.lock_at_s / mp.dt));
    bool locked = false;

    for (int64_t step = 0; step < steps; ++step) {
        double t = step * mp.dt;
        if (!locked && step >= lock_step) {
            block_exit(state, exit_id);
            locked = true;
        }
        double rate = fd_injection_rate(t, peak_flow, cfg);
        for (size_t s = 0; s < sources.size(); ++s) {
            auto created = inject_at(state, scn, sources[s], rate, mp.dt,
                                     stream_rng[s], mp, backlog[s]);
            for (int id : created) state.peds[id].target_exit = exit_id;
        }
        sfm_step(state, scn, walls, mp);

        if ((step + 1) % sample_every == 0) {
            auto samples = measure(state, scn, cfg.sample_period_s);
            const DensitySample& s = samples[exit_id - 1];
            out.time.push_back(s.time);
            out.density.push_back(s.density);
            out.flow.push_back(s.flow);
            out.lock_mask.push_back(locked ? 1 : 0);
        }
    }
    return out;
}

Thresholds extract_thresholds(const PolyFit& fit, const FDSampleSet& samples) {
    std::vector<double> nonlock_density;
    std::vector<double> lock_density;
    for (size_t i = 0; i < samples.size(); ++i) {
        if (samples.lock_mask[i]) lock_density.push_back(samples.density[i]);
        else nonlock_density.push_back(samples.density[i]);
    }
    if (nonlock_density.empty())
        throw ThresholdError("extract_thresholds: no non-lock samples");
    if (lock_density.empty())
        throw ThresholdError("extract_thresholds: no lock-phase samples");

    double dmin = *std::min_element(nonlock_density.begin(), nonlock_density.end());
    double dmax = *std::max_element(nonlock_density.begin(), nonlock_density.end());
    if (!(dmax > dmin))
        throw ThresholdError("extract_thresholds: degenerate density support");

    // Derivative of the fitted polynomial.
    std::vector<double> dcoef;
    for (size_t j = 1; j < fit.coeffs.size(); ++j)
        dcoef.push_back(fit.coeffs[j] * static_cast<double>(j));
    auto deriv = [&](double x) {
        double acc = 0.0;
        for (size_t j = dcoef.size(); j-- > 0;) acc = acc * x + dcoef[j];
        return acc;
    };

    // Scan for interior sign changes + -> - of the derivative.
    constexpr int grid = 4000;
    std::vector<double> maxima;
    double prev_x = dmin;
    double prev_d = deriv(prev_x);
    for (int i = 1; i <= grid; ++i) {
        double x = dmin + (dmax - dmin) * i / grid;
        double d = deriv(x);
        if (prev_d > 0.0 && d <= 0.0) {
            double lo = prev_x, hi = x;
            for (int it = 0; it < 60; ++it) {
                double mid = 0.5 * (lo + hi);
                if (deriv(mid) > 0.0) lo = mid; else hi = mid;
            }
            maxima.push_back(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_d = d;
    }
    if (maxima.empty())
        throw ThresholdError(
            "extract_thresholds: fitted curve has no capacity peak in range; "
            "re-run the protocol with a higher peak flow");

    // First substantial peak: ignore low bumps under 30% of the tallest.
    double tallest = 0.0;
    for (double m : maxima) tallest = std::max(tallest, fit.eval(m));
    double rho_crit = maxima.front();
    for (double m : maxima) {
        if (fit.eval(m) >= 0.3 * tallest) {
            rho_crit = m;
            break;
        }
    }

    // Congested-branch mode: histogram of non-lock densities above rho_crit,
    // 0.1-wide bins anchored at rho_crit, ties to the lowest bin.
    constexpr double bin_w = 0.1;
    std::vector<int> hist;
    int congested = 0;
    for (double d : nonlock_density) {
        if (d <= rho_crit) continue;
        int b = static_cast<int>((d - rho_crit) / bin_w);
        if (b >= static_cast<int>(hist.size())) hist.resize(b + 1, 0);
        hist[b]++;
        congested++;
    }
    if (congested == 0)
        throw ThresholdError(
            "extract_thresholds: no congested-branch samples above rho_crit; "
            "re-run the protocol with a higher peak flow");
    int best_bin = 0;
    for (size_t b = 1; b < hist.size(); ++b)
        if (hist[b] > hist[best_bin]) best_bin = static_cast<int>(b);
    double rho_over = rho_crit + (best_bin + 0.5) * bin_w;

    double rho_lock = quantile(lock_density, 0.95);

    Thresholds thr{rho_crit, rho_over, rho_lock};
    if (!(thr.rho_crit < thr.rho_over && thr.rho_over < thr.rho_lock))
        throw ThresholdError("extract_thresholds: threshold ordering violated "
                             "(crit=" + std::to_string(thr.rho_crit) +
                             ", over=" + std::to_string(thr.rho_over) +
                             ", lock=" + std::to_string(thr.rho_lock) + ")");
    return thr;
}

double rho_sf(double rho_crit, double rho_over) {
    return 0.9 * rho_crit + 0.1 * rho_over;
}

ExitDynamics calibrate_exit(const Scenario& scn, int exit_id, double peak_flow,
                            uint64_t seed, const FDProtocolConfig& cfg,
                            const MotionParams& mp) {
    FDSampleSet samples = run_fd_protocol(scn, exit_id, peak_flow, seed, cfg, mp);

    std::vector<double> xs, ys;
    for (size_t i = 0; i < samples.size(); ++i) {
        if (!samples.lock_mask[i]) {
            xs.push_back(samples.density[i]);
            ys.push_back(samples.flow[i]);
        }
    }
    if (xs.size() < 50)
        throw ThresholdError("calibrate_exit: need at least 50 non-lock samples");
    PolyFit fit = fit_polynomial_robust(xs, ys, 6);
    Thresholds thr = extract_thresholds(fit, samples);

    ExitDynamics dyn;
    dyn.exit_id = exit_id;
    dyn.width = scn.exits[exit_id - 1].width;
    for (int j = 0; j < 7; ++j) dyn.poly_coeffs[j] = fit.coeffs[j];
    dyn.rho_crit = thr.rho_crit;
    dyn.rho_over = thr.rho_over;
    dyn.rho_lock = thr.rho_lock;
    dyn.rho_sf = rho_sf(thr.rho_crit, thr.rho_over);
    dyn.validate();
    return dyn;
}

std::vector<ExitDynamics> calibrate_all(const Scenario& scn, double peak_flow,
                                        uint64_t seed, int workers,
                                        const FDProtocolConfig& cfg,
                                        const MotionParams& mp) {
    int E = scn.n_exits();
    if (workers <= 0)
        workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, E);

    std::vector<ExitDynamics> out(E);
    std::vector<std::string> errors(E);
    std::atomic<int> next{0};
    auto work = [&]() {
        for (;;) {
            int e = next.fetch_add(1);
            if (e >= E) return;
            try {
                out[e] = calibrate_exit(scn, e + 1, peak_flow,
                                        derive_seed(seed, "fd-exit-" + std::to_string(e + 1)),
                                        cfg, mp);
            } catch (const std::exception& ex) {
                errors[e] = ex.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    for (const std::string& err : errors)
        if (!err.empty()) throw ThresholdError(err);
    return out;
}

std::string serialize_calibration(const std::vector<ExitDynamics>& dyn,
                                  const std::string& scenario_name) {
    json j;
    j["scenario"] = scenario_name;
    j["exits"] = json::array();
    for (const ExitDynamics& d : dyn) {
        json je;
        je["id"] = d.exit_id;
        je["width"] = d.width;
        je["poly"] = d.poly_coeffs;
        je["rho_crit"] = d.rho_crit;
        je["rho_over"] = d.rho_over;
        je["rho_lock"] = d.rho_lock;
        je["rho_sf"] = d.rho_sf;
        j["exits"].push_back(je);
    }
    return j.dump(2);
}

std::vector<ExitDynamics> parse_calibration(const std::string& text) {
    json j = json::parse(text);
    std::vector<ExitDynamics> out;
    for (const auto& je : j.at("exits")) {
        ExitDynamics d;
        d.exit_id = je.at("id").get<int>();
        d.width = je.at("width").get<double>();
        auto poly = je.at("poly");
        for (int k = 0; k < 7; ++k) d.poly_coeffs[k] = poly.at(k).get<double>();
        d.rho_crit = je.at("rho_crit").get<double>();
        d.rho_over = je.at("rho_over").get<double>();
        d.rho_lock = je.at("rho_lock").get<double>();
        d.rho_sf = je.at("rho_sf").get<double>();
        d.validate();
        out.push_back(d);
    }
    std::sort(out.begin(), out.end(),
              [](const ExitDynamics& a, const ExitDynamics& b) { return a.exit_id < b.exit_id; });
    return out;
}

void save_calibration(const std::vector<ExitDynamics>& dyn,
                      const std::string& scenario_name, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write calibration file: " + path);
    out << serialize_calibration(dyn, scenario_name);
}

std::vector<ExitDynamics> load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open calibration file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_calibration(ss.str());
}

} // namespace cellevac
