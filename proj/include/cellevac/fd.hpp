#pragma once

#include "cellevac/motion.hpp"
#include "cellevac/polyfit.hpp"
#include "cellevac/scenario.hpp"

#include <array>
#include <string>
#include <vector>

namespace cellevac {

struct ThresholdError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FDSampleSet {
    int exit_id = 0;
    double cadence_s = 2.0;
    std::vector<double> time;
    std::vector<double> density;
    std::vector<double> flow;
    std::vector<uint8_t> lock_mask;

    size_t size() const { return density.size(); }
};

struct ExitDynamics {
    int exit_id = 0;
    double width = 0.0;
    std::array<double, 7> poly_coeffs{}; // ascending powers
    double rho_crit = 0.0;
    double rho_over = 0.0;
    double rho_lock = 0.0;
    double rho_sf = 0.0;

    void validate() const; // threshold ordering
};

struct FDProtocolConfig {
    double horizon_s = 3600.0;
    double lock_at_s = 3000.0;
    int cycles = 4;               // triangular ramp cycles over the horizon
    double sample_period_s = 2.0;
};

// Triangular per-stream injection rate (peds/s) at time t for one of the
// four streams; `peak_flow` is the combined peak across streams.
double fd_injection_rate(double t, double peak_flow, const FDProtocolConfig& cfg);

// Default combined peak flow for a gate: comfortably above the capacity the
// motion model sustains per meter of gate width, so the protocol reaches
// capacity breakdown and the congested branch.
double default_peak_flow(double gate_width);

// Runs the gate-loading protocol: four ramped streams injected at the four
// closest cell centers, gate locked at `lock_at_s`, sampled every 2 s.
FDSampleSet run_fd_protocol(const Scenario& scn, int exit_id, double peak_flow,
                            uint64_t seed, const FDProtocolConfig& cfg = {},
                            const MotionParams& mp = {});

struct Thresholds {
    double rho_crit = 0.0;
    double rho_over = 0.0;
    double rho_lock = 0.0;
};

// rho_crit: first substantial local maximum of the fitted curve;
// rho_over: histogram mode (0.1 bins) of congested non-lock samples;
// rho_lock: 95th percentile of lock-phase densities.
Thresholds extract_thresholds(const PolyFit& fit, const FDSampleSet& samples);

double rho_sf(double rho_crit, double rho_over);

// Full per-exit calibration: protocol, robust degree-6 fit on non-lock
// samples, threshold extraction.
ExitDynamics calibrate_exit(const Scenario& scn, int exit_id, double peak_flow,
                            uint64_t seed, const FDProtocolConfig& cfg = {},
                            const MotionParams& mp = {});

std::vector<ExitDynamics> calibrate_all(const Scenario& scn, double peak_flow,
                                        uint64_t seed, int workers = 0,
                                        const FDProtocolConfig& cfg = {},
                                        const MotionParams& mp = {});

std::string serialize_calibration(const std::vector<ExitDynamics>& dyn,
                                  const std::string& scenario_name);
std::vector<ExitDynamics> parse_calibration(const std::string& json_text);
void save_calibration(const std::vector<ExitDynamics>& dyn,
                      const std::string& scenario_name, const std::string& path);
std::vector<ExitDynamics> load_calibration(const std::string& path);

} // namespace cellevac
