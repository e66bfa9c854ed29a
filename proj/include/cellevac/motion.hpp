#pragma once

#include "cellevac/scenario.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellevac {

struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Classical social-force parameterization (circular specification).
struct MotionParams {
    double dt = 0.05;              // s
    double tau = 0.5;              // relaxation time, s
    double body_radius = 0.25;     // m
    double mass = 80.0;            // kg
    double repulsion_strength = 2000.0; // N
    double repulsion_range = 0.08;      // m
    double body_force = 1.2e5;     // kg/s^2
    double sliding_friction = 2.4e5; // kg/(m s)
    double speed_cap_factor = 1.3;
    double neighbor_cutoff = 2.0;  // m, spatial-hash interaction cutoff
    double blocked_band_depth = 3.0;   // m in front of a blocked gate
    double blocked_speed_factor = 0.01;
    // Crowding slows the desired walking speed (Kladek/Weidmann exponential
    // speed-density relation); this gives gates a finite service rate.
    double density_speed_radius = 1.0; // m
    double jam_density = 3.0;          // peds/m^2, in boundary-truncated counted-density scale
    double weidmann_gamma = 1.913;     // peds/m^2
    double min_speed_factor = 0.05;
};

struct DensitySample {
    double time = 0.0;
    int exit_id = 0;
    double density = 0.0; // peds/m^2 over the exit's measurement area
    double flow = 0.0;    // peds/s through the gate segment
};

// Static acceleration structure over walls and gates, built per scenario.
class WallIndex {
public:
    WallIndex() = default;
    WallIndex(const Scenario& scn, double query_range);

    // Indices into scenario.walls near p (conservative superset).
    const std::vector<int>& walls_near(Vec2 p) const;

private:
    double minx_ = 0.0, miny_ = 0.0, cell_ = 1.0;
    int nx_ = 0, ny_ = 0;
    std::vector<std::vector<int>> buckets_;
    std::vector<int> empty_;
};

struct SimState {
    double clock = 0.0;
    int64_t step = 0;
    std::vector<PedestrianState> peds; // all pedestrians ever; index == id
    std::vector<int> active;           // ascending ids of non-evacuated peds
    std::vector<int64_t> evac_count;   // per exit (cumulative crossings)
    std::vector<uint8_t> exit_blocked; // per exit
    std::vector<int64_t> inject_backlog; // per exit, deferred arrivals
    int64_t spawned = 0;
    int64_t injected = 0;

    // Last-measure bookkeeping for flow computation.
    std::vector<int64_t> last_measure_counts;
    double last_measure_time = 0.0;

    int64_t evacuated_total() const;
    int active_count() const { return static_cast<int>(active.size()); }
};

SimState make_sim_state(const Scenario& scn, std::vector<PedestrianState> initial);

// One fixed-step semi-implicit Euler update of every active pedestrian.
// Throws SimError on numeric divergence.
void sfm_step(SimState& state, const Scenario& scn, const WallIndex& walls,
              const MotionParams& params);

// Poisson arrivals at `rate` per second placed near `pos` (jittered, with a
// deferral backlog when no free spot exists). Returns ids of created peds,
// which carry a provisional nearest-exit target.
std::vector<int> inject_at(SimState& state, const Scenario& scn, Vec2 pos,
                           double rate_per_s, double dt, Rng& rng,
                           const MotionParams& params, int64_t& backlog);

// External flow at an exit's entry point, rate in peds/min.
std::vector<int> inject_external_flow(SimState& state, const Scenario& scn,
                                      int exit_id, double rate_peds_per_min,
                                      double dt, Rng& rng,
                                      const MotionParams& params);

void block_exit(SimState& state, int exit_id);
void unblock_exit(SimState& state, int exit_id);

// Density/flow snapshot over each exit's measurement area. `interval` is the
// elapsed time since the previous call (the 2 s sampling grid).
std::vector<DensitySample> measure(SimState& state, const Scenario& scn,
                                   double interval);

// Occupancy of every cell (index = cell id - 1) from active pedestrians.
std::vector<int> cell_occupancy(const SimState& state, const Scenario& scn);

// Instantaneous density at one exit from an occupancy vector.
double exit_density_from_occupancy(const std::vector<int>& occupancy,
                                   const Scenario& scn, int exit_id);

// spawned + injected == evacuated + active.
bool conservation_holds(const SimState& state);

} // namespace cellevac
