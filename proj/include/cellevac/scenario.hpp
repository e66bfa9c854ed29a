#pragma once

#include "cellevac/geom.hpp"
#include "cellevac/rng.hpp"

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellevac {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExitGate {
    int id = 0; // 1-based, contiguous
    double width = 0.0;
    Segment gate_segment;
    std::optional<Vec2> entry_point;
    bool blocked = false;
};

struct Cell {
    int id = 0; // 1-based, contiguous
    Vec2 center;
    std::array<Vec2, 6> vertices;
};

// External-flow / blocked-gate schedule for a run.
struct ExternalFlowSpec {
    double rate_peds_per_min = 0.0;
    int n_inflow = 0;
    int n_blocked = 0;
    bool random_selection = true;      // else use the fixed id lists below
    std::vector<int> inflow_exits;
    std::vector<int> blocked_exits;
    double duration_s = 300.0;         // injection window from t = 0
};

struct Scenario {
    std::string name;
    Polygon boundary;
    std::vector<ExitGate> exits;
    std::vector<Cell> cells;
    double cell_width = 6.0;           // flat-to-flat
    int initial_population = 0;
    double speed_min = 1.24;
    double speed_max = 1.48;
    uint64_t default_seed = 1;
    ExternalFlowSpec flows;
    double sim_time_cap_s = 900.0;

    // Derived at load time.
    std::vector<Segment> walls;                    // boundary minus gate openings
    std::vector<std::vector<int>> measurement_cells; // per exit: up to 4 closest cell ids
    std::vector<double> measurement_area;          // per exit, m^2
    double cell_area = 0.0;                        // single hexagon area

    int n_exits() const { return static_cast<int>(exits.size()); }
    int n_cells() const { return static_cast<int>(cells.size()); }
};

struct DistanceTable {
    std::vector<std::vector<double>> cell_to_exit; // [cell-1][exit-1], meters
    double max_distance = 0.0;
    // Per exit: cell ids sorted by ascending distance, and for each cell the
    // number of cells strictly closer to that exit.
    std::vector<std::vector<int>> cells_by_distance;
    std::vector<std::vector<int>> strictly_closer_count; // [exit-1][cell-1]

    double distance(int cell_id, int exit_id) const {
        return cell_to_exit[cell_id - 1][exit_id - 1];
    }
};

struct PedestrianState {
    int id = 0;
    Vec2 position;
    Vec2 velocity;
    double preferred_speed = 0.0;
    int target_exit = 0;          // 0 = not yet decided
    bool compliant = false;
    int decision_changes = 0;
    std::optional<double> evacuated_at;
    int system_exit = 0;          // last broadcast indication, 0 = none
};

Scenario load_scenario(const std::string& config_path);
Scenario load_scenario_from_string(const std::string& json_text,
                                   const std::string& origin = "<string>");

// Regular hexagon (pointy-top) with the given flat-to-flat width.
std::array<Vec2, 6> hexagon_vertices(Vec2 center, double width);
double hexagon_area(double width);

// All hexagons of the grid over the boundary's bounding box whose vertices
// lie inside the polygon. Deterministic row-major ordering.
std::vector<Cell> generate_cell_grid(const Polygon& boundary, double cell_width);

DistanceTable build_distance_table(const Scenario& scn);

// Containing cell of an interior point: nearest cell center, ties broken by
// lowest id. Coincides with hexagon containment wherever a cell exists.
int locate_cell(Vec2 position, const Scenario& scn);

std::vector<PedestrianState> spawn_population(const Scenario& scn, uint64_t seed);

// Distance from a point to the nearest point of an exit's gate segment.
inline double distance_to_exit(Vec2 p, const ExitGate& exit) {
    return point_segment_distance(p, exit.gate_segment);
}

} // namespace cellevac
