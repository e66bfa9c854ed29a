#include "cellevac/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace cellevac {

using nlohmann::json;

std::array<Vec2, 6> hexagon_vertices(Vec2 center, double width) {
    double circumradius = width / std::sqrt(3.0);
    std::array<Vec2, 6> vs;
    for (int k = 0; k < 6; ++k) {
        double ang = (30.0 + 60.0 * k) * M_PI / 180.0;
        vs[k] = {center.x + circumradius * std::cos(ang),
                 center.y + circumradius * std::sin(ang)};
    }
    return vs;
}

double hexagon_area(double width) {
    return std::sqrt(3.0) / 2.0 * width * width;
}

std::vector<Cell> generate_cell_grid(const Polygon& boundary, double cell_width) {
    double minx = boundary[0].x, maxx = boundary[0].x;
    double miny = boundary[0].y, maxy = boundary[0].y;
    for (const Vec2& v : boundary) {
        minx = std::min(minx, v.x);
        maxx = std::max(maxx, v.x);
        miny = std::min(miny, v.y);
        maxy = std::max(maxy, v.y);
    }
    double circumradius = cell_width / std::sqrt(3.0);
    double row_step = 1.5 * circumradius;
    constexpr double inset = 0.01; // keeps lattice vertices off the outline

    std::vector<Cell> cells;
    int id = 1;
    for (int row = 0;; ++row) {
        double cy = miny + circumradius + inset + row * row_step;
        if (cy - circumradius > maxy) break;
        double offset = (row % 2 == 1) ? cell_width / 2.0 : 0.0;
        for (int col = 0;; ++col) {
            double cx = minx + cell_width / 2.0 + inset + offset + col * cell_width;
            if (cx - cell_width / 2.0 > maxx) break;
            Vec2 center{cx, cy};
            auto verts = hexagon_vertices(center, cell_width);
            bool keep = point_in_polygon(center, boundary);
            for (const Vec2& v : verts) keep = keep && point_in_polygon(v, boundary);
            if (keep) {
                Cell c;
                c.id = id++;
                c.center = center;
                c.vertices = verts;
                cells.push_back(c);
            }
        }
    }
    return cells;
}

namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
    throw ConfigError(origin + ": " + what);
}

Vec2 parse_point(const json& j, const std::string& origin, const std::string& field) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        fail(origin, field + ": expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

int line_of_byte(const std::string& text, size_t byte) {
    int line = 1;
    for (size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

// Wall segments: boundary edges with gate openings cut out.
std::vector<Segment> build_walls(const Scenario& scn, const std::string& origin) {
    constexpr double tol = 1e-6;
    size_t n = scn.boundary.size();
    std::vector<std::vector<std::pair<double, double>>> openings(n);

    for (const ExitGate& gate : scn.exits) {
        bool placed = false;
        for (size_t i = 0; i < n && !placed; ++i) {
            Segment edge{scn.boundary[i], scn.boundary[(i + 1) % n]};
            if (point_segment_distance(gate.gate_segment.a, edge) > tol) continue;
            if (point_segment_distance(gate.gate_segment.b, edge) > tol) continue;
            Vec2 d = edge.b - edge.a;
            double len2 = d.norm2();
            double t0 = (gate.gate_segment.a - edge.a).dot(d) / len2;
            double t1 = (gate.gate_segment.b - edge.a).dot(d) / len2;
            if (t0 > t1) std::swap(t0, t1);
            openings[i].emplace_back(t0, t1);
            placed = true;
        }
        if (!placed)
            fail(origin, "exit " + std::to_string(gate.id) +
                             ": gate_segment does not lie on the facility boundary");
    }

    std::vector<Segment> walls;
    for (size_t i = 0; i < n; ++i) {
        Segment edge{scn.boundary[i], scn.boundary[(i + 1) % n]};
        auto& ivs = openings[i];
        std::sort(ivs.begin(), ivs.end());
        double cursor = 0.0;
        Vec2 d = edge.b - edge.a;
        for (auto [t0, t1] : ivs) {
            t0 = std::clamp(t0, 0.0, 1.0);
            t1 = std::clamp(t1, 0.0, 1.0);
            if (t0 - cursor > 1e-9)
                walls.push_back({edge.a + d * cursor, edge.a + d * t0});
            cursor = std::max(cursor, t1);
        }
        if (1.0 - cursor > 1e-9)
            walls.push_back({edge.a + d * cursor, edge.a + d * 1.0});
    }
    return walls;
}

void finalize(Scenario& scn, const std::string& origin) {
    if (scn.boundary.size() < 3) fail(origin, "boundary: need at least 3 vertices");
    if (polygon_area(scn.boundary) <= 0.0) fail(origin, "boundary: degenerate polygon");
    if (polygon_signed_area(scn.boundary) < 0.0)
        std::reverse(scn.boundary.begin(), scn.boundary.end());

    if (scn.exits.empty()) fail(origin, "exits: at least one exit required");
    std::vector<int> ids;
    for (const ExitGate& e : scn.exits) ids.push_back(e.id);
    std::sort(ids.begin(), ids.end());
    for (size_t i = 0; i < ids.size(); ++i)
        if (ids[i] != static_cast<int>(i) + 1)
            fail(origin, "exits: ids must be unique and contiguous from 1");
    std::sort(scn.exits.begin(), scn.exits.end(),
              [](const ExitGate& a, const ExitGate& b) { return a.id < b.id; });

    for (const ExitGate& e : scn.exits) {
        if (!(e.width > 0.0))
            fail(origin, "exit " + std::to_string(e.id) + ": width must be > 0");
        if (e.gate_segment.length() < 1e-9)
            fail(origin, "exit " + std::to_string(e.id) + ": zero-length gate segment");
        if (e.entry_point && !point_in_polygon(*e.entry_point, scn.boundary))
            fail(origin, "exit " + std::to_string(e.id) + ": entry_point outside boundary");
    }

    if (!(scn.cell_width > 0.0)) fail(origin, "cell_width must be > 0");
    if (scn.cells.empty()) fail(origin, "cells: grid generation produced no cells");
    for (size_t i = 0; i < scn.cells.size(); ++i)
        if (scn.cells[i].id != static_cast<int>(i) + 1)
            fail(origin, "cells: ids must be contiguous from 1");

    if (scn.initial_population < 0) fail(origin, "population.count must be >= 0");
    if (!(scn.speed_min < scn.speed_max))
        fail(origin, "population: speed_min must be < speed_max");
    if (!(scn.speed_min > 0.0)) fail(origin, "population: speeds must be positive");
    if (!(scn.sim_time_cap_s > 0.0)) fail(origin, "limits.sim_time_cap_s must be > 0");

    const ExternalFlowSpec& f = scn.flows;
    if (f.rate_peds_per_min < 0.0) fail(origin, "external_flows.rate_peds_per_min must be >= 0");
    if (f.n_inflow < 0 || f.n_blocked < 0)
        fail(origin, "external_flows: counts must be >= 0");
    int with_entry = 0;
    for (const ExitGate& e : scn.exits) with_entry += e.entry_point.has_value();
    if (f.n_inflow > with_entry)
        fail(origin, "external_flows.n_inflow exceeds exits with entry points");
    if (f.n_inflow + f.n_blocked > scn.n_exits())
        fail(origin, "external_flows: n_inflow + n_blocked exceeds exit count");
    for (int id : f.inflow_exits) {
        if (id < 1 || id > scn.n_exits()) fail(origin, "external_flows.inflow_exits: bad exit id");
        if (!scn.exits[id - 1].entry_point)
            fail(origin, "external_flows: inflow exit " + std::to_string(id) + " has no entry point");
    }
    for (int id : f.blocked_exits)
        if (id < 1 || id > scn.n_exits()) fail(origin, "external_flows.blocked_exits: bad exit id");
    if (!f.random_selection) {
        if (static_cast<int>(f.inflow_exits.size()) != f.n_inflow ||
            static_cast<int>(f.blocked_exits.size()) != f.n_blocked)
            fail(origin, "external_flows: fixed selection must list n_inflow/n_blocked ids");
    }

    scn.cell_area = hexagon_area(scn.cell_width);
    scn.walls = build_walls(scn, origin);

    scn.measurement_cells.assign(scn.exits.size(), {});
    scn.measurement_area.assign(scn.exits.size(), 0.0);
    for (size_t e = 0; e < scn.exits.size(); ++e) {
        std::vector<std::pair<double, int>> order;
        for (const Cell& c : scn.cells)
            order.emplace_back(distance_to_exit(c.center, scn.exits[e]), c.id);
        std::sort(order.begin(), order.end());
        size_t take = std::min<size_t>(4, order.size());
        for (size_t k = 0; k < take; ++k)
            scn.measurement_cells[e].push_back(order[k].second);
        scn.measurement_area[e] = static_cast<double>(take) * scn.cell_area;
    }
}

} // namespace

Scenario load_scenario_from_string(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        fail(origin, "parse error at line " + std::to_string(line_of_byte(text, e.byte)) +
                         ": " + e.what());
    }

    Scenario scn;
    scn.name = j.value("name", "unnamed");

    if (!j.contains("boundary")) fail(origin, "missing section: boundary");
    for (const auto& v : j["boundary"])
        scn.boundary.push_back(parse_point(v, origin, "boundary vertex"));

    if (!j.contains("exits")) fail(origin, "missing section: exits");
    for (const auto& je : j["exits"]) {
        ExitGate g;
        if (!je.contains("id")) fail(origin, "exit missing id");
        g.id = je["id"].get<int>();
        g.width = je.value("width", 0.0);
        if (!je.contains("segment") || je["segment"].size() != 2)
            fail(origin, "exit " + std::to_string(g.id) + ": segment must be [[x,y],[x,y]]");
        g.gate_segment.a = parse_point(je["segment"][0], origin, "exit segment");
        g.gate_segment.b = parse_point(je["segment"][1], origin, "exit segment");
        if (je.contains("entry_point") && !je["entry_point"].is_null())
            g.entry_point = parse_point(je["entry_point"], origin, "entry_point");
        g.blocked = je.value("blocked", false);
        scn.exits.push_back(g);
    }

    scn.cell_width = j.value("cell_width", 6.0);
    if (j.contains("cells") && j["cells"].is_array()) {
        int id = 1;
        for (const auto& jc : j["cells"]) {
            Cell c;
            c.id = id++;
            c.center = parse_point(jc, origin, "cell center");
            c.vertices = hexagon_vertices(c.center, scn.cell_width);
            scn.cells.push_back(c);
        }
    } else {
        scn.cells = generate_cell_grid(scn.boundary, scn.cell_width);
    }

    if (j.contains("population")) {
        const auto& jp = j["population"];
        scn.initial_population = jp.value("count", 0);
        scn.speed_min = jp.value("speed_min", 1.24);
        scn.speed_max = jp.value("speed_max", 1.48);
        scn.default_seed = jp.value("seed", uint64_t{1});
    }

    if (j.contains("external_flows")) {
        const auto& jf = j["external_flows"];
        ExternalFlowSpec f;
        f.rate_peds_per_min = jf.value("rate_peds_per_min", 0.0);
        f.n_inflow = jf.value("n_inflow", 0);
        f.n_blocked = jf.value("n_blocked", 0);
        f.random_selection = jf.value("selection", std::string("random")) == "random";
        if (jf.contains("inflow_exits"))
            for (const auto& v : jf["inflow_exits"]) f.inflow_exits.push_back(v.get<int>());
        if (jf.contains("blocked_exits"))
            for (const auto& v : jf["blocked_exits"]) f.blocked_exits.push_back(v.get<int>());
        f.duration_s = jf.value("duration_s", 300.0);
        scn.flows = f;
    }

    if (j.contains("limits"))
        scn.sim_time_cap_s = j["limits"].value("sim_time_cap_s", 900.0);

    finalize(scn, origin);
    return scn;
}

Scenario load_scenario(const std::string& config_path) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError(config_path + ": cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scenario_from_string(ss.str(), config_path);
}

DistanceTable build_distance_table(const Scenario& scn) {
    DistanceTable table;
    int C = scn.n_cells();
    int E = scn.n_exits();
    table.cell_to_exit.assign(C, std::vector<double>(E, 0.0));
    for (int c = 0; c < C; ++c)
        for (int e = 0; e < E; ++e)
            table.cell_to_exit[c][e] =
                distance_to_exit(scn.cells[c].center, scn.exits[e]);

    table.max_distance = 0.0;
    for (const auto& row : table.cell_to_exit)
        for (double d : row) table.max_distance = std::max(table.max_distance, d);

    table.cells_by_distance.assign(E, {});
    table.strictly_closer_count.assign(E, std::vector<int>(C, 0));
    for (int e = 0; e < E; ++e) {
        std::vector<int> order(C);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            double da = table.cell_to_exit[a][e], db = table.cell_to_exit[b][e];
            if (da != db) return da < db;
            return a < b;
        });
        for (int c0 : order) table.cells_by_distance[e].push_back(c0 + 1);
        // Rank with ties: cells at equal distance are not "strictly closer".
        int k = 0;
        while (k < C) {
            int k2 = k;
            double d = table.cell_to_exit[order[k]][e];
            while (k2 < C && table.cell_to_exit[order[k2]][e] == d) ++k2;
            for (int i = k; i < k2; ++i) table.strictly_closer_count[e][order[i]] = k;
            k = k2;
        }
    }
    return table;
}

int locate_cell(Vec2 position, const Scenario& scn) {
    if (!point_in_polygon(position, scn.boundary))
        throw std::domain_error("locate_cell: position outside facility boundary");
    // Ascending-id iteration plus a strict-improvement test breaks distance
    // ties in favor of the lowest cell id.
    constexpr double tol = 1e-9; // m^2; centers are meters apart
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (const Cell& c : scn.cells) {
        double d2 = (position - c.center).norm2();
        if (d2 < best_d2 - tol) {
            best_d2 = d2;
            best = c.id;
        }
    }
    return best;
}

std::vector<PedestrianState> spawn_population(const Scenario& scn, uint64_t seed) {
    constexpr double separation = 0.5;   // one body diameter
    constexpr double wall_margin = 0.3;

    Rng rng = derive_stream(seed, "spawn");
    double minx = scn.boundary[0].x, maxx = scn.boundary[0].x;
    double miny = scn.boundary[0].y, maxy = scn.boundary[0].y;
    for (const Vec2& v : scn.boundary) {
        minx = std::min(minx, v.x);
        maxx = std::max(maxx, v.x);
        miny = std::min(miny, v.y);
        maxy = std::max(maxy, v.y);
    }

    // Occupancy hash at the separation scale for O(1) conflict checks.
    double cell = separation;
    int nx = std::max(1, static_cast<int>((maxx - minx) / cell) + 1);
    int ny = std::max(1, static_cast<int>((maxy - miny) / cell) + 1);
    std::vector<std::vector<int>> grid(static_cast<size_t>(nx) * ny);
    auto bucket = [&](Vec2 p) {
        int ix = std::clamp(static_cast<int>((p.x - minx) / cell), 0, nx - 1);
        int iy = std::clamp(static_cast<int>((p.y - miny) / cell), 0, ny - 1);
        return iy * nx + ix;
    };

    std::vector<PedestrianState> peds;
    peds.reserve(scn.initial_population);
    long attempts = 0;
    const long max_attempts = 2000L * std::max(1, scn.initial_population);
    while (static_cast<int>(peds.size()) < scn.initial_population) {
        if (++attempts > max_attempts)
            throw std::runtime_error(
                "spawn_population: placement failure, population exceeds packing capacity");
        Vec2 p{rng.uniform(minx, maxx), rng.uniform(miny, maxy)};
        if (!point_in_polygon(p, scn.boundary)) continue;
        if (distance_to_polygon_outline(p, scn.boundary) < wall_margin) continue;

        int ix = std::clamp(static_cast<int>((p.x - minx) / cell), 0, nx - 1);
        int iy = std::clamp(static_cast<int>((p.y - miny) / cell), 0, ny - 1);
        bool conflict = false;
        for (int dy = -1; dy <= 1 && !conflict; ++dy)
            for (int dx = -1; dx <= 1 && !conflict; ++dx) {
                int jx = ix + dx, jy = iy + dy;
                if (jx < 0 || jx >= nx || jy < 0 || jy >= ny) continue;
                for (int idx : grid[static_cast<size_t>(jy) * nx + jx])
                    if ((p - peds[idx].position).norm() < separation) {
                        conflict = true;
                        break;
                    }
            }
        if (conflict) continue;

        PedestrianState ped;
        ped.id = static_cast<int>(peds.size());
        ped.position = p;
        ped.preferred_speed = rng.uniform(scn.speed_min, scn.speed_max);
        grid[bucket(p)].push_back(ped.id);
        peds.push_back(ped);
    }
    return peds;
}

} // namespace cellevac
