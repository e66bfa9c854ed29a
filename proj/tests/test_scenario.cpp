#include "cellevac/scenario.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace cellevac;

TEST_CASE("bundled arena config loads with 8 exits and 42 cells") {
    Scenario scn = load_scenario(testutil::data_path("madrid_arena.json"));
    CHECK(scn.n_exits() == 8);
    CHECK(scn.n_cells() == 42);
    CHECK(scn.initial_population == 3400);
    CHECK(scn.exits[7].width == doctest::Approx(6.0));
    int with_entry = 0;
    for (const ExitGate& e : scn.exits) with_entry += e.entry_point.has_value();
    CHECK(with_entry == 5);
}

TEST_CASE("bundled desk config loads with 4 exits and 16 cells") {
    Scenario scn = load_scenario(testutil::data_path("desk.json"));
    CHECK(scn.n_exits() == 4);
    CHECK(scn.n_cells() == 16);
    CHECK(scn.initial_population == 300);
}

TEST_CASE("invalid configs are rejected with the violated invariant") {
    CHECK_THROWS_WITH_AS(
        load_scenario_from_string(R"({
          "boundary": [[0,0],[16,0],[16,16],[0,16]],
          "exits": [{"id":1,"width":0.0,"segment":[[16,7],[16,9]]}]
        })", "bad"),
        doctest::Contains("width must be > 0"), ConfigError);

    CHECK_THROWS_AS(load_scenario_from_string("{ not json", "bad"), ConfigError);

    // Gate not on the boundary.
    CHECK_THROWS_WITH_AS(
        load_scenario_from_string(R"({
          "boundary": [[0,0],[16,0],[16,16],[0,16]],
          "exits": [{"id":1,"width":2.0,"segment":[[8,8],[9,8]]}]
        })", "bad"),
        doctest::Contains("does not lie on the facility boundary"), ConfigError);

    // Non-contiguous exit ids.
    CHECK_THROWS_WITH_AS(
        load_scenario_from_string(R"({
          "boundary": [[0,0],[16,0],[16,16],[0,16]],
          "exits": [{"id":1,"width":2.0,"segment":[[16,7],[16,9]]},
                    {"id":3,"width":2.0,"segment":[[0,7],[0,9]]}]
        })", "bad"),
        doctest::Contains("unique and contiguous"), ConfigError);
}

TEST_CASE("degenerate one-exit one-cell zero-population scenario is valid") {
    Scenario scn = load_scenario_from_string(R"({
      "boundary": [[0,0],[16,0],[16,16],[0,16]],
      "cell_width": 6.0,
      "cells": [[8,8]],
      "exits": [{"id":1,"width":2.0,"segment":[[16,7],[16,9]]}],
      "population": {"count": 0}
    })", "degenerate");
    CHECK(scn.n_cells() == 1);
    CHECK(scn.n_exits() == 1);
    CHECK(scn.initial_population == 0);
}

TEST_CASE("distance table matches a brute-force oracle") {
    Scenario scn = load_scenario(testutil::data_path("madrid_arena.json"));
    DistanceTable table = build_distance_table(scn);
    REQUIRE(table.cell_to_exit.size() == 42);
    REQUIRE(table.cell_to_exit[0].size() == 8);

    // Independent point-to-segment distance computation.
    auto oracle = [](Vec2 p, Vec2 a, Vec2 b) {
        double vx = b.x - a.x, vy = b.y - a.y;
        double len2 = vx * vx + vy * vy;
        double t = ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2;
        t = std::max(0.0, std::min(1.0, t));
        double cx = a.x + t * vx, cy = a.y + t * vy;
        return std::hypot(p.x - cx, p.y - cy);
    };
    double max_seen = 0.0;
    int positive = 0;
    for (const Cell& c : scn.cells) {
        for (const ExitGate& e : scn.exits) {
            double expect = oracle(c.center, e.gate_segment.a, e.gate_segment.b);
            CHECK(table.distance(c.id, e.id) == doctest::Approx(expect).epsilon(1e-12));
            max_seen = std::max(max_seen, expect);
            if (expect > 0.0) positive++;
        }
    }
    CHECK(table.max_distance == doctest::Approx(max_seen));
    CHECK(positive == 42 * 8); // cell centers never sit on a gate
}

TEST_CASE("distance table forced geometries") {
    // Cell center placed exactly on the gate midpoint -> distance 0.
    Scenario scn = load_scenario_from_string(R"({
      "boundary": [[0,0],[16,0],[16,16],[0,16]],
      "cells": [[16,8],[1,8]],
      "exits": [{"id":1,"width":2.0,"segment":[[16,7],[16,9]]}]
    })", "forced");
    DistanceTable t = build_distance_table(scn);
    CHECK(t.distance(1, 1) == doctest::Approx(0.0));
    CHECK(t.distance(2, 1) == doctest::Approx(15.0));
    CHECK(t.max_distance == doctest::Approx(15.0));
}

TEST_CASE("distance satisfies the triangle inequality through waypoints") {
    Scenario scn = testutil::square_scenario();
    DistanceTable table = build_distance_table(scn);
    Rng rng(77);
    for (int trial = 0; trial < 2000; ++trial) {
        const Cell& c = scn.cells[rng.below(scn.cells.size())];
        const ExitGate& e = scn.exits[rng.below(scn.exits.size())];
        Vec2 p{rng.uniform(0.0, 16.0), rng.uniform(0.0, 16.0)};
        double via = (c.center - p).norm() + distance_to_exit(p, e);
        CHECK(table.distance(c.id, e.id) <= via + 1e-9);
    }
}

TEST_CASE("locate_cell agrees with hexagon containment oracle") {
    Scenario scn = load_scenario(testutil::data_path("desk.json"));
    Rng rng(123);
    int checked = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        Vec2 p{rng.uniform(0.0, 31.25), rng.uniform(0.0, 24.0)};
        if (!point_in_polygon(p, scn.boundary)) continue;
        int got = locate_cell(p, scn);
        CHECK(got >= 1);
        CHECK(got <= scn.n_cells());
        // Brute-force containment over hexagon polygons.
        int containing = 0;
        for (const Cell& c : scn.cells) {
            Polygon hex(c.vertices.begin(), c.vertices.end());
            if (point_in_polygon(p, hex)) {
                containing = c.id;
                break; // ascending id order; first hit is the lowest id
            }
        }
        if (containing != 0) {
            CHECK(got == containing);
            checked++;
        }
    }
    CHECK(checked > 5000); // most of the area is covered by cells

    CHECK_THROWS_AS(locate_cell({-5.0, -5.0}, scn), std::domain_error);
}

TEST_CASE("locate_cell resolves shared-edge ties to the lower id") {
    Scenario scn = testutil::square_scenario();
    REQUIRE(scn.n_cells() >= 2);
    // Equidistant point between the first two cell centers.
    Vec2 mid = (scn.cells[0].center + scn.cells[1].center) * 0.5;
    if (point_in_polygon(mid, scn.boundary)) {
        CHECK(locate_cell(mid, scn) == scn.cells[0].id);
    }
    // Cell centers locate to themselves.
    for (const Cell& c : scn.cells) CHECK(locate_cell(c.center, scn) == c.id);
}

TEST_CASE("spawn_population is deterministic and respects separation") {
    Scenario scn = load_scenario(testutil::data_path("desk.json"));
    auto a = spawn_population(scn, 42);
    auto b = spawn_population(scn, 42);
    REQUIRE(a.size() == 300);
    REQUIRE(b.size() == 300);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].position.x == b[i].position.x);
        CHECK(a[i].position.y == b[i].position.y);
        CHECK(a[i].preferred_speed == b[i].preferred_speed);
    }
    auto c = spawn_population(scn, 43);
    bool any_diff = false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].position.x != c[i].position.x) any_diff = true;
    CHECK(any_diff);

    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(point_in_polygon(a[i].position, scn.boundary));
        CHECK(a[i].preferred_speed >= 1.24);
        CHECK(a[i].preferred_speed <= 1.48);
        for (size_t j = i + 1; j < a.size(); ++j)
            CHECK((a[i].position - a[j].position).norm() >= 0.5);
    }
}

TEST_CASE("full population speed sample matches the uniform mean") {
    Scenario scn = load_scenario(testutil::data_path("madrid_arena.json"));
    auto peds = spawn_population(scn, 7);
    REQUIRE(peds.size() == 3400);
    double acc = 0.0;
    for (const auto& p : peds) acc += p.preferred_speed;
    double mean_speed = acc / 3400.0;
    CHECK(mean_speed == doctest::Approx(1.36).epsilon(0.01 / 1.36));
}

TEST_CASE("spawn fails cleanly when the population cannot pack") {
    Scenario scn = load_scenario_from_string(R"({
      "boundary": [[0,0],[8,0],[8,8],[0,8]],
      "cells": [[4,4]],
      "exits": [{"id":1,"width":2.0,"segment":[[8,3],[8,5]]}],
      "population": {"count": 500}
    })", "tiny");
    CHECK_THROWS_WITH_AS(spawn_population(scn, 1),
                         doctest::Contains("placement failure"), std::runtime_error);
}

TEST_CASE("walls exclude gate openings") {
    Scenario scn = testutil::square_scenario();
    // Square: 4 edges, 2 gates -> right and left edges split in two.
    CHECK(scn.walls.size() == 6);
    for (const Segment& w : scn.walls) {
        // No wall segment overlaps a gate interior.
        for (const ExitGate& e : scn.exits) {
            Vec2 gate_mid = e.gate_segment.midpoint();
            CHECK(point_segment_distance(gate_mid, w) > 0.4);
        }
    }
}
