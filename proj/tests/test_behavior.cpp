#include "cellevac/behavior.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace cellevac;

TEST_CASE("beta presets match the configured coefficient sets") {
    BetaConfig s = beta_preset("STANDARD");
    CHECK(s.beta_d == doctest::Approx(-28.0));
    CHECK(s.beta_g == doctest::Approx(0.6));
    CHECK(s.beta_e == doctest::Approx(-0.5));
    CHECK(s.beta_w == doctest::Approx(0.6));
    CHECK(s.beta_p == doctest::Approx(0.0));
    BetaConfig o = beta_preset("optimal");
    CHECK(o.beta_d == doctest::Approx(-28.863));
    CHECK(o.beta_p == doctest::Approx(8.515));
    BetaConfig c = beta_preset("cellevac");
    CHECK(c.beta_g == doctest::Approx(-2.181));
    CHECK(c.beta_w == doctest::Approx(1.064));
    BetaConfig f = beta_preset("follower");
    CHECK(f.beta_sys == doctest::Approx(1.0));
    CHECK(f.beta_d == 0.0);
    CHECK_THROWS_AS(beta_preset("nope"), ConfigError);
    BetaConfig bad{0, 0, 0, 0, -1.0, 0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("beta_p_of_t follows the linear depletion schedule") {
    CHECK(beta_p_of_t(8.515, 3400, 3400) == doctest::Approx(0.0));
    CHECK(beta_p_of_t(8.515, 0, 3400) == doctest::Approx(8.515));
    CHECK(beta_p_of_t(10.0, 25, 100) == doctest::Approx(7.5));
    // Nonincreasing in n_now, confined to [0, beta_p].
    double prev = 1e9;
    for (int n = 0; n <= 100; n += 5) {
        double v = beta_p_of_t(6.0, n, 100);
        CHECK(v <= prev + 1e-15);
        CHECK(v >= 0.0);
        CHECK(v <= 6.0);
        prev = v;
    }
}

TEST_CASE("utility reproduces the optimized-controller worked example") {
    AttributeVector attrs;
    attrs.dist_norm = {0.5};
    attrs.width_norm = {1.0};
    attrs.group_ratio = {0.0};
    attrs.excon_norm = {0.5};
    attrs.personal = {1};
    attrs.system = {0};
    BetaConfig betas = beta_cellevac();
    // n_now/n_initial = 0.5 -> beta_p(t) = 2.594 * 0.5 = 1.297
    std::vector<double> v = utility(attrs, betas, 50, 100);
    CHECK(v[0] == doctest::Approx(-7.336).epsilon(1e-9));
}

TEST_CASE("utility is zero when all coefficients are zero") {
    AttributeVector attrs;
    attrs.dist_norm = {0.3, 0.9};
    attrs.width_norm = {1.0, 0.4};
    attrs.group_ratio = {0.0, 0.7};
    attrs.excon_norm = {2.0, 0.1};
    attrs.personal = {1, 0};
    attrs.system = {0, 1};
    std::vector<double> v = utility(attrs, BetaConfig{}, 10, 100);
    CHECK(v[0] == doctest::Approx(0.0));
    CHECK(v[1] == doctest::Approx(0.0));
}

TEST_CASE("dominant system coefficient forces the indicated exit") {
    AttributeVector attrs;
    attrs.dist_norm = {0.2, 0.5, 0.9};
    attrs.width_norm = {1.0, 0.5, 0.7};
    attrs.group_ratio = {0.0, 0.3, 0.6};
    attrs.excon_norm = {0.5, 1.0, 0.2};
    attrs.personal = {1, 0, 0};
    attrs.system = {0, 0, 1};
    BetaConfig betas{-5.0, 1.0, -1.0, 1.0, 2.0, 100.0};
    std::vector<double> v = utility(attrs, betas, 50, 100);
    CHECK(v[2] > v[0]);
    CHECK(v[2] > v[1]);
}

TEST_CASE("choice probabilities form a softmax simplex") {
    std::vector<double> v{1.0, 0.0};
    auto p = choice_probabilities(v);
    CHECK(p[0] == doctest::Approx(0.731059).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.268941).epsilon(1e-6));
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> sym{0.0, 0.0};
    auto ps = choice_probabilities(sym);
    CHECK(ps[0] == doctest::Approx(0.5));
    CHECK(ps[1] == doctest::Approx(0.5));
}

TEST_CASE("softmax is shift invariant and overflow safe") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v, vs;
        double c = rng.uniform(-500.0, 500.0);
        for (int i = 0; i < 8; ++i) {
            double x = rng.uniform(-50.0, 50.0);
            v.push_back(x);
            vs.push_back(x + c);
        }
        auto p = choice_probabilities(v);
        auto q = choice_probabilities(vs);
        double sum = 0.0;
        for (size_t i = 0; i < p.size(); ++i) {
            CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
            CHECK(p[i] >= 0.0);
            sum += p[i];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Huge utilities must not overflow.
    std::vector<double> big{1000.0, 999.0};
    auto pb = choice_probabilities(big);
    CHECK(pb[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-9));
}

TEST_CASE("argmax of utilities is the mode of the probabilities") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v;
        for (int i = 0; i < 6; ++i) v.push_back(rng.uniform(-5.0, 5.0));
        auto p = choice_probabilities(v);
        size_t vmax = 0, pmax = 0;
        for (size_t i = 1; i < v.size(); ++i) {
            if (v[i] > v[vmax]) vmax = i;
            if (p[i] > p[pmax]) pmax = i;
        }
        CHECK(vmax == pmax);
    }
}

TEST_CASE("decide samples by inverse CDF and counts changes") {
    Rng rng(17);
    PedestrianState ped;
    ped.target_exit = 0;

    std::vector<double> sure{1.0, 0.0, 0.0};
    ChoiceOutcome out = decide(ped, sure, rng);
    CHECK(out.exit_id == 1);
    CHECK_FALSE(out.changed); // first decision is not a change
    CHECK(ped.decision_changes == 0);

    out = decide(ped, sure, rng);
    CHECK_FALSE(out.changed); // same choice kept
    CHECK(ped.decision_changes == 0);

    std::vector<double> other{0.0, 1.0, 0.0};
    out = decide(ped, other, rng);
    CHECK(out.exit_id == 2);
    CHECK(out.changed);
    CHECK(ped.decision_changes == 1);
}

TEST_CASE("decide frequencies match the simplex") {
    Rng rng(29);
    std::vector<double> uniform(8, 0.125);
    std::vector<int> counts(8, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        PedestrianState ped;
        counts[decide(ped, uniform, rng).exit_id - 1]++;
    }
    for (int e = 0; e < 8; ++e) {
        double freq = static_cast<double>(counts[e]) / n;
        CHECK(freq == doctest::Approx(0.125).epsilon(0.004 / 0.125));
    }
}

TEST_CASE("group sizes accumulate strictly closer cells") {
    Scenario scn = testutil::square_scenario();
    DistanceTable dist = build_distance_table(scn);
    REQUIRE(scn.n_cells() == 4);

    std::vector<int> occupancy{10, 5, 3, 2};
    auto g = group_size_table(occupancy, dist);
    for (int e = 0; e < scn.n_exits(); ++e) {
        for (int c = 0; c < scn.n_cells(); ++c) {
            int expect = occupancy[c];
            for (int c2 = 0; c2 < scn.n_cells(); ++c2)
                if (dist.cell_to_exit[c2][e] < dist.cell_to_exit[c][e])
                    expect += occupancy[c2];
            CHECK(g[e][c] == expect);
        }
    }
}

namespace {

DecisionContext synthetic_context(const Scenario& scn, const DistanceTable& dist,
                                  const std::vector<double>& critical) {
    DecisionContext ctx;
    ctx.scn = &scn;
    ctx.dist = &dist;
    ctx.critical_density = &critical;
    ctx.occupancy.assign(scn.n_cells(), 0);
    ctx.exit_density.assign(scn.n_exits(), 0.0);
    ctx.group_sizes.assign(scn.n_exits(), std::vector<int>(scn.n_cells(), 1));
    ctx.n_now = 100;
    ctx.n_initial = 100;
    return ctx;
}

} // namespace

TEST_CASE("group ratio is zero on the emptiest path and follows (G-Gmin)/G") {
    Scenario scn = load_scenario_from_string(R"({
      "boundary": [[0,0],[16,0],[16,16],[0,16]],
      "cell_width": 6.0,
      "exits": [
        {"id":1,"width":2.0,"segment":[[16,7],[16,9]]},
        {"id":2,"width":2.0,"segment":[[0,7],[0,9]]},
        {"id":3,"width":2.0,"segment":[[7,0],[9,0]]}
      ]
    })", "tri");
    DistanceTable dist = build_distance_table(scn);
    std::vector<double> critical(3, 1.0);
    DecisionContext ctx = synthetic_context(scn, dist, critical);

    PedestrianState ped;
    ped.position = scn.cells[0].center;
    int cell = locate_cell(ped.position, scn);

    // Force the path loads: G = (10, 5, 5) for this pedestrian's cell.
    ctx.group_sizes[0][cell - 1] = 10;
    ctx.group_sizes[1][cell - 1] = 5;
    ctx.group_sizes[2][cell - 1] = 5;

    AttributeVector attrs = compute_attributes(ped, ctx);
    CHECK(attrs.group_ratio[0] == doctest::Approx(0.5));
    CHECK(attrs.group_ratio[1] == doctest::Approx(0.0));
    CHECK(attrs.group_ratio[2] == doctest::Approx(0.0));

    int zeros = 0;
    for (double g : attrs.group_ratio) {
        CHECK(g >= 0.0);
        CHECK(g < 1.0);
        if (g == 0.0) zeros++;
    }
    CHECK(zeros >= 1);
}

TEST_CASE("excon normalizes by the critical density") {
    Scenario scn = testutil::square_scenario();
    DistanceTable dist = build_distance_table(scn);
    std::vector<double> critical{2.0, 4.0};
    DecisionContext ctx = synthetic_context(scn, dist, critical);
    ctx.exit_density = {2.0, 1.0}; // exit 1 exactly critical

    PedestrianState ped;
    ped.position = scn.cells[0].center;
    AttributeVector attrs = compute_attributes(ped, ctx);
    CHECK(attrs.excon_norm[0] == doctest::Approx(1.0));
    CHECK(attrs.excon_norm[1] == doctest::Approx(0.25));
}

TEST_CASE("personal indicator marks only the current choice") {
    Scenario scn = testutil::square_scenario();
    DistanceTable dist = build_distance_table(scn);
    std::vector<double> critical(2, 1.0);
    DecisionContext ctx = synthetic_context(scn, dist, critical);

    PedestrianState ped;
    ped.position = scn.cells[0].center;
    ped.target_exit = 0; // before the first choice
    AttributeVector attrs = compute_attributes(ped, ctx);
    CHECK(attrs.personal[0] == 0);
    CHECK(attrs.personal[1] == 0);

    ped.target_exit = 2;
    attrs = compute_attributes(ped, ctx);
    CHECK(attrs.personal[0] == 0);
    CHECK(attrs.personal[1] == 1);
}

TEST_CASE("keep probability grows monotonically in beta_p") {
    AttributeVector attrs;
    attrs.dist_norm = {0.5, 0.4};
    attrs.width_norm = {1.0, 1.0};
    attrs.group_ratio = {0.0, 0.0};
    attrs.excon_norm = {0.0, 0.0};
    attrs.personal = {1, 0};
    attrs.system = {0, 0};
    double prev = -1.0;
    for (double bp : {0.0, 2.0, 8.0, 20.0, 60.0}) {
        BetaConfig betas{-5.0, 0.0, 0.0, 0.0, bp, 0.0};
        auto p = choice_probabilities(utility(attrs, betas, 20, 100));
        CHECK(p[0] > prev);
        prev = p[0];
    }
    CHECK(prev > 0.999); // beta_p -> infinity keeps the previous exit
}
