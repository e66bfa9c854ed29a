#include "cellevac/cgp.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <vector>

using namespace cellevac;
using namespace cellevac::cgp;

namespace {

Genotype identity_on(int input, int n_inputs = 5, int n_nodes = 4) {
    Genotype g;
    g.n_inputs = n_inputs;
    g.n_nodes = n_nodes;
    g.nodes.assign(n_nodes, Node{0, 0, 0});
    g.output = input;
    return g;
}

// Memoized recursive interpreter, independent of the implementation's
// forward evaluation order.
double oracle_eval(const Genotype& g, std::span<const double> inputs) {
    std::map<int, double> memo;
    std::function<double(int)> value = [&](int gene) -> double {
        if (gene < g.n_inputs) return inputs[gene];
        auto it = memo.find(gene);
        if (it != memo.end()) return it->second;
        const Node& n = g.nodes[gene - g.n_inputs];
        double a = value(n.in_a);
        double b = value(n.in_b);
        double v = apply(static_cast<Func>(n.func), a, b);
        memo[gene] = v;
        return v;
    };
    return value(g.output);
}

// Reachability oracle by explicit breadth-first search.
std::set<int> oracle_active(const Genotype& g) {
    std::set<int> active;
    std::vector<int> queue;
    if (g.output >= g.n_inputs) queue.push_back(g.output - g.n_inputs);
    while (!queue.empty()) {
        int k = queue.back();
        queue.pop_back();
        if (active.count(k)) continue;
        active.insert(k);
        const Node& n = g.nodes[k];
        if (n.in_a >= g.n_inputs) queue.push_back(n.in_a - g.n_inputs);
        if (n.in_b >= g.n_inputs) queue.push_back(n.in_b - g.n_inputs);
    }
    return active;
}

} // namespace

TEST_CASE("protected division convention") {
    CHECK(apply(Func::DivP, 3.0, 2.0) == doctest::Approx(1.5));
    CHECK(apply(Func::DivP, 3.0, 0.0) == doctest::Approx(1.0));
    CHECK(apply(Func::DivP, 3.0, 1e-12) == doctest::Approx(1.0));
    CHECK(apply(Func::DivP, 0.0, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("decode finds the active set") {
    Genotype g = identity_on(0);
    CHECK(decode(g).active.empty());

    // Single node computing D + W, output wired to it.
    g.nodes[0] = {0, 0, 3}; // add(D, W)
    g.output = g.n_inputs;  // first node
    auto ph = decode(g);
    REQUIRE(ph.active.size() == 1);
    CHECK(ph.active[0] == 0);
    CHECK(evaluate(g, std::vector<double>{1.0, 9.0, 9.0, 2.0, 9.0}) == doctest::Approx(3.0));
}

TEST_CASE("decode matches a brute-force reachability oracle") {
    Rng rng(4242);
    for (int trial = 0; trial < 30; ++trial) {
        Genotype g = random_genotype(5, 4000, rng);
        auto ph = decode(g);
        auto expect = oracle_active(g);
        REQUIRE(ph.active.size() == expect.size());
        for (int k : ph.active) CHECK(expect.count(k) == 1);
        // Topological (ascending) order.
        for (size_t i = 1; i < ph.active.size(); ++i)
            CHECK(ph.active[i] > ph.active[i - 1]);
        CHECK(ph.active.size() <= 4000);
    }
}

TEST_CASE("decode rejects structural violations") {
    Genotype g = identity_on(0, 5, 3);
    g.nodes[1].in_a = 5 + 2; // forward reference to node 2
    CHECK_THROWS_AS(decode(g), StructuralError);

    Genotype g2 = identity_on(0, 5, 3);
    g2.output = 5 + 3; // out of range
    CHECK_THROWS_AS(decode(g2), StructuralError);
}

TEST_CASE("evaluate agrees with a recursive interpreter oracle") {
    Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        Genotype g = random_genotype(5, 40, rng);
        double inputs[5];
        for (double& x : inputs) x = rng.uniform(-3.0, 3.0);
        double got = evaluate(g, std::span<const double>(inputs, 5));
        double expect = oracle_eval(g, std::span<const double>(inputs, 5));
        if (std::isfinite(expect)) {
            CHECK(got == doctest::Approx(expect).epsilon(1e-12));
        } else {
            CHECK(std::isfinite(got) == std::isfinite(expect));
        }
    }
}

TEST_CASE("compiled evaluator matches one-shot evaluation") {
    Rng rng(7);
    Genotype g = random_genotype(5, 200, rng);
    Evaluator ev(g);
    for (int trial = 0; trial < 50; ++trial) {
        double inputs[5];
        for (double& x : inputs) x = rng.uniform(-2.0, 2.0);
        double a = ev(std::span<const double>(inputs, 5));
        double b = evaluate(g, std::span<const double>(inputs, 5));
        if (std::isfinite(a) || std::isfinite(b)) CHECK(a == b);
    }
}

TEST_CASE("mutate at rate zero is the identity") {
    Rng rng(5);
    Genotype g = random_genotype(5, 100, rng);
    Genotype m = mutate(g, 0.0, rng);
    CHECK(m.output == g.output);
    for (int k = 0; k < g.n_nodes; ++k) {
        CHECK(m.nodes[k].func == g.nodes[k].func);
        CHECK(m.nodes[k].in_a == g.nodes[k].in_a);
        CHECK(m.nodes[k].in_b == g.nodes[k].in_b);
    }
}

TEST_CASE("mutate hits the binomial gene-change expectation") {
    Rng rng(31);
    Genotype g = random_genotype(5, 4000, rng);
    const double rate = 0.0075;

    // A resampled gene may redraw its old value, so the observable
    // expectation is rate * (1 - 1/arity) summed over genes.
    double expect = 0.0;
    for (int k = 0; k < g.n_nodes; ++k) {
        expect += rate * (1.0 - 1.0 / kFuncCount);
        expect += 2.0 * rate * (1.0 - 1.0 / (g.n_inputs + k));
    }
    expect += rate * (1.0 - 1.0 / (g.n_inputs + g.n_nodes));
    // Raw resample count is n * rate = 90 on 12001 genes.
    CHECK(g.gene_count() == 12001);
    CHECK(12001 * rate == doctest::Approx(90.0).epsilon(0.001));

    const int trials = 40;
    double total_diff = 0.0;
    for (int t = 0; t < trials; ++t) {
        Genotype m = mutate(g, rate, rng);
        int diff = m.output != g.output ? 1 : 0;
        for (int k = 0; k < g.n_nodes; ++k) {
            diff += m.nodes[k].func != g.nodes[k].func;
            diff += m.nodes[k].in_a != g.nodes[k].in_a;
            diff += m.nodes[k].in_b != g.nodes[k].in_b;
        }
        total_diff += diff;
        CHECK_NOTHROW(decode(m)); // constraints preserved
    }
    double mean_diff = total_diff / trials;
    double sigma = std::sqrt(expect); // ~binomial sd per trial
    CHECK(mean_diff > expect - 4.0 * sigma / std::sqrt(trials));
    CHECK(mean_diff < expect + 4.0 * sigma / std::sqrt(trials));
}

TEST_CASE("evolve config validation rejects degenerate setups") {
    EvolveConfig cfg;
    cfg.lambda = 0;
    CHECK_THROWS_AS(cfg.validate(), StructuralError);
    cfg.lambda = 4;
    cfg.generations = 0;
    CHECK_THROWS_AS(cfg.validate(), StructuralError);
}

TEST_CASE("one plus lambda solves the constant regression smoke test") {
    // Score distance to the constant 7 on fixed inputs.
    std::vector<double> inputs{1.0, 2.0, 3.0, 4.0, 5.0};
    auto fitness = [&](const Genotype& g) {
        double out = evaluate(g, inputs);
        if (!std::isfinite(out)) return 1e18;
        return std::abs(out - 7.0);
    };
    int solved = 0;
    for (uint64_t seed = 1; seed <= 3; ++seed) {
        EvolveConfig cfg;
        cfg.lambda = 4;
        cfg.generations = 3000;
        cfg.mutation_rate = 0.02;
        cfg.n_nodes = 100;
        cfg.seed = seed;
        EvolveResult res = evolve_one_plus_lambda(fitness, cfg);
        if (res.best_fitness < 1e-6) solved++;
        // Elitism: best-so-far never worsens.
        for (size_t i = 1; i < res.history.size(); ++i)
            CHECK(res.history[i] <= res.history[i - 1]);
    }
    CHECK(solved >= 2);
}

TEST_CASE("fitness failures are treated as +inf candidates") {
    auto fitness = [](const Genotype&) -> double {
        throw std::runtime_error("boom");
    };
    EvolveConfig cfg;
    cfg.generations = 3;
    cfg.n_nodes = 10;
    cfg.seed = 9;
    EvolveResult res = evolve_one_plus_lambda(fitness, cfg);
    CHECK(std::isinf(res.best_fitness));
}

TEST_CASE("genotype text round-trips") {
    Rng rng(12);
    Genotype g = random_genotype(5, 64, rng);
    std::string text = serialize_genotype(g);
    Genotype h = parse_genotype(text);
    CHECK(h.n_inputs == g.n_inputs);
    CHECK(h.n_nodes == g.n_nodes);
    CHECK(h.output == g.output);
    for (int k = 0; k < g.n_nodes; ++k) {
        CHECK(h.nodes[k].func == g.nodes[k].func);
        CHECK(h.nodes[k].in_a == g.nodes[k].in_a);
        CHECK(h.nodes[k].in_b == g.nodes[k].in_b);
    }
    CHECK_THROWS_AS(parse_genotype("bogus"), StructuralError);
    CHECK_THROWS_AS(parse_genotype("cgp-genotype v1\nfuncset add sub mul divp\n"
                                   "inputs 5\nnodes 2\n0 0 0\n"),
                    StructuralError);
}
