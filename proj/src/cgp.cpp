#include "cellevac/cgp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace cellevac {
namespace cgp {

double apply(Func f, double a, double b) {
    switch (f) {
        case Func::Add: return a + b;
        case Func::Sub: return a - b;
        case Func::Mul: return a * b;
        case Func::DivP: return std::abs(b) < 1e-9 ? 1.0 : a / b;
    }
    return 0.0;
}

void Genotype::validate() const {
    if (n_inputs < 1 || n_nodes < 1)
        throw StructuralError("genotype: need at least one input and one node");
    if (static_cast<int>(nodes.size()) != n_nodes)
        throw StructuralError("genotype: node count mismatch");
    for (int k = 0; k < n_nodes; ++k) {
        const Node& n = nodes[k];
        if (n.func < 0 || n.func >= kFuncCount)
            throw StructuralError("genotype: bad function gene at node " + std::to_string(k));
        int limit = n_inputs + k; // feed-forward: inputs or earlier nodes only
        if (n.in_a < 0 || n.in_a >= limit || n.in_b < 0 || n.in_b >= limit)
            throw StructuralError("genotype: connection gene out of range at node " +
                                  std::to_string(k));
    }
    if (output < 0 || output >= n_inputs + n_nodes)
        throw StructuralError("genotype: output gene out of range");
}

Genotype random_genotype(int n_inputs, int n_nodes, Rng& rng) {
    Genotype g;
    g.n_inputs = n_inputs;
    g.n_nodes = n_nodes;
    g.nodes.resize(n_nodes);
    for (int k = 0; k < n_nodes; ++k) {
        g.nodes[k].func = static_cast<int>(rng.below(kFuncCount));
        g.nodes[k].in_a = static_cast<int>(rng.below(n_inputs + k));
        g.nodes[k].in_b = static_cast<int>(rng.below(n_inputs + k));
    }
    g.output = static_cast<int>(rng.below(n_inputs + n_nodes));
    return g;
}

Phenotype decode(const Genotype& g) {
    g.validate();
    Phenotype ph;
    std::vector<uint8_t> needed(g.n_nodes, 0);
    // Backward sweep: feed-forward wiring means one reverse pass suffices.
    if (g.output >= g.n_inputs) needed[g.output - g.n_inputs] = 1;
    for (int k = g.n_nodes - 1; k >= 0; --k) {
        if (!needed[k]) continue;
        const Node& n = g.nodes[k];
        if (n.in_a >= g.n_inputs) needed[n.in_a - g.n_inputs] = 1;
        if (n.in_b >= g.n_inputs) needed[n.in_b - g.n_inputs] = 1;
    }
    for (int k = 0; k < g.n_nodes; ++k)
        if (needed[k]) ph.active.push_back(k);
    return ph;
}

namespace {

double evaluate_active(const Genotype& g, const std::vector<int>& active,
                       std::span<const double> inputs, std::vector<double>& values) {
    values.assign(g.n_inputs + g.n_nodes, 0.0);
    for (int i = 0; i < g.n_inputs; ++i) values[i] = inputs[i];
    for (int k : active) {
        const Node& n = g.nodes[k];
        values[g.n_inputs + k] =
            apply(static_cast<Func>(n.func), values[n.in_a], values[n.in_b]);
    }
    return values[g.output];
}

} // namespace

double evaluate(const Genotype& g, std::span<const double> inputs) {
    if (static_cast<int>(inputs.size()) != g.n_inputs)
        throw StructuralError("evaluate: input arity mismatch");
    Phenotype ph = decode(g);
    std::vector<double> values;
    return evaluate_active(g, ph.active, inputs, values);
}

Evaluator::Evaluator(const Genotype& g) : g_(g) {
    active_ = decode(g_).active;
}

double Evaluator::operator()(std::span<const double> inputs) const {
    return evaluate_active(g_, active_, inputs, values_);
}

Genotype mutate(const Genotype& g, double rate, Rng& rng) {
    if (rate < 0.0 || rate > 1.0)
        throw StructuralError("mutate: rate must be in [0,1]");
    Genotype out = g;
    for (int k = 0; k < out.n_nodes; ++k) {
        if (rng.uniform() < rate)
            out.nodes[k].func = static_cast<int>(rng.below(kFuncCount));
        if (rng.uniform() < rate)
            out.nodes[k].in_a = static_cast<int>(rng.below(out.n_inputs + k));
        if (rng.uniform() < rate)
            out.nodes[k].in_b = static_cast<int>(rng.below(out.n_inputs + k));
    }
    if (rng.uniform() < rate)
        out.output = static_cast<int>(rng.below(out.n_inputs + out.n_nodes));
    return out;
}

void EvolveConfig::validate() const {
    if (lambda < 1) throw StructuralError("evolve: lambda must be >= 1");
    if (generations < 1) throw StructuralError("evolve: generations must be >= 1");
    if (mutation_rate <= 0.0 || mutation_rate > 1.0)
        throw StructuralError("evolve: mutation rate must be in (0,1]");
    if (n_inputs < 1 || n_nodes < 1)
        throw StructuralError("evolve: bad genotype dimensions");
}

EvolveResult evolve_one_plus_lambda(
    const std::function<double(const Genotype&)>& fitness_fn,
    const EvolveConfig& cfg) {
    cfg.validate();
    Rng rng = derive_stream(cfg.seed, "cgp-evolve");

    auto safe_fitness = [&](const Genotype& g) {
        try {
            double f = fitness_fn(g);
            return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
        } catch (...) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Genotype parent = random_genotype(cfg.n_inputs, cfg.n_nodes, rng);
    double parent_fit = safe_fitness(parent);

    EvolveResult res;
    res.history.reserve(cfg.generations);
    for (int gen = 0; gen < cfg.generations; ++gen) {
        Genotype best_child;
        double best_child_fit = std::numeric_limits<double>::infinity();
        for (int i = 0; i < cfg.lambda; ++i) {
            Genotype child = mutate(parent, cfg.mutation_rate, rng);
            double fit = safe_fitness(child);
            if (i == 0 || fit < best_child_fit) {
                best_child_fit = fit;
                best_child = std::move(child);
            }
        }
        // Neutral drift: offspring wins ties against the parent.
        if (best_child_fit <= parent_fit) {
            parent = std::move(best_child);
            parent_fit = best_child_fit;
        }
        res.history.push_back(parent_fit);
        if (parent_fit == 0.0) {
            // Exact optimum; pad history so callers see the full schedule.
            for (int g2 = gen + 1; g2 < cfg.generations; ++g2)
                res.history.push_back(parent_fit);
            break;
        }
    }
    res.best = std::move(parent);
    res.best_fitness = parent_fit;
    return res;
}

std::string serialize_genotype(const Genotype& g) {
    std::ostringstream out;
    out << "cgp-genotype v1\n";
    out << "funcset add sub mul divp\n";
    out << "inputs " << g.n_inputs << "\n";
    out << "nodes " << g.n_nodes << "\n";
    for (const Node& n : g.nodes)
        out << n.func << " " << n.in_a << " " << n.in_b << "\n";
    out << "output " << g.output << "\n";
    return out.str();
}

Genotype parse_genotype(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "cgp-genotype v1")
        throw StructuralError("genotype file: bad header");
    if (!std::getline(in, line) || line != "funcset add sub mul divp")
        throw StructuralError("genotype file: unsupported function set");
    Genotype g;
    std::string tag;
    in >> tag >> g.n_inputs;
    if (tag != "inputs") throw StructuralError("genotype file: expected 'inputs'");
    in >> tag >> g.n_nodes;
    if (tag != "nodes") throw StructuralError("genotype file: expected 'nodes'");
    if (g.n_nodes < 1 || g.n_inputs < 1)
        throw StructuralError("genotype file: bad dimensions");
    g.nodes.resize(g.n_nodes);
    for (int k = 0; k < g.n_nodes; ++k)
        if (!(in >> g.nodes[k].func >> g.nodes[k].in_a >> g.nodes[k].in_b))
            throw StructuralError("genotype file: truncated node list");
    in >> tag >> g.output;
    if (tag != "output") throw StructuralError("genotype file: expected 'output'");
    g.validate();
    return g;
}

void save_genotype(const Genotype& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw StructuralError("cannot write genotype file: " + path);
    out << serialize_genotype(g);
}

Genotype load_genotype(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open genotype file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_genotype(ss.str());
}

} // namespace cgp
} // namespace cellevac
