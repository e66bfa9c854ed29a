#pragma once

#include "cellevac/rng.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellevac {

namespace cgp {

struct StructuralError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Func : uint8_t { Add = 0, Sub = 1, Mul = 2, DivP = 3 };
constexpr int kFuncCount = 4;

// Protected division: x / y == 1 when |y| is negligible.
double apply(Func f, double a, double b);

struct Node {
    int func = 0; // index into Func
    int in_a = 0; // gene value: [0, n_inputs) = inputs, else node (value - n_inputs)
    int in_b = 0;
};

struct Genotype {
    int n_inputs = 5;
    int n_nodes = 4000;
    std::vector<Node> nodes;
    int output = 0; // gene value, same addressing as connection genes

    int gene_count() const { return n_nodes * 3 + 1; }
    void validate() const; // throws StructuralError
};

struct Phenotype {
    std::vector<int> active; // node indices reachable from the output, ascending
};

Genotype random_genotype(int n_inputs, int n_nodes, Rng& rng);

Phenotype decode(const Genotype& g);

// Single evaluation (decodes internally). Inputs must be finite.
double evaluate(const Genotype& g, std::span<const double> inputs);

// Decode-once evaluator for repeated scoring.
class Evaluator {
public:
    explicit Evaluator(const Genotype& g);
    double operator()(std::span<const double> inputs) const;
    size_t phenotype_size() const { return active_.size(); }

private:
    const Genotype g_;
    std::vector<int> active_;
    mutable std::vector<double> values_;
};

Genotype mutate(const Genotype& g, double rate, Rng& rng);

struct EvolveConfig {
    int lambda = 4;
    int generations = 1000;
    double mutation_rate = 0.0075;
    int n_inputs = 5;
    int n_nodes = 4000;
    uint64_t seed = 1;

    void validate() const;
};

struct EvolveResult {
    Genotype best;
    double best_fitness = 0.0;
    std::vector<double> history; // best-so-far per generation
};

// 1+lambda elitist loop; fitness is lower-is-better, ties go to offspring.
// A fitness_fn exception marks that candidate +inf.
EvolveResult evolve_one_plus_lambda(
    const std::function<double(const Genotype&)>& fitness_fn,
    const EvolveConfig& cfg);

std::string serialize_genotype(const Genotype& g);
Genotype parse_genotype(const std::string& text);
void save_genotype(const Genotype& g, const std::string& path);
Genotype load_genotype(const std::string& path);

} // namespace cgp

} // namespace cellevac
