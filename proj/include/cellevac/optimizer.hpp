#pragma once

#include "cellevac/behavior.hpp"
#include "cellevac/rng.hpp"

#include <array>
#include <functional>
#include <vector>

namespace cellevac {

// Per-run outputs the optimization layer consumes.
struct RunMetrics {
    double evac_time_min = 0.0;
    double sf = 0.0;
    double sf_var = 0.0;
    double decision_change_mean = 0.0;
    int64_t remaining = 0; // pedestrians still inside at the end
    bool failed = false;   // simulation error
};

enum class FitnessVariant { Mlm, Cgp };

bool viability(const RunMetrics& m, double cap_minutes = 15.0);

double run_fitness(const RunMetrics& m, FitnessVariant variant);

// Replication mean of the per-run fitness.
double fitness(const std::vector<RunMetrics>& runs, FitnessVariant variant);

enum class ControlledOutput { EvacTime, Fitness };

struct ReplicationPolicy {
    int min_reps = 3;
    int max_reps = 10;
    double confidence = 0.80;
    double error_percent = 0.5;
    ControlledOutput controlled = ControlledOutput::EvacTime;
    FitnessVariant variant = FitnessVariant::Mlm;

    void validate() const;
};

struct ReplicationStats {
    int n = 0;
    double mean = 0.0;       // of the controlled output
    double half_width = 0.0; // final CI half-width
    bool viable = true;      // false as soon as any run is non-viable
    std::vector<RunMetrics> runs;
};

// Runs min_reps replications, then continues while the Student-t CI
// half-width exceeds error_percent% of the running mean, up to max_reps.
// Seeds come from the supplied stream; a non-viable run stops replication.
ReplicationStats replicate(const std::function<RunMetrics(uint64_t)>& evaluate_once,
                           const ReplicationPolicy& policy, Rng& seed_stream);

// --- Tabu search over the five searched coefficients (beta_sys excluded) ---

constexpr int kTabuDim = 5; // beta_d, beta_g, beta_e, beta_w, beta_p
using BetaVector = std::array<double, kTabuDim>;

BetaConfig beta_from_vector(const BetaVector& v);
BetaVector vector_from_beta(const BetaConfig& b);

struct TabuConfig {
    int iterations = 200; // objective-evaluation budget
    BetaVector lower{-40.0, -10.0, -10.0, 0.0, 0.0};
    BetaVector upper{0.0, 10.0, 10.0, 5.0, 30.0};
    BetaVector step{5.0, 2.5, 2.5, 0.625, 3.75};
    int tenure = 10;           // moves
    double anneal_factor = 0.7;
    int anneal_after = 40;     // non-improving evaluations
    uint64_t seed = 1;

    void validate() const;
};

struct TabuEval {
    double fitness = 0.0;  // replication mean, cap metrics included
    bool viable = false;
    int n_reps = 0;
};

using TabuObjective = std::function<TabuEval(const BetaVector&, uint64_t eval_seed)>;

struct TabuTraceRow {
    int eval = 0;
    BetaVector beta{};
    double fitness = 0.0;
    bool viable = false;
    int n_reps = 0;
    double best_so_far = 0.0; // +inf until a viable candidate exists
};

struct TabuResult {
    bool found_viable = false;
    BetaVector best_beta{};
    double best_fitness = 0.0;
    std::vector<TabuTraceRow> trace;
};

TabuResult tabu_search(const TabuObjective& objective, const TabuConfig& cfg);

} // namespace cellevac
