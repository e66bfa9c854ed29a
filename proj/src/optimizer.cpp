#include "cellevac/optimizer.hpp"

#include "cellevac/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>

namespace cellevac {

bool viability(const RunMetrics& m, double cap_minutes) {
    return !m.failed && m.remaining == 0 && m.evac_time_min <= cap_minutes;
}

double run_fitness(const RunMetrics& m, FitnessVariant variant) {
    double f = m.evac_time_min - m.sf;
    if (variant == FitnessVariant::Cgp) f += static_cast<double>(m.remaining);
    return f;
}

double fitness(const std::vector<RunMetrics>& runs, FitnessVariant variant) {
    if (runs.empty()) throw std::invalid_argument("fitness: no runs");
    double acc = 0.0;
    for (const RunMetrics& m : runs) acc += run_fitness(m, variant);
    return acc / static_cast<double>(runs.size());
}

void ReplicationPolicy::validate() const {
    if (min_reps < 1 || min_reps > max_reps)
        throw std::invalid_argument("replication: need 1 <= min_reps <= max_reps");
    if (confidence <= 0.0 || confidence >= 1.0)
        throw std::invalid_argument("replication: confidence in (0,1)");
    if (error_percent <= 0.0)
        throw std::invalid_argument("replication: error_percent must be > 0");
}

ReplicationStats replicate(const std::function<RunMetrics(uint64_t)>& evaluate_once,
                           const ReplicationPolicy& policy, Rng& seed_stream) {
    policy.validate();
    ReplicationStats stats;
    std::vector<double> controlled;

    auto controlled_value = [&](const RunMetrics& m) {
        return policy.controlled == ControlledOutput::EvacTime
                   ? m.evac_time_min
                   : run_fitness(m, policy.variant);
    };

    while (stats.n < policy.max_reps) {
        uint64_t run_seed = seed_stream.next_u64();
        RunMetrics m = evaluate_once(run_seed);
        stats.runs.push_back(m);
        controlled.push_back(controlled_value(m));
        stats.n += 1;
        stats.mean = mean(controlled);
        if (!viability(m)) {
            stats.viable = false;
            break; // candidate rejected; no point burning more runs
        }
        if (stats.n < policy.min_reps) continue;

        double sd = std::sqrt(sample_variance(controlled));
        stats.half_width = t_ci_half_width(policy.confidence, stats.n, sd);
        if (stats.half_width <= std::abs(stats.mean) * policy.error_percent / 100.0)
            break;
    }
    return stats;
}

BetaConfig beta_from_vector(const BetaVector& v) {
    BetaConfig b;
    b.beta_d = v[0];
    b.beta_g = v[1];
    b.beta_e = v[2];
    b.beta_w = v[3];
    b.beta_p = v[4];
    return b;
}

BetaVector vector_from_beta(const BetaConfig& b) {
    return {b.beta_d, b.beta_g, b.beta_e, b.beta_w, b.beta_p};
}

void TabuConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("tabu: iterations must be >= 1");
    if (tenure < 0) throw std::invalid_argument("tabu: tenure must be >= 0");
    for (int i = 0; i < kTabuDim; ++i) {
        if (!(lower[i] < upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
            throw std::invalid_argument("tabu: bounds must be finite with lower < upper");
        if (!(step[i] > 0.0)) throw std::invalid_argument("tabu: steps must be > 0");
    }
}

namespace {

struct VecKey {
    BetaVector v;
    bool operator<(const VecKey& o) const {
        return std::memcmp(v.data(), o.v.data(), sizeof(v)) < 0;
    }
};

// Movement order: viable first, then lower fitness.
bool better_move(const TabuEval& a, const TabuEval& b) {
    if (a.viable != b.viable) return a.viable;
    return a.fitness < b.fitness;
}

} // namespace

TabuResult tabu_search(const TabuObjective& objective, const TabuConfig& cfg) {
    cfg.validate();
    Rng rng = derive_stream(cfg.seed, "tabu");

    TabuResult res;
    res.best_fitness = std::numeric_limits<double>::infinity();

    std::map<VecKey, TabuEval> memo;
    int evals = 0;
    int non_improving = 0;
    BetaVector step = cfg.step;

    auto evaluate = [&](const BetaVector& x) -> const TabuEval& {
        auto it = memo.find(VecKey{x});
        if (it != memo.end()) return it->second;
        uint64_t eval_seed = derive_seed(cfg.seed, "tabu-eval-" + std::to_string(evals));
        TabuEval ev = objective(x, eval_seed);
        evals += 1;
        non_improving += 1;
        if (ev.viable && ev.fitness < res.best_fitness && evals < cfg.iterations) {
            // A best-so-far claim gets one confirmation evaluation so a single
            // lucky replication cannot steal the incumbent.
            uint64_t confirm_seed =
                derive_seed(cfg.seed, "tabu-eval-" + std::to_string(evals));
            TabuEval confirm = objective(x, confirm_seed);
            evals += 1;
            ev.fitness = 0.5 * (ev.fitness + confirm.fitness);
            ev.viable = ev.viable && confirm.viable;
            ev.n_reps += confirm.n_reps;
        }
        if (ev.viable && ev.fitness < res.best_fitness) {
            res.best_fitness = ev.fitness;
            res.best_beta = x;
            res.found_viable = true;
            non_improving = 0;
        }
        TabuTraceRow row;
        row.eval = evals;
        row.beta = x;
        row.fitness = ev.fitness;
        row.viable = ev.viable;
        row.n_reps = ev.n_reps;
        row.best_so_far = res.best_fitness;
        res.trace.push_back(row);
        if (non_improving >= cfg.anneal_after) {
            for (double& s : step) s *= cfg.anneal_factor;
            non_improving = 0;
        }
        return memo.emplace(VecKey{x}, ev).first->second;
    };

    BetaVector x;
    for (int i = 0; i < kTabuDim; ++i) x[i] = rng.uniform(cfg.lower[i], cfg.upper[i]);
    TabuEval current = evaluate(x);

    // tabu_until[c][dir]: move index before which reversing is forbidden.
    int move_count = 0;
    int tabu_until[kTabuDim][2] = {};
    int coord = 0;
    int sweep_moves = 0;
    int sweep_fresh = 0;
    long spins = 0; // bail out if the finite step lattice is exhausted

    while (evals < cfg.iterations) {
        if (++spins > 200L * cfg.iterations) break;

        struct Option {
            BetaVector pos;
            int dir; // 0 = down, 1 = up
            TabuEval ev;
        };
        std::vector<Option> options;
        for (int dir = 0; dir < 2 && evals < cfg.iterations; ++dir) {
            double delta = dir == 1 ? step[coord] : -step[coord];
            BetaVector cand = x;
            cand[coord] = std::clamp(cand[coord] + delta, cfg.lower[coord], cfg.upper[coord]);
            if (cand[coord] == x[coord]) continue;
            int evals_before = evals;
            TabuEval ev = evaluate(cand);
            sweep_fresh += evals - evals_before;
            bool is_tabu = move_count < tabu_until[coord][dir];
            bool aspiration = ev.viable && ev.fitness <= res.best_fitness;
            if (is_tabu && !aspiration) continue;
            options.push_back({cand, dir, ev});
        }
        const Option* chosen = nullptr;
        for (const Option& o : options)
            if (!chosen || better_move(o.ev, chosen->ev)) chosen = &o;

        // Accept only descending moves; tabu forbids noise-driven ping-pong.
        if (chosen && better_move(chosen->ev, current)) {
            x = chosen->pos;
            current = chosen->ev;
            move_count += 1;
            sweep_moves += 1;
            tabu_until[coord][1 - chosen->dir] = move_count + cfg.tenure;
        }

        coord = (coord + 1) % kTabuDim;
        if (coord == 0) {
            // A stalled sweep with nothing new to probe: refine the lattice.
            if (sweep_moves == 0 && sweep_fresh == 0)
                for (double& s : step) s *= cfg.anneal_factor;
            sweep_moves = 0;
            sweep_fresh = 0;
        }
    }
    return res;
}

} // namespace cellevac
