#include "cellevac/controller.hpp"

#include <cmath>
#include <limits>

namespace cellevac {

void ControllerConfig::validate() const {
    if (!(period_s > 0.0)) throw ConfigError("controller: period must be > 0");
    if (mode == ControllerMode::Mlm) betas.validate();
    if (mode == ControllerMode::Cgp) {
        if (!genotype) throw ConfigError("controller: CGP mode requires a genotype");
        genotype->validate();
    }
}

ControllerMap allocate_mlm(const DecisionContext& ctx, const BetaConfig& betas,
                           const ControllerMap* previous) {
    const Scenario& scn = *ctx.scn;
    ControllerMap map;
    map.assignment.resize(scn.n_cells());
    for (const Cell& cell : scn.cells) {
        int prev = previous ? previous->assignment[cell.id - 1] : 0;
        AttributeVector attrs = compute_cell_attributes(cell.id, prev, ctx);
        std::vector<double> v = utility(attrs, betas, ctx.n_now, ctx.n_initial);
        int best = 1;
        for (size_t e = 1; e < v.size(); ++e)
            if (v[e] > v[best - 1]) best = static_cast<int>(e) + 1;
        map.assignment[cell.id - 1] = best;
    }
    return map;
}

ControllerMap allocate_cgp(const DecisionContext& ctx, const cgp::Evaluator& rule,
                           const ControllerMap* previous) {
    const Scenario& scn = *ctx.scn;
    ControllerMap map;
    map.assignment.resize(scn.n_cells());
    for (const Cell& cell : scn.cells) {
        int prev = previous ? previous->assignment[cell.id - 1] : 0;
        AttributeVector attrs = compute_cell_attributes(cell.id, prev, ctx);
        int best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (size_t e = 0; e < attrs.size(); ++e) {
            double inputs[5] = {attrs.dist_norm[e], attrs.excon_norm[e],
                                attrs.group_ratio[e], attrs.width_norm[e],
                                static_cast<double>(attrs.personal[e])};
            double score = rule(std::span<const double>(inputs, 5));
            if (std::isfinite(score) && score > best_score) {
                best_score = score;
                best = static_cast<int>(e) + 1;
            }
        }
        if (best == 0) best = prev >= 1 ? prev : 1; // all scores non-finite
        map.assignment[cell.id - 1] = best;
    }
    return map;
}

void broadcast(const ControllerMap& map, SimState& state, const Scenario& scn) {
    for (int id : state.active) {
        PedestrianState& ped = state.peds[id];
        int cell = locate_cell(ped.position, scn);
        ped.system_exit = map.assignment[cell - 1];
    }
}

void clear_indications(SimState& state) {
    for (int id : state.active) state.peds[id].system_exit = 0;
}

} // namespace cellevac
