#pragma once

#include "cellevac/behavior.hpp"
#include "cellevac/cgp.hpp"

#include <optional>
#include <vector>

namespace cellevac {

struct ControllerMap {
    std::vector<int> assignment; // per cell (index = id - 1), exit id
    double issued_at = 0.0;
};

enum class ControllerMode { Off, Mlm, Cgp };

struct ControllerConfig {
    ControllerMode mode = ControllerMode::Off;
    BetaConfig betas;                       // MLM mode; beta_sys unused
    std::optional<cgp::Genotype> genotype;  // CGP mode
    double period_s = 5.0;

    void validate() const;
};

// Deterministic per-cell argmax of the controller's utility; ties go to the
// lowest exit id. PERSONAL is the previous assignment of the cell.
ControllerMap allocate_mlm(const DecisionContext& ctx, const BetaConfig& betas,
                           const ControllerMap* previous);

// Same cell-level attributes scored by a CGP rule on inputs (D, E, G, W, P);
// non-finite scores are never selected, and a cell whose scores are all
// non-finite keeps its previous assignment.
ControllerMap allocate_cgp(const DecisionContext& ctx, const cgp::Evaluator& rule,
                           const ControllerMap* previous);

// Push the live map to every active pedestrian's indicator; pedestrians act
// on it at their next decision cycle.
void broadcast(const ControllerMap& map, SimState& state, const Scenario& scn);

void clear_indications(SimState& state);

} // namespace cellevac
