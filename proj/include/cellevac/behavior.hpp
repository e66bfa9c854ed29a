#pragma once

#include "cellevac/motion.hpp"
#include "cellevac/scenario.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cellevac {

// Coefficients of the systematic utility, one set per population group.
struct BetaConfig {
    double beta_d = 0.0;   // distance
    double beta_g = 0.0;   // group ratio
    double beta_e = 0.0;   // exit congestion
    double beta_w = 0.0;   // exit width
    double beta_p = 0.0;   // decision keeping (time-modulated)
    double beta_sys = 0.0; // guidance indication

    void validate() const;
};

// Named presets exposed by the config/CLI surface.
BetaConfig beta_preset(const std::string& name);
inline BetaConfig beta_standard() { return {-28.0, 0.6, -0.5, 0.6, 0.0, 0.0}; }
inline BetaConfig beta_optimal() { return {-28.863, 9.909, -2.801, 0.0, 8.515, 0.0}; }
inline BetaConfig beta_cellevac() { return {-17.723, -2.181, -1.671, 1.064, 2.594, 0.0}; }
inline BetaConfig beta_follower() { return {0.0, 0.0, 0.0, 0.0, 0.0, 1.0}; }

// Per-exit attribute values for one decision maker (pedestrian or cell).
struct AttributeVector {
    std::vector<double> dist_norm;   // [0,1]
    std::vector<double> width_norm;  // (0,1]
    std::vector<double> group_ratio; // [0,1)
    std::vector<double> excon_norm;  // >= 0
    std::vector<uint8_t> personal;   // current choice indicator
    std::vector<uint8_t> system;     // guidance indicator

    size_t size() const { return dist_norm.size(); }
};

struct ChoiceOutcome {
    int exit_id = 0;
    bool changed = false;
    std::vector<double> probabilities;
};

// Read-only inputs shared by every decision of one cycle.
struct DecisionContext {
    const Scenario* scn = nullptr;
    const DistanceTable* dist = nullptr;
    const std::vector<double>* critical_density = nullptr; // per exit
    std::vector<int> occupancy;            // per cell, at this tick
    std::vector<double> exit_density;      // per exit, at this tick
    std::vector<std::vector<int>> group_sizes; // [exit-1][cell-1]
    const std::vector<int>* controller_assignment = nullptr; // per cell, or null
    int n_now = 0;
    int n_initial = 0;
};

// Builds occupancy, densities and group sizes from the live state.
DecisionContext make_decision_context(const SimState& state, const Scenario& scn,
                                      const DistanceTable& dist,
                                      const std::vector<double>& critical_density,
                                      const std::vector<int>* controller_assignment,
                                      int n_initial);

// G for every (cell, exit): occupancy of the cell plus all cells strictly
// closer to the exit.
std::vector<std::vector<int>> group_size_table(const std::vector<int>& occupancy,
                                               const DistanceTable& dist);

AttributeVector compute_attributes(const PedestrianState& ped,
                                   const DecisionContext& ctx);

// Cell-level attributes for the controller: distance from the cell center,
// PERSONAL = previous assignment indicator, no SYSTEM term.
AttributeVector compute_cell_attributes(int cell_id, int previous_assignment,
                                        const DecisionContext& ctx);

double beta_p_of_t(double beta_p, int n_now, int n_initial);

std::vector<double> utility(const AttributeVector& attrs, const BetaConfig& betas,
                            int n_now, int n_initial);

// Overflow-safe softmax.
std::vector<double> choice_probabilities(std::span<const double> v);

ChoiceOutcome decide(PedestrianState& ped, const std::vector<double>& probabilities,
                     Rng& rng);

// One 5 s decision cycle: every active pedestrian recomputes attributes and
// redecides. Compliant pedestrians use the follower preset.
void decision_cycle(SimState& state, const DecisionContext& ctx,
                    const BetaConfig& noncompliant_betas, Rng& rng);

// Decide a target for one pedestrian immediately (used for injections).
void decide_pedestrian(PedestrianState& ped, const DecisionContext& ctx,
                       const BetaConfig& noncompliant_betas, Rng& rng);

} // namespace cellevac
