#include "cellevac/behavior.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cellevac {

void BetaConfig::validate() const {
    for (double v : {beta_d, beta_g, beta_e, beta_w, beta_p, beta_sys})
        if (!std::isfinite(v))
            throw ConfigError("BetaConfig: coefficients must be finite");
    if (beta_p < 0.0) throw ConfigError("BetaConfig: beta_p must be >= 0");
}

BetaConfig beta_preset(const std::string& name) {
    std::string n;
    for (char c : name) n += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (n == "standard") return beta_standard();
    if (n == "optimal") return beta_optimal();
    if (n == "cellevac") return beta_cellevac();
    if (n == "follower") return beta_follower();
    if (n == "zero") return {};
    throw ConfigError("unknown beta preset: " + name);
}

std::vector<std::vector<int>> group_size_table(const std::vector<int>& occupancy,
                                               const DistanceTable& dist) {
    size_t E = dist.cells_by_distance.size();
    size_t C = occupancy.size();
    std::vector<std::vector<int>> g(E, std::vector<int>(C, 0));
    for (size_t e = 0; e < E; ++e) {
        // Prefix sums over the distance-sorted order, honoring strict ties.
        std::vector<int> prefix(C + 1, 0);
        const auto& order = dist.cells_by_distance[e];
        for (size_t k = 0; k < C; ++k)
            prefix[k + 1] = prefix[k] + occupancy[order[k] - 1];
        for (size_t c = 0; c < C; ++c) {
            int closer = dist.strictly_closer_count[e][c];
            g[e][c] = occupancy[c] + prefix[closer];
        }
    }
    return g;
}

DecisionContext make_decision_context(const SimState& state, const Scenario& scn,
                                      const DistanceTable& dist,
                                      const std::vector<double>& critical_density,
                                      const std::vector<int>* controller_assignment,
                                      int n_initial) {
    DecisionContext ctx;
    ctx.scn = &scn;
    ctx.dist = &dist;
    ctx.critical_density = &critical_density;
    ctx.occupancy = cell_occupancy(state, scn);
    ctx.exit_density.resize(scn.exits.size());
    for (const ExitGate& g : scn.exits)
        ctx.exit_density[g.id - 1] = exit_density_from_occupancy(ctx.occupancy, scn, g.id);
    ctx.group_sizes = group_size_table(ctx.occupancy, dist);
    ctx.controller_assignment = controller_assignment;
    ctx.n_now = state.active_count();
    ctx.n_initial = n_initial;
    return ctx;
}

namespace {

double max_width(const Scenario& scn) {
    double w = 0.0;
    for (const ExitGate& g : scn.exits) w = std::max(w, g.width);
    return w;
}

void fill_shared_attributes(AttributeVector& a, const DecisionContext& ctx,
                            int cell_id) {
    const Scenario& scn = *ctx.scn;
    size_t E = scn.exits.size();
    double wmax = max_width(scn);

    a.width_norm.resize(E);
    a.group_ratio.resize(E);
    a.excon_norm.resize(E);
    for (size_t e = 0; e < E; ++e) {
        a.width_norm[e] = scn.exits[e].width / wmax;
        a.excon_norm[e] = ctx.exit_density[e] / (*ctx.critical_density)[e];
    }
    int gmin = std::numeric_limits<int>::max();
    for (size_t e = 0; e < E; ++e)
        gmin = std::min(gmin, ctx.group_sizes[e][cell_id - 1]);
    for (size_t e = 0; e < E; ++e) {
        int g = ctx.group_sizes[e][cell_id - 1];
        a.group_ratio[e] = g > 0 ? static_cast<double>(g - gmin) / g : 0.0;
    }
}

} // namespace

AttributeVector compute_attributes(const PedestrianState& ped,
                                   const DecisionContext& ctx) {
    const Scenario& scn = *ctx.scn;
    size_t E = scn.exits.size();
    int cell = locate_cell(ped.position, scn);

    AttributeVector a;
    a.dist_norm.resize(E);
    for (size_t e = 0; e < E; ++e) {
        double d = distance_to_exit(ped.position, scn.exits[e]);
        a.dist_norm[e] = std::min(1.0, d / ctx.dist->max_distance);
    }
    fill_shared_attributes(a, ctx, cell);

    a.personal.assign(E, 0);
    if (ped.target_exit >= 1) a.personal[ped.target_exit - 1] = 1;
    a.system.assign(E, 0);
    if (ctx.controller_assignment && ped.system_exit >= 1)
        a.system[ped.system_exit - 1] = 1;
    return a;
}

AttributeVector compute_cell_attributes(int cell_id, int previous_assignment,
                                        const DecisionContext& ctx) {
    const Scenario& scn = *ctx.scn;
    size_t E = scn.exits.size();

    AttributeVector a;
    a.dist_norm.resize(E);
    for (size_t e = 0; e < E; ++e)
        a.dist_norm[e] = ctx.dist->cell_to_exit[cell_id - 1][e] / ctx.dist->max_distance;
    fill_shared_attributes(a, ctx, cell_id);

    a.personal.assign(E, 0);
    if (previous_assignment >= 1) a.personal[previous_assignment - 1] = 1;
    a.system.assign(E, 0); // controller utility carries no SYSTEM term
    return a;
}

double beta_p_of_t(double beta_p, int n_now, int n_initial) {
    if (n_initial <= 0) return beta_p; // everyone-out limit of the schedule
    double ratio = static_cast<double>(n_now) / static_cast<double>(n_initial);
    return beta_p * (1.0 - ratio);
}

std::vector<double> utility(const AttributeVector& attrs, const BetaConfig& betas,
                            int n_now, int n_initial) {
    double bp_t = beta_p_of_t(betas.beta_p, n_now, n_initial);
    size_t E = attrs.size();
    std::vector<double> v(E);
    for (size_t e = 0; e < E; ++e) {
        v[e] = betas.beta_d * attrs.dist_norm[e] +
               betas.beta_w * attrs.width_norm[e] +
               betas.beta_g * attrs.group_ratio[e] +
               betas.beta_e * attrs.excon_norm[e] +
               bp_t * attrs.personal[e] +
               betas.beta_sys * attrs.system[e];
    }
    return v;
}

std::vector<double> choice_probabilities(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("choice_probabilities: empty utility vector");
    double vmax = v[0];
    for (double x : v) vmax = std::max(vmax, x);
    std::vector<double> p(v.size());
    double z = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        p[i] = std::exp(v[i] - vmax);
        z += p[i];
    }
    for (double& x : p) x /= z;
    return p;
}

ChoiceOutcome decide(PedestrianState& ped, const std::vector<double>& probabilities,
                     Rng& rng) {
    double u = rng.uniform();
    double cum = 0.0;
    int chosen = static_cast<int>(probabilities.size()); // fallback: last exit
    for (size_t i = 0; i < probabilities.size(); ++i) {
        cum += probabilities[i];
        if (u < cum) {
            chosen = static_cast<int>(i) + 1;
            break;
        }
    }
    ChoiceOutcome out;
    out.exit_id = chosen;
    out.changed = ped.target_exit >= 1 && chosen != ped.target_exit;
    out.probabilities = probabilities;
    if (out.changed) ped.decision_changes += 1;
    ped.target_exit = chosen;
    return out;
}

void decide_pedestrian(PedestrianState& ped, const DecisionContext& ctx,
                       const BetaConfig& noncompliant_betas, Rng& rng) {
    static const BetaConfig follower = beta_follower();
    const BetaConfig& use = ped.compliant ? follower : noncompliant_betas;
    AttributeVector attrs = compute_attributes(ped, ctx);
    std::vector<double> v = utility(attrs, use, ctx.n_now, ctx.n_initial);
    std::vector<double> p = choice_probabilities(v);
    decide(ped, p, rng);
}

void decision_cycle(SimState& state, const DecisionContext& ctx,
                    const BetaConfig& noncompliant_betas, Rng& rng) {
    for (int id : state.active)
        decide_pedestrian(state.peds[id], ctx, noncompliant_betas, rng);
}

} // namespace cellevac
