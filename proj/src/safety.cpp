#include "cellevac/safety.hpp"

#include "cellevac/stats.hpp"

#include <algorithm>
#include <stdexcept>

namespace cellevac {

double normalize_density(double rho, double rho_sf, double rho_lock) {
    return (std::max(rho, rho_sf) - rho_sf) / (rho_lock - rho_sf);
}

double exit_safety(std::span<const double> density_series,
                   const SafetyThresholds& thr, double gamma) {
    if (density_series.empty())
        throw std::invalid_argument("exit_safety: empty density series");
    std::vector<double> norm(density_series.size());
    for (size_t i = 0; i < density_series.size(); ++i)
        norm[i] = normalize_density(density_series[i], thr.rho_sf, thr.rho_lock);
    double m = mean(norm);
    double var = population_variance(norm);
    return (-m - gamma * var) * 100.0;
}

std::pair<double, double> overall_safety(std::span<const double> sf_per_exit) {
    if (sf_per_exit.empty())
        throw std::invalid_argument("overall_safety: no exits");
    return {mean(sf_per_exit), population_variance(sf_per_exit)};
}

SafetyReport safety_report(const std::vector<std::vector<double>>& density_per_exit,
                           const std::vector<SafetyThresholds>& thresholds,
                           double gamma) {
    SafetyReport rep;
    rep.gamma = gamma;
    for (size_t e = 0; e < density_per_exit.size(); ++e) {
        rep.sf_exit.push_back(exit_safety(density_per_exit[e], thresholds[e], gamma));
        rep.n_samples.push_back(static_cast<int>(density_per_exit[e].size()));
    }
    auto [sf, var] = overall_safety(rep.sf_exit);
    rep.sf = sf;
    rep.sf_var = var;
    return rep;
}

} // namespace cellevac
