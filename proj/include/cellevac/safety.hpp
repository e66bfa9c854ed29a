#pragma once

#include <span>
#include <vector>

namespace cellevac {

struct SafetyThresholds {
    double rho_sf = 0.0;
    double rho_lock = 1.0;
};

// Clamp-normalize a density sample into [0, 1] over [rho_sf, rho_lock].
double normalize_density(double rho, double rho_sf, double rho_lock);

// Sf_j = (-mean - gamma * variance) * 100 over the clamp-normalized series;
// variance is the population (1/N) form. Throws on an empty series.
double exit_safety(std::span<const double> density_series,
                   const SafetyThresholds& thr, double gamma);

// (mean, population variance) over per-exit safety values.
std::pair<double, double> overall_safety(std::span<const double> sf_per_exit);

struct SafetyReport {
    std::vector<double> sf_exit;
    std::vector<int> n_samples;
    double sf = 0.0;
    double sf_var = 0.0;
    double gamma = 5.0;
};

SafetyReport safety_report(const std::vector<std::vector<double>>& density_per_exit,
                           const std::vector<SafetyThresholds>& thresholds,
                           double gamma = 5.0);

} // namespace cellevac
