#pragma once

#include <span>
#include <vector>

namespace cellevac {

double mean(std::span<const double> xs);
// Unbiased (n-1) variance; 0 for n < 2.
double sample_variance(std::span<const double> xs);
// 1/N variance.
double population_variance(std::span<const double> xs);
double median(std::vector<double> xs);
// Linear-interpolation quantile (type 7) on an unsorted copy, p in [0,1].
double quantile(std::vector<double> xs, double p);

// Regularized incomplete beta I_x(a, b).
double incbeta(double a, double b, double x);

// Student-t inverse CDF: t such that P(T_df <= t) = p.
double t_quantile(double p, int df);

// Two-sided CI half-width at `confidence` for a sample mean.
double t_ci_half_width(double confidence, int n, double sample_stddev);

} // namespace cellevac
