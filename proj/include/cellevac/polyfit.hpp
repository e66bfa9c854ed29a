#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace cellevac {

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PolyFit {
    std::vector<double> coeffs; // ascending powers of x
    std::vector<double> cov;    // p x p coefficient covariance, row-major
    double scale = 0.0;         // robust residual scale estimate
    int iterations = 0;
    int n = 0;

    int degree() const { return static_cast<int>(coeffs.size()) - 1; }
    double eval(double x) const;
    // Pointwise two-sided confidence band for the fitted mean curve.
    std::pair<double, double> confidence_band(double x, double level = 0.90) const;
};

// Ordinary weighted least squares (unit weights = OLS).
PolyFit fit_polynomial_ols(std::span<const double> xs, std::span<const double> ys,
                           int degree);

// Iteratively reweighted least squares with Tukey bisquare weights
// (tuning constant 4.685, scale 1.4826 * MAD), converged when the
// coefficient change drops below 1e-8 or after 50 iterations.
PolyFit fit_polynomial_robust(std::span<const double> xs, std::span<const double> ys,
                              int degree = 6);

} // namespace cellevac
