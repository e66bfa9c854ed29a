#include "cellevac/polyfit.hpp"

#include "cellevac/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cellevac {

namespace {

// Householder QR least squares for a dense n x p system (p is tiny here).
// A is row-major and consumed in place; returns solution, fills r_inv with
// R^{-1} (upper triangular, p x p row-major) for covariance use.
std::vector<double> qr_solve(std::vector<double>& A, std::vector<double>& b,
                             int n, int p, std::vector<double>& r_inv) {
    for (int k = 0; k < p; ++k) {
        double norm = 0.0;
        for (int i = k; i < n; ++i) norm += A[i * p + k] * A[i * p + k];
        norm = std::sqrt(norm);
        if (norm < 1e-12)
            throw FitError("fit: rank-deficient design (degenerate support)");
        double alpha = A[k * p + k] > 0 ? -norm : norm;
        double vk = A[k * p + k] - alpha;
        double beta = 1.0 / (alpha * vk); // -2 / v^T v

        // Apply reflector to remaining columns and to b.
        for (int j = k + 1; j < p; ++j) {
            double dot = vk * A[k * p + j];
            for (int i = k + 1; i < n; ++i) dot += A[i * p + k] * A[i * p + j];
            double coef = beta * dot;
            A[k * p + j] += coef * vk;
            for (int i = k + 1; i < n; ++i) A[i * p + j] += coef * A[i * p + k];
        }
        double dotb = vk * b[k];
        for (int i = k + 1; i < n; ++i) dotb += A[i * p + k] * b[i];
        double coefb = beta * dotb;
        b[k] += coefb * vk;
        for (int i = k + 1; i < n; ++i) b[i] += coefb * A[i * p + k];

        A[k * p + k] = alpha;
        for (int i = k + 1; i < n; ++i) A[i * p + k] = 0.0; // store R only
    }

    std::vector<double> x(p, 0.0);
    for (int k = p - 1; k >= 0; --k) {
        double acc = b[k];
        for (int j = k + 1; j < p; ++j) acc -= A[k * p + j] * x[j];
        if (std::abs(A[k * p + k]) < 1e-12)
            throw FitError("fit: rank-deficient design (degenerate support)");
        x[k] = acc / A[k * p + k];
    }

    // Invert R by back substitution on identity columns.
    r_inv.assign(static_cast<size_t>(p) * p, 0.0);
    for (int col = 0; col < p; ++col) {
        for (int k = p - 1; k >= 0; --k) {
            double acc = (k == col) ? 1.0 : 0.0;
            for (int j = k + 1; j < p; ++j) acc -= A[k * p + j] * r_inv[j * p + col];
            r_inv[k * p + col] = acc / A[k * p + k];
        }
    }
    return x;
}

struct WlsResult {
    std::vector<double> coeffs; // u-domain
    std::vector<double> cov;    // u-domain, unscaled by sigma^2
};

WlsResult weighted_ls(std::span<const double> us, std::span<const double> ys,
                      std::span<const double> weights, int degree) {
    int n = static_cast<int>(us.size());
    int p = degree + 1;
    std::vector<double> A(static_cast<size_t>(n) * p);
    std::vector<double> b(n);
    for (int i = 0; i < n; ++i) {
        double sw = std::sqrt(weights[i]);
        double v = 1.0;
        for (int j = 0; j < p; ++j) {
            A[i * static_cast<size_t>(p) + j] = sw * v;
            v *= us[i];
        }
        b[i] = sw * ys[i];
    }
    // Column equilibration for conditioning.
    std::vector<double> colnorm(p, 0.0);
    for (int j = 0; j < p; ++j) {
        for (int i = 0; i < n; ++i) colnorm[j] += A[i * static_cast<size_t>(p) + j] *
                                                  A[i * static_cast<size_t>(p) + j];
        colnorm[j] = std::sqrt(colnorm[j]);
        if (colnorm[j] < 1e-300) colnorm[j] = 1.0;
        for (int i = 0; i < n; ++i) A[i * static_cast<size_t>(p) + j] /= colnorm[j];
    }

    std::vector<double> r_inv;
    std::vector<double> sol = qr_solve(A, b, n, p, r_inv);

    WlsResult res;
    res.coeffs.resize(p);
    for (int j = 0; j < p; ++j) res.coeffs[j] = sol[j] / colnorm[j];

    // (X^T W X)^{-1} = R^{-1} R^{-T}, undoing the column scaling.
    res.cov.assign(static_cast<size_t>(p) * p, 0.0);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) {
            double acc = 0.0;
            for (int k = 0; k < p; ++k)
                acc += r_inv[i * p + k] * r_inv[j * p + k];
            res.cov[i * static_cast<size_t>(p) + j] = acc / (colnorm[i] * colnorm[j]);
        }
    return res;
}

} // namespace

double PolyFit::eval(double x) const {
    double acc = 0.0;
    for (size_t j = coeffs.size(); j-- > 0;) acc = acc * x + coeffs[j];
    return acc;
}

std::pair<double, double> PolyFit::confidence_band(double x, double level) const {
    int p = static_cast<int>(coeffs.size());
    std::vector<double> v(p);
    double xp = 1.0;
    for (int j = 0; j < p; ++j) {
        v[j] = xp;
        xp *= x;
    }
    double var = 0.0;
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) var += v[i] * cov[i * static_cast<size_t>(p) + j] * v[j];
    var = std::max(var, 0.0);
    int dof = std::max(1, n - p);
    double t = t_quantile(0.5 + level / 2.0, dof);
    double y = eval(x);
    double half = t * std::sqrt(var);
    return {y - half, y + half};
}

namespace {

PolyFit assemble_fit(const WlsResult& wls, std::span<const double> xs,
                     std::span<const double> ys, std::span<const double> weights,
                     double xscale, int degree, double robust_scale, int iterations) {
    int n = static_cast<int>(xs.size());
    int p = degree + 1;
    PolyFit fit;
    fit.coeffs.resize(p);
    double sc = 1.0;
    for (int j = 0; j < p; ++j) {
        fit.coeffs[j] = wls.coeffs[j] / sc;
        sc *= xscale;
    }

    double wrss = 0.0;
    for (int i = 0; i < n; ++i) {
        double r = ys[i] - fit.eval(xs[i]);
        wrss += weights[i] * r * r;
    }
    // The MAD-based scale stays consistent under downweighting; fall back to
    // the weighted RSS for plain least squares (scale 0).
    double sigma2 = robust_scale > 0.0 ? robust_scale * robust_scale
                                       : (n > p ? wrss / (n - p) : 0.0);

    fit.cov.assign(static_cast<size_t>(p) * p, 0.0);
    double si = 1.0;
    for (int i = 0; i < p; ++i) {
        double sj = 1.0;
        for (int j = 0; j < p; ++j) {
            fit.cov[i * static_cast<size_t>(p) + j] =
                sigma2 * wls.cov[i * static_cast<size_t>(p) + j] / (si * sj);
            sj *= xscale;
        }
        si *= xscale;
    }
    fit.scale = robust_scale;
    fit.iterations = iterations;
    fit.n = n;
    return fit;
}

} // namespace

PolyFit fit_polynomial_ols(std::span<const double> xs, std::span<const double> ys,
                           int degree) {
    if (xs.size() != ys.size()) throw FitError("fit: x/y size mismatch");
    int n = static_cast<int>(xs.size());
    int p = degree + 1;
    if (n < p) throw FitError("fit: fewer samples than coefficients");

    double xscale = 0.0;
    for (double x : xs) xscale = std::max(xscale, std::abs(x));
    if (xscale == 0.0) xscale = 1.0;
    std::vector<double> us(n);
    for (int i = 0; i < n; ++i) us[i] = xs[i] / xscale;

    std::vector<double> w(n, 1.0);
    WlsResult wls = weighted_ls(us, ys, w, degree);
    return assemble_fit(wls, xs, ys, w, xscale, degree, 0.0, 1);
}

PolyFit fit_polynomial_robust(std::span<const double> xs, std::span<const double> ys,
                              int degree) {
    if (xs.size() != ys.size()) throw FitError("fit: x/y size mismatch");
    int n = static_cast<int>(xs.size());
    int p = degree + 1;
    if (n < p) throw FitError("fit: fewer samples than coefficients");

    constexpr double tuning = 4.685;
    constexpr double coef_tol = 1e-8;
    constexpr int max_iter = 50;

    double xscale = 0.0;
    for (double x : xs) xscale = std::max(xscale, std::abs(x));
    if (xscale == 0.0) xscale = 1.0;
    std::vector<double> us(n);
    for (int i = 0; i < n; ++i) us[i] = xs[i] / xscale;

    double yscale = 0.0;
    for (double y : ys) yscale = std::max(yscale, std::abs(y));

    std::vector<double> w(n, 1.0);
    std::vector<double> prev;
    WlsResult wls;
    double s = 0.0;
    int it = 0;
    for (it = 1; it <= max_iter; ++it) {
        wls = weighted_ls(us, ys, w, degree);
        if (!prev.empty()) {
            double delta = 0.0;
            for (int j = 0; j < p; ++j) delta = std::max(delta, std::abs(wls.coeffs[j] - prev[j]));
            if (delta < coef_tol) break;
        }
        prev = wls.coeffs;

        std::vector<double> r(n);
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j = p - 1; j >= 0; --j) acc = acc * us[i] + wls.coeffs[j];
            r[i] = ys[i] - acc;
        }
        std::vector<double> absdev(n);
        double med = median(r);
        for (int i = 0; i < n; ++i) absdev[i] = std::abs(r[i] - med);
        s = 1.4826 * median(absdev);
        if (s < 1e-12 * (1.0 + yscale)) break; // essentially exact fit

        for (int i = 0; i < n; ++i) {
            double u = r[i] / (tuning * s);
            w[i] = std::abs(u) < 1.0 ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
        }
        // Keep the system well posed if the weights collapse.
        double wtot = 0.0;
        for (double wi : w) wtot += wi;
        if (wtot < p) {
            for (double& wi : w) wi = std::max(wi, 1e-6);
        }
    }
    return assemble_fit(wls, xs, ys, w, xscale, degree, s, std::min(it, max_iter));
}

} // namespace cellevac
