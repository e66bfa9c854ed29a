#include "cellevac/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cellevac {

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
    size_t n = xs.size();
    if (n < 2) return 0.0;
    double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return acc / static_cast<double>(n - 1);
}

double population_variance(std::span<const double> xs) {
    size_t n = xs.size();
    if (n == 0) return 0.0;
    double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return acc / static_cast<double>(n);
}

double quantile(std::vector<double> xs, double p) {
    if (xs.empty()) throw std::invalid_argument("quantile of empty sample");
    std::sort(xs.begin(), xs.end());
    if (p <= 0.0) return xs.front();
    if (p >= 1.0) return xs.back();
    double h = p * static_cast<double>(xs.size() - 1);
    size_t lo = static_cast<size_t>(h);
    double frac = h - static_cast<double>(lo);
    if (lo + 1 >= xs.size()) return xs.back();
    return xs[lo] * (1.0 - frac) + xs[lo + 1] * frac;
}

double median(std::vector<double> xs) {
    return quantile(std::move(xs), 0.5);
}

namespace {

// Continued-fraction core of the incomplete beta (modified Lentz).
double incbeta_cf(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-15;
    double qab = a + b;
    double qap = a + 1.0;
    double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

} // namespace

double incbeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * incbeta_cf(a, b, x) / a;
    }
    return 1.0 - front * incbeta_cf(b, a, 1.0 - x) / b;
}

double t_quantile(double p, int df) {
    if (df < 1) throw std::invalid_argument("t_quantile: df must be >= 1");
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("t_quantile: p in (0,1)");
    if (p == 0.5) return 0.0;
    bool upper = p > 0.5;
    double target = upper ? p : 1.0 - p;
    // CDF(t) = 1 - I_{df/(df+t^2)}(df/2, 1/2) / 2 for t >= 0; bisect on t.
    auto cdf = [df](double t) {
        double x = df / (df + t * t);
        return 1.0 - 0.5 * incbeta(0.5 * df, 0.5, x);
    };
    double lo = 0.0, hi = 1.0;
    while (cdf(hi) < target && hi < 1e10) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (cdf(mid) < target) lo = mid; else hi = mid;
        if (hi - lo < 1e-12 * (1.0 + hi)) break;
    }
    double t = 0.5 * (lo + hi);
    return upper ? t : -t;
}

double t_ci_half_width(double confidence, int n, double sample_stddev) {
    if (n < 2) return std::numeric_limits<double>::infinity();
    double p = 1.0 - (1.0 - confidence) / 2.0;
    return t_quantile(p, n - 1) * sample_stddev / std::sqrt(static_cast<double>(n));
}

} // namespace cellevac
