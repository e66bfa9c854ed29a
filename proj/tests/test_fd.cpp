#include "cellevac/fd.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace cellevac;

TEST_CASE("triangular injection schedule") {
    FDProtocolConfig cfg; // 3600 s, 4 cycles of 900 s, lock at 3000 s
    double peak = 6.0;
    CHECK(fd_injection_rate(0.0, peak, cfg) == doctest::Approx(0.0));
    CHECK(fd_injection_rate(450.0, peak, cfg) == doctest::Approx(peak / 4.0));
    CHECK(fd_injection_rate(900.0, peak, cfg) == doctest::Approx(0.0));
    CHECK(fd_injection_rate(225.0, peak, cfg) == doctest::Approx(peak / 8.0));
    CHECK(fd_injection_rate(1350.0, peak, cfg) == doctest::Approx(peak / 4.0));
    CHECK(fd_injection_rate(3700.0, peak, cfg) == doctest::Approx(0.0));
    // Integral over the horizon equals cycles * peak/4 * cycle/2 per stream.
    double integral = 0.0;
    for (int i = 0; i < 36000; ++i) integral += fd_injection_rate(i * 0.1, peak, cfg) * 0.1;
    CHECK(integral == doctest::Approx(4.0 * (peak / 4.0) * 450.0).epsilon(1e-3));
}

TEST_CASE("short protocol run emits samples with a lock tail") {
    Scenario scn = load_scenario(testutil::data_path("desk.json"));
    FDProtocolConfig cfg;
    cfg.horizon_s = 120.0;
    cfg.lock_at_s = 80.0;
    cfg.cycles = 1;
    double peak = 2.0; // below gate capacity: free-flow branch only

    FDSampleSet samples = run_fd_protocol(scn, 1, peak, 99, cfg);
    CHECK(samples.size() == 60);
    CHECK(samples.exit_id == 1);

    int lock_count = 0;
    double prelock_max_density = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(samples.density[i] >= 0.0);
        CHECK(samples.flow[i] >= 0.0);
        if (samples.lock_mask[i]) lock_count++;
        else prelock_max_density = std::max(prelock_max_density, samples.density[i]);
    }
    CHECK(lock_count == 20); // t in (80, 120]
    // After the in-transit pedestrians drain, only a pressure-driven trickle
    // remains: an order of magnitude below the open-gate flow.
    double late_lock_flow = 0.0;
    double open_peak_flow = 0.0;
    for (size_t i = 0; i < samples.size(); ++i)
        if (!samples.lock_mask[i]) open_peak_flow = std::max(open_peak_flow, samples.flow[i]);
    for (size_t i = samples.size() - 10; i < samples.size(); ++i)
        late_lock_flow += samples.flow[i];
    late_lock_flow /= 10.0;
    CHECK(late_lock_flow < 0.5);
    CHECK(late_lock_flow < 0.2 * open_peak_flow);
    CHECK(samples.density.back() > prelock_max_density);
    // Sub-capacity run keeps the approach uncongested before the lock.
    CHECK(prelock_max_density < 1.0);

    // Deterministic for a given seed.
    FDSampleSet again = run_fd_protocol(scn, 1, peak, 99, cfg);
    CHECK(again.density == samples.density);
    CHECK(again.flow == samples.flow);
}

TEST_CASE("threshold extraction recovers a synthetic analytic peak") {
    // Free-flow branch: q = 1.2 rho (1 - rho/4), capacity peak at rho = 2.
    FDSampleSet samples;
    samples.exit_id = 1;
    Rng rng(7);
    for (int i = 0; i < 900; ++i) {
        double rho = 3.2 * i / 900.0;
        samples.time.push_back(2.0 * i);
        samples.density.push_back(rho);
        samples.flow.push_back(1.2 * rho * (1.0 - rho / 4.0));
        samples.lock_mask.push_back(0);
    }
    // Congested-branch cluster around rho = 3.0.
    for (int i = 0; i < 300; ++i) {
        double rho = 3.0 + rng.uniform(-0.08, 0.08);
        samples.time.push_back(1800.0 + 2.0 * i);
        samples.density.push_back(rho);
        samples.flow.push_back(1.2 * rho * (1.0 - rho / 4.0) + rng.uniform(-0.02, 0.02));
        samples.lock_mask.push_back(0);
    }
    // Lock phase accumulating toward rho ~ 4.
    for (int i = 0; i < 300; ++i) {
        double rho = 3.7 + 0.4 * i / 300.0;
        samples.time.push_back(2600.0 + 2.0 * i);
        samples.density.push_back(rho);
        samples.flow.push_back(0.0);
        samples.lock_mask.push_back(1);
    }

    std::vector<double> xs, ys;
    for (size_t i = 0; i < samples.size(); ++i)
        if (!samples.lock_mask[i]) {
            xs.push_back(samples.density[i]);
            ys.push_back(samples.flow[i]);
        }
    PolyFit fit = fit_polynomial_robust(xs, ys, 6);
    Thresholds thr = extract_thresholds(fit, samples);

    CHECK(thr.rho_crit == doctest::Approx(2.0).epsilon(0.05 / 2.0));
    CHECK(thr.rho_over == doctest::Approx(3.05).epsilon(0.15 / 3.0));
    CHECK(thr.rho_lock == doctest::Approx(4.08).epsilon(0.02));
    CHECK(thr.rho_crit < thr.rho_over);
    CHECK(thr.rho_over < thr.rho_lock);

    double sf = rho_sf(thr.rho_crit, thr.rho_over);
    CHECK(sf > thr.rho_crit);
    CHECK(sf < thr.rho_over);
}

TEST_CASE("threshold extraction fails without the required phases") {
    FDSampleSet flat;
    flat.exit_id = 1;
    for (int i = 0; i < 200; ++i) {
        double rho = 2.0 * i / 200.0;
        flat.time.push_back(2.0 * i);
        flat.density.push_back(rho);
        flat.flow.push_back(0.5 * rho); // monotone: no capacity peak
        flat.lock_mask.push_back(i >= 180);
    }
    std::vector<double> xs, ys;
    for (int i = 0; i < 180; ++i) {
        xs.push_back(flat.density[i]);
        ys.push_back(flat.flow[i]);
    }
    PolyFit fit = fit_polynomial_ols(xs, ys, 6);
    CHECK_THROWS_WITH_AS(extract_thresholds(fit, flat),
                         doctest::Contains("higher peak flow"), ThresholdError);

    FDSampleSet no_lock = flat;
    for (auto& m : no_lock.lock_mask) m = 0;
    CHECK_THROWS_WITH_AS(extract_thresholds(fit, no_lock),
                         doctest::Contains("no lock-phase"), ThresholdError);
}

TEST_CASE("rho_sf weighted average") {
    CHECK(rho_sf(1.0, 2.0) == doctest::Approx(1.1));
    double rho = 1.7, eps = 0.3;
    CHECK(rho_sf(rho, rho + eps) == doctest::Approx(rho + 0.1 * eps));
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        double a = rng.uniform(0.5, 3.0);
        double b = a + rng.uniform(0.01, 2.0);
        double v = rho_sf(a, b);
        CHECK(v > a);
        CHECK(v < b);
    }
}

TEST_CASE("exit dynamics validation and calibration round-trip") {
    ExitDynamics d;
    d.exit_id = 1;
    d.width = 2.5;
    d.poly_coeffs = {0.1, 1.0, -0.2, 0.0, 0.0, 0.0, 0.0};
    d.rho_crit = 2.0;
    d.rho_over = 3.0;
    d.rho_lock = 4.0;
    d.rho_sf = rho_sf(2.0, 3.0);
    CHECK_NOTHROW(d.validate());

    ExitDynamics bad = d;
    bad.rho_over = 1.0;
    CHECK_THROWS_AS(bad.validate(), ThresholdError);

    ExitDynamics d2 = d;
    d2.exit_id = 2;
    d2.width = 6.0;
    std::string text = serialize_calibration({d, d2}, "desk");
    auto parsed = parse_calibration(text);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].exit_id == 1);
    CHECK(parsed[1].width == doctest::Approx(6.0));
    CHECK(parsed[0].rho_sf == doctest::Approx(d.rho_sf));
    for (int k = 0; k < 7; ++k)
        CHECK(parsed[0].poly_coeffs[k] == doctest::Approx(d.poly_coeffs[k]));
}
