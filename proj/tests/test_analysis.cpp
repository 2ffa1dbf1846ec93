#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "scar/analysis.hpp"
#include "scar/classical.hpp"
#include "scar/dynamics.hpp"
#include "scar/error.hpp"

using namespace scar;

namespace {

constexpr double kPi = std::numbers::pi;

struct Small {
    Domain domain = Domain::quarter_stadium();
    Grid grid = build_grid(domain, 0.04);
    EigenBasis basis = solve_eigensystem(grid, 1e9);
};

const Small& small() {
    static const Small s;
    return s;
}

// Lorentz-smoothed average sum_{n,m} w_n phi_m^2 K(E_n - E_m) on every dof.
Eigen::VectorXd smoothed_average(const EigenBasis& b, std::span<const double> w, std::size_t lo, std::size_t hi, double eps) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(b.states.rows());
    for (std::size_t m = lo; m < hi; ++m) {
        double k = 0.0;
        for (std::size_t n = lo; n < hi; ++n) {
            const double d = b.energies[n] - b.energies[m];
            k += w[n - lo] * 4 * eps * eps / (d * d + 4 * eps * eps);
        }
        out += k * b.states.col(static_cast<Eigen::Index>(m)).cwiseAbs2();
    }
    return out;
}

std::vector<double> trapezoid_weights(const std::vector<double>& x) {
    std::vector<double> w(x.size(), 0.0);
    for (std::size_t i = 1; i < x.size(); ++i) {
        w[i - 1] += 0.5 * (x[i] - x[i - 1]);
        w[i] += 0.5 * (x[i] - x[i - 1]);
    }
    return w;
}

double integrate(const std::vector<double>& x, const std::vector<double>& f) {
    const auto w = trapezoid_weights(x);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f[i];
    return s;
}

}

TEST_CASE("Lorentzian deltas") {
    for (double eps : {0.01, 1.0, 3.412}) {
        for (double x : {-7.0, -0.3, 0.0, 1e-4, 2.5, 40.0}) {
            const double d = delta_lorentz(x, eps);
            CHECK(delta_bar(x, eps) == doctest::Approx(2 * kPi * eps * d * d).epsilon(1e-15));
        }
        CHECK(delta_bar(0.0, eps) == doctest::Approx(2 / (kPi * eps)).epsilon(1e-15));
        CHECK(delta_lorentz(0.0, eps) == doctest::Approx(1 / (kPi * eps)).epsilon(1e-15));
        boost::math::quadrature::sinh_sinh<double> q;
        // Integrate in units of eps so the peak has unit width.
        const double I = q.integrate([&](double u) { return eps * delta_bar(eps * u, eps); });
        CHECK(std::abs(I - 1.0) < 1e-9);
        const double J = q.integrate([&](double u) { return eps * delta_lorentz(eps * u, eps); });
        CHECK(std::abs(J - 1.0) < 1e-9);
        // Lorentzian on a wide finite grid: tail beyond +-X is (2/pi) eps / X.
        const auto E = energy_grid(-2000 * eps, 2000 * eps, eps / 20);
        std::vector<double> f;
        for (double e : E) f.push_back(delta_lorentz(e, eps));
        CHECK(std::abs(integrate(E, f) - 1.0) < 1e-3);
    }
}

TEST_CASE("energy grid") {
    const auto g = energy_grid(1.0, 2.0, 0.25);
    REQUIRE(g.size() == 5);
    CHECK(g.back() == doctest::Approx(2.0));
    CHECK_THROWS_AS(energy_grid(0, 1, 0), Error);
    CHECK_THROWS_AS(energy_grid(1, 0, 0.1), Error);
}

TEST_CASE("SWSF and measured window") {
    const std::vector<double> E{10.0, 13.0, 13.5, 20.0};
    const std::vector<double> w{0.1, 0.4, 0.3, 0.15};
    const double eps = 0.2;

    const std::vector<double> at{13.0};
    const std::vector<double> one{0.4};
    const std::vector<double> lvl{13.0};
    CHECK(swsf(one, lvl, eps, at).values[0] == doctest::Approx(0.4 / (kPi * eps)).epsilon(1e-14));

    const auto grid = energy_grid(-400, 440, 0.01);
    const SmoothedSpectrum p = swsf(w, E, eps, grid);
    CHECK(p.kind == SpectrumKind::P_eps);
    CHECK(p.epsilon == eps);
    CHECK(std::abs(integrate(p.E, p.values) - 0.95) < 1e-3);
    const double bound = 0.95 / (kPi * eps);
    for (double v : p.values) {
        CHECK(v >= 0.0);
        CHECK(v <= bound);
    }

    const SmoothedSpectrum m = window_measured(p);
    CHECK(m.kind == SpectrumKind::WindowMeasured);
    for (std::size_t i = 0; i < m.values.size(); i += 997) {
        CHECK(m.values[i] <= 0.0);
        CHECK(m.values[i] == doctest::Approx(-2 * eps * p.values[i]).epsilon(1e-15));
    }
    CHECK_THROWS_AS(window_measured(m), Error);
    CHECK_THROWS_AS(swsf(w, E, 0.0, grid), Error);
    CHECK_THROWS_AS(swsf(one, E, eps, grid), Error);
}

TEST_CASE("smoothed Green's function on an eigenbasis") {
    const Small& s = small();
    const double eps = 0.5;
    const Vec2 r = s.grid.dof_position(123);
    const auto phi2 = density_at(s.basis, r);
    for (std::size_t n = 0; n < 10; ++n) {
        const double phi = s.basis.states(123, static_cast<Eigen::Index>(n));
        CHECK(phi2[n] == doctest::Approx(phi * phi).epsilon(1e-12));
    }
    const double lo = s.basis.energies.front(), hi = s.basis.energies.back();
    const auto grid = adapted_energy_grid(s.basis.energies, eps, lo - 2000 * eps, hi + 2000 * eps, 8, 20);
    const auto g = smoothed_green_diag(s.basis, r, eps, grid);
    double total = 0.0;
    for (double p : phi2) total += p;
    for (double v : g) CHECK(v <= 0.0);
    CHECK(std::abs(-integrate(grid, g) / kPi - total) / total < 1e-3);

    // Single state: a peak of height phi^2 / eps at E_n.
    const std::vector<double> e1{s.basis.energies[4]}, p1{phi2[4]}, at{s.basis.energies[4]};
    CHECK(smoothed_green_diag(p1, e1, eps, at)[0] == doctest::Approx(-phi2[4] / eps).epsilon(1e-14));
}

TEST_CASE("product of SWSF and smoothed Green's function, single state") {
    const double eps = 0.7, En = 42.0, w = 0.37, phi2 = 1.9;
    const std::vector<double> e{En}, ww{w}, pp{phi2};
    const auto grid = energy_grid(30.0, 54.0, 0.013);
    const auto P = swsf(ww, e, eps, grid);
    const auto G = smoothed_green_diag(pp, e, eps, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double rhs = -(1.0 / (2 * eps)) * w * phi2 * delta_bar(grid[i] - En, eps);
        CHECK(std::abs(P.values[i] * G[i] - rhs) <= 1e-12 * std::abs(rhs));
    }
}

TEST_CASE("model window: comb spacing, envelope, relabelling") {
    const PeriodicOrbit no7 = preset_orbit(Preset::No7);
    const PeriodicOrbit no14 = preset_orbit(Preset::No14);
    CHECK(2 * kPi * 250 / no7.L == doctest::Approx(325.3).epsilon(2e-4));
    CHECK(2 * kPi * 250 / no14.L == doctest::Approx(242.8).epsilon(5e-4));
    CHECK(250 / 0.15 == doctest::Approx(1666.7).epsilon(1e-4));

    WindowModelParams p;
    p.v = 60;
    p.E0 = 1800;
    p.sigma0 = 0.15;
    p.Delta = 2 * kPi * p.v / no7.L;
    p.lambda = lyapunov(no7).rate(p.v);
    p.epsilon = 3.4;
    p.E_p = 1790;
    const auto grid = energy_grid(200, 3400, 0.25);
    const SmoothedSpectrum a = model_window(p, grid);
    CHECK(a.kind == SpectrumKind::WindowModel);
    double peak = 0.0;
    for (double v : a.values) {
        CHECK(v <= 0.0);
        peak = std::max(peak, -v);
    }
    WindowModelParams q = p;
    q.E_p += 3 * q.Delta;
    const SmoothedSpectrum b = model_window(q, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) < 1e-6 * peak);

    CHECK(peak_spacing(a) == doctest::Approx(p.Delta).epsilon(2e-3));

    // Gaussian envelope of width v/sigma0: comb teeth far out are suppressed.
    const std::vector<double> far{p.E0 + 4 * p.v / p.sigma0};
    CHECK(-model_window(p, far).values[0] < 1e-6 * peak);

    WindowModelParams bad = p;
    bad.Delta = 0;
    CHECK_THROWS_AS(model_window(bad, grid), Error);
    bad = p;
    bad.lambda = -1;
    CHECK_THROWS_AS(model_window(bad, grid), Error);
}

TEST_CASE("Poisson resummation of orbit returns") {
    const PeriodicOrbit no7 = preset_orbit(Preset::No7);
    WindowModelParams p;
    p.v = 60;
    p.E0 = 1800;
    p.sigma0 = 0.15;
    p.Delta = 2 * kPi * p.v / no7.L;
    p.lambda = lyapunov(no7).rate(p.v);
    p.epsilon = 3.4;
    const double tau = no7.L / p.v;
    std::vector<double> t;
    for (int k = -400; k <= 1200; ++k) t.push_back(k * tau / 200.0);
    const PoissonCheck c = poisson_sum_check(p, t);
    CHECK(c.max_abs_difference < 1e-6);
    REQUIRE(c.returns.size() == t.size());

    // t = 0: real, and the comb weights sum to one.
    const std::vector<double> t0{0.0};
    const PoissonCheck z = poisson_sum_check(p, t0);
    CHECK(std::abs(z.comb[0].imag()) < 1e-9);
    CHECK(z.comb[0].real() == doctest::Approx(1.0).epsilon(1e-6));

    // Large lambda: only the single pass survives.
    WindowModelParams big = p;
    big.lambda = 1e4 / tau;
    const double s = 0.05 * tau;
    const std::vector<double> ts{s, tau};
    const PoissonCheck g = poisson_sum_check(big, ts);
    const double single = std::exp(-p.v * p.v * s * s / (4 * p.sigma0 * p.sigma0) - 0.5 * big.lambda * s);
    CHECK(std::abs(g.returns[0]) == doctest::Approx(single).epsilon(1e-9));
    CHECK(std::abs(g.returns[1]) < 1e-12);
}

TEST_CASE("smoothed histogram") {
    std::vector<double> E, w;
    for (int n = 0; n < 400; ++n) {
        E.push_back(100 + 2.5 * n);
        w.push_back(0.01);
    }
    const auto grid = energy_grid(300, 800, 0.37);
    const SmoothedSpectrum s = smoothed_histogram(w, E, 25.0, grid, 1.25);
    CHECK(s.kind == SpectrumKind::SmoothedHistogram);
    for (double v : s.values) CHECK(v == doctest::Approx(0.01 / 2.5).epsilon(0.11));
    // Width a whole number of spacings, sampled between levels: exactly flat.
    const auto mid = energy_grid(301.25, 798.75, 2.5);
    for (double v : smoothed_histogram(w, E, 25.0, mid, 1.25).values) CHECK(v == doctest::Approx(0.004).epsilon(1e-12));

    const SmoothedSpectrum spikes = smoothed_histogram(w, E, 1e-3, grid, 1.25);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const bool on = std::fmod(grid[i] - 100 + 1e-9, 2.5) < 1e-3;
        CHECK(spikes.values[i] == doctest::Approx(on ? 10.0 : 0.0));
    }
    CHECK_THROWS_AS(smoothed_histogram(w, E, 0.0, grid, 1.0), Error);
}

TEST_CASE("peak finding") {
    const auto grid = energy_grid(0, 100, 0.1);
    SmoothedSpectrum s{grid, std::vector<double>(grid.size()), 1.0, SpectrumKind::P_eps, 2.0};
    const double centres[] = {10, 30, 50, 70};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (double c : centres) s.values[i] += std::exp(-(grid[i] - c) * (grid[i] - c) / 4);
        s.values[i] += 0.05 * std::exp(-(grid[i] - 90) * (grid[i] - 90));   // below threshold
        s.values[i] += 0.5 * std::exp(-(grid[i] - 33.5) * (grid[i] - 33.5) / 0.1);   // shoulder of 30
    }
    const auto peaks = find_peaks(s, 8.0);
    REQUIRE(peaks.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) CHECK(peaks[k].E == doctest::Approx(centres[k]).epsilon(0.01));
    CHECK(find_peaks(s, 1.0).size() == 5);
    CHECK(peak_spacing(s, 8.0) == doctest::Approx(20.0).epsilon(0.01));
    CHECK(tallest_peak(s, 25, 40) == doctest::Approx(30.0).epsilon(0.01));
    CHECK(tallest_peak(s, 32, 36) == doctest::Approx(33.5).epsilon(0.01));
    CHECK_THROWS_AS(tallest_peak(s, 40.5, 41.0), Error);

    // Plateau counts once, at its centre.
    SmoothedSpectrum flat{{0, 1, 2, 3, 4, 5, 6}, {0, 1, 2, 2, 2, 1, 0}, 1, SpectrumKind::P_eps, 1};
    REQUIRE(find_peaks(flat, 1).size() == 1);
    CHECK(find_peaks(flat, 1)[0].E == doctest::Approx(3.0));

    // Windows are negative: peaks are minima of the stored values.
    SmoothedSpectrum neg = s;
    neg.kind = SpectrumKind::WindowModel;
    for (double& v : neg.values) v = -v;
    CHECK(peak_spacing(neg, 8.0) == doctest::Approx(20.0).epsilon(0.01));

    SmoothedSpectrum two{grid, std::vector<double>(grid.size()), 1.0, SpectrumKind::P_eps, 2.0};
    for (std::size_t i = 0; i < grid.size(); ++i)
        two.values[i] = std::exp(-(grid[i] - 20) * (grid[i] - 20)) + std::exp(-(grid[i] - 60) * (grid[i] - 60));
    CHECK_THROWS_AS(peak_spacing(two), Error);
}

TEST_CASE("Lorentz-smoothed average: Green's function route against eigen-sum route") {
    const Small& s = small();
    // A packet spread over ~40 mid-spectrum states.
    const std::size_t lo = 200, hi = 240;
    std::vector<double> E(s.basis.energies.begin() + lo, s.basis.energies.begin() + hi), w(hi - lo);
    double min_gap = 1e300;
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = std::exp(-0.5 * std::pow((double(k) - 20.0) / 8.0, 2));
        if (k) min_gap = std::min(min_gap, E[k] - E[k - 1]);
    }
    double wsum = 0;
    for (double x : w) wsum += x;
    for (double& x : w) x /= wsum;
    REQUIRE(min_gap > 1e-6);
    const double eps = 1e-3 * min_gap;

    const auto grid = adapted_energy_grid(E, eps, E.front() - 1e4 * eps, E.back() + 1e4 * eps);
    const SmoothedSpectrum win = window_measured(swsf(w, E, eps, grid));

    const std::size_t probes[] = {17, 150, 333, 480, 600};
    for (std::size_t d : probes) {
        REQUIRE(d < s.grid.dof_count());
        const Vec2 r = s.grid.dof_position(d);
        std::vector<double> phi2;
        for (std::size_t n = lo; n < hi; ++n) phi2.push_back(std::pow(s.basis.states(d, n), 2));
        double A = 0;
        for (std::size_t k = 0; k < w.size(); ++k) A += w[k] * phi2[k];
        const auto G = smoothed_green_diag(phi2, E, eps, grid);
        const double route = a_eps_green_route(win.values, G, grid);
        CHECK(std::abs(route - A) / A < 0.02);
        CHECK(std::abs(route - a_eps_closed_form(w, phi2, E, eps)) / A < 1e-3);
        CAPTURE(r.x);
    }
}

TEST_CASE("Lorentz-smoothed average converges as epsilon decreases") {
    const Small& s = small();
    const std::size_t lo = 100, hi = 140;
    std::vector<double> w(hi - lo);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::exp(-0.5 * std::pow((double(k) - 20.0) / 6.0, 2));
    double wsum = 0;
    for (double x : w) wsum += x;
    for (double& x : w) x /= wsum;
    const double spacing = mean_level_spacing(s.basis, s.basis.energies[lo], s.basis.energies[hi - 1]);
    const Eigen::VectorXd exact = smoothed_average(s.basis, w, lo, hi, 1e-12);
    double prev = 1e300;
    for (double f : {4.0, 2.0, 1.0}) {
        const double gap = (smoothed_average(s.basis, w, lo, hi, f * spacing) - exact).cwiseAbs().sum() *
                           s.grid.h() * s.grid.h();
        CHECK(gap < prev);
        prev = gap;
    }
}

TEST_CASE("adapted energy grid") {
    const std::vector<double> E{10.0, 10.5, 30.0};
    const auto g = adapted_energy_grid(E, 0.01, 0.0, 40.0);
    CHECK(std::is_sorted(g.begin(), g.end()));
    CHECK(g.front() == 0.0);
    CHECK(g.back() == 40.0);
    for (double e : E) {
        const auto it = std::lower_bound(g.begin(), g.end(), e);
        CHECK(*it - *(it - 1) <= 0.01 / 8 + 1e-12);
    }
    CHECK(std::adjacent_find(g.begin(), g.end()) == g.end());
}

TEST_CASE("spikiness") {
    const std::vector<double> flat(10, 0.1), spiky{0.0, 0.0, 1.0, 0.0};
    CHECK(spikiness(flat) == doctest::Approx(1.0));
    CHECK(spikiness(spiky) == doctest::Approx(4.0));
}

TEST_CASE("spectrum and coefficient CSV") {
    const std::vector<double> E{1.0, 2.0};
    const std::vector<double> w{0.5, 0.5};
    const SmoothedSpectrum s = swsf(w, E, 0.25, E);
    std::ostringstream a;
    write_spectrum_csv(a, s);
    std::istringstream in(a.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "E,value,kind,epsilon");
    std::getline(in, line);
    CHECK(line.rfind("1,", 0) == 0);
    CHECK(line.find(",P_eps,0.25") != std::string::npos);

    const std::vector<std::complex<double>> c{{0.6, 0.0}, {0.0, -0.8}};
    std::ostringstream b;
    write_coefficients_csv(b, E, c);
    CHECK(b.str() == "n,E,re,im,abs2\n0,1,0.59999999999999998,0,0.35999999999999999\n"
                     "1,2,0,-0.80000000000000004,0.64000000000000012\n");
    const std::vector<std::complex<double>> short_c{{1.0, 0.0}};
    CHECK_THROWS_AS(write_coefficients_csv(b, E, short_c), Error);
    CHECK(to_string(SpectrumKind::SmoothedHistogram) == "smoothed_histogram");
}
