#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "scar/classical.hpp"
#include "scar/error.hpp"

using namespace scar;

namespace {
const double s2 = std::sqrt(2.0);
const double s5 = std::sqrt(5.0);

double m12_no7(double xi) { return -2.0 * ((2.0 + s2) - xi * xi); }
double m12_no14(double xi) { return -2.0 * ((5.0 + s5) - xi * xi); }

// Mirror a self-retracing arclength into the first half-period.
double fold(double xi, double L) { return xi <= L / 2 ? xi : L - xi; }
}

TEST_CASE("trace: bouncing ball is vertical") {
    const Domain d = Domain::quarter_stadium();
    const Trajectory t = trace(d, {0.5, std::sqrt(3.0) / 4.0}, std::numbers::pi / 2, 4);
    for (std::size_t k = 1; k < t.points.size(); ++k) {
        CHECK(t.points[k].x == doctest::Approx(0.5).epsilon(1e-12));
        const double y = t.points[k].y;
        CHECK((std::abs(y) < 1e-12 || std::abs(y - 1.0) < 1e-12));
    }
}

TEST_CASE("trace: 45 degree descent hits the bottom wall at (1, 0)") {
    const Trajectory t = trace(Domain::quarter_stadium(), {0.5, 0.5}, -std::numbers::pi / 4, 1);
    REQUIRE(t.points.size() == 2);
    CHECK(t.points[1].x == doctest::Approx(1.0));
    CHECK(t.points[1].y == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(t.length() == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("trace: polylines stay in the domain and reflect specularly") {
    const Domain d = Domain::quarter_stadium();
    const Trajectory t = trace(d, {0.3, 0.7}, 0.4321, 200);
    double total = 0;
    for (std::size_t k = 0; k + 1 < t.points.size(); ++k) {
        const Vec2 a = t.points[k], b = t.points[k + 1];
        total += (b - a).norm();
        for (int s = 0; s <= 1000; ++s) {
            const Vec2 p = a + (b - a) * (s / 1000.0);
            REQUIRE(d.contains(p + (Vec2{1.0, 0.5} - p) * 1e-9));
        }
    }
    CHECK(total == doctest::Approx(t.length()));
    // Reflection preserves speed and incidence angle on the arc.
    for (std::size_t k = 0; k + 1 < t.directions.size(); ++k) {
        const Bounce& b = t.bounces[k];
        if (b.kind != HitKind::Arc) continue;
        const Vec2 n = (b.point - Vec2{1, 0}).normalized();
        CHECK(std::abs(t.directions[k].dot(n)) == doctest::Approx(std::abs(t.directions[k + 1].dot(n))));
    }
}

TEST_CASE("trace: start outside the domain") {
    const Domain d = Domain::quarter_stadium();
    CHECK_THROWS_AS(trace(d, {2.5, 0.5}, 0.0, 3), Error);
}

TEST_CASE("periodic orbit lengths") {
    CHECK(preset_orbit(Preset::No7).L == doctest::Approx(2.0 + 2.0 * s2).epsilon(1e-12));
    CHECK(std::abs(preset_orbit(Preset::No7).L - 4.8284) < 1e-3);
    CHECK(std::abs(preset_orbit(Preset::No14).L - 6.47) < 1e-2);
    CHECK(preset_orbit(Preset::No14).L == doctest::Approx(2.0 + 2.0 * s5).epsilon(1e-12));
    CHECK(std::abs(preset_orbit(Preset::BouncingBall).L - 2.0) < 1e-9);
    CHECK(preset_orbit(Preset::No12).L == doctest::Approx(3.0 * std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("bounce counts") {
    CHECK(preset_orbit(Preset::No7).N_C == 4);
    CHECK(preset_orbit(Preset::No14).N_C == 6);
    CHECK(preset_orbit(Preset::BouncingBall).N_C == 2);
}

TEST_CASE("aperiodic ray fails within budget") {
    CHECK_THROWS_AS(find_periodic_orbit(Domain::quarter_stadium(), {0.3, 0.7}, 0.4321), Error);
}

TEST_CASE("No.7 m12 closed form at 100 samples") {
    const PeriodicOrbit o = preset_orbit(Preset::No7);
    CHECK(monodromy_at(o, 0.0).m12 == doctest::Approx(-6.8284).epsilon(1e-4));
    for (int k = 0; k < 100; ++k) {
        const double xi = o.L * k / 100.0;
        const Monodromy m = monodromy_at(o, xi);
        CHECK(std::abs(m.m12 - m12_no7(fold(xi, o.L))) < 1e-6);
        CHECK(std::abs(m.det() - 1.0) < 1e-10);
    }
}

TEST_CASE("No.14 m12 closed form") {
    const PeriodicOrbit o = preset_orbit(Preset::No14);
    for (int k = 0; k < 100; ++k) {
        const double xi = o.L * k / 100.0;
        CHECK(std::abs(monodromy_at(o, xi).m12 - m12_no14(fold(xi, o.L))) < 1e-6);
    }
}

TEST_CASE("trace of monodromy is xi independent") {
    for (Preset p : {Preset::No7, Preset::No12, Preset::No14, Preset::BouncingBall}) {
        const PeriodicOrbit o = preset_orbit(p);
        const double t0 = monodromy_at(o, 0.0).trace();
        for (int k = 1; k < 50; ++k) CHECK(std::abs(monodromy_at(o, o.L * k / 50.0).trace() - t0) < 1e-8);
        CHECK(std::abs(o.mu1 * o.mu2 - 1.0) < 1e-10);
        CHECK(o.mu1 >= 1.0);
    }
}

TEST_CASE("conjugate points") {
    const auto c7 = preset_orbit(Preset::No7).conjugate_points;
    REQUIRE(c7.size() == 2);
    CHECK(std::abs(c7[0] - std::sqrt(2.0 + s2)) < 1e-4);
    CHECK(std::abs(c7[0] - 1.8478) < 1e-4);
    const auto c14 = preset_orbit(Preset::No14).conjugate_points;
    REQUIRE(c14.size() == 2);
    CHECK(std::abs(c14[0] - 2.6900) < 1e-4);
    CHECK(preset_orbit(Preset::BouncingBall).conjugate_points.empty());
    CHECK(preset_orbit(Preset::No7).nu == 2);
}

TEST_CASE("Lyapunov exponents") {
    CHECK(std::abs(lyapunov(preset_orbit(Preset::No7)).u - 0.418) < 1e-3);
    CHECK(std::abs(lyapunov(preset_orbit(Preset::No14)).u - 0.3684) < 1e-3);
    const LyapunovExponent bb = lyapunov(preset_orbit(Preset::BouncingBall));
    CHECK(bb.u == 0.0);
    CHECK(bb.marginal);
    CHECK(lyapunov(preset_orbit(Preset::No7)).rate(250.0) == doctest::Approx(0.418 * 250).epsilon(1e-3));
}

TEST_CASE("bouncing ball monodromy") {
    const PeriodicOrbit o = preset_orbit(Preset::BouncingBall);
    const Monodromy m = monodromy_at(o, 0.3);
    CHECK(m.m12 == doctest::Approx(2.0));
    CHECK(o.mu1 == 1.0);
    CHECK(o.mu2 == 1.0);
}

TEST_CASE("repetition factors match the eigenvalue forms") {
    for (Preset p : {Preset::No7, Preset::No14}) {
        const PeriodicOrbit o = preset_orbit(p);
        const Monodromy m = monodromy_at(o, 0.7);
        // Eigenvalues are negative for these inverse-hyperbolic orbits.
        const double sgn = o.inverse_hyperbolic ? -1.0 : 1.0;
        const double l1 = sgn * o.mu1, l2 = sgn * o.mu2;
        for (int n = 1; n <= 5; ++n) {
            const double dn = m.D() * (l1 - l2) / (std::pow(l1, n) - std::pow(l2, n));
            CHECK(m.D_n(n) == doctest::Approx(dn).epsilon(1e-10));
            CHECK(m.W_n(n) == doctest::Approx(dn * (std::pow(l1, n) + std::pow(l2, n) - 2.0)).epsilon(1e-10));
            const Monodromy mn = m.power(n);
            CHECK(mn.m12 == doctest::Approx(1.0 / m.D_n(n)).epsilon(1e-9));
            CHECK(std::abs(m.D_n(n)) <= std::abs(m.D()) * (o.mu1 - o.mu2) / (std::pow(o.mu1, n) - std::pow(o.mu2, n)) * (1 + 1e-12));
        }
    }
}

TEST_CASE("relaunch from any vertex reproduces L") {
    const Domain d = Domain::quarter_stadium();
    const PeriodicOrbit o = preset_orbit(Preset::No14);
    for (const OrbitLeg& leg : o.legs) {
        const Vec2 start = leg.from + leg.dir * (0.5 * leg.length);
        const PeriodicOrbit again = find_periodic_orbit(d, start, std::atan2(leg.dir.y, leg.dir.x));
        CHECK(again.L == doctest::Approx(o.L).epsilon(1e-9));
    }
}

TEST_CASE("orbit JSON round trip") {
    const PeriodicOrbit o = preset_orbit(Preset::No14);
    std::stringstream ss;
    write_orbit_json(ss, o, Domain::quarter_stadium());
    const std::string text = ss.str();
    for (const char* key : {"\"label\"", "\"vertices\"", "\"L\"", "\"N_C\"", "\"mu1\"", "\"nu\"",
                            "\"u_geometric\"", "\"xi_origin\"", "\"conjugate_points\""})
        CHECK(text.find(key) != std::string::npos);
    const PeriodicOrbit back = read_orbit_json(ss);
    CHECK(back.L == doctest::Approx(o.L));
    CHECK(back.label == "No14");
    CHECK(back.conjugate_points.size() == o.conjugate_points.size());
    std::stringstream bad("{\"label\": 1");
    CHECK_THROWS_AS(read_orbit_json(bad), Error);
}

TEST_CASE("presets") {
    CHECK(parse_preset("No12") == Preset::No12);
    CHECK_FALSE(parse_preset("No99").has_value());
    const PresetLaunch l = preset_launch(Preset::No14);
    CHECK(std::tan(l.angle) == doctest::Approx(2.0));
}
