#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scar/geometry.hpp"

namespace scar {

enum class HitKind { Flat, Arc, Corner };

/// One specular reflection. `curvature` is 1/R for the (focusing) arc and 0 on
/// flat walls; `cos_incidence` is |cos| of the angle to the local normal.
struct Bounce {
    Vec2 point;
    HitKind kind = HitKind::Flat;
    double cos_incidence = 1.0;
    double curvature = 0.0;
    std::string wall;
};

struct Trajectory {
    std::vector<Vec2> points;        // start, then every boundary hit
    std::vector<Vec2> directions;    // unit direction of each segment
    std::vector<Bounce> bounces;     // one per hit, aligned with points[1..]

    double length() const;
};

/// Specular ray trace through `n_bounces` wall hits. Right-angle corners between
/// flat walls retro-reflect. Throws on grazing incidence.
Trajectory trace(const Domain& domain, Vec2 start, double angle, int n_bounces);

/// 2x2 linearised return map in transverse coordinates. Flat walls act as the
/// identity (the transverse frame is unfolded through each mirror); the arc
/// acts as [[1, 0], [-2/(R cos), 1]]. With this convention the self-retracing
/// stadium orbits reproduce the closed forms m12 = -2(c - xi^2).
struct Monodromy {
    double m11 = 1, m12 = 0, m21 = 0, m22 = 1;

    static Monodromy flight(double length) { return {1.0, length, 0.0, 1.0}; }
    static Monodromy reflection(const Bounce& b);

    Monodromy operator*(const Monodromy& o) const {
        return {m11 * o.m11 + m12 * o.m21, m11 * o.m12 + m12 * o.m22,
                m21 * o.m11 + m22 * o.m21, m21 * o.m12 + m22 * o.m22};
    }
    double det() const { return m11 * m22 - m12 * m21; }
    double trace() const { return m11 + m22; }
    Monodromy power(int n) const;

    /// D_C = 1/m12 (inverse length).
    double D() const { return 1.0 / m12; }
    /// n-fold repetition factors via Chebyshev recurrences in the trace, so
    /// hyperbolic, parabolic and elliptic cases share one code path.
    double D_n(int n) const;
    double W_n(int n) const;
};

struct OrbitLeg {
    Vec2 from;
    Vec2 dir;
    double length = 0.0;
    double xi_start = 0.0;
};

enum class Preset { No7, No12, No14, BouncingBall };

struct PeriodicOrbit {
    std::string label;
    Vec2 start;
    double angle = 0.0;
    Vec2 xi_origin;

    /// Legs in travel order beginning at xi_origin; the bounce at the end of
    /// leg k is bounces[k]. The last leg ends back at xi_origin.
    std::vector<OrbitLeg> legs;
    std::vector<Bounce> bounces;

    double L = 0.0;
    int N_C = 0;
    double mu1 = 1.0;
    double mu2 = 1.0;
    bool inverse_hyperbolic = false;     // monodromy eigenvalues negative
    int nu = 0;
    double u_geometric = 0.0;
    std::vector<double> conjugate_points;

    Vec2 point_at(double xi) const;
    Vec2 direction_at(double xi) const;
    /// Boundary-hit vertices, ξ-ordered.
    std::vector<Vec2> vertices() const;
    /// Arclength of every boundary hit (ξ of the bounce at the end of each leg, mod L).
    std::vector<double> bounce_xi() const;
};

/// Traces until the ray returns through `start` with the launch direction.
/// The returned orbit has ξ measured from `start`; stability data are filled.
PeriodicOrbit find_periodic_orbit(const Domain& domain, Vec2 start, double angle,
                                  double tol = 1e-9, int bounce_budget = 64);

/// Same orbit with ξ measured from the orbit point nearest `origin`.
PeriodicOrbit reorigin(const PeriodicOrbit& orbit, Vec2 origin);

Monodromy monodromy_at(const PeriodicOrbit& orbit, double xi);

struct LyapunovExponent {
    double u = 0.0;          // ln(mu1)/L, per unit length
    bool marginal = false;   // use the mean level spacing for the peak width instead

    /// Rate per unit time at speed |p| (m = 1).
    double rate(double p) const { return u * p; }
};

LyapunovExponent lyapunov(const PeriodicOrbit& orbit);

/// Roots of m12(xi) on [0, L), by sign change on `samples` points then bisection.
std::vector<double> conjugate_points(const PeriodicOrbit& orbit, int samples = 10000);

struct PresetLaunch {
    std::string label;
    Vec2 start;
    double angle;
    Vec2 xi_origin;
};

PresetLaunch preset_launch(Preset p);
std::optional<Preset> parse_preset(const std::string& name);
std::string to_string(Preset p);

/// Convenience: find, re-origin and label a preset orbit on the quarter stadium.
PeriodicOrbit preset_orbit(Preset p);

void write_orbit_json(std::ostream& out, const PeriodicOrbit& orbit, const Domain& domain);
PeriodicOrbit read_orbit_json(std::istream& in, Domain* domain_out = nullptr);

} // namespace scar
