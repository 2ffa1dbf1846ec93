#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "scar/analysis.hpp"
#include "scar/classical.hpp"
#include "scar/dynamics.hpp"

namespace scar {

/// <rho> = 1/Area.
double smooth_term(const Domain& domain);

/// On-orbit oscillatory term
///   (2 sqrt2/pi)(sigma0/v) eps Delta (1/v) sum_j |D_j(xi)|^{1/2} exp[-(sigma0/v)^2 (E_j - E0)^2] exp(-T_j lambda/2)
/// with E_j = E_p + j Delta, p_j = sqrt(2 E_j), T_j = L/p_j and D_j = p_j/m12(xi).
/// Throws "conjugate point singularity" when |m12| < 1e-9.
double a_osc(const PeriodicOrbit& orbit, const WindowModelParams& window, double xi);

/// |D_{C,n}| / |D_{C,1}| at xi.
double repetition_ratio(const PeriodicOrbit& orbit, double xi, int n);

struct ScarProfile {
    std::vector<double> xi;
    std::vector<double> A_num;
    std::vector<double> A_sc;          // NaN where the amplitude is singular
    std::vector<bool> excluded;
    double smooth_term = 0.0;
    std::vector<std::pair<double, double>> exclusion_zones;   // [lo, hi] in xi, may wrap past L

    /// Pearson r of A_num against A_sc over non-excluded samples.
    double pearson() const;
    double mean_included_num() const;
};

struct ProfileOptions {
    int samples = 512;                 // xi step L/samples
    double conjugate_halfwidth = 0.2;
    double wall_halfwidth = 0.1;
};

/// Samples the averaged density along the orbit by bilinear interpolation and
/// pairs it with smooth_term + a_osc. Throws if the orbit leaves the grid.
ScarProfile scar_profile(const PeriodicOrbit& orbit, const AveragedField& averaged, const Domain& domain,
                         const WindowModelParams& window, const ProfileOptions& opts = {});

double pearson(std::span<const double> a, std::span<const double> b);

/// Euclidean distance from p to the orbit polyline.
double distance_to_orbit(const PeriodicOrbit& orbit, Vec2 p);

struct ControlSample {
    double mean = 0.0;
    std::size_t count = 0;
};

/// Mean of the averaged density on lattice points (pitch `spacing`) at least
/// `orbit_clearance` from the orbit and `wall_clearance` inside the walls.
ControlSample off_orbit_control(const AveragedField& averaged, const PeriodicOrbit& orbit, const Domain& domain,
                                double orbit_clearance = 0.2, double wall_clearance = 0.1, double spacing = 0.02);

/// Shortest distance between two arclengths on a loop of length L.
double loop_distance(double a, double b, double L);

void write_profile_csv(std::ostream& out, const ScarProfile& profile);

} // namespace scar
