#include "scar/semiclassics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

#include "scar/error.hpp"

namespace scar {

double smooth_term(const Domain& domain) { return 1.0 / domain.area(); }

double a_osc(const PeriodicOrbit& orbit, const WindowModelParams& w, double xi) {
    w.validate();
    const Monodromy m = monodromy_at(orbit, xi);
    if (std::abs(m.m12) < 1e-9) throw Error(ErrorKind::Analysis, "conjugate point singularity");
    const double a = w.sigma0 / w.v;
    // Teeth beyond ~6 envelope widths contribute below 1e-16 of the central one.
    const double reach = 6.1 / a;
    const auto j_lo = static_cast<long>(std::ceil((w.E0 - reach - w.E_p) / w.Delta));
    const auto j_hi = static_cast<long>(std::floor((w.E0 + reach - w.E_p) / w.Delta));
    double sum = 0.0;
    for (long j = j_lo; j <= j_hi; ++j) {
        const double Ej = w.E_p + static_cast<double>(j) * w.Delta;
        if (Ej <= 0.0) continue;
        const double pj = std::sqrt(2.0 * Ej);
        const double Tj = orbit.L / pj;
        sum += std::sqrt(pj / std::abs(m.m12)) * std::exp(-a * a * (Ej - w.E0) * (Ej - w.E0) - 0.5 * Tj * w.lambda);
    }
    return (2.0 * std::numbers::sqrt2 / std::numbers::pi) * a * w.epsilon * w.Delta * sum / w.v;
}

double repetition_ratio(const PeriodicOrbit& orbit, double xi, int n) {
    if (n < 1) throw Error(ErrorKind::Config, "repetition count must be >= 1");
    const Monodromy m = monodromy_at(orbit, xi);
    return std::abs(m.D_n(n) / m.D_n(1));
}

double loop_distance(double a, double b, double L) {
    double d = std::fmod(std::abs(a - b), L);
    return std::min(d, L - d);
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorKind::Analysis, "pearson: length mismatch");
    if (a.size() < 3) throw Error(ErrorKind::Analysis, "pearson: fewer than 3 samples");
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) throw Error(ErrorKind::Analysis, "pearson: zero variance");
    return sab / std::sqrt(saa * sbb);
}

double ScarProfile::pearson() const {
    std::vector<double> a, b;
    for (std::size_t k = 0; k < xi.size(); ++k)
        if (!excluded[k]) {
            a.push_back(A_num[k]);
            b.push_back(A_sc[k]);
        }
    return scar::pearson(a, b);
}

double ScarProfile::mean_included_num() const {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < xi.size(); ++k)
        if (!excluded[k]) {
            s += A_num[k];
            ++n;
        }
    if (n == 0) throw Error(ErrorKind::Analysis, "every profile sample is excluded");
    return s / static_cast<double>(n);
}

ScarProfile scar_profile(const PeriodicOrbit& orbit, const AveragedField& avg, const Domain& domain,
                         const WindowModelParams& window, const ProfileOptions& opts) {
    if (opts.samples < 3) throw Error(ErrorKind::Config, "profile needs at least 3 samples");
    ScarProfile p;
    p.smooth_term = smooth_term(domain);
    const double L = orbit.L;
    for (double c : orbit.conjugate_points) p.exclusion_zones.push_back({c - opts.conjugate_halfwidth, c + opts.conjugate_halfwidth});
    std::vector<double> walls = orbit.bounce_xi();
    for (double b : walls) p.exclusion_zones.push_back({b - opts.wall_halfwidth, b + opts.wall_halfwidth});

    for (int k = 0; k < opts.samples; ++k) {
        const double xi = L * k / opts.samples;
        const Vec2 r = orbit.point_at(xi);
        if (!avg.grid.covers(r)) throw Error(ErrorKind::Analysis, "orbit exits grid coverage");
        bool excluded = false;
        for (double c : orbit.conjugate_points) excluded |= loop_distance(xi, c, L) <= opts.conjugate_halfwidth;
        for (double b : walls) excluded |= loop_distance(xi, b, L) <= opts.wall_halfwidth;
        double sc = std::numeric_limits<double>::quiet_NaN();
        try {
            sc = p.smooth_term + a_osc(orbit, window, xi);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Analysis) throw;
            excluded = true;
        }
        p.xi.push_back(xi);
        p.A_num.push_back(avg.grid.interpolate(avg.values, r));
        p.A_sc.push_back(sc);
        p.excluded.push_back(excluded);
    }
    return p;
}

double distance_to_orbit(const PeriodicOrbit& orbit, Vec2 p) {
    double best = std::numeric_limits<double>::infinity();
    for (const OrbitLeg& leg : orbit.legs) {
        const double s = std::clamp((p - leg.from).dot(leg.dir), 0.0, leg.length);
        best = std::min(best, (leg.from + leg.dir * s - p).norm());
    }
    return best;
}

ControlSample off_orbit_control(const AveragedField& avg, const PeriodicOrbit& orbit, const Domain& domain,
                                double orbit_clearance, double wall_clearance, double spacing) {
    if (!(spacing > 0.0)) throw Error(ErrorKind::Config, "control spacing must be positive");
    const BoundingBox bb = domain.bounds();
    ControlSample c;
    double sum = 0.0;
    for (double y = bb.ymin + 0.5 * spacing; y < bb.ymax; y += spacing)
        for (double x = bb.xmin + 0.5 * spacing; x < bb.xmax; x += spacing) {
            const Vec2 r{x, y};
            if (!domain.strictly_inside(r, wall_clearance) || distance_to_orbit(orbit, r) < orbit_clearance) continue;
            sum += avg.grid.interpolate(avg.values, r);
            ++c.count;
        }
    if (c.count == 0) throw Error(ErrorKind::Analysis, "empty off-orbit control set");
    c.mean = sum / static_cast<double>(c.count);
    return c;
}

void write_profile_csv(std::ostream& out, const ScarProfile& p) {
    out << "xi,A_num,A_sc,excluded\n";
    char line[128];
    for (std::size_t k = 0; k < p.xi.size(); ++k) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%d\n", p.xi[k], p.A_num[k], p.A_sc[k], p.excluded[k] ? 1 : 0);
        out << line;
    }
}

} // namespace scar
