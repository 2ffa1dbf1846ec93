#include "scar/classical.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>

#include <json.hpp>

#include "scar/error.hpp"
#include "scar/serialize.hpp"

namespace scar {

namespace {

constexpr double kMinStep = 1e-12;
constexpr double kGrazing = 1e-12;
constexpr double kCornerTol = 1e-9;

struct RayHit {
    double t = std::numeric_limits<double>::infinity();
    Vec2 point;
    Vec2 normal;
    HitKind kind = HitKind::Flat;
    double curvature = 0.0;
    std::string wall;
};

std::vector<Vec2> flat_corners(const Domain& d) {
    if (d.kind() == Domain::Kind::Rectangle)
        return {{0, 0}, {d.width(), 0}, {d.width(), d.height()}, {0, d.height()}};
    return {{0, 0}, {0, 1}};
}

RayHit first_hit(const Domain& domain, Vec2 p, Vec2 d) {
    RayHit best;
    for (const BoundaryPiece& piece : domain.boundary()) {
        if (piece.type == BoundaryPiece::Type::Segment) {
            const Vec2 e = piece.b - piece.a;
            const double denom = d.cross(e);
            if (std::abs(denom) < 1e-15) continue;
            const Vec2 ap = piece.a - p;
            const double t = ap.cross(e) / denom;
            const double s = ap.cross(d) / denom;
            if (t > kMinStep && s >= -1e-12 && s <= 1.0 + 1e-12 && t < best.t) {
                best.t = t;
                best.point = p + d * t;
                best.normal = Vec2{e.y, -e.x}.normalized();
                best.kind = HitKind::Flat;
                best.curvature = 0.0;
                best.wall = piece.name;
            }
        } else {
            const Vec2 f = p - piece.center;
            const double fd = f.dot(d);
            const double disc = fd * fd - (f.norm2() - piece.radius * piece.radius);
            if (disc < 0.0) continue;
            const double root = std::sqrt(disc);
            for (double t : {-fd + root, -fd - root}) {
                if (!(t > kMinStep) || t >= best.t) continue;
                const Vec2 q = p + d * t;
                const double phi = std::atan2(q.y - piece.center.y, q.x - piece.center.x);
                if (phi < piece.angle0 - 1e-12 || phi > piece.angle1 + 1e-12) continue;
                best.t = t;
                best.point = q;
                best.normal = (q - piece.center) / piece.radius;
                best.kind = HitKind::Arc;
                best.curvature = 1.0 / piece.radius;
                best.wall = piece.name;
            }
        }
    }
    if (!std::isfinite(best.t)) throw Error(ErrorKind::Config, "ray escaped the domain");
    for (Vec2 c : flat_corners(domain)) {
        if ((best.point - c).norm() < kCornerTol) {
            best.point = c;
            best.kind = HitKind::Corner;
            best.curvature = 0.0;
            best.wall = "corner";
        }
    }
    return best;
}

// Advance one bounce; returns the reflected direction.
Vec2 reflect(const RayHit& hit, Vec2 d, Bounce& bounce) {
    bounce.point = hit.point;
    bounce.kind = hit.kind;
    bounce.curvature = hit.curvature;
    bounce.wall = hit.wall;
    if (hit.kind == HitKind::Corner) {
        bounce.cos_incidence = 1.0;
        return -d;
    }
    const double c = d.dot(hit.normal);
    if (std::abs(c) < kGrazing) throw Error(ErrorKind::Config, "grazing ray");
    bounce.cos_incidence = std::abs(c);
    return (d - hit.normal * (2.0 * c)).normalized();
}

double wrap(double xi, double L) {
    double r = std::fmod(xi, L);
    if (r < 0) r += L;
    return r;
}

std::size_t leg_index(const PeriodicOrbit& o, double xi) {
    auto it = std::upper_bound(o.legs.begin(), o.legs.end(), xi,
                               [](double x, const OrbitLeg& leg) { return x < leg.xi_start; });
    return it == o.legs.begin() ? 0 : static_cast<std::size_t>(it - o.legs.begin() - 1);
}

void fill_stability(PeriodicOrbit& o) {
    const Monodromy m = monodromy_at(o, 0.0);
    const double t = m.trace();
    if (std::abs(t) > 2.0) {
        const double a = std::abs(t) / 2.0;
        const double big = a + std::sqrt(a * a - 1.0);
        o.mu1 = big;
        o.mu2 = 1.0 / big;
    } else {
        o.mu1 = o.mu2 = 1.0;
    }
    o.inverse_hyperbolic = t < -2.0;
    o.N_C = static_cast<int>(o.bounces.size());
    o.u_geometric = lyapunov(o).u;
    o.conjugate_points = conjugate_points(o);
    o.nu = static_cast<int>(o.conjugate_points.size());
}

} // namespace

double Trajectory::length() const {
    double s = 0.0;
    for (std::size_t k = 1; k < points.size(); ++k) s += (points[k] - points[k - 1]).norm();
    return s;
}

Trajectory trace(const Domain& domain, Vec2 start, double angle, int n_bounces) {
    if (!domain.strictly_inside(start))
        throw Error(ErrorKind::Config, "trace start must lie strictly inside the domain");
    Trajectory tr;
    tr.points.push_back(start);
    Vec2 p = start;
    Vec2 d = unit_vector(angle);
    for (int k = 0; k < n_bounces; ++k) {
        const RayHit hit = first_hit(domain, p, d);
        tr.directions.push_back(d);
        Bounce b;
        d = reflect(hit, d, b);
        p = hit.point;
        tr.points.push_back(p);
        tr.bounces.push_back(std::move(b));
    }
    return tr;
}

// ---------------------------------------------------------------------------

Monodromy Monodromy::reflection(const Bounce& b) {
    if (b.kind != HitKind::Arc) return {};
    return {1.0, 0.0, -2.0 * b.curvature / b.cos_incidence, 1.0};
}

Monodromy Monodromy::power(int n) const {
    Monodromy r;
    for (int k = 0; k < n; ++k) r = *this * r;
    return r;
}

namespace {
// U_{n-1}(t/2) and T_n-style trace of M^n from the Chebyshev recurrence.
std::pair<double, double> chebyshev(double t, int n) {
    double u_prev = 0.0, u = 1.0; // U_{-1}, U_0
    for (int k = 1; k < n; ++k) {
        const double next = t * u - u_prev;
        u_prev = u;
        u = next;
    }
    // tr(M^n) = t U_{n-1} - 2 U_{n-2}
    return {u, t * u - 2.0 * u_prev};
}
} // namespace

double Monodromy::D_n(int n) const {
    if (n < 1) throw Error(ErrorKind::Analysis, "repetition number must be >= 1");
    return D() / chebyshev(trace(), n).first;
}

double Monodromy::W_n(int n) const {
    if (n < 1) throw Error(ErrorKind::Analysis, "repetition number must be >= 1");
    return D_n(n) * (chebyshev(trace(), n).second - 2.0);
}

// ---------------------------------------------------------------------------

Vec2 PeriodicOrbit::point_at(double xi) const {
    const double x = wrap(xi, L);
    const OrbitLeg& leg = legs[leg_index(*this, x)];
    return leg.from + leg.dir * (x - leg.xi_start);
}

Vec2 PeriodicOrbit::direction_at(double xi) const {
    return legs[leg_index(*this, wrap(xi, L))].dir;
}

std::vector<Vec2> PeriodicOrbit::vertices() const {
    std::vector<Vec2> v;
    for (const Bounce& b : bounces) v.push_back(b.point);
    // A bounce sitting at the origin closes the last leg; list it first.
    if (!v.empty() && (v.back() - xi_origin).norm() < 1e-9) std::rotate(v.rbegin(), v.rbegin() + 1, v.rend());
    return v;
}

std::vector<double> PeriodicOrbit::bounce_xi() const {
    std::vector<double> out;
    // A trailing partial leg (origin off the wall) ends without a bounce.
    for (std::size_t k = 0; k < legs.size() && k < bounces.size(); ++k)
        out.push_back(wrap(legs[k].xi_start + legs[k].length, L));
    std::sort(out.begin(), out.end());
    return out;
}

PeriodicOrbit find_periodic_orbit(const Domain& domain, Vec2 start, double angle, double tol,
                                  int bounce_budget) {
    if (!(tol > 0.0)) throw Error(ErrorKind::Config, "closure tolerance must be positive");
    if (!domain.strictly_inside(start))
        throw Error(ErrorKind::Config, "orbit start must lie strictly inside the domain");
    const Vec2 d0 = unit_vector(angle);
    PeriodicOrbit o;
    o.start = start;
    o.angle = angle;
    o.xi_origin = start;

    Vec2 p = start, d = d0;
    double travelled = 0.0;
    for (int k = 0; k <= bounce_budget; ++k) {
        const RayHit hit = first_hit(domain, p, d);
        if (k > 0) {
            // Does this segment pass back through start with the launch direction?
            const Vec2 rel = start - p;
            const double s = rel.dot(d);
            const double off = std::abs(rel.cross(d));
            if (s > 0.0 && s <= hit.t + tol && off < tol && (d - d0).norm() < tol) {
                o.legs.push_back({p, d, s, travelled});
                o.L = travelled + s;
                fill_stability(o);
                return o;
            }
        }
        o.legs.push_back({p, d, hit.t, travelled});
        travelled += hit.t;
        Bounce b;
        d = reflect(hit, d, b);
        p = hit.point;
        o.bounces.push_back(std::move(b));
    }
    throw Error(ErrorKind::Analysis, "not periodic within budget");
}

PeriodicOrbit reorigin(const PeriodicOrbit& orbit, Vec2 origin) {
    // Cyclic list of bounce-terminated legs; the launch seam, which is not a
    // bounce, joins the last leg to the first.
    std::vector<OrbitLeg> cyc;
    if (orbit.legs.size() == orbit.bounces.size()) {
        cyc = orbit.legs;
    } else if (orbit.legs.size() == orbit.bounces.size() + 1 && orbit.legs.size() >= 2) {
        const OrbitLeg& last = orbit.legs.back();
        cyc.push_back({last.from, last.dir, last.length + orbit.legs.front().length, 0.0});
        cyc.insert(cyc.end(), orbit.legs.begin() + 1, orbit.legs.end() - 1);
    } else {
        throw Error(ErrorKind::Analysis, "inconsistent orbit legs");
    }
    const std::size_t n = cyc.size();

    double best = std::numeric_limits<double>::infinity();
    std::size_t k0 = 0;
    double s0 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const OrbitLeg& leg = cyc[k];
        const double s = std::clamp((origin - leg.from).dot(leg.dir), 0.0, leg.length);
        const double dist = (leg.from + leg.dir * s - origin).norm();
        if (dist < best - 1e-12) {
            best = dist;
            k0 = k;
            s0 = s;
        }
    }
    if (best > 1e-6) throw Error(ErrorKind::Config, "xi origin does not lie on the orbit");
    if (cyc[k0].length - s0 < 1e-12) {
        k0 = (k0 + 1) % n;
        s0 = 0.0;
    }
    if (s0 < 1e-12) s0 = 0.0;

    PeriodicOrbit out = orbit;
    out.legs.clear();
    out.bounces.clear();
    out.xi_origin = cyc[k0].from + cyc[k0].dir * s0;
    double acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
        const std::size_t k = (k0 + m) % n;
        const double from_s = (m == 0) ? s0 : 0.0;
        out.legs.push_back({cyc[k].from + cyc[k].dir * from_s, cyc[k].dir, cyc[k].length - from_s, acc});
        acc += cyc[k].length - from_s;
        out.bounces.push_back(orbit.bounces[k]);
    }
    if (s0 > 0.0) {
        out.legs.push_back({cyc[k0].from, cyc[k0].dir, s0, acc});
        acc += s0;
    }
    out.L = acc;
    fill_stability(out);
    return out;
}

Monodromy monodromy_at(const PeriodicOrbit& orbit, double xi) {
    if (!(xi >= 0.0) || xi >= orbit.L + 1e-12)
        throw Error(ErrorKind::Analysis, "xi out of range [0, L)");
    const std::size_t n = orbit.legs.size();
    const std::size_t k0 = leg_index(orbit, xi);
    const double offset = xi - orbit.legs[k0].xi_start;
    // Bounces attach to leg ends; the final leg of the cut loop has none when the
    // origin is not itself a hit point.
    auto bounce_after = [&](std::size_t k) -> Monodromy {
        return k < orbit.bounces.size() ? Monodromy::reflection(orbit.bounces[k]) : Monodromy{};
    };
    Monodromy m = Monodromy::flight(orbit.legs[k0].length - offset);
    m = bounce_after(k0) * m;
    for (std::size_t step = 1; step < n; ++step) {
        const std::size_t k = (k0 + step) % n;
        m = Monodromy::flight(orbit.legs[k].length) * m;
        m = bounce_after(k) * m;
    }
    m = Monodromy::flight(offset) * m;
    return m;
}

LyapunovExponent lyapunov(const PeriodicOrbit& orbit) {
    LyapunovExponent out;
    const double t = monodromy_at(orbit, 0.0).trace();
    if (std::abs(t) <= 2.0 + 1e-9) {
        out.u = 0.0;
        out.marginal = true;
        return out;
    }
    const double a = std::abs(t) / 2.0;
    out.u = std::log(a + std::sqrt(a * a - 1.0)) / orbit.L;
    return out;
}

std::vector<double> conjugate_points(const PeriodicOrbit& orbit, int samples) {
    std::vector<double> roots;
    if (samples < 2) return roots;
    auto m12 = [&](double xi) { return monodromy_at(orbit, std::min(xi, std::nextafter(orbit.L, 0.0))).m12; };
    const double step = orbit.L / samples;
    double a = 0.0, fa = m12(0.0);
    for (int k = 1; k <= samples; ++k) {
        const double b = (k == samples) ? orbit.L : k * step;
        const double fb = (k == samples) ? m12(0.0) : m12(b);
        if (fa == 0.0) {
            roots.push_back(a);
        } else if ((fa < 0.0) != (fb < 0.0) && fb != 0.0) {
            double lo = a, hi = b, flo = fa;
            for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = m12(mid);
                if ((fm < 0.0) == (flo < 0.0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push_back(wrap(0.5 * (lo + hi), orbit.L));
        }
        a = b;
        fa = fb;
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

// ---------------------------------------------------------------------------

PresetLaunch preset_launch(Preset p) {
    const double s3 = std::sqrt(3.0);
    switch (p) {
    case Preset::No7: return {"No7", {0.5, 0.5}, -std::numbers::pi / 4.0, {0.0, 1.0}};
    case Preset::No12: return {"No12", {0.5, s3 / 6.0}, std::numbers::pi / 6.0, {0.0, 0.0}};
    case Preset::No14: return {"No14", {0.25, 0.5}, std::atan(2.0), {0.0, 0.0}};
    case Preset::BouncingBall: return {"BouncingBall", {0.5, s3 / 4.0}, std::numbers::pi / 2.0, {0.5, 0.0}};
    }
    throw Error(ErrorKind::Config, "unknown preset");
}

std::optional<Preset> parse_preset(const std::string& name) {
    if (name == "No7") return Preset::No7;
    if (name == "No12") return Preset::No12;
    if (name == "No14") return Preset::No14;
    if (name == "BouncingBall") return Preset::BouncingBall;
    return std::nullopt;
}

std::string to_string(Preset p) { return preset_launch(p).label; }

PeriodicOrbit preset_orbit(Preset p) {
    const PresetLaunch launch = preset_launch(p);
    const Domain stadium = Domain::quarter_stadium();
    PeriodicOrbit o = reorigin(find_periodic_orbit(stadium, launch.start, launch.angle),
                               launch.xi_origin);
    o.label = launch.label;
    return o;
}

// ---------------------------------------------------------------------------

void write_orbit_json(std::ostream& out, const PeriodicOrbit& o, const Domain& domain) {
    nlohmann::ordered_json j;
    j["label"] = o.label;
    j["domain"] = domain_to_json(domain);
    j["start"] = {o.start.x, o.start.y};
    j["angle"] = o.angle;
    auto verts = nlohmann::ordered_json::array();
    for (Vec2 v : o.vertices()) verts.push_back({v.x, v.y});
    j["vertices"] = verts;
    j["L"] = o.L;
    j["N_C"] = o.N_C;
    j["mu1"] = o.mu1;
    j["mu2"] = o.mu2;
    j["inverse_hyperbolic"] = o.inverse_hyperbolic;
    j["nu"] = o.nu;
    j["u_geometric"] = o.u_geometric;
    j["xi_origin"] = {o.xi_origin.x, o.xi_origin.y};
    j["conjugate_points"] = o.conjugate_points;
    out << j.dump(2) << "\n";
}

PeriodicOrbit read_orbit_json(std::istream& in, Domain* domain_out) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, std::string("malformed orbit JSON: ") + e.what());
    }
    try {
        const Domain domain = j.contains("domain") ? domain_from_json(j["domain"]) : Domain::quarter_stadium();
        const Vec2 start{j.at("start").at(0).get<double>(), j.at("start").at(1).get<double>()};
        const Vec2 origin{j.at("xi_origin").at(0).get<double>(), j.at("xi_origin").at(1).get<double>()};
        PeriodicOrbit o = reorigin(find_periodic_orbit(domain, start, j.at("angle").get<double>()), origin);
        o.label = j.value("label", std::string{});
        if (std::abs(o.L - j.at("L").get<double>()) > 1e-6)
            throw Error(ErrorKind::Config, "orbit file length does not reproduce on re-trace");
        if (domain_out) *domain_out = domain;
        return o;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, std::string("orbit JSON missing field: ") + e.what());
    }
}

} // namespace scar
