#include "scar/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "scar/error.hpp"
#include "scar/serialize.hpp"

namespace scar {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vec2 vec_from_json(const Json& j, const char* what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw Error(ErrorKind::Config, std::string(what) + " must be a [x, y] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

Json vec_to_json(Vec2 v) { return Json::array({v.x, v.y}); }

double number_or_auto(const Json& j, const char* what) {
    if (j.is_string() && j.get<std::string>() == "auto") return 0.0;
    if (!j.is_number()) throw Error(ErrorKind::Config, std::string(what) + " must be a number or \"auto\"");
    const double v = j.get<double>();
    if (!(v > 0.0)) throw Error(ErrorKind::Config, std::string(what) + " must be positive");
    return v;
}

double number(const Json& j, const char* what) {
    if (!j.is_number()) throw Error(ErrorKind::Config, std::string(what) + " must be a number");
    return j.get<double>();
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw Error(ErrorKind::Config, "unknown key '" + it.key() + "' in " + where);
}

Preset preset_or_throw(const std::string& name) {
    const auto p = parse_preset(name);
    if (!p) throw Error(ErrorKind::Config, "unknown preset '" + name + "'");
    return *p;
}

double p_abs(const RunConfig& c) { return c.packet.speed(); }

void set_packet_momentum(RunConfig& c, double p, double angle) {
    c.angle = angle;
    c.packet.p0 = {p * std::cos(angle), p * std::sin(angle)};
}

double safe_spacing(const SmoothedSpectrum& s, double resolution = -1.0) {
    try {
        return peak_spacing(s, resolution);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Analysis) throw;
        return kNaN;
    }
}

template <class F>
void write_with(const std::filesystem::path& file, F&& f, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(file, mode);
    if (!out) throw Error(ErrorKind::Config, "cannot open '" + file.string() + "' for writing");
    f(out);
    if (!out) throw Error(ErrorKind::Config, "write to '" + file.string() + "' failed");
}

} // namespace

RunConfig default_config(Preset preset) {
    RunConfig c;
    const PresetLaunch l = preset_launch(preset);
    c.preset = to_string(preset);
    c.packet.r0 = l.start;
    c.packet.sigma0 = 0.15;
    set_packet_momentum(c, 60.0, l.angle);
    c.orbit_start = l.start;
    c.orbit_angle = l.angle;
    c.orbit_origin = l.xi_origin;
    c.orbit_label = l.label;
    return c;
}

RunConfig config_from_json(const Json& j) {
    check_keys(j, {"preset", "scale", "domain", "solver", "packet", "orbit", "times", "analysis", "profile", "output"},
               "config");
    const std::string preset = j.contains("preset") ? j["preset"].get<std::string>() : "No7";
    RunConfig c = default_config(preset_or_throw(preset));

    c.scale = j.value("scale", std::string{"desk"});
    if (c.scale == "paper") {
        set_packet_momentum(c, 250.0, c.angle);
        c.dt = 2.5e-2;
        c.T = 9e4;
        c.stride = 1;
    } else if (c.scale != "desk") {
        throw Error(ErrorKind::Config, "scale must be \"desk\" or \"paper\"");
    }

    if (j.contains("domain")) c.domain = domain_from_json(j["domain"]);
    if (j.contains("solver")) {
        const Json& s = j["solver"];
        check_keys(s, {"h", "e_max", "basis"}, "solver");
        if (s.contains("h")) c.h = number_or_auto(s["h"], "solver.h");
        if (s.contains("e_max")) c.e_max = number_or_auto(s["e_max"], "solver.e_max");
        if (s.contains("basis")) c.basis_path = s["basis"].get<std::string>();
    }
    if (j.contains("packet")) {
        const Json& p = j["packet"];
        check_keys(p, {"r0", "p0", "angle", "sigma0", "p0_xy"}, "packet");
        if (p.contains("r0")) c.packet.r0 = vec_from_json(p["r0"], "packet.r0");
        if (p.contains("sigma0")) c.packet.sigma0 = number(p["sigma0"], "packet.sigma0");
        if (p.contains("p0_xy")) {
            if (p.contains("p0") || p.contains("angle"))
                throw Error(ErrorKind::Config, "packet.p0_xy excludes packet.p0 and packet.angle");
            const Vec2 v = vec_from_json(p["p0_xy"], "packet.p0_xy");
            set_packet_momentum(c, v.norm(), std::atan2(v.y, v.x));
        } else {
            const double mag = p.contains("p0") ? number(p["p0"], "packet.p0") : p_abs(c);
            const double ang = p.contains("angle") ? number(p["angle"], "packet.angle") : c.angle;
            set_packet_momentum(c, mag, ang);
        }
    }
    if (j.contains("orbit")) {
        const Json& o = j["orbit"];
        check_keys(o, {"start", "angle", "origin", "label"}, "orbit");
        if (o.contains("start")) c.orbit_start = vec_from_json(o["start"], "orbit.start");
        if (o.contains("angle")) c.orbit_angle = number(o["angle"], "orbit.angle");
        if (o.contains("origin")) c.orbit_origin = vec_from_json(o["origin"], "orbit.origin");
        if (o.contains("label")) c.orbit_label = o["label"].get<std::string>();
    }
    if (j.contains("times")) {
        const Json& t = j["times"];
        check_keys(t, {"dt", "T", "stride", "T_autocorr"}, "times");
        if (t.contains("dt")) c.dt = number_or_auto(t["dt"], "times.dt");
        if (t.contains("T")) {
            c.T = number(t["T"], "times.T");
            if (c.T < 0) throw Error(ErrorKind::Config, "times.T must be >= 0");
        }
        if (t.contains("stride")) {
            const double s = number(t["stride"], "times.stride");
            if (s < 1 || s != std::floor(s)) throw Error(ErrorKind::Config, "times.stride must be a positive integer");
            c.stride = static_cast<std::size_t>(s);
        }
        if (t.contains("T_autocorr")) c.T_autocorr = number_or_auto(t["T_autocorr"], "times.T_autocorr");
    }
    if (j.contains("analysis")) {
        const Json& a = j["analysis"];
        check_keys(a, {"epsilon", "E_step"}, "analysis");
        if (a.contains("epsilon")) {
            if (a["epsilon"].is_string() && a["epsilon"].get<std::string>() == "mean_spacing")
                c.epsilon.reset();
            else
                c.epsilon = number_or_auto(a["epsilon"], "analysis.epsilon");
            if (c.epsilon && *c.epsilon == 0.0) c.epsilon.reset();
        }
        if (a.contains("E_step")) c.E_step = number_or_auto(a["E_step"], "analysis.E_step");
    }
    if (j.contains("profile")) {
        const Json& p = j["profile"];
        check_keys(p, {"samples", "conjugate_halfwidth", "wall_halfwidth"}, "profile");
        if (p.contains("samples")) c.profile.samples = static_cast<int>(number(p["samples"], "profile.samples"));
        if (p.contains("conjugate_halfwidth")) c.profile.conjugate_halfwidth = number(p["conjugate_halfwidth"], "profile.conjugate_halfwidth");
        if (p.contains("wall_halfwidth")) c.profile.wall_halfwidth = number(p["wall_halfwidth"], "profile.wall_halfwidth");
    }
    if (j.contains("output")) c.output = j["output"].get<std::string>();
    return c;
}

Json config_to_json(const RunConfig& c) {
    Json j;
    j["preset"] = c.preset;
    j["scale"] = c.scale;
    j["domain"] = domain_to_json(c.domain);
    Json s;
    if (c.h > 0) s["h"] = c.h; else s["h"] = "auto";
    if (c.e_max > 0) s["e_max"] = c.e_max; else s["e_max"] = "auto";
    if (!c.basis_path.empty()) s["basis"] = c.basis_path;
    j["solver"] = s;
    j["packet"] = {{"r0", vec_to_json(c.packet.r0)}, {"p0", p_abs(c)}, {"angle", c.angle}, {"sigma0", c.packet.sigma0}};
    j["orbit"] = {{"start", vec_to_json(c.orbit_start)}, {"angle", c.orbit_angle}, {"origin", vec_to_json(c.orbit_origin)},
                  {"label", c.orbit_label}};
    Json t;
    if (c.dt > 0) t["dt"] = c.dt; else t["dt"] = "auto";
    t["T"] = c.T;
    t["stride"] = c.stride;
    if (c.T_autocorr > 0) t["T_autocorr"] = c.T_autocorr; else t["T_autocorr"] = "auto";
    j["times"] = t;
    Json a;
    if (c.epsilon) a["epsilon"] = *c.epsilon; else a["epsilon"] = "mean_spacing";
    if (c.E_step > 0) a["E_step"] = c.E_step; else a["E_step"] = "auto";
    j["analysis"] = a;
    j["profile"] = {{"samples", c.profile.samples}, {"conjugate_halfwidth", c.profile.conjugate_halfwidth},
                    {"wall_halfwidth", c.profile.wall_halfwidth}};
    j["output"] = c.output;
    return j;
}

void resolve(RunConfig& c) {
    if (!(c.packet.sigma0 > 0.0)) throw Error(ErrorKind::Config, "packet.sigma0 must be positive");
    const double v = p_abs(c);
    if (!(v > 0.0)) throw Error(ErrorKind::Config, "packet.p0 must be positive");
    if (!c.domain.strictly_inside(c.packet.r0)) throw Error(ErrorKind::Config, "packet.r0 must lie strictly inside the domain");
    const double E0 = c.packet.E0();
    if (c.e_max <= 0.0) c.e_max = E0 + 4.0 * v / c.packet.sigma0;
    const double k_max = std::sqrt(2.0 * c.e_max);
    if (c.h <= 0.0) c.h = 1.0 / std::ceil(2.0 * k_max);
    if (k_max * c.h > 0.5 + 1e-12)
        throw Error(ErrorKind::Config, "solver.h too coarse: k h = " + std::to_string(k_max * c.h) + " > 0.5 at e_max");
    if (c.dt <= 0.0) c.dt = c.packet.sigma0 / (4.0 * v);
    if (c.profile.samples < 3) throw Error(ErrorKind::Config, "profile.samples must be >= 3");
    if (c.T_autocorr <= 0.0) {
        // Orbit period needs the orbit; 20 periods.
        c.T_autocorr = 20.0 * make_orbit(c).L / v;
    }
}

Grid make_grid(const RunConfig& c) { return build_grid(c.domain, c.h); }

EigenBasis obtain_basis(const RunConfig& c, const Grid& grid, bool store) {
    if (!c.basis_path.empty() && std::filesystem::exists(c.basis_path)) {
        std::ifstream in(c.basis_path, std::ios::binary);
        EigenBasis b = read_basis(in, grid);
        const std::size_t expected = count_eigenvalues_below(hamiltonian(grid), c.e_max);
        if (b.size() == expected && (b.energies.empty() || b.energies.back() <= c.e_max)) {
            b.e_cutoff = c.e_max;
            return b;
        }
    }
    EigenBasis b = solve_eigensystem(grid, c.e_max);
    if (store && !c.basis_path.empty()) write_with(c.basis_path, [&](std::ostream& o) { write_basis(o, b); }, std::ios::binary);
    return b;
}

PeriodicOrbit make_orbit(const RunConfig& c) {
    PeriodicOrbit o = reorigin(find_periodic_orbit(c.domain, c.orbit_start, c.orbit_angle), c.orbit_origin);
    o.label = c.orbit_label;
    return o;
}

SpectralAnalysis analyse_spectrum(const RunConfig& c, const PeriodicOrbit& orbit, std::span<const double> energies,
                                  std::span<const double> weights) {
    SpectralAnalysis a;
    const double v = p_abs(c), s0 = c.packet.sigma0, E0 = c.packet.E0();
    const double width = v / s0;
    if (energies.empty()) throw Error(ErrorKind::Analysis, "empty spectrum");
    a.mean_spacing = mean_level_spacing(energies, std::max(E0 - width, energies.front()), std::min(E0 + width, energies.back()));
    a.epsilon = c.epsilon ? *c.epsilon : a.mean_spacing;
    const LyapunovExponent ly = lyapunov(orbit);
    a.marginal = ly.marginal;
    a.lambda = ly.marginal ? a.mean_spacing : ly.rate(v);
    a.delta_th = 2.0 * kPi * v / orbit.L;

    const double step = c.E_step > 0 ? c.E_step : std::min(a.epsilon, 0.5 * a.lambda) / 8.0;
    const auto grid = energy_grid(std::max(0.0, E0 - 4.0 * width), std::min(c.e_max, E0 + 4.0 * width), step);
    a.p_eps = swsf(weights, energies, a.epsilon, grid);
    a.w_measured = window_measured(a.p_eps);
    a.E_p = tallest_peak(a.w_measured, E0 - 2.0 * width, E0 + 2.0 * width);
    a.window = {a.E_p, a.delta_th, a.lambda, s0, v, E0, a.epsilon};
    a.w_model = model_window(a.window, grid);
    a.histogram = smoothed_histogram(weights, energies, 20.0 * a.epsilon, grid, a.epsilon);
    a.p_peaks = swsf(weights, energies, 0.5 * a.lambda, grid);

    a.delta_histogram = safe_spacing(a.histogram);
    a.delta_model = safe_spacing(a.w_model);
    a.delta_measured = a.marginal ? a.delta_histogram : safe_spacing(a.p_peaks);
    a.spikiness = spikiness(weights);
    return a;
}

RunResult run_pipeline(const RunConfig& c, const EigenBasis* basis) {
    Grid grid = make_grid(c);
    RunResult r{grid, basis ? *basis : obtain_basis(c, grid, true), {}, {}, {grid, {}, 0, 0, 0}, {}, {}, {}, {}, {}, 0, 0};
    if (!r.basis.grid.same_layout(grid)) throw Error(ErrorKind::Config, "basis grid does not match the configured grid");
    r.packet = make_gaussian(c.packet, grid, c.domain);
    r.coeffs = expand(r.basis, grid, r.packet.psi);
    r.averaged = c.T > 0 ? time_average(r.basis, r.coeffs, c.dt, c.T, c.stride) : infinite_time_average(r.basis, r.coeffs);

    std::vector<double> times;
    const auto n_t = static_cast<std::size_t>(std::floor(c.T_autocorr / c.dt + 1e-9));
    for (std::size_t k = 0; k <= n_t; ++k) times.push_back(static_cast<double>(k) * c.dt);
    r.autocorrelation = autocorrelation_spectral(r.basis, r.coeffs, times);

    r.orbit = make_orbit(c);
    const Eigen::VectorXd w = r.coeffs.weights();
    r.spectrum = analyse_spectrum(c, r.orbit, r.basis.energies, std::span<const double>(w.data(), static_cast<std::size_t>(w.size())));

    WindowModelParams sc = r.spectrum.window;
    if (std::isfinite(r.spectrum.delta_measured) && r.spectrum.delta_measured > 0) sc.Delta = r.spectrum.delta_measured;
    r.profile = scar_profile(r.orbit, r.averaged, c.domain, sc, c.profile);
    r.on_orbit_mean = r.profile.mean_included_num();
    r.control = off_orbit_control(r.averaged, r.orbit, c.domain);
    try {
        r.pearson = r.profile.pearson();
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Analysis) throw;
        r.pearson = kNaN;
    }
    return r;
}

Json run_summary(const RunConfig& c, const RunResult& r) {
    const SpectralAnalysis& s = r.spectrum;
    Json j;
    j["grid"] = {{"h", r.grid.h()}, {"nx", r.grid.nx()}, {"ny", r.grid.ny()}, {"dofs", r.grid.dof_count()},
                 {"area_quadrature", area_quadrature(r.grid)}};
    j["basis"] = {{"states", r.basis.size()}, {"e_cutoff", c.e_max}, {"weyl_count", weyl_count(c.domain, c.e_max)}};
    j["packet"] = {{"E0", c.packet.E0()}, {"completeness", r.coeffs.completeness}, {"completeness_flagged", r.coeffs.flagged},
                   {"tail_mass", r.packet.tail_mass}, {"tail_warning", r.packet.tail_warning}};
    j["averaged"] = {{"T", r.averaged.T}, {"N_t", r.averaged.N_t}, {"integral", r.averaged.integral()}};
    j["orbit"] = {{"label", r.orbit.label}, {"L", r.orbit.L}, {"N_C", r.orbit.N_C}, {"mu1", r.orbit.mu1},
                  {"u_geometric", r.orbit.u_geometric}, {"marginal", s.marginal}};
    j["spectrum"] = {{"mean_spacing", s.mean_spacing}, {"epsilon", s.epsilon}, {"lambda", s.lambda}, {"E_p", s.E_p},
                     {"delta_th", s.delta_th}, {"delta_measured", s.delta_measured}, {"delta_histogram", s.delta_histogram},
                     {"delta_model", s.delta_model}, {"spikiness", s.spikiness}};
    j["profile"] = {{"smooth_term", r.profile.smooth_term}, {"on_orbit_mean", r.on_orbit_mean},
                    {"off_orbit_mean", r.control.mean}, {"off_orbit_points", r.control.count},
                    {"on_off_ratio", r.on_orbit_mean / r.control.mean}, {"pearson", r.pearson}};
    return j;
}

void write_text(const std::filesystem::path& file, const std::string& body) {
    write_with(file, [&](std::ostream& o) { o << body; });
}

void write_config(const std::filesystem::path& dir, const RunConfig& c) {
    std::filesystem::create_directories(dir);
    write_text(dir / "config.json", config_to_json(c).dump(2) + "\n");
}

void write_run(const std::filesystem::path& dir, const RunConfig& c, const RunResult& r) {
    write_config(dir, c);
    write_with(dir / "grid.scg", [&](std::ostream& o) { write_grid(o, r.grid); }, std::ios::binary);
    write_with(dir / "basis.bin", [&](std::ostream& o) { write_basis(o, r.basis); }, std::ios::binary);
    write_with(dir / "energies.csv", [&](std::ostream& o) { write_energies_csv(o, r.basis); });
    std::vector<cplx> cs(r.coeffs.c.data(), r.coeffs.c.data() + r.coeffs.c.size());
    write_with(dir / "coefficients.csv", [&](std::ostream& o) { write_coefficients_csv(o, r.basis.energies, cs); });
    write_with(dir / "packet.fld", [&](std::ostream& o) { write_field(o, r.grid, r.packet.psi, 0.0); }, std::ios::binary);
    write_with(dir / "averaged.fld", [&](std::ostream& o) { write_density(o, r.grid, r.averaged.values, r.averaged.T); },
               std::ios::binary);
    write_with(dir / "autocorrelation.csv", [&](std::ostream& o) { write_time_series_csv(o, r.autocorrelation); });
    write_with(dir / "spectrum_p_eps.csv", [&](std::ostream& o) { write_spectrum_csv(o, r.spectrum.p_eps); });
    write_with(dir / "window_measured.csv", [&](std::ostream& o) { write_spectrum_csv(o, r.spectrum.w_measured); });
    write_with(dir / "window_model.csv", [&](std::ostream& o) { write_spectrum_csv(o, r.spectrum.w_model); });
    write_with(dir / "histogram.csv", [&](std::ostream& o) { write_spectrum_csv(o, r.spectrum.histogram); });
    write_with(dir / "orbit.json", [&](std::ostream& o) { write_orbit_json(o, r.orbit, c.domain); });
    write_with(dir / "profile.csv", [&](std::ostream& o) { write_profile_csv(o, r.profile); });
    write_text(dir / "summary.json", run_summary(c, r).dump(2) + "\n");
}

} // namespace scar
