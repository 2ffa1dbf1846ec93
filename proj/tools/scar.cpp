// Command-line driver: grid | eigs | run | spectrum | orbit | profile | check.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "scar/error.hpp"
#include "scar/pipeline.hpp"

using namespace scar;
namespace fs = std::filesystem;

namespace {

struct Flags {
    std::string config, preset, scale, basis, out;
    std::optional<double> p0, angle, sigma0, h, e_max, dt, T, epsilon;
    std::optional<std::size_t> stride;
    std::vector<double> r0;
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--preset", f.preset, "No7 | No12 | No14 | BouncingBall");
    app->add_option("--scale", f.scale, "desk | paper");
    app->add_option("--p0", f.p0, "|p0|");
    app->add_option("--angle", f.angle, "momentum angle, radians counterclockwise from +x");
    app->add_option("--sigma0", f.sigma0, "packet width");
    app->add_option("--r0", f.r0, "launch point x y")->expected(2);
    app->add_option("--mesh", f.h, "solver mesh spacing h");
    app->add_option("--e-max", f.e_max, "eigenvalue cutoff");
    app->add_option("--dt", f.dt, "sampling step");
    app->add_option("--T", f.T, "averaging horizon (0: infinite-time limit)");
    app->add_option("--stride", f.stride, "sample every k-th step");
    app->add_option("--epsilon", f.epsilon, "Lorentzian half-width (default: mean level spacing)");
    app->add_option("--basis", f.basis, "basis file to reuse or create");
    app->add_option("--out", f.out, "output directory");
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot read config '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, "config '" + path + "': " + e.what());
    }
}

RunConfig load_config(const Flags& f) {
    Json j = f.config.empty() ? Json::object() : read_json_file(f.config);
    Json o = Json::object();
    if (!f.preset.empty()) {
        j.erase("orbit");   // a preset on the command line replaces the file's launch
        if (j.contains("packet")) {
            j["packet"].erase("r0");
            j["packet"].erase("angle");
        }
        o["preset"] = f.preset;
    }
    if (!f.scale.empty()) o["scale"] = f.scale;
    if (f.p0) o["packet"]["p0"] = *f.p0;
    if (f.angle) o["packet"]["angle"] = *f.angle;
    if (f.sigma0) o["packet"]["sigma0"] = *f.sigma0;
    if (!f.r0.empty()) o["packet"]["r0"] = f.r0;
    if (f.h) o["solver"]["h"] = *f.h;
    if (f.e_max) o["solver"]["e_max"] = *f.e_max;
    if (!f.basis.empty()) o["solver"]["basis"] = f.basis;
    if (f.dt) o["times"]["dt"] = *f.dt;
    if (f.T) o["times"]["T"] = *f.T;
    if (f.stride) o["times"]["stride"] = *f.stride;
    if (f.epsilon) o["analysis"]["epsilon"] = *f.epsilon;
    if (!f.out.empty()) o["output"] = f.out;
    j.merge_patch(o);
    RunConfig c = config_from_json(j);
    resolve(c);
    return c;
}

template <class F>
void write_file(const fs::path& p, F&& f, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(p, mode);
    if (!out) throw Error(ErrorKind::Config, "cannot open '" + p.string() + "' for writing");
    f(out);
}

struct Coefficients {
    std::vector<double> E, w;
};

Coefficients read_coefficients(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot read coefficients '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "n,E,re,im,abs2")
        throw Error(ErrorKind::Config, "coefficients '" + path + "': expected header n,E,re,im,abs2");
    Coefficients c;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t n;
        double E, re, im, a2;
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf", &n, &E, &re, &im, &a2) != 5)
            throw Error(ErrorKind::Config, "coefficients '" + path + "': malformed row '" + line + "'");
        c.E.push_back(E);
        c.w.push_back(a2);
    }
    return c;
}

void write_spectra(const fs::path& dir, const SpectralAnalysis& s) {
    write_file(dir / "spectrum_p_eps.csv", [&](std::ostream& o) { write_spectrum_csv(o, s.p_eps); });
    write_file(dir / "window_measured.csv", [&](std::ostream& o) { write_spectrum_csv(o, s.w_measured); });
    write_file(dir / "window_model.csv", [&](std::ostream& o) { write_spectrum_csv(o, s.w_model); });
    write_file(dir / "histogram.csv", [&](std::ostream& o) { write_spectrum_csv(o, s.histogram); });
}

Json spectrum_json(const SpectralAnalysis& s) {
    return {{"mean_spacing", s.mean_spacing}, {"epsilon", s.epsilon}, {"lambda", s.lambda}, {"marginal", s.marginal},
            {"E_p", s.E_p}, {"delta_th", s.delta_th}, {"delta_measured", s.delta_measured},
            {"delta_histogram", s.delta_histogram}, {"delta_model", s.delta_model}, {"spikiness", s.spikiness}};
}

void emit(const fs::path& dir, const std::string& name, const Json& j) {
    const std::string body = j.dump(2) + "\n";
    write_text(dir / name, body);
    std::cout << body;
}

int cmd_grid(const RunConfig& c) {
    write_config(c.output, c);
    const Grid g = make_grid(c);
    write_file(fs::path(c.output) / "grid.scg", [&](std::ostream& o) { write_grid(o, g); }, std::ios::binary);
    emit(c.output, "grid.json",
         {{"nx", g.nx()}, {"ny", g.ny()}, {"h", g.h()}, {"dofs", g.dof_count()}, {"area_quadrature", area_quadrature(g)},
          {"area_exact", c.domain.area()}});
    return 0;
}

int cmd_eigs(const RunConfig& c) {
    write_config(c.output, c);
    const Grid g = make_grid(c);
    const EigenBasis b = obtain_basis(c, g, true);
    const fs::path dir = c.output;
    write_file(dir / "grid.scg", [&](std::ostream& o) { write_grid(o, g); }, std::ios::binary);
    write_file(dir / "basis.bin", [&](std::ostream& o) { write_basis(o, b); }, std::ios::binary);
    write_file(dir / "energies.csv", [&](std::ostream& o) { write_energies_csv(o, b); });
    Json j{{"states", b.size()}, {"e_max", c.e_max}, {"weyl_count", weyl_count(c.domain, c.e_max)},
           {"max_residual", max_residual(b)}};
    const double E0 = c.packet.E0(), wdt = c.packet.speed() / c.packet.sigma0;
    try {
        j["mean_spacing"] = mean_level_spacing(b, std::max(E0 - wdt, 0.0), std::min(E0 + wdt, c.e_max));
    } catch (const Error&) {
        j["mean_spacing"] = nullptr;
    }
    emit(dir, "eigs.json", j);
    return 0;
}

int cmd_run(const RunConfig& c) {
    const RunResult r = run_pipeline(c);
    write_run(c.output, c, r);
    std::cout << run_summary(c, r).dump(2) << "\n";
    return 0;
}

int cmd_spectrum(const RunConfig& c, const std::string& coeff_path) {
    write_config(c.output, c);
    const Coefficients k = read_coefficients(coeff_path);
    const PeriodicOrbit orbit = make_orbit(c);
    const SpectralAnalysis s = analyse_spectrum(c, orbit, k.E, k.w);
    write_spectra(c.output, s);
    emit(c.output, "spectrum.json", spectrum_json(s));
    return 0;
}

int cmd_orbit(const RunConfig& c) {
    write_config(c.output, c);
    const PeriodicOrbit orbit = make_orbit(c);
    std::ostringstream s;
    write_orbit_json(s, orbit, c.domain);
    write_text(fs::path(c.output) / "orbit.json", s.str());
    std::cout << s.str();
    return 0;
}

int cmd_profile(const RunConfig& c, const std::string& field_path, const std::string& coeff_path) {
    write_config(c.output, c);
    std::ifstream in(field_path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Config, "cannot read field '" + field_path + "'");
    const FieldFile f = read_field(in);
    if (!f.real) throw Error(ErrorKind::Config, "profile needs a REAL density field");
    const Grid g = make_grid(c);
    if (f.nx != g.nx() || f.ny != g.ny() || std::abs(f.h - g.h()) > 1e-12 * g.h())
        throw Error(ErrorKind::Config, "field lattice does not match the configured grid");
    AveragedField avg{g, Eigen::VectorXd(g.dof_count()), f.t, 0, c.dt};
    for (std::size_t k = 0; k < g.dof_count(); ++k)
        avg.values[static_cast<Eigen::Index>(k)] = f.values[static_cast<Eigen::Index>(g.node_of_dof(k))].real();
    const Coefficients k = read_coefficients(coeff_path);
    const PeriodicOrbit orbit = make_orbit(c);
    const SpectralAnalysis s = analyse_spectrum(c, orbit, k.E, k.w);
    WindowModelParams w = s.window;
    if (std::isfinite(s.delta_measured) && s.delta_measured > 0) w.Delta = s.delta_measured;
    const ScarProfile p = scar_profile(orbit, avg, c.domain, w, c.profile);
    write_file(fs::path(c.output) / "profile.csv", [&](std::ostream& o) { write_profile_csv(o, p); });
    const ControlSample ctl = off_orbit_control(avg, orbit, c.domain);
    Json j{{"smooth_term", p.smooth_term}, {"on_orbit_mean", p.mean_included_num()}, {"off_orbit_mean", ctl.mean},
           {"off_orbit_points", ctl.count}};
    try {
        j["pearson"] = p.pearson();
    } catch (const Error&) {
        j["pearson"] = nullptr;
    }
    emit(c.output, "profile.json", j);
    return 0;
}

struct CheckRow {
    std::string name;
    double value, tol;
    bool pass;
};

int cmd_check() {
    std::vector<CheckRow> rows;
    auto add = [&](std::string n, double v, double tol) { rows.push_back({std::move(n), v, tol, std::abs(v) <= tol}); };

    double worst = 0;
    for (double x : {-3.0, -0.1, 0.0, 0.7, 12.0}) {
        const double d = delta_lorentz(x, 0.8);
        worst = std::max(worst, std::abs(delta_bar(x, 0.8) - 2 * std::numbers::pi * 0.8 * d * d) / delta_bar(x, 0.8));
    }
    add("delta_bar identity (relative)", worst, 1e-14);

    // Substituting x = eps tan(theta) makes the integrand smooth on (-pi/2, pi/2).
    const int n = 20000;
    double I = 0;
    for (int k = 0; k < n; ++k) {
        const double th = -std::numbers::pi / 2 + (k + 0.5) * std::numbers::pi / n;
        const double x = std::tan(th);
        I += delta_bar(x, 1.0) * (1 + x * x) * std::numbers::pi / n;
    }
    add("integral of delta_bar - 1", I - 1, 1e-9);

    const PeriodicOrbit no7 = preset_orbit(Preset::No7);
    WindowModelParams w{0, 2 * std::numbers::pi * 60 / no7.L, lyapunov(no7).rate(60), 0.15, 60, 1800, 3.4};
    std::vector<double> t;
    for (int k = 0; k <= 800; ++k) t.push_back(k * no7.L / 60 / 100);
    add("Poisson resummation max |difference|", poisson_sum_check(w, t).max_abs_difference, 1e-6);

    double m12 = 0;
    for (int k = 0; k < 100; ++k) {
        const double xi = no7.L * k / 100.0, f = xi <= no7.L / 2 ? xi : no7.L - xi;
        m12 = std::max(m12, std::abs(monodromy_at(no7, xi).m12 + 2 * ((2 + std::sqrt(2.0)) - f * f)));
    }
    add("No7 m12 closed form max |difference|", m12, 1e-6);

    const Domain d = Domain::quarter_stadium();
    const Grid g = build_grid(d, 0.05);
    const EigenBasis b = solve_eigensystem(g, 1e9);
    const Wavepacket p = make_gaussian(WavepacketParams::polar({0.5, 0.5}, 8.0, -std::numbers::pi / 4, 0.15), g, d);
    const ExpansionCoeffs c = expand(b, g, p.psi);
    std::vector<double> ts;
    for (int k = 0; k < 40; ++k) ts.push_back(0.01 * k);
    const TimeSeries s1 = autocorrelation_spectral(b, c, ts), s2 = autocorrelation_overlap(b, c, p.psi, ts);
    double ac = 0;
    for (std::size_t k = 0; k < ts.size(); ++k) ac = std::max(ac, std::abs(s1.value[k] - s2.value[k]));
    add("autocorrelation routes max |difference|", ac, 1e-6);

    const Vec2 r = g.dof_position(g.dof_count() / 3);
    const auto phi2 = density_at(b, r);
    const std::vector<double> E(b.energies.begin() + 40, b.energies.begin() + 60), pp(phi2.begin() + 40, phi2.begin() + 60);
    std::vector<double> wt(20, 0.05);
    double gap = 1e300;
    for (std::size_t k = 1; k < E.size(); ++k) gap = std::min(gap, E[k] - E[k - 1]);
    const double eps = 1e-3 * gap;
    const auto eg = adapted_energy_grid(E, eps, E.front() - 1e4 * eps, E.back() + 1e4 * eps);
    const SmoothedSpectrum win = window_measured(swsf(wt, E, eps, eg));
    double A = 0;
    for (std::size_t k = 0; k < E.size(); ++k) A += wt[k] * pp[k];
    add("Green's-function route vs eigen-sum (relative)",
        (a_eps_green_route(win.values, smoothed_green_diag(pp, E, eps, eg), eg) - A) / A, 0.02);

    add("smooth term - 0.5601", smooth_term(d) - 0.5601, 5e-5);

    bool ok = true;
    std::printf("%-48s %14s %10s  %s\n", "check", "value", "tol", "result");
    for (const CheckRow& row : rows) {
        std::printf("%-48s %14.4e %10.1e  %s\n", row.name.c_str(), row.value, row.tol, row.pass ? "PASS" : "FAIL");
        ok &= row.pass;
    }
    return ok ? 0 : static_cast<int>(ErrorKind::Analysis);
}

void report(ErrorKind kind, const std::string& msg) {
    const Json j{{"error", {{"code", static_cast<int>(kind)}, {"kind", to_string(kind)}, {"message", msg}}}};
    std::cerr << j.dump() << "\n";
}

}

int main(int argc, char** argv) {
    CLI::App app{"Wavepacket scars in the quarter stadium billiard"};
    app.require_subcommand(1);
    Flags f;
    std::string coeff_path, field_path;

    auto* grid = app.add_subcommand("grid", "build and store the solver mesh");
    auto* eigs = app.add_subcommand("eigs", "solve the eigenbasis up to e_max");
    auto* run = app.add_subcommand("run", "full pipeline: basis, packet, averages, spectra, profile");
    auto* spectrum = app.add_subcommand("spectrum", "spectra from a coefficients CSV");
    auto* orbit = app.add_subcommand("orbit", "trace a periodic orbit and write its JSON");
    auto* profile = app.add_subcommand("profile", "scar profile from an averaged density field");
    auto* check = app.add_subcommand("check", "internal oracle suite");
    for (auto* s : {grid, eigs, run, spectrum, orbit, profile}) add_common(s, f);
    spectrum->add_option("--coefficients", coeff_path, "coefficients CSV")->required();
    profile->add_option("--field", field_path, "REAL density field")->required();
    profile->add_option("--coefficients", coeff_path, "coefficients CSV of the same run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        report(ErrorKind::Config, e.what());
        return static_cast<int>(ErrorKind::Config);
    }

    try {
        if (*check) return cmd_check();
        const RunConfig c = load_config(f);
        if (*grid) return cmd_grid(c);
        if (*eigs) return cmd_eigs(c);
        if (*run) return cmd_run(c);
        if (*spectrum) return cmd_spectrum(c, coeff_path);
        if (*orbit) return cmd_orbit(c);
        if (*profile) return cmd_profile(c, field_path, coeff_path);
    } catch (const Error& e) {
        report(e.kind(), e.what());
        return static_cast<int>(e.kind());
    } catch (const nlohmann::json::exception& e) {
        report(ErrorKind::Config, e.what());
        return static_cast<int>(ErrorKind::Config);
    } catch (const fs::filesystem_error& e) {
        report(ErrorKind::Config, e.what());
        return static_cast<int>(ErrorKind::Config);
    } catch (const std::exception& e) {
        report(ErrorKind::Solver, e.what());
        return static_cast<int>(ErrorKind::Solver);
    }
    return 0;
}
