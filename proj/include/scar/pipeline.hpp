#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "scar/analysis.hpp"
#include "scar/classical.hpp"
#include "scar/dynamics.hpp"
#include "scar/semiclassics.hpp"
#include "scar/spectral.hpp"

namespace scar {

using Json = nlohmann::ordered_json;

/// Fully resolved run parameters. Zero in h, e_max, T_autocorr or E_step means
/// "derive it" until resolve() fills the value in.
struct RunConfig {
    std::string preset = "No7";
    std::string scale = "desk";
    Domain domain = Domain::quarter_stadium();

    double h = 0.0;          // solver mesh; auto: k_max h = 0.5 at e_max
    double e_max = 0.0;      // auto: E0 + 4 v / sigma0
    std::string basis_path;  // reuse a stored basis when its grid and cutoff match

    WavepacketParams packet;
    double angle = 0.0;      // of p0, counterclockwise from +x

    Vec2 orbit_start;
    double orbit_angle = 0.0;
    Vec2 orbit_origin;
    std::string orbit_label;

    double dt = 0.0;         // sampling step of the time average and autocorrelation
    double T = 0.0;          // averaging horizon; 0 selects the infinite-time limit
    std::size_t stride = 1;
    double T_autocorr = 0.0; // auto: 20 orbit periods

    std::optional<double> epsilon;   // empty: mean level spacing
    double E_step = 0.0;             // auto: epsilon / 8

    ProfileOptions profile;
    std::string output = "out";
};

/// Desk-scale defaults with the given preset applied.
RunConfig default_config(Preset preset = Preset::No7);

/// Layered: defaults, then "scale", then "preset", then every explicit key.
RunConfig config_from_json(const Json& j);
Json config_to_json(const RunConfig& c);

/// Fills derived values; throws Config errors on invalid combinations.
void resolve(RunConfig& c);

Grid make_grid(const RunConfig& c);

/// Solves, or loads `basis_path` when it exists and matches; with `store` the
/// solved basis is written there.
EigenBasis obtain_basis(const RunConfig& c, const Grid& grid, bool store = false);

PeriodicOrbit make_orbit(const RunConfig& c);

struct SpectralAnalysis {
    double mean_spacing = 0.0;
    double epsilon = 0.0;
    double lambda = 0.0;          // Lorentzian width of the comb (Lyapunov rate or mean spacing)
    bool marginal = false;
    double delta_th = 0.0;        // 2 pi v / L
    double delta_measured = 0.0;  // median spacing of P_eps at eps = lambda/2
    double delta_histogram = 0.0; // median spacing of the 20 eps smoothed histogram
    double delta_model = 0.0;     // median spacing of the model window
    double E_p = 0.0;
    double spikiness = 0.0;
    WindowModelParams window;
    SmoothedSpectrum p_eps, w_measured, w_model, histogram, p_peaks;
};

/// Works from energies and weights alone, so stored coefficient files can be reanalysed.
SpectralAnalysis analyse_spectrum(const RunConfig& c, const PeriodicOrbit& orbit, std::span<const double> energies,
                                  std::span<const double> weights);

struct RunResult {
    Grid grid;
    EigenBasis basis;
    Wavepacket packet;
    ExpansionCoeffs coeffs;
    AveragedField averaged;
    PeriodicOrbit orbit;
    SpectralAnalysis spectrum;
    TimeSeries autocorrelation;
    ScarProfile profile;
    ControlSample control;
    double on_orbit_mean = 0.0;
    double pearson = 0.0;
};

RunResult run_pipeline(const RunConfig& c, const EigenBasis* basis = nullptr);

/// Writes every artefact of a run plus config.json and summary.json.
void write_run(const std::filesystem::path& dir, const RunConfig& c, const RunResult& r);
Json run_summary(const RunConfig& c, const RunResult& r);

void write_config(const std::filesystem::path& dir, const RunConfig& c);
void write_text(const std::filesystem::path& file, const std::string& body);

} // namespace scar
