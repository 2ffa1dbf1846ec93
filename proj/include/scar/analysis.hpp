#pragma once

#include <complex>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scar/spectral.hpp"

namespace scar {

/// (eps/pi) / (x^2 + eps^2)
double delta_lorentz(double x, double eps);
/// 2 pi eps delta_eps(x)^2 = (2 eps^3/pi) / (x^2 + eps^2)^2
double delta_bar(double x, double eps);

enum class SpectrumKind { P_eps, WindowMeasured, WindowModel, SmoothedHistogram };

std::string to_string(SpectrumKind k);

struct SmoothedSpectrum {
    std::vector<double> E;
    std::vector<double> values;
    double epsilon = 0.0;
    SpectrumKind kind = SpectrumKind::P_eps;
    double width = 0.0;   // smoothing scale used to resolve peaks
};

/// Uniform grid lo, lo + step, ..., <= hi.
std::vector<double> energy_grid(double lo, double hi, double step);

/// P_eps(E) = sum_n w_n delta_eps(E - E_n).
SmoothedSpectrum swsf(std::span<const double> weights, std::span<const double> energies, double eps,
                      std::span<const double> E_grid);
/// w(E) = -2 eps P_eps(E).
SmoothedSpectrum window_measured(const SmoothedSpectrum& p_eps);

/// Im G_eps(r, r; E) = -pi sum_n phi_n(r)^2 delta_eps(E - E_n).
std::vector<double> smoothed_green_diag(std::span<const double> phi2_at_r, std::span<const double> energies,
                                        double eps, std::span<const double> E_grid);
/// phi_n(r)^2 for every state, bilinear in the grid cell containing r.
std::vector<double> density_at(const EigenBasis& basis, Vec2 r);
std::vector<double> smoothed_green_diag(const EigenBasis& basis, Vec2 r, double eps, std::span<const double> E_grid);

struct WindowModelParams {
    double E_p = 0.0;      // comb anchor
    double Delta = 0.0;    // comb spacing 2 pi v / L
    double lambda = 0.0;   // Lyapunov rate (1/time); Lorentzian half-width lambda/2
    double sigma0 = 0.0;
    double v = 0.0;
    double E0 = 0.0;
    double epsilon = 0.0;

    void validate() const;
};

/// Gaussian envelope times Lorentzian comb, scaled by -2 eps; teeth whose
/// envelope is below 1e-8 of its maximum are dropped.
SmoothedSpectrum model_window(const WindowModelParams& params, std::span<const double> E_grid);

struct PoissonCheck {
    double max_abs_difference = 0.0;
    std::vector<std::complex<double>> returns;   // sum over orbit passes
    std::vector<std::complex<double>> comb;      // Poisson-resummed form
};

/// Compares sum_n exp[-v^2 (t - n tau)^2/(4 sigma0^2) - i E0 (t - n tau)] e^{-lambda|t|/2}
/// with its resummation over E_n = n Delta, tau = 2 pi / Delta. Passes within
/// `n_sigma` temporal widths of t and comb teeth within `n_sigma` envelope
/// widths of E0 are kept.
PoissonCheck poisson_sum_check(const WindowModelParams& params, std::span<const double> t_grid, double n_sigma = 12.0);

/// Boxcar of the given full width over the point masses w_n at E_n, per unit energy.
SmoothedSpectrum smoothed_histogram(std::span<const double> weights, std::span<const double> energies, double width,
                                    std::span<const double> E_grid, double epsilon);

struct Peak {
    double E;
    double value;
};

/// Local maxima (plateaus count once, at their centre) above `rel_threshold` of
/// the global maximum that are also the maximum within +-resolution/2.
std::vector<Peak> find_peaks(const SmoothedSpectrum& s, double resolution, double rel_threshold = 0.1);

/// Median gap between consecutive qualifying peaks; resolution defaults to the spectrum's width.
double peak_spacing(const SmoothedSpectrum& s, double resolution = -1.0);

/// Energy of the tallest peak (by |value|) inside [lo, hi].
double tallest_peak(const SmoothedSpectrum& s, double lo, double hi);

/// A_eps(r) = int w(E) Im G_eps(r, r; E) dE by the trapezoid rule on E_grid.
double a_eps_green_route(std::span<const double> window, std::span<const double> im_green, std::span<const double> E_grid);

/// Closed form of the same integral: sum_{n,n'} w_n phi2_n' 4 eps^2 / ((E_n - E_n')^2 + 4 eps^2).
double a_eps_closed_form(std::span<const double> weights, std::span<const double> phi2, std::span<const double> energies,
                         double eps);

/// Grid with spacing eps/`per_eps` inside +-`halo` eps of every level and
/// `coarse` elsewhere, sorted and unique.
std::vector<double> adapted_energy_grid(std::span<const double> energies, double eps, double lo, double hi,
                                        double per_eps = 8.0, double halo = 40.0, double coarse = -1.0);

/// max w / mean w.
double spikiness(std::span<const double> weights);

void write_spectrum_csv(std::ostream& out, const SmoothedSpectrum& s);
void write_coefficients_csv(std::ostream& out, std::span<const double> energies,
                            std::span<const std::complex<double>> c);

} // namespace scar
