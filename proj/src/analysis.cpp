#include "scar/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

#include "scar/error.hpp"

namespace scar {

namespace {
constexpr double kPi = std::numbers::pi;

bool is_window(SpectrumKind k) { return k == SpectrumKind::WindowMeasured || k == SpectrumKind::WindowModel; }

void require_positive(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) throw Error(ErrorKind::Config, std::string(what) + " must be positive");
}
} // namespace

double delta_lorentz(double x, double eps) { return (eps / kPi) / (x * x + eps * eps); }

double delta_bar(double x, double eps) {
    const double d = x * x + eps * eps;
    return (2.0 * eps * eps * eps / kPi) / (d * d);
}

std::string to_string(SpectrumKind k) {
    switch (k) {
    case SpectrumKind::P_eps: return "P_eps";
    case SpectrumKind::WindowMeasured: return "window_measured";
    case SpectrumKind::WindowModel: return "window_model";
    case SpectrumKind::SmoothedHistogram: return "smoothed_histogram";
    }
    return "unknown";
}

std::vector<double> energy_grid(double lo, double hi, double step) {
    require_positive(step, "energy step");
    if (hi < lo) throw Error(ErrorKind::Config, "energy grid upper bound below lower bound");
    std::vector<double> g;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    g.reserve(n + 1);
    for (std::size_t k = 0; k <= n; ++k) g.push_back(lo + static_cast<double>(k) * step);
    return g;
}

SmoothedSpectrum swsf(std::span<const double> weights, std::span<const double> energies, double eps,
                      std::span<const double> E_grid) {
    require_positive(eps, "epsilon");
    if (weights.size() != energies.size()) throw Error(ErrorKind::Config, "weights and energies differ in length");
    SmoothedSpectrum s{{E_grid.begin(), E_grid.end()}, std::vector<double>(E_grid.size(), 0.0), eps,
                       SpectrumKind::P_eps, eps};
    for (std::size_t i = 0; i < E_grid.size(); ++i) {
        double acc = 0.0;
        for (std::size_t n = 0; n < energies.size(); ++n) acc += weights[n] * delta_lorentz(E_grid[i] - energies[n], eps);
        s.values[i] = acc;
    }
    return s;
}

SmoothedSpectrum window_measured(const SmoothedSpectrum& p) {
    if (p.kind != SpectrumKind::P_eps) throw Error(ErrorKind::Analysis, "window_measured needs a P_eps spectrum");
    SmoothedSpectrum w = p;
    w.kind = SpectrumKind::WindowMeasured;
    for (double& v : w.values) v *= -2.0 * p.epsilon;
    return w;
}

std::vector<double> smoothed_green_diag(std::span<const double> phi2, std::span<const double> energies, double eps,
                                        std::span<const double> E_grid) {
    require_positive(eps, "epsilon");
    if (phi2.size() != energies.size()) throw Error(ErrorKind::Config, "densities and energies differ in length");
    std::vector<double> g(E_grid.size(), 0.0);
    for (std::size_t i = 0; i < E_grid.size(); ++i) {
        double acc = 0.0;
        for (std::size_t n = 0; n < energies.size(); ++n) acc += phi2[n] * delta_lorentz(E_grid[i] - energies[n], eps);
        g[i] = -kPi * acc;
    }
    return g;
}

std::vector<double> density_at(const EigenBasis& basis, Vec2 r) {
    std::vector<double> out(basis.size());
    for (std::size_t n = 0; n < basis.size(); ++n) {
        const double phi = basis.grid.interpolate(basis.states.col(static_cast<Eigen::Index>(n)), r);
        out[n] = phi * phi;
    }
    return out;
}

std::vector<double> smoothed_green_diag(const EigenBasis& basis, Vec2 r, double eps, std::span<const double> E_grid) {
    const std::vector<double> phi2 = density_at(basis, r);
    return smoothed_green_diag(phi2, basis.energies, eps, E_grid);
}

void WindowModelParams::validate() const {
    require_positive(Delta, "comb spacing Delta");
    require_positive(lambda, "peak width lambda");
    require_positive(sigma0, "sigma0");
    require_positive(v, "speed v");
    require_positive(epsilon, "epsilon");
}

SmoothedSpectrum model_window(const WindowModelParams& p, std::span<const double> E_grid) {
    p.validate();
    const double a = p.sigma0 / p.v;
    auto envelope = [&](double E) { return std::exp(-a * a * (E - p.E0) * (E - p.E0)); };
    // Teeth with envelope >= 1e-8: |E - E0| <= sqrt(ln 1e8)/a.
    const double reach = std::sqrt(std::log(1e8)) / a;
    const auto n_lo = static_cast<long>(std::ceil((p.E0 - reach - p.E_p) / p.Delta));
    const auto n_hi = static_cast<long>(std::floor((p.E0 + reach - p.E_p) / p.Delta));
    const double half = 0.5 * p.lambda;
    SmoothedSpectrum s{{E_grid.begin(), E_grid.end()}, std::vector<double>(E_grid.size(), 0.0), p.epsilon,
                       SpectrumKind::WindowModel, half};
    const double pre = -2.0 * p.epsilon * a / std::sqrt(kPi);
    for (std::size_t i = 0; i < E_grid.size(); ++i) {
        const double E = E_grid[i];
        double comb = 0.0;
        for (long n = n_lo; n <= n_hi; ++n) {
            const double x = E - p.E_p - static_cast<double>(n) * p.Delta;
            comb += half / (x * x + half * half);
        }
        s.values[i] = pre * envelope(E) * (p.Delta / kPi) * comb;
    }
    return s;
}

PoissonCheck poisson_sum_check(const WindowModelParams& p, std::span<const double> t_grid, double n_sigma) {
    require_positive(p.Delta, "comb spacing Delta");
    require_positive(p.sigma0, "sigma0");
    require_positive(p.v, "speed v");
    if (!(p.lambda >= 0.0)) throw Error(ErrorKind::Config, "lambda must be non-negative");
    const double tau = 2.0 * kPi / p.Delta;
    const double t_width = 2.0 * p.sigma0 / p.v;      // exp(-(s/t_width)^2)
    const double e_width = p.v / p.sigma0;            // exp(-((E - E0)/e_width)^2)
    const std::complex<double> I(0.0, 1.0);
    PoissonCheck out;
    const auto m_lo = static_cast<long>(std::ceil((p.E0 - n_sigma * e_width) / p.Delta));
    const auto m_hi = static_cast<long>(std::floor((p.E0 + n_sigma * e_width) / p.Delta));
    for (double t : t_grid) {
        const double damp = std::exp(-0.5 * p.lambda * std::abs(t));
        std::complex<double> a = 0.0;
        const auto n_lo = static_cast<long>(std::ceil((t - n_sigma * t_width) / tau));
        const auto n_hi = static_cast<long>(std::floor((t + n_sigma * t_width) / tau));
        for (long n = n_lo; n <= n_hi; ++n) {
            const double s = t - static_cast<double>(n) * tau;
            a += std::exp(-(s / t_width) * (s / t_width) - I * (p.E0 * s));
        }
        std::complex<double> b = 0.0;
        for (long m = m_lo; m <= m_hi; ++m) {
            const double En = static_cast<double>(m) * p.Delta;
            b += (p.Delta / std::sqrt(kPi)) * (p.sigma0 / p.v) * std::exp(-((En - p.E0) / e_width) * ((En - p.E0) / e_width)) *
                 std::exp(-I * (En * t));
        }
        a *= damp;
        b *= damp;
        out.returns.push_back(a);
        out.comb.push_back(b);
        out.max_abs_difference = std::max(out.max_abs_difference, std::abs(a - b));
    }
    return out;
}

SmoothedSpectrum smoothed_histogram(std::span<const double> weights, std::span<const double> energies, double width,
                                    std::span<const double> E_grid, double epsilon) {
    require_positive(width, "histogram width");
    if (weights.size() != energies.size()) throw Error(ErrorKind::Config, "weights and energies differ in length");
    // Sorted levels with prefix sums for the sliding window.
    std::vector<std::size_t> order(energies.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return energies[a] < energies[b]; });
    std::vector<double> e(order.size()), prefix(order.size() + 1, 0.0);
    for (std::size_t k = 0; k < order.size(); ++k) {
        e[k] = energies[order[k]];
        prefix[k + 1] = prefix[k] + weights[order[k]];
    }
    SmoothedSpectrum s{{E_grid.begin(), E_grid.end()}, std::vector<double>(E_grid.size(), 0.0), epsilon,
                       SpectrumKind::SmoothedHistogram, width};
    for (std::size_t i = 0; i < E_grid.size(); ++i) {
        const auto lo = std::lower_bound(e.begin(), e.end(), E_grid[i] - 0.5 * width) - e.begin();
        const auto hi = std::upper_bound(e.begin(), e.end(), E_grid[i] + 0.5 * width) - e.begin();
        s.values[i] = (prefix[static_cast<std::size_t>(hi)] - prefix[static_cast<std::size_t>(lo)]) / width;
    }
    return s;
}

std::vector<Peak> find_peaks(const SmoothedSpectrum& s, double resolution, double rel_threshold) {
    const std::size_t n = s.values.size();
    std::vector<double> mag(n);
    const double sign = is_window(s.kind) ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) mag[i] = sign * s.values[i];
    std::vector<Peak> peaks;
    if (n < 3) return peaks;
    const double top = *std::max_element(mag.begin(), mag.end());
    if (!(top > 0.0)) return peaks;
    std::size_t i = 1;
    while (i + 1 < n) {
        std::size_t j = i;
        while (j + 1 < n && mag[j + 1] == mag[i]) ++j;
        if (j + 1 < n && mag[i - 1] < mag[i] && mag[j + 1] < mag[i] && mag[i] >= rel_threshold * top) {
            const std::size_t c = (i + j) / 2;
            const double Ec = 0.5 * (s.E[i] + s.E[j]);
            bool dominant = true;
            for (std::size_t k = 0; k < n && dominant; ++k)
                if (std::abs(s.E[k] - Ec) <= 0.5 * resolution && mag[k] > mag[c]) dominant = false;
            if (dominant) peaks.push_back({Ec, s.values[c]});
        }
        i = j + 1;
    }
    return peaks;
}

double peak_spacing(const SmoothedSpectrum& s, double resolution) {
    const std::vector<Peak> peaks = find_peaks(s, resolution < 0.0 ? s.width : resolution);
    if (peaks.size() < 3) throw Error(ErrorKind::Analysis, "fewer than 3 peaks above threshold");
    std::vector<double> gaps;
    for (std::size_t k = 1; k < peaks.size(); ++k) gaps.push_back(peaks[k].E - peaks[k - 1].E);
    std::sort(gaps.begin(), gaps.end());
    const std::size_t m = gaps.size();
    return m % 2 ? gaps[m / 2] : 0.5 * (gaps[m / 2 - 1] + gaps[m / 2]);
}

double tallest_peak(const SmoothedSpectrum& s, double lo, double hi) {
    const double sign = is_window(s.kind) ? -1.0 : 1.0;
    double best = -std::numeric_limits<double>::infinity(), at = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 1; i + 1 < s.values.size(); ++i) {
        if (s.E[i] < lo || s.E[i] > hi) continue;
        const double v = sign * s.values[i];
        if (v >= sign * s.values[i - 1] && v >= sign * s.values[i + 1] && v > best) {
            best = v;
            at = s.E[i];
        }
    }
    if (std::isnan(at)) throw Error(ErrorKind::Analysis, "no local maximum in the requested energy range");
    return at;
}

double a_eps_green_route(std::span<const double> window, std::span<const double> im_green, std::span<const double> E) {
    if (window.size() != E.size() || im_green.size() != E.size())
        throw Error(ErrorKind::Config, "window, Green's function and energy grid differ in length");
    double acc = 0.0;
    for (std::size_t i = 1; i < E.size(); ++i)
        acc += 0.5 * (E[i] - E[i - 1]) * (window[i] * im_green[i] + window[i - 1] * im_green[i - 1]);
    return acc;
}

double a_eps_closed_form(std::span<const double> w, std::span<const double> phi2, std::span<const double> energies, double eps) {
    const double e2 = 4.0 * eps * eps;
    double acc = 0.0;
    for (std::size_t n = 0; n < energies.size(); ++n)
        for (std::size_t m = 0; m < energies.size(); ++m) {
            const double d = energies[n] - energies[m];
            acc += w[n] * phi2[m] * e2 / (d * d + e2);
        }
    return acc;
}

std::vector<double> adapted_energy_grid(std::span<const double> energies, double eps, double lo, double hi,
                                        double per_eps, double halo, double coarse) {
    require_positive(eps, "epsilon");
    if (coarse <= 0.0) coarse = halo * eps / 4.0;
    std::vector<double> g = energy_grid(lo, hi, coarse);
    const double fine = eps / per_eps;
    for (double e : energies) {
        const double a = std::max(lo, e - halo * eps), b = std::min(hi, e + halo * eps);
        for (double x = a; x <= b; x += fine) g.push_back(x);
    }
    g.push_back(hi);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end(), [&](double a, double b) { return b - a < 1e-3 * fine; }), g.end());
    return g;
}

double spikiness(std::span<const double> w) {
    if (w.empty()) return 0.0;
    double sum = 0.0, mx = 0.0;
    for (double x : w) {
        sum += x;
        mx = std::max(mx, x);
    }
    return sum > 0.0 ? mx / (sum / static_cast<double>(w.size())) : 0.0;
}

void write_spectrum_csv(std::ostream& out, const SmoothedSpectrum& s) {
    out << "E,value,kind,epsilon\n";
    const std::string kind = to_string(s.kind);
    char line[160];
    for (std::size_t i = 0; i < s.E.size(); ++i) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%s,%.17g\n", s.E[i], s.values[i], kind.c_str(), s.epsilon);
        out << line;
    }
}

void write_coefficients_csv(std::ostream& out, std::span<const double> energies, std::span<const std::complex<double>> c) {
    if (energies.size() != c.size()) throw Error(ErrorKind::Config, "energies and coefficients differ in length");
    out << "n,E,re,im,abs2\n";
    char line[200];
    for (std::size_t n = 0; n < c.size(); ++n) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g\n", n, energies[n], c[n].real(), c[n].imag(),
                      std::norm(c[n]));
        out << line;
    }
}

} // namespace scar
