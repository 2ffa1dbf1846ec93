#pragma once

#include <complex>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scar/geometry.hpp"
#include "scar/spectral.hpp"

namespace scar {

using cplx = std::complex<double>;

struct WavepacketParams {
    Vec2 r0;
    Vec2 p0;
    double sigma0 = 0.15;

    /// Angle counterclockwise from +x.
    static WavepacketParams polar(Vec2 r0, double p_abs, double angle, double sigma0);

    double speed() const { return p0.norm(); }
    double E0() const { return 0.5 * p0.norm2(); }
};

struct Wavepacket {
    Eigen::VectorXcd psi;        // over grid dofs, unit grid norm
    double peak_raw = 0.0;       // |Psi_0(r0)| before renormalisation
    double tail_mass = 0.0;      // 1 - sum |Psi_0|^2 h^2 before renormalisation
    bool tail_warning = false;   // tail_mass >= 1e-4
};

/// Psi_0 = (1/(sigma0 sqrt(pi))) exp[i p0.(r - r0) - |r - r0|^2/(2 sigma0^2)] on the
/// interior nodes, renormalised to sum |psi|^2 h^2 = 1.
Wavepacket make_gaussian(const WavepacketParams& params, const Grid& grid, const Domain& domain);

struct ExpansionCoeffs {
    Eigen::VectorXcd c;
    double completeness = 0.0;   // sum |c_n|^2
    bool flagged = false;        // completeness < 0.99

    std::size_t size() const { return static_cast<std::size_t>(c.size()); }
    Eigen::VectorXd weights() const { return c.cwiseAbs2(); }
};

/// c_n = sum phi_n psi h^2. `psi` must live on `grid`, which must match the basis grid.
ExpansionCoeffs expand(const EigenBasis& basis, const Grid& grid, const Eigen::VectorXcd& psi);

/// sum_n c_n phi_n exp(-i E_n t).
Eigen::VectorXcd evolve_spectral(const EigenBasis& basis, const ExpansionCoeffs& coeffs, double t);

/// Cayley-form stepping (1 + i dt H/2) psi' = (1 - i dt H/2) psi with the same
/// 5-point operator as the eigensolver. Negative dt runs backwards.
class CrankNicolson {
public:
    CrankNicolson(const Grid& grid, double dt);
    ~CrankNicolson();
    CrankNicolson(CrankNicolson&&) noexcept;
    CrankNicolson& operator=(CrankNicolson&&) noexcept;

    double dt() const { return dt_; }
    void step(Eigen::VectorXcd& psi) const;
    void advance(Eigen::VectorXcd& psi, std::size_t steps) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    double dt_;
};

Eigen::VectorXcd evolve_crank_nicolson(const Grid& grid, Eigen::VectorXcd psi, double dt, std::size_t steps);

double grid_norm2(const Grid& grid, const Eigen::VectorXcd& psi);
/// <psi|H|psi> / <psi|psi>.
double energy_expectation(const Grid& grid, const Eigen::VectorXcd& psi);
/// <psi| -i grad |psi> / <psi|psi> by FFT differentiation along grid lines.
Vec2 momentum_expectation(const Grid& grid, const Eigen::VectorXcd& psi);
/// sqrt(2 Var(x)), sqrt(2 Var(y)) of |psi|^2, matching the width convention of Psi_0.
Vec2 packet_width(const Grid& grid, const Eigen::VectorXcd& psi);

struct AveragedField {
    Grid grid;
    Eigen::VectorXd values;   // over dofs
    double T = 0.0;
    std::size_t N_t = 0;
    double dt = 0.0;

    double integral() const;
};

/// Running mean of |psi|^2 with a fixed summation order.
class DensityAccumulator {
public:
    explicit DensityAccumulator(std::size_t dofs) : sum_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dofs))) {}
    void add(const Eigen::VectorXcd& psi);
    std::size_t count() const { return n_; }
    Eigen::VectorXd mean() const;

private:
    Eigen::VectorXd sum_;
    std::size_t n_ = 0;
};

/// A_T from samples t_j = j dt * stride, j = 0 .. N_t - 1, N_t = floor(T / (dt stride)),
/// generated by the spectral route.
AveragedField time_average(const EigenBasis& basis, const ExpansionCoeffs& coeffs, double dt, double T,
                           std::size_t stride = 1);

/// Infinite-time limit sum |c_n|^2 |phi_n|^2.
AveragedField infinite_time_average(const EigenBasis& basis, const ExpansionCoeffs& coeffs);

struct TimeSeries {
    std::vector<double> t;
    std::vector<cplx> value;
};

/// <Psi_0, Psi(t)> h^2 by direct overlap.
cplx overlap(const Grid& grid, const Eigen::VectorXcd& a, const Eigen::VectorXcd& b);

/// sum |c_n|^2 exp(-i E_n t) on the given times.
TimeSeries autocorrelation_spectral(const EigenBasis& basis, const ExpansionCoeffs& coeffs,
                                    std::span<const double> times);
/// Direct-overlap route, propagating with the spectral expansion.
TimeSeries autocorrelation_overlap(const EigenBasis& basis, const ExpansionCoeffs& coeffs,
                                   const Eigen::VectorXcd& psi0, std::span<const double> times);

struct FreeSpace {
    double sigma;   // sigma0 sqrt(1 + (t/sigma0^2)^2)
    cplx C;         // exact infinite-plane autocorrelation
    double envelope;// exp(-v^2 t^2/(4 sigma0^2))
};

FreeSpace free_space_oracle(const WavepacketParams& params, double t);

void write_field(std::ostream& out, const Grid& grid, const Eigen::VectorXcd& psi, double t);
void write_density(std::ostream& out, const Grid& grid, const Eigen::VectorXd& rho, double t);

struct FieldFile {
    int nx = 0, ny = 0;
    double h = 0.0, x0 = 0.0, y0 = 0.0, t = 0.0;
    bool real = false;
    Eigen::VectorXcd values;   // over all nodes, row-major; imaginary part zero for REAL
};

FieldFile read_field(std::istream& in);

void write_time_series_csv(std::ostream& out, const TimeSeries& series);

} // namespace scar
