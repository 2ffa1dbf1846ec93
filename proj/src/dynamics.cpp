#include "scar/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/SparseLU>
#include <unsupported/Eigen/FFT>

#include "binary_io.hpp"
#include "scar/error.hpp"

namespace scar {

WavepacketParams WavepacketParams::polar(Vec2 r0, double p_abs, double angle, double sigma0) {
    return {r0, unit_vector(angle) * p_abs, sigma0};
}

Wavepacket make_gaussian(const WavepacketParams& params, const Grid& grid, const Domain& domain) {
    if (!(params.sigma0 > 0.0)) throw Error(ErrorKind::Config, "sigma0 must be positive");
    if (!domain.strictly_inside(params.r0)) throw Error(ErrorKind::Config, "r0 must lie strictly inside the domain");
    const double s2 = params.sigma0 * params.sigma0;
    const double amp = 1.0 / (params.sigma0 * std::sqrt(std::numbers::pi));
    Wavepacket out;
    out.psi.resize(static_cast<Eigen::Index>(grid.dof_count()));
    for (std::size_t d = 0; d < grid.dof_count(); ++d) {
        const Vec2 r = grid.dof_position(d) - params.r0;
        const double phase = params.p0.dot(r);
        out.psi[static_cast<Eigen::Index>(d)] = amp * std::exp(-r.norm2() / (2.0 * s2)) * cplx(std::cos(phase), std::sin(phase));
    }
    out.peak_raw = amp;
    const double n2 = grid_norm2(grid, out.psi);
    if (!(n2 > 0.0)) throw Error(ErrorKind::Config, "wavepacket has no support on the grid");
    out.tail_mass = std::max(0.0, 1.0 - n2);
    out.tail_warning = out.tail_mass >= 1e-4;
    out.psi /= std::sqrt(n2);
    return out;
}

ExpansionCoeffs expand(const EigenBasis& basis, const Grid& grid, const Eigen::VectorXcd& psi) {
    if (!grid.same_layout(basis.grid)) throw Error(ErrorKind::Config, "field and basis grids differ");
    if (psi.size() != static_cast<Eigen::Index>(grid.dof_count()))
        throw Error(ErrorKind::Config, "field size does not match grid");
    const double h2 = grid.h() * grid.h();
    ExpansionCoeffs out;
    const Eigen::VectorXd re = basis.states.transpose() * psi.real();
    const Eigen::VectorXd im = basis.states.transpose() * psi.imag();
    out.c.resize(re.size());
    for (Eigen::Index k = 0; k < re.size(); ++k) out.c[k] = cplx(re[k], im[k]) * h2;
    out.completeness = out.c.squaredNorm();
    out.flagged = out.completeness < 0.99;
    return out;
}

Eigen::VectorXcd evolve_spectral(const EigenBasis& basis, const ExpansionCoeffs& coeffs, double t) {
    if (coeffs.size() != basis.size()) throw Error(ErrorKind::Config, "coefficient count does not match basis");
    Eigen::VectorXd re(coeffs.c.size()), im(coeffs.c.size());
    for (Eigen::Index k = 0; k < coeffs.c.size(); ++k) {
        const double ph = -basis.energies[static_cast<std::size_t>(k)] * t;
        const cplx ck = coeffs.c[k] * cplx(std::cos(ph), std::sin(ph));
        re[k] = ck.real();
        im[k] = ck.imag();
    }
    Eigen::VectorXcd out(basis.states.rows());
    out.real() = basis.states * re;
    out.imag() = basis.states * im;
    return out;
}

// ---------------------------------------------------------------------------

using ComplexSparse = Eigen::SparseMatrix<cplx>;

struct CrankNicolson::Impl {
    ComplexSparse rhs;
    Eigen::SparseLU<ComplexSparse, Eigen::COLAMDOrdering<int>> lu;
};

CrankNicolson::CrankNicolson(const Grid& grid, double dt) : impl_(std::make_unique<Impl>()), dt_(dt) {
    if (!(dt != 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::Config, "dt must be finite and nonzero");
    const ComplexSparse H = hamiltonian(grid).cast<cplx>();
    ComplexSparse I(H.rows(), H.cols());
    I.setIdentity();
    const cplx half(0.0, 0.5 * dt);
    ComplexSparse lhs = I + half * H;
    impl_->rhs = I - half * H;
    impl_->lu.compute(lhs);
    if (impl_->lu.info() != Eigen::Success)
        throw Error(ErrorKind::Solver, "Crank-Nicolson factorisation failed: " + impl_->lu.lastErrorMessage());
}

CrankNicolson::~CrankNicolson() = default;
CrankNicolson::CrankNicolson(CrankNicolson&&) noexcept = default;
CrankNicolson& CrankNicolson::operator=(CrankNicolson&&) noexcept = default;

void CrankNicolson::step(Eigen::VectorXcd& psi) const {
    const Eigen::VectorXcd b = impl_->rhs * psi;
    psi = impl_->lu.solve(b);
    if (impl_->lu.info() != Eigen::Success) throw Error(ErrorKind::Solver, "Crank-Nicolson solve failed");
}

void CrankNicolson::advance(Eigen::VectorXcd& psi, std::size_t steps) const {
    for (std::size_t s = 0; s < steps; ++s) step(psi);
}

Eigen::VectorXcd evolve_crank_nicolson(const Grid& grid, Eigen::VectorXcd psi, double dt, std::size_t steps) {
    CrankNicolson(grid, dt).advance(psi, steps);
    return psi;
}

// ---------------------------------------------------------------------------

double grid_norm2(const Grid& grid, const Eigen::VectorXcd& psi) {
    return psi.squaredNorm() * grid.h() * grid.h();
}

double energy_expectation(const Grid& grid, const Eigen::VectorXcd& psi) {
    const SparseMatrix H = hamiltonian(grid);
    const Eigen::VectorXcd Hpsi = H.cast<cplx>() * psi;
    return psi.dot(Hpsi).real() / psi.squaredNorm();
}

Vec2 momentum_expectation(const Grid& grid, const Eigen::VectorXcd& psi) {
    // Spectral derivative along each lattice line; the field is zero-extended
    // over masked nodes, which is exact for a packet that vanishes at the edges.
    const Eigen::VectorXcd full = grid.scatter(psi);
    const int nx = grid.nx(), ny = grid.ny();
    Eigen::FFT<double> fft;
    std::vector<cplx> line, spec;
    auto accumulate = [&](double& num, double& den) {
        const int len = static_cast<int>(line.size());
        const double dk = 2.0 * std::numbers::pi / (len * grid.h());
        fft.fwd(spec, line);
        for (int m = 0; m < len; ++m) {
            const double w = std::norm(spec[static_cast<std::size_t>(m)]);
            num += dk * (m <= len / 2 ? m : m - len) * w;
            den += w;
        }
    };
    double nxs = 0, dxs = 0, nys = 0, dys = 0;
    line.resize(static_cast<std::size_t>(nx));
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) line[static_cast<std::size_t>(i)] = full[static_cast<Eigen::Index>(grid.node(i, j))];
        accumulate(nxs, dxs);
    }
    line.resize(static_cast<std::size_t>(ny));
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) line[static_cast<std::size_t>(j)] = full[static_cast<Eigen::Index>(grid.node(i, j))];
        accumulate(nys, dys);
    }
    return {nxs / dxs, nys / dys};
}

Vec2 packet_width(const Grid& grid, const Eigen::VectorXcd& psi) {
    double w = 0, mx = 0, my = 0, mxx = 0, myy = 0;
    for (std::size_t d = 0; d < grid.dof_count(); ++d) {
        const double p = std::norm(psi[static_cast<Eigen::Index>(d)]);
        const Vec2 r = grid.dof_position(d);
        w += p;
        mx += p * r.x;
        my += p * r.y;
        mxx += p * r.x * r.x;
        myy += p * r.y * r.y;
    }
    mx /= w;
    my /= w;
    return {std::sqrt(2.0 * (mxx / w - mx * mx)), std::sqrt(2.0 * (myy / w - my * my))};
}

// ---------------------------------------------------------------------------

double AveragedField::integral() const { return values.sum() * grid.h() * grid.h(); }

void DensityAccumulator::add(const Eigen::VectorXcd& psi) {
    if (psi.size() != sum_.size()) throw Error(ErrorKind::Config, "density sample has the wrong size");
    sum_ += psi.cwiseAbs2();
    ++n_;
}

Eigen::VectorXd DensityAccumulator::mean() const {
    if (n_ == 0) throw Error(ErrorKind::Analysis, "no samples accumulated");
    return sum_ / static_cast<double>(n_);
}

AveragedField time_average(const EigenBasis& basis, const ExpansionCoeffs& coeffs, double dt, double T,
                           std::size_t stride) {
    if (!(dt > 0.0) || !(T > 0.0) || stride == 0) throw Error(ErrorKind::Config, "time_average needs dt, T > 0 and stride >= 1");
    const double ds = dt * static_cast<double>(stride);
    const auto n = static_cast<std::size_t>(std::floor(T / ds + 1e-9));
    if (n == 0) throw Error(ErrorKind::Config, "T shorter than one sampling interval");
    DensityAccumulator acc(basis.grid.dof_count());
    for (std::size_t j = 0; j < n; ++j) acc.add(evolve_spectral(basis, coeffs, static_cast<double>(j) * ds));
    return {basis.grid, acc.mean(), T, n, ds};
}

AveragedField infinite_time_average(const EigenBasis& basis, const ExpansionCoeffs& coeffs) {
    if (coeffs.size() != basis.size()) throw Error(ErrorKind::Config, "coefficient count does not match basis");
    const Eigen::VectorXd w = coeffs.weights();
    const Eigen::VectorXd A = basis.states.cwiseAbs2() * w;
    return {basis.grid, A, std::numeric_limits<double>::infinity(), 0, 0.0};
}

cplx overlap(const Grid& grid, const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    return a.dot(b) * grid.h() * grid.h();   // dot conjugates the first argument
}

TimeSeries autocorrelation_spectral(const EigenBasis& basis, const ExpansionCoeffs& coeffs,
                                    std::span<const double> times) {
    const Eigen::VectorXd w = coeffs.weights();
    TimeSeries out;
    for (double t : times) {
        cplx s = 0.0;
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            const double ph = -basis.energies[static_cast<std::size_t>(k)] * t;
            s += w[k] * cplx(std::cos(ph), std::sin(ph));
        }
        out.t.push_back(t);
        out.value.push_back(s);
    }
    return out;
}

TimeSeries autocorrelation_overlap(const EigenBasis& basis, const ExpansionCoeffs& coeffs,
                                   const Eigen::VectorXcd& psi0, std::span<const double> times) {
    TimeSeries out;
    for (double t : times) {
        out.t.push_back(t);
        out.value.push_back(overlap(basis.grid, psi0, evolve_spectral(basis, coeffs, t)));
    }
    return out;
}

FreeSpace free_space_oracle(const WavepacketParams& params, double t) {
    const double s2 = params.sigma0 * params.sigma0;
    const double v2 = params.p0.norm2();
    const cplx a(s2, 0.5 * t);
    FreeSpace f;
    f.sigma = params.sigma0 * std::sqrt(1.0 + (t / s2) * (t / s2));
    f.C = (s2 / a) * std::exp(cplx(0.0, -1.0) * (s2 * v2 * 0.5 * t) / a);
    f.envelope = std::exp(-v2 * t * t / (4.0 * s2));
    return f;
}

// ---------------------------------------------------------------------------

namespace {

void field_header(std::ostream& out, const Grid& g, double t, bool real) {
    char line[256];
    std::snprintf(line, sizeof line, "%d %d %.17g %.17g %.17g %.17g\n", g.nx(), g.ny(), g.h(), g.x0(), g.y0(), t);
    out << (real ? "SCARFIELD 1 REAL\n" : "SCARFIELD 1\n") << line;
}

} // namespace

void write_field(std::ostream& out, const Grid& grid, const Eigen::VectorXcd& psi, double t) {
    field_header(out, grid, t, false);
    const Eigen::VectorXcd full = grid.scatter(psi);
    std::vector<double> buf(2 * static_cast<std::size_t>(full.size()));
    for (Eigen::Index k = 0; k < full.size(); ++k) {
        buf[2 * static_cast<std::size_t>(k)] = full[k].real();
        buf[2 * static_cast<std::size_t>(k) + 1] = full[k].imag();
    }
    detail::write_le_doubles(out, buf.data(), buf.size());
}

void write_density(std::ostream& out, const Grid& grid, const Eigen::VectorXd& rho, double t) {
    field_header(out, grid, t, true);
    const Eigen::VectorXd full = grid.scatter(rho);
    detail::write_le_doubles(out, full.data(), static_cast<std::size_t>(full.size()));
}

FieldFile read_field(std::istream& in) {
    std::string first;
    std::getline(in, first);
    FieldFile f;
    if (first == "SCARFIELD 1 REAL") {
        f.real = true;
    } else if (first != "SCARFIELD 1") {
        throw Error(ErrorKind::Config, "not a SCARFIELD 1 file");
    }
    std::string second;
    std::getline(in, second);
    std::istringstream hs(second);
    hs >> f.nx >> f.ny >> f.h >> f.x0 >> f.y0 >> f.t;
    if (!hs || f.nx <= 0 || f.ny <= 0 || !(f.h > 0.0)) throw Error(ErrorKind::Config, "malformed SCARFIELD header");
    const std::size_t nodes = static_cast<std::size_t>(f.nx) * static_cast<std::size_t>(f.ny);
    std::vector<double> buf(nodes * (f.real ? 1 : 2));
    detail::read_le_doubles(in, buf.data(), buf.size());
    f.values.resize(static_cast<Eigen::Index>(nodes));
    for (std::size_t k = 0; k < nodes; ++k)
        f.values[static_cast<Eigen::Index>(k)] = f.real ? cplx(buf[k], 0.0) : cplx(buf[2 * k], buf[2 * k + 1]);
    return f;
}

void write_time_series_csv(std::ostream& out, const TimeSeries& series) {
    out << "t,re,im\n";
    char line[128];
    for (std::size_t k = 0; k < series.t.size(); ++k) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", series.t[k], series.value[k].real(), series.value[k].imag());
        out << line;
    }
}

} // namespace scar
