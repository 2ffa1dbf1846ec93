#include "scar/spectral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "binary_io.hpp"
#include "scar/error.hpp"

namespace scar {

namespace {

using Factorization = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

// LDL^T of H - sigma I. Retries with a nudged shift when a pivot collapses.
struct ShiftedFactor {
    Factorization ldlt;
    double sigma = 0.0;
    std::size_t negatives = 0;

    ShiftedFactor(const SparseMatrix& H, double shift) {
        SparseMatrix I(H.rows(), H.cols());
        I.setIdentity();
        for (int attempt = 0; attempt < 8; ++attempt) {
            sigma = shift * (1.0 + 1e-9 * attempt * attempt) + 1e-12 * attempt;
            SparseMatrix A = H - sigma * I;
            ldlt.compute(A);
            if (ldlt.info() != Eigen::Success) continue;
            const Eigen::VectorXd& d = ldlt.vectorD();
            const double dmax = d.cwiseAbs().maxCoeff();
            if (d.cwiseAbs().minCoeff() < 1e-14 * dmax) continue;
            negatives = static_cast<std::size_t>((d.array() < 0.0).count());
            return;
        }
        throw Error(ErrorKind::Solver, "LDL^T factorisation of shifted Hamiltonian failed");
    }
};

void orthogonalize(Eigen::VectorXd& w, const Eigen::MatrixXd& basis, Eigen::Index cols) {
    if (cols == 0) return;
    for (int pass = 0; pass < 2; ++pass) {
        const Eigen::VectorXd c = basis.leftCols(cols).transpose() * w;
        w.noalias() -= basis.leftCols(cols) * c;
    }
}

double residual_norm(const SparseMatrix& H, const Eigen::VectorXd& x, double* rayleigh = nullptr) {
    const Eigen::VectorXd Hx = H * x;
    const double xx = x.squaredNorm();
    const double lam = x.dot(Hx) / xx;
    if (rayleigh) *rayleigh = lam;
    return (Hx - lam * x).norm() / std::sqrt(xx);
}

struct Slice {
    double lo, hi;
    std::size_t count;
};

struct SliceResult {
    std::vector<double> energies;
    Eigen::MatrixXd vectors; // unit 2-norm columns
};

SliceResult solve_slice(const SparseMatrix& H, const Slice& slice, const Eigen::MatrixXd& previous,
                        const EigenSolverOptions& opts, std::uint64_t seed) {
    const Eigen::Index n = H.rows();
    SliceResult out;
    out.vectors.resize(n, 0);
    if (slice.count == 0) return out;

    const ShiftedFactor factor(H, 0.5 * (slice.lo + slice.hi));
    auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return factor.ldlt.solve(x); };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    double worst_residual = 0.0;

    for (int restart = 0; restart <= opts.max_restarts; ++restart) {
        const std::size_t found = out.energies.size();
        if (found == slice.count) break;
        const std::size_t need = slice.count - found;

        // Deflation set: previous slice plus everything locked so far.
        Eigen::MatrixXd defl(n, previous.cols() + static_cast<Eigen::Index>(found));
        defl << previous, out.vectors;
        const Eigen::Index free_dim = n - defl.cols();
        const Eigen::Index m_max = std::min<Eigen::Index>(
            free_dim, static_cast<Eigen::Index>(std::max<std::size_t>(2 * need + 40, need + 60)));

        Eigen::MatrixXd Q(n, m_max + 1);
        Eigen::VectorXd alpha(m_max), beta(m_max);
        Eigen::VectorXd q(n);
        for (Eigen::Index i = 0; i < n; ++i) q[i] = gauss(rng);
        orthogonalize(q, defl, defl.cols());
        q.normalize();
        Q.col(0) = q;

        std::vector<std::pair<double, Eigen::VectorXd>> accepted;
        Eigen::Index m = 0;
        for (Eigen::Index j = 0; j < m_max; ++j) {
            Eigen::VectorXd w = apply(Q.col(j));
            alpha[j] = Q.col(j).dot(w);
            w -= alpha[j] * Q.col(j);
            if (j > 0) w -= beta[j - 1] * Q.col(j - 1);
            orthogonalize(w, Q, j + 1);
            orthogonalize(w, defl, defl.cols());
            beta[j] = w.norm();
            m = j + 1;
            const bool exhausted = beta[j] < 1e-13 * std::abs(alpha[j]) || m == m_max;
            if (!exhausted) Q.col(j + 1) = w / beta[j];

            const bool checkpoint = exhausted || (m >= static_cast<Eigen::Index>(need) && m % 10 == 0);
            if (!checkpoint) continue;

            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
            tri.computeFromTridiagonal(alpha.head(m), beta.head(m - 1), Eigen::ComputeEigenvectors);
            const Eigen::VectorXd& theta = tri.eigenvalues();
            const Eigen::MatrixXd& S = tri.eigenvectors();
            std::vector<Eigen::Index> candidates;
            for (Eigen::Index i = 0; i < m; ++i) {
                if (theta[i] == 0.0) continue;
                const double lam = factor.sigma + 1.0 / theta[i];
                if (lam < slice.lo || lam >= slice.hi) continue;
                // Residual of the inverted operator, mapped back to H: r_H ~ r / theta^2.
                const double est = beta[j] * std::abs(S(m - 1, i)) / (theta[i] * theta[i]);
                if (exhausted || est < 0.1 * opts.residual_tol * std::max(1.0, std::abs(lam))) candidates.push_back(i);
            }
            if (!exhausted && candidates.size() < need) continue;

            accepted.clear();
            for (Eigen::Index i : candidates) {
                Eigen::VectorXd x = Q.leftCols(m) * S.col(i);
                x.normalize();
                double lam = 0.0;
                const double r = residual_norm(H, x, &lam);
                worst_residual = std::max(worst_residual, r);
                if (r < opts.residual_tol * std::max(1.0, std::abs(lam)) && lam >= slice.lo && lam < slice.hi)
                    accepted.emplace_back(lam, std::move(x));
            }
            if (exhausted || accepted.size() >= need) break;
        }

        // Lock accepted pairs, discarding anything that is not new.
        std::sort(accepted.begin(), accepted.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (auto& [lam, x] : accepted) {
            if (out.energies.size() == slice.count) break;
            Eigen::VectorXd y = x;
            orthogonalize(y, previous, previous.cols());
            orthogonalize(y, out.vectors, out.vectors.cols());
            const double kept = y.norm();
            if (kept < 0.9) continue;
            y /= kept;
            double lam2 = 0.0;
            if (residual_norm(H, y, &lam2) >= opts.residual_tol * std::max(1.0, std::abs(lam2))) continue;
            out.vectors.conservativeResize(n, out.vectors.cols() + 1);
            out.vectors.col(out.vectors.cols() - 1) = y;
            out.energies.push_back(lam2);
        }
        if (opts.verbose)
            std::fprintf(stderr, "  slice [%.4g, %.4g): %zu/%zu after pass %d\n", slice.lo, slice.hi,
                         out.energies.size(), slice.count, restart);
    }
    if (out.energies.size() != slice.count) {
        std::ostringstream msg;
        msg << "eigensolver did not converge in slice [" << slice.lo << ", " << slice.hi << "): found "
            << out.energies.size() << " of " << slice.count << " eigenpairs, worst residual "
            << worst_residual;
        throw Error(ErrorKind::Solver, msg.str());
    }
    return out;
}

void canonical_sign(Eigen::Ref<Eigen::VectorXd> v) {
    const double cut = 1e-8 * v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > cut) {
            if (v[i] < 0.0) v = -v;
            return;
        }
    }
}

EigenBasis finalize(const Grid& grid, double e_max, std::vector<double> energies, Eigen::MatrixXd vecs) {
    const std::size_t k = energies.size();
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    const double h = grid.h();
    for (std::size_t c = 0; c < k; ++c) {
        auto col = vecs.col(static_cast<Eigen::Index>(c));
        col /= col.norm() * h;
        canonical_sign(col);
    }
    // Energy order; exact ties fall back to lexicographic order of the vectors.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (energies[a] != energies[b]) return energies[a] < energies[b];
        for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
            const double va = vecs(i, static_cast<Eigen::Index>(a));
            const double vb = vecs(i, static_cast<Eigen::Index>(b));
            if (std::abs(va - vb) > 1e-10) return va > vb;
        }
        return false;
    });
    EigenBasis basis{grid, e_max, {}, Eigen::MatrixXd(vecs.rows(), static_cast<Eigen::Index>(k))};
    basis.energies.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
        basis.energies.push_back(energies[order[c]]);
        basis.states.col(static_cast<Eigen::Index>(c)) = vecs.col(static_cast<Eigen::Index>(order[c]));
    }
    return basis;
}

} // namespace

SparseMatrix hamiltonian(const Grid& grid) {
    const double h2 = grid.h() * grid.h();
    const double diag = 2.0 / h2;   // -1/2 * (-4/h^2)
    const double off = -0.5 / h2;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(grid.dof_count() * 5);
    for (std::size_t d = 0; d < grid.dof_count(); ++d) {
        const std::size_t node = grid.node_of_dof(d);
        const int i = static_cast<int>(node % grid.nx());
        const int j = static_cast<int>(node / grid.nx());
        trip.emplace_back(static_cast<int>(d), static_cast<int>(d), diag);
        const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
        for (const auto& p : nb) {
            if (p[0] < 0 || p[0] >= grid.nx() || p[1] < 0 || p[1] >= grid.ny()) continue;
            const int e = grid.dof_of_node(grid.node(p[0], p[1]));
            if (e >= 0) trip.emplace_back(static_cast<int>(d), e, off);
        }
    }
    const auto n = static_cast<Eigen::Index>(grid.dof_count());
    SparseMatrix H(n, n);
    H.setFromTriplets(trip.begin(), trip.end());
    H.makeCompressed();
    return H;
}

std::size_t count_eigenvalues_below(const SparseMatrix& H, double sigma) {
    return ShiftedFactor(H, sigma).negatives;
}

EigenBasis solve_eigensystem(const Grid& grid, double e_max, const EigenSolverOptions& opts) {
    if (!(e_max > 0.0)) throw Error(ErrorKind::Config, "e_max must be positive");
    const SparseMatrix H = hamiltonian(grid);
    const std::size_t n = grid.dof_count();

    if (n <= opts.dense_limit) {
        const Eigen::MatrixXd dense(H);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
        if (es.info() != Eigen::Success) throw Error(ErrorKind::Solver, "dense eigensolver failed");
        std::vector<double> energies;
        Eigen::Index k = 0;
        while (k < es.eigenvalues().size() && es.eigenvalues()[k] <= e_max) {
            energies.push_back(es.eigenvalues()[k]);
            ++k;
        }
        return finalize(grid, e_max, std::move(energies), es.eigenvectors().leftCols(k));
    }

    const std::size_t total = count_eigenvalues_below(H, e_max);
    if (total == 0) return finalize(grid, e_max, {}, Eigen::MatrixXd(static_cast<Eigen::Index>(n), 0));

    // Slice edges from the leading Weyl term with the lattice area; exact
    // counts per slice come from inertia.
    const double area = area_quadrature(grid);
    const std::size_t nslices = (total + opts.slice_target - 1) / opts.slice_target;
    std::vector<double> edges{0.0};
    const double per_slice = static_cast<double>(total) / static_cast<double>(nslices);
    for (std::size_t s = 1; s < nslices; ++s) {
        const double e = 2.0 * std::numbers::pi * per_slice * static_cast<double>(s) / area;
        edges.push_back(std::min(e, e_max * (1.0 - 1e-6)));
    }
    edges.push_back(e_max);
    std::vector<std::size_t> below{0};
    for (std::size_t s = 1; s + 1 < edges.size(); ++s) below.push_back(count_eigenvalues_below(H, edges[s]));
    below.push_back(total);

    std::vector<double> energies;
    Eigen::MatrixXd vecs(static_cast<Eigen::Index>(n), 0);
    Eigen::MatrixXd previous(static_cast<Eigen::Index>(n), 0);
    for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
        if (below[s + 1] < below[s]) throw Error(ErrorKind::Solver, "inconsistent inertia counts");
        const Slice slice{edges[s], edges[s + 1], below[s + 1] - below[s]};
        SliceResult r = solve_slice(H, slice, previous, opts, opts.seed + 7919 * s);
        if (opts.verbose)
            std::fprintf(stderr, "slice %zu/%zu [%.4g, %.4g): %zu states\n", s + 1, edges.size() - 1,
                         slice.lo, slice.hi, slice.count);
        energies.insert(energies.end(), r.energies.begin(), r.energies.end());
        const Eigen::Index old = vecs.cols();
        vecs.conservativeResize(Eigen::NoChange, old + r.vectors.cols());
        vecs.rightCols(r.vectors.cols()) = r.vectors;
        previous = std::move(r.vectors);
    }
    return finalize(grid, e_max, std::move(energies), std::move(vecs));
}

double weyl_count(const Domain& domain, double E) {
    if (!(E > 0.0)) return 0.0;
    const double k = std::sqrt(2.0 * E);
    return (domain.area() * k * k - domain.perimeter() * k) / (4.0 * std::numbers::pi);
}

double mean_level_spacing(std::span<const double> energies, double lo, double hi) {
    std::vector<double> in;
    for (double e : energies)
        if (e >= lo && e <= hi) in.push_back(e);
    if (in.size() < 10) throw Error(ErrorKind::Analysis, "too few levels in window for mean spacing");
    std::sort(in.begin(), in.end());
    return (in.back() - in.front()) / static_cast<double>(in.size() - 1);
}

double mean_level_spacing(const EigenBasis& basis, double lo, double hi) {
    return mean_level_spacing(std::span<const double>(basis.energies), lo, hi);
}

double max_residual(const EigenBasis& basis) {
    const SparseMatrix H = hamiltonian(basis.grid);
    double worst = 0.0;
    for (std::size_t k = 0; k < basis.size(); ++k) {
        const Eigen::VectorXd phi = basis.states.col(static_cast<Eigen::Index>(k));
        const Eigen::VectorXd r = H * phi - basis.energies[k] * phi;
        worst = std::max(worst, r.norm() / phi.norm());
    }
    return worst;
}

// ---------------------------------------------------------------------------

void write_basis(std::ostream& out, const EigenBasis& basis) {
    const Grid& g = basis.grid;
    char line[256];
    std::snprintf(line, sizeof line, "%zu %d %d %.17g %.17g %.17g\n", basis.size(), g.nx(), g.ny(), g.h(),
                  g.x0(), g.y0());
    out << "SCARBASIS 1\n" << line;
    for (std::size_t k = 0; k < basis.size(); ++k) {
        std::snprintf(line, sizeof line, "%zu %.17g\n", k, basis.energies[k]);
        out << line;
        const Eigen::VectorXd full = g.scatter(Eigen::VectorXd(basis.states.col(static_cast<Eigen::Index>(k))));
        detail::write_le_doubles(out, full.data(), static_cast<std::size_t>(full.size()));
    }
}

EigenBasis read_basis(std::istream& in, const Grid& grid) {
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "SCARBASIS") throw Error(ErrorKind::Config, "not a basis file (missing SCARBASIS tag)");
    if (version != 1) throw Error(ErrorKind::Config, "unsupported basis file version");
    std::size_t count = 0;
    int nx = 0, ny = 0;
    double h = 0, x0 = 0, y0 = 0;
    in >> count >> nx >> ny >> h >> x0 >> y0;
    if (!in) throw Error(ErrorKind::Config, "malformed basis header");
    if (nx != grid.nx() || ny != grid.ny() || std::abs(h - grid.h()) > 1e-15 * h ||
        std::abs(x0 - grid.x0()) > 1e-15 || std::abs(y0 - grid.y0()) > 1e-15)
        throw Error(ErrorKind::Config, "basis file does not match grid");
    EigenBasis basis{grid, 0.0, {}, Eigen::MatrixXd(static_cast<Eigen::Index>(grid.dof_count()),
                                                    static_cast<Eigen::Index>(count))};
    std::vector<double> full(grid.node_count());
    for (std::size_t k = 0; k < count; ++k) {
        std::size_t idx = 0;
        double e = 0;
        in >> idx >> e;
        if (!in || idx != k) throw Error(ErrorKind::Config, "malformed basis state header");
        in.get();
        detail::read_le_doubles(in, full.data(), full.size());
        for (std::size_t d = 0; d < grid.dof_count(); ++d)
            basis.states(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) = full[grid.node_of_dof(d)];
        basis.energies.push_back(e);
    }
    basis.e_cutoff = basis.energies.empty() ? 0.0 : basis.energies.back();
    return basis;
}

void write_energies_csv(std::ostream& out, const EigenBasis& basis) {
    out << "n,E\n";
    char line[64];
    for (std::size_t k = 0; k < basis.size(); ++k) {
        std::snprintf(line, sizeof line, "%zu,%.17g\n", k, basis.energies[k]);
        out << line;
    }
}

} // namespace scar
