#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "scar/geometry.hpp"

namespace scar {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// H = -1/2 Laplacian, 5-point stencil on the interior dofs; the Dirichlet
/// condition enters through the missing neighbours.
SparseMatrix hamiltonian(const Grid& grid);

/// Lowest eigenpairs of the grid Hamiltonian. States are columns over the
/// grid's dofs, normalised so that sum(phi^2) h^2 = 1.
struct EigenBasis {
    Grid grid;
    double e_cutoff = 0.0;
    std::vector<double> energies;
    Eigen::MatrixXd states;

    std::size_t size() const { return energies.size(); }
};

struct EigenSolverOptions {
    std::size_t dense_limit = 1600;  // dense diagonalisation at or below this many dofs
    std::size_t slice_target = 64;   // eigenpairs per shift-invert slice
    double residual_tol = 1e-10;     // ||H phi - E phi|| / ||phi|| relative to max(1, |E|)
    std::uint64_t seed = 0x5ca7;
    int max_restarts = 16;
    bool verbose = false;
};

/// Every eigenpair with E <= e_max. Large grids are split into energy slices
/// whose eigenvalue counts come from the inertia of LDL^T factorisations of
/// H - sigma I; each slice is filled by shift-invert Lanczos with full
/// reorthogonalisation and locking, so degenerate multiplets are recovered.
EigenBasis solve_eigensystem(const Grid& grid, double e_max, const EigenSolverOptions& opts = {});

/// Number of eigenvalues of H strictly below sigma (Sylvester inertia).
std::size_t count_eigenvalues_below(const SparseMatrix& H, double sigma);

/// Two-term Weyl estimate N(E) = A k^2/(4 pi) - P k/(4 pi), k = sqrt(2E).
double weyl_count(const Domain& domain, double E);

/// (E_last - E_first)/(count - 1) over levels in [lo, hi]; needs >= 10 levels.
double mean_level_spacing(std::span<const double> energies, double lo, double hi);
double mean_level_spacing(const EigenBasis& basis, double lo, double hi);

/// max over states of ||H phi - E phi|| / ||phi||.
double max_residual(const EigenBasis& basis);

void write_basis(std::ostream& out, const EigenBasis& basis);
EigenBasis read_basis(std::istream& in, const Grid& grid);
void write_energies_csv(std::ostream& out, const EigenBasis& basis);

} // namespace scar
