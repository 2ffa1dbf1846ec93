#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "scar/error.hpp"
#include "scar/spectral.hpp"

using namespace scar;

namespace {
const double pi2 = std::numbers::pi * std::numbers::pi;

// Analytic Dirichlet levels of the unit square, (pi^2/2)(n^2+m^2), ascending.
std::vector<double> square_levels(std::size_t count) {
    std::vector<double> e;
    for (int n = 1; n <= 20; ++n)
        for (int m = 1; m <= 20; ++m) e.push_back(0.5 * pi2 * (n * n + m * m));
    std::sort(e.begin(), e.end());
    e.resize(count);
    return e;
}

double orthonormality_error(const EigenBasis& b) {
    const double h2 = b.grid.h() * b.grid.h();
    const Eigen::MatrixXd G = b.states.transpose() * b.states * h2;
    return (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}
}

TEST_CASE("hamiltonian is symmetric with the 5-point weights") {
    const Grid g = build_grid(Domain::rectangle(1, 1), 0.25);
    const SparseMatrix H = hamiltonian(g);
    CHECK(H.rows() == 9);
    const Eigen::MatrixXd D(H);
    CHECK((D - D.transpose()).norm() == 0.0);
    CHECK(D(4, 4) == doctest::Approx(2.0 / 0.0625));
    CHECK(D(4, 3) == doctest::Approx(-0.5 / 0.0625));
    CHECK(D(0, 8) == 0.0);
}

TEST_CASE("unit square: lowest 20 levels within 0.5% at h = 0.005") {
    const Grid g = build_grid(Domain::rectangle(1, 1), 0.005);
    const EigenBasis b = solve_eigensystem(g, 160.0);
    REQUIRE(b.size() == 20);
    const auto exact = square_levels(20);
    for (std::size_t k = 0; k < 20; ++k) CHECK(std::abs(b.energies[k] - exact[k]) / exact[k] < 0.005);
    CHECK(b.energies[0] == doctest::Approx(pi2).epsilon(0.005));
    // (1,2) and (2,1) degenerate pair.
    CHECK(b.energies[1] == doctest::Approx(2.5 * pi2).epsilon(0.005));
    CHECK(std::abs(b.energies[2] - b.energies[1]) < 1e-8);
    CHECK(orthonormality_error(b) < 1e-8);
    CHECK(max_residual(b) < 1e-6);
}

TEST_CASE("second-order convergence of the ground state") {
    std::vector<double> err;
    for (double h : {0.02, 0.01, 0.005}) {
        const EigenBasis b = solve_eigensystem(build_grid(Domain::rectangle(1, 1), h), 12.0);
        REQUIRE(b.size() == 1);
        err.push_back(std::abs(b.energies[0] - pi2));
    }
    CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.125));
    CHECK(err[1] / err[2] == doctest::Approx(4.0).epsilon(0.125));
}

TEST_CASE("sliced sparse path agrees with the dense path") {
    const Grid g = build_grid(Domain::quarter_stadium(), 0.04);
    REQUIRE(g.dof_count() < 1600);
    const EigenBasis dense = solve_eigensystem(g, 900.0);
    EigenSolverOptions opts;
    opts.dense_limit = 0;
    opts.slice_target = 16;
    const EigenBasis sparse = solve_eigensystem(g, 900.0, opts);
    REQUIRE(dense.size() == sparse.size());
    REQUIRE(dense.size() > 60);
    for (std::size_t k = 0; k < dense.size(); ++k)
        CHECK(sparse.energies[k] == doctest::Approx(dense.energies[k]).epsilon(1e-10));
    CHECK(orthonormality_error(sparse) < 1e-8);
    CHECK(max_residual(sparse) < 1e-6);
    // Same sign convention means the same vectors for nondegenerate levels.
    for (std::size_t k = 0; k < 10; ++k)
        CHECK((sparse.states.col(k) - dense.states.col(k)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("degenerate multiplets are recovered by the sliced path") {
    // Square spectrum is full of exact degeneracies.
    const Grid g = build_grid(Domain::rectangle(1, 1), 1.0 / 48);
    EigenSolverOptions opts;
    opts.dense_limit = 0;
    opts.slice_target = 12;
    const EigenBasis b = solve_eigensystem(g, 800.0, opts);
    const SparseMatrix H = hamiltonian(g);
    CHECK(b.size() == count_eigenvalues_below(H, 800.0));
    std::size_t pairs = 0;
    for (std::size_t k = 1; k < b.size(); ++k) pairs += std::abs(b.energies[k] - b.energies[k - 1]) < 1e-8;
    CHECK(pairs > 20);
    CHECK(orthonormality_error(b) < 1e-8);
    for (std::size_t k = 1; k < b.size(); ++k) CHECK(b.energies[k] >= b.energies[k - 1]);
}

TEST_CASE("states vanish off the mask and are sign-normalised") {
    const Grid g = build_grid(Domain::quarter_stadium(), 0.05);
    const EigenBasis b = solve_eigensystem(g, 300.0);
    for (std::size_t k = 0; k < b.size(); ++k) {
        const Eigen::VectorXd full = g.scatter(Eigen::VectorXd(b.states.col(k)));
        for (std::size_t nnode = 0; nnode < g.node_count(); ++nnode)
            if (g.dof_of_node(nnode) < 0) REQUIRE(full[nnode] == 0.0);
        const auto col = b.states.col(k);
        const double cut = 1e-8 * col.cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < col.size(); ++i)
            if (std::abs(col[i]) > cut) {
                CHECK(col[i] > 0.0);
                break;
            }
    }
}

TEST_CASE("inertia count matches the dense spectrum") {
    const Grid g = build_grid(Domain::quarter_stadium(), 0.05);
    const EigenBasis b = solve_eigensystem(g, 2000.0);
    const SparseMatrix H = hamiltonian(g);
    for (double s : {50.0, 400.0, 1234.5}) {
        const auto expect = static_cast<std::size_t>(std::count_if(b.energies.begin(), b.energies.end(),
                                                                   [&](double e) { return e < s; }));
        CHECK(count_eigenvalues_below(H, s) == expect);
    }
}

TEST_CASE("Weyl count") {
    const Domain d = Domain::quarter_stadium();
    CHECK(weyl_count(d, 0.0) == 0.0);
    // Leading-term mean spacing 2 pi / A.
    const double E = 2000.0, dE = 1e-3;
    const double lead = d.area() / (2.0 * std::numbers::pi);
    const double slope = (weyl_count(d, E + dE) - weyl_count(d, E - dE)) / (2 * dE);
    CHECK(1.0 / lead == doctest::Approx(3.519).epsilon(1e-3));
    CHECK(slope < lead);
    CHECK(slope == doctest::Approx(lead - d.perimeter() / (4 * std::numbers::pi * std::sqrt(2 * E))).epsilon(1e-6));
}

TEST_CASE("mean level spacing") {
    const auto lv = square_levels(60);
    const double s = mean_level_spacing(lv, 0.0, 1e9);
    CHECK(s == doctest::Approx((lv.back() - lv.front()) / 59.0));
    CHECK(s > 0.0);
    CHECK_THROWS_AS(mean_level_spacing(lv, 0.0, 30.0), Error);
}

TEST_CASE("basis file round trip") {
    const Grid g = build_grid(Domain::quarter_stadium(), 0.1);
    const EigenBasis b = solve_eigensystem(g, 400.0);
    std::stringstream ss;
    write_basis(ss, b);
    CHECK(ss.str().rfind("SCARBASIS 1\n", 0) == 0);
    const EigenBasis back = read_basis(ss, g);
    REQUIRE(back.size() == b.size());
    CHECK((back.states - b.states).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.energies == b.energies);
    const Grid other = build_grid(Domain::quarter_stadium(), 0.05);
    std::stringstream again;
    write_basis(again, b);
    CHECK_THROWS_AS(read_basis(again, other), Error);
    std::stringstream csv;
    write_energies_csv(csv, b);
    CHECK(csv.str().rfind("n,E\n0,", 0) == 0);
}
