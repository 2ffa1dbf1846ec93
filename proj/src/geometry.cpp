#include "scar/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "scar/error.hpp"

namespace scar {

Domain Domain::quarter_stadium() { return Domain(Kind::QuarterStadium, 2.0, 1.0); }

Domain Domain::rectangle(double width, double height) {
    if (!(width > 0.0) || !(height > 0.0))
        throw Error(ErrorKind::Config, "rectangle dimensions must be positive");
    return Domain(Kind::Rectangle, width, height);
}

std::string Domain::name() const {
    if (kind_ == Kind::QuarterStadium) return "quarter_stadium";
    std::ostringstream s;
    s << "rectangle(" << width_ << "," << height_ << ")";
    return s.str();
}

bool Domain::contains(Vec2 p) const {
    if (kind_ == Kind::Rectangle)
        return p.x >= 0.0 && p.x <= width_ && p.y >= 0.0 && p.y <= height_;
    if (p.y < 0.0 || p.x < 0.0) return false;
    if (p.x <= 1.0) return p.y <= 1.0;
    const double dx = p.x - 1.0;
    return dx * dx + p.y * p.y <= 1.0;
}

bool Domain::strictly_inside(Vec2 p, double tol) const {
    if (kind_ == Kind::Rectangle)
        return p.x > tol && p.x < width_ - tol && p.y > tol && p.y < height_ - tol;
    if (p.y <= tol || p.x <= tol) return false;
    if (p.x <= 1.0) return p.y < 1.0 - tol;
    const double dx = p.x - 1.0;
    return std::sqrt(dx * dx + p.y * p.y) < 1.0 - tol;
}

double Domain::area() const {
    if (kind_ == Kind::Rectangle) return width_ * height_;
    return 1.0 + std::numbers::pi / 4.0;
}

double Domain::perimeter() const {
    if (kind_ == Kind::Rectangle) return 2.0 * (width_ + height_);
    // left 1, top 1, quarter arc pi/2, bottom 2
    return 4.0 + std::numbers::pi / 2.0;
}

BoundingBox Domain::bounds() const { return {0.0, 0.0, width_, height_}; }

std::vector<BoundaryPiece> Domain::boundary() const {
    using T = BoundaryPiece::Type;
    std::vector<BoundaryPiece> out;
    if (kind_ == Kind::Rectangle) {
        const double w = width_, h = height_;
        out.push_back({T::Segment, {0, 0}, {w, 0}, {}, 0, 0, 0, "bottom"});
        out.push_back({T::Segment, {w, 0}, {w, h}, {}, 0, 0, 0, "right"});
        out.push_back({T::Segment, {w, h}, {0, h}, {}, 0, 0, 0, "top"});
        out.push_back({T::Segment, {0, h}, {0, 0}, {}, 0, 0, 0, "left"});
        return out;
    }
    out.push_back({T::Segment, {0, 0}, {2, 0}, {}, 0, 0, 0, "bottom"});
    out.push_back({T::Arc, {2, 0}, {1, 1}, {1, 0}, 1.0, 0.0, std::numbers::pi / 2.0, "arc"});
    out.push_back({T::Segment, {1, 1}, {0, 1}, {}, 0, 0, 0, "top"});
    out.push_back({T::Segment, {0, 1}, {0, 0}, {}, 0, 0, 0, "left"});
    return out;
}

// ---------------------------------------------------------------------------

Grid::Grid(int nx, int ny, double h, double x0, double y0, std::vector<std::uint8_t> mask)
    : nx_(nx), ny_(ny), h_(h), x0_(x0), y0_(y0), mask_(std::move(mask)) {
    if (nx <= 0 || ny <= 0 || !(h > 0.0))
        throw Error(ErrorKind::Config, "grid dimensions must be positive");
    if (mask_.size() != static_cast<std::size_t>(nx) * ny)
        throw Error(ErrorKind::Config, "grid mask size does not match nx*ny");
    dof_of_node_.assign(mask_.size(), -1);
    for (std::size_t n = 0; n < mask_.size(); ++n) {
        if (mask_[n]) {
            dof_of_node_[n] = static_cast<int>(node_of_dof_.size());
            node_of_dof_.push_back(n);
        }
    }
}

Vec2 Grid::dof_position(std::size_t dof) const {
    const std::size_t n = node_of_dof_[dof];
    return position(static_cast<int>(n % nx_), static_cast<int>(n / nx_));
}

Eigen::VectorXd Grid::scatter(const Eigen::VectorXd& dofs) const {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(node_count()));
    for (std::size_t d = 0; d < node_of_dof_.size(); ++d) full[node_of_dof_[d]] = dofs[d];
    return full;
}

Eigen::VectorXcd Grid::scatter(const Eigen::VectorXcd& dofs) const {
    Eigen::VectorXcd full = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(node_count()));
    for (std::size_t d = 0; d < node_of_dof_.size(); ++d) full[node_of_dof_[d]] = dofs[d];
    return full;
}

bool Grid::covers(Vec2 p) const {
    const double fx = (p.x - x0_) / h_, fy = (p.y - y0_) / h_;
    const double slack = 1e-9;
    return fx >= -slack && fy >= -slack && fx <= nx_ - 1 + slack && fy <= ny_ - 1 + slack;
}

double Grid::interpolate(const Eigen::VectorXd& dofs, Vec2 p) const {
    if (!covers(p)) throw Error(ErrorKind::Analysis, "interpolation point outside grid coverage");
    const double fx = std::clamp((p.x - x0_) / h_, 0.0, static_cast<double>(nx_ - 1));
    const double fy = std::clamp((p.y - y0_) / h_, 0.0, static_cast<double>(ny_ - 1));
    const int i = std::min(static_cast<int>(fx), nx_ - 2 < 0 ? 0 : nx_ - 2);
    const int j = std::min(static_cast<int>(fy), ny_ - 2 < 0 ? 0 : ny_ - 2);
    const double tx = fx - i, ty = fy - j;
    auto value = [&](int ii, int jj) {
        if (ii >= nx_ || jj >= ny_) return 0.0;
        const int d = dof_of_node_[node(ii, jj)];
        return d < 0 ? 0.0 : dofs[d];
    };
    return (1 - tx) * (1 - ty) * value(i, j) + tx * (1 - ty) * value(i + 1, j) +
           (1 - tx) * ty * value(i, j + 1) + tx * ty * value(i + 1, j + 1);
}

bool Grid::same_layout(const Grid& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && h_ == o.h_ && x0_ == o.x0_ && y0_ == o.y0_ &&
           mask_ == o.mask_;
}

Grid build_grid(const Domain& domain, double h) {
    if (!(h > 0.0)) throw Error(ErrorKind::Config, "grid spacing must be positive");
    const BoundingBox bb = domain.bounds();
    const int nx = static_cast<int>(std::ceil((bb.xmax - bb.xmin) / h - 1e-9)) + 1;
    const int ny = static_cast<int>(std::ceil((bb.ymax - bb.ymin) / h - 1e-9)) + 1;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(nx) * ny, 0);
    // Nodes within roundoff of a wall belong to the wall, not the interior.
    const double tol = 1e-9 * h;
    std::size_t count = 0;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const Vec2 p{bb.xmin + i * h, bb.ymin + j * h};
            if (domain.strictly_inside(p, tol)) {
                mask[static_cast<std::size_t>(j) * nx + i] = 1;
                ++count;
            }
        }
    }
    if (count == 0) throw Error(ErrorKind::Config, "empty grid");
    return Grid(nx, ny, h, bb.xmin, bb.ymin, std::move(mask));
}

double interior_node_area(const Grid& grid) {
    return static_cast<double>(grid.dof_count()) * grid.h() * grid.h();
}

double area_quadrature(const Grid& grid) {
    // Each stencil link from an interior node to a masked node crosses the wall
    // somewhere inside that link; credit half a cell for it.
    std::size_t links = 0;
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            if (!grid.interior(i, j)) continue;
            const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
            for (const auto& q : nb) {
                const bool inside = q[0] >= 0 && q[0] < grid.nx() && q[1] >= 0 && q[1] < grid.ny() &&
                                    grid.interior(q[0], q[1]);
                if (!inside) ++links;
            }
        }
    }
    return (static_cast<double>(grid.dof_count()) + 0.5 * static_cast<double>(links)) * grid.h() * grid.h();
}

void write_grid(std::ostream& out, const Grid& grid) {
    char line[256];
    std::snprintf(line, sizeof line, "%d %d %.17g %.17g %.17g\n", grid.nx(), grid.ny(), grid.h(),
                  grid.x0(), grid.y0());
    out << "SCARGRID 1\n" << line;
    out.write(reinterpret_cast<const char*>(grid.mask().data()),
              static_cast<std::streamsize>(grid.mask().size()));
}

Grid read_grid(std::istream& in) {
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "SCARGRID") throw Error(ErrorKind::Config, "not a grid file (missing SCARGRID tag)");
    if (version != 1) throw Error(ErrorKind::Config, "unsupported grid file version");
    int nx = 0, ny = 0;
    double h = 0, x0 = 0, y0 = 0;
    in >> nx >> ny >> h >> x0 >> y0;
    if (!in || nx <= 0 || ny <= 0) throw Error(ErrorKind::Config, "malformed grid header");
    in.get(); // newline
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(nx) * ny);
    in.read(reinterpret_cast<char*>(mask.data()), static_cast<std::streamsize>(mask.size()));
    if (in.gcount() != static_cast<std::streamsize>(mask.size()))
        throw Error(ErrorKind::Config, "truncated grid mask");
    for (auto& m : mask) {
        if (m == '0') m = 0;
        else if (m == '1') m = 1;
        if (m > 1) throw Error(ErrorKind::Config, "grid mask bytes must be 0 or 1");
    }
    return Grid(nx, ny, h, x0, y0, std::move(mask));
}

} // namespace scar
