#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace scar {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }

    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    double norm2() const { return x * x + y * y; }
    Vec2 normalized() const { return *this / norm(); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

inline Vec2 unit_vector(double angle) { return {std::cos(angle), std::sin(angle)}; }

struct BoundingBox {
    double xmin, ymin, xmax, ymax;
};

/// One Dirichlet wall of a billiard. Segments run from `a` to `b`; arcs are the
/// part of the circle (center, radius) between polar angles angle0 <= angle1.
struct BoundaryPiece {
    enum class Type { Segment, Arc };
    Type type;
    Vec2 a, b;
    Vec2 center;
    double radius = 0.0;
    double angle0 = 0.0, angle1 = 0.0;
    std::string name;
};

/// Billiard region. The quarter stadium is the unit square [0,1]^2 joined to
/// the quarter disk of radius 1 centred at (1,0); lengths are dimensionless.
class Domain {
public:
    enum class Kind { QuarterStadium, Rectangle };

    static Domain quarter_stadium();
    static Domain rectangle(double width, double height);

    Kind kind() const { return kind_; }
    double width() const { return width_; }
    double height() const { return height_; }
    std::string name() const;

    /// Closed-set membership (boundary included).
    bool contains(Vec2 p) const;
    /// Open-set membership with a margin `tol` from every wall.
    bool strictly_inside(Vec2 p, double tol = 1e-12) const;

    double area() const;
    double perimeter() const;
    BoundingBox bounds() const;
    std::vector<BoundaryPiece> boundary() const;

    bool operator==(const Domain& o) const {
        return kind_ == o.kind_ && width_ == o.width_ && height_ == o.height_;
    }

private:
    Domain(Kind k, double w, double h) : kind_(k), width_(w), height_(h) {}

    Kind kind_;
    double width_;
    double height_;
};

/// Uniform lattice over a domain's bounding box. Nodes strictly inside the
/// domain are degrees of freedom; every other node carries the Dirichlet value 0.
/// Node (i, j) sits at (x0 + i h, y0 + j h); storage is row-major with y as the
/// slow index.
class Grid {
public:
    Grid(int nx, int ny, double h, double x0, double y0, std::vector<std::uint8_t> mask);

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double h() const { return h_; }
    double x0() const { return x0_; }
    double y0() const { return y0_; }
    std::size_t node_count() const { return mask_.size(); }
    std::size_t dof_count() const { return node_of_dof_.size(); }

    std::size_t node(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }
    Vec2 position(int i, int j) const { return {x0_ + i * h_, y0_ + j * h_}; }
    Vec2 dof_position(std::size_t dof) const;
    bool interior(int i, int j) const { return mask_[node(i, j)] != 0; }

    /// -1 for masked-out nodes.
    int dof_of_node(std::size_t node) const { return dof_of_node_[node]; }
    std::size_t node_of_dof(std::size_t dof) const { return node_of_dof_[dof]; }
    const std::vector<std::uint8_t>& mask() const { return mask_; }

    /// Expand a dof vector to the full lattice (zeros on masked nodes).
    Eigen::VectorXd scatter(const Eigen::VectorXd& dofs) const;
    Eigen::VectorXcd scatter(const Eigen::VectorXcd& dofs) const;

    /// Bilinear interpolation of a dof field at an arbitrary point; points
    /// outside the lattice throw.
    double interpolate(const Eigen::VectorXd& dofs, Vec2 p) const;
    bool covers(Vec2 p) const;

    bool same_layout(const Grid& o) const;

private:
    int nx_, ny_;
    double h_, x0_, y0_;
    std::vector<std::uint8_t> mask_;
    std::vector<int> dof_of_node_;
    std::vector<std::size_t> node_of_dof_;
};

Grid build_grid(const Domain& domain, double h);

/// Area seen by the Dirichlet stencil: h^2 per interior node plus h^2/2 per
/// link from an interior node to a masked one. Converges as O(h).
double area_quadrature(const Grid& grid);

/// Bare interior-node count times h^2 (undercounts by about P h / 2).
double interior_node_area(const Grid& grid);

void write_grid(std::ostream& out, const Grid& grid);
Grid read_grid(std::istream& in);

} // namespace scar
