#pragma once

// Radial discretization of the unit ball in R^3.
//
// Interior nodes r_j = j*h, j = 1..n, h = 1/(n+1). Functions vanish at r = 1.
// The radial Laplacian is discretized through the substitution U = r*u, which
// turns -u'' - (2/r)u' into -U''/r; the origin regularity condition is then
// the Dirichlet condition U(0) = 0 and the stencil is exact on cubics in U.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nodalbif/tridiag.hpp"

namespace nodalbif {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDefaultNodalThreshold = 1e-6;

class RadialGrid {
public:
    explicit RadialGrid(std::size_t n_interior);

    std::size_t size() const { return nodes_.size(); }
    double h() const { return h_; }
    double r(std::size_t j) const { return nodes_[j]; }
    std::span<const double> nodes() const { return nodes_; }
    /// 4*pi*r_j^2*h, the volume quadrature for integrals over B_1.
    std::span<const double> quad_weights() const { return weights_; }

private:
    double h_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

GridPtr make_grid(std::size_t n_interior);

/// Grid samples of a radial function at the interior nodes.
class RadialFunction {
public:
    RadialFunction() = default;
    explicit RadialFunction(GridPtr grid);
    RadialFunction(GridPtr grid, std::vector<double> values);

    static RadialFunction sample(GridPtr grid, const std::function<double(double)>& f);

    const GridPtr& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t j) const { return values_[j]; }
    double& operator[](std::size_t j) { return values_[j]; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    /// Value at r = 0 by the quadratic a + b r^2 through the first two nodes.
    double value_at_origin() const;

    double sup_norm() const;
    double l2_norm() const;
    double h1_norm() const;

    RadialFunction& operator+=(const RadialFunction& o);
    RadialFunction& operator-=(const RadialFunction& o);
    RadialFunction& operator*=(double s);

    friend RadialFunction operator+(RadialFunction a, const RadialFunction& b) { return a += b; }
    friend RadialFunction operator-(RadialFunction a, const RadialFunction& b) { return a -= b; }
    friend RadialFunction operator*(double s, RadialFunction a) { return a *= s; }
    friend RadialFunction operator*(RadialFunction a, double s) { return a *= s; }
    RadialFunction operator-() const { return -1.0 * *this; }

private:
    GridPtr grid_;
    std::vector<double> values_;
};

/// Throws GridMismatch unless both functions live on the same grid.
void require_same_grid(const RadialFunction& f, const RadialFunction& g);

/// Tridiagonal discretization of u -> -u'' - (2/r)u' + c(r) u with u(1) = 0.
/// Row j: sub[j]*u_{j-1} + diag[j]*u_j + sup[j]*u_{j+1} (sub[0], sup[n-1] unused).
class RadialOperator {
public:
    RadialOperator(GridPtr grid, std::vector<double> sub, std::vector<double> diag,
                   std::vector<double> sup);

    const GridPtr& grid() const { return grid_; }
    std::span<const double> sub() const { return sub_; }
    std::span<const double> diag() const { return diag_; }
    std::span<const double> sup() const { return sup_; }

    RadialFunction apply(const RadialFunction& f) const;

    /// The similar symmetric matrix r A r^{-1}, acting on U = r*u. Its
    /// eigenvalues are those of A.
    SymTridiag symmetric_form() const;

    /// Solves A u = f with partial pivoting; returns false if singular.
    bool solve(std::span<double> rhs_inout) const;

private:
    GridPtr grid_;
    std::vector<double> sub_;
    std::vector<double> diag_;
    std::vector<double> sup_;
};

RadialOperator assemble_operator(const GridPtr& grid, const RadialFunction& c);
RadialOperator assemble_operator(const GridPtr& grid, double c);

/// Discrete Dirichlet form 4*pi*sum_edges (U_{j+1}-U_j)(V_{j+1}-V_j)/h with
/// U = r*f, V = r*g and U_0 = U_{n+1} = 0; equals <A0 f, g> in the volume
/// quadrature for A0 = -Delta_h.
double dirichlet_form(const RadialFunction& f, const RadialFunction& g);

struct InnerProducts {
    double l2 = 0.0;    ///< int f g
    double h1 = 0.0;    ///< int grad f . grad g + f g
    double l4_f = 0.0;  ///< int f^4
};

InnerProducts inner_products(const RadialFunction& f, const RadialFunction& g);

/// Volume integral of an arbitrary nodal density.
double integrate(const GridPtr& grid, std::span<const double> density);

/// Number of sign changes among samples with |f| > rel_threshold * sup|f|.
int nodal_count(const RadialFunction& f, double rel_threshold = kDefaultNodalThreshold);

/// Signed bumps u_1..u_{m+1}, one per nodal annulus, with disjoint supports.
std::vector<RadialFunction> bump_decompose(const RadialFunction& f,
                                           double rel_threshold = kDefaultNodalThreshold);

/// Radii where f changes sign, by linear interpolation of r*f between the
/// bracketing significant samples.
std::vector<double> sign_change_radii(const RadialFunction& f,
                                      double rel_threshold = kDefaultNodalThreshold);

// Textual formats. CSV carries header "r,value" with rows at r = 0 (origin
// extrapolation), every node, and r = 1 (value 0).
void write_csv(std::ostream& os, const RadialFunction& f);
RadialFunction read_csv(std::istream& is);
std::string to_json_text(const RadialFunction& f);
RadialFunction from_json_text(const std::string& text);

}  // namespace nodalbif
