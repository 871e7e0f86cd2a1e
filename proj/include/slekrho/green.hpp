#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace slekrho::green {

// Critical exponents of a chordal SLE_kappa(rho) with all force points on the
// left of the start point. gamma = (2*rho_sum + 8 - kappa)/(2*kappa) and the
// one-point exponent alpha = (rho_sum + 2)*gamma split as alpha = sum alpha_j
// with alpha_0 = 2*gamma, alpha_j = rho_j*gamma.
struct ExponentSet {
    double kappa = 0;
    double rho_sum = 0;
    double gamma = 0;
    double alpha = 0;             // one-point exponent
    std::vector<double> alpha_j;  // alpha_0 .. alpha_m
    std::vector<double> sigma_j;  // sigma_0 = 2, sigma_j = 2 + rho_1 + .. + rho_j
    double d = 0;                 // boundary dimension, d = 1 - alpha
    double sigma_star = 0;        // min(2, min_{j<=m-1} sigma_j)
    double sigma_upper = 0;       // max(2, max_{j<=m-1} sigma_j)
    double alpha_star = 0;        // sigma_star * gamma
    double alpha_upper = 0;       // sigma_upper * gamma
    double beta_sigma = 0;        // (rho_sum+3)/(rho_sum+4)
    double beta_star = 0;         // alpha_star/(alpha_star+1)
    double beta = 0;              // 1/beta = 1/beta_sigma + 1/beta_star
    double zeta1 = 0;
    double zeta2 = 0;

    // d in (0,1) iff rho_sum in (kappa/2-4, kappa/2-2): the curve hits but
    // does not fill the boundary left of the force points.
    bool hits_real_line() const;
};

// Throws std::invalid_argument if (kappa, rho) is inadmissible:
// kappa <= 0, rho_sum <= max(-2, kappa/2 - 4), or some partial sum
// sigma_j <= 0 for j <= m-1 (continuation threshold).
ExponentSet exponents(double kappa, std::span<const double> rho);

// One-point Green's function up to constant:
//   G(w, v; u) = |w-u|^{-alpha_0} prod_j |v_j-u|^{-alpha_j}.
// Requires w >= v_1 >= ... >= v_m > u.
double green1(const ExponentSet& e, double w, std::span<const double> v, double u);

// Telescoped form of the same product, for cross-checking:
//   prod_{j=0}^{m-1} (|v_{j+1}-u|/|v_j-u|)^{sigma_j gamma} * |v_m-u|^{-sigma_m gamma},
// with v_0 = w.
double green1_rewrite(const ExponentSet& e, double w, std::span<const double> v, double u);

// Time-evolved Green weight C_F * D_u(t)^alpha * G(W(t), V(t); U(t)); zero
// once u has been swallowed.
double green1_evolved(const ExponentSet& e, double W, std::span<const double> V,
                      double U, double D_u, bool swallowed, double C_F);

struct GeometryScales {
    double L0 = 0;  // |w - v_m|
    double L1 = 0;  // |v_m - u1|
    double L2 = 0;  // |u1 - u2|
    double Lmin = 0;
};

GeometryScales geometry_scales(double w, std::span<const double> v, double u1, double u2);

// Bracketing expressions for the two-point Green's function (constants
// omitted): lower = G(w,v;u1) * L2^-alpha,
// upper = (L1/(L0+L1))^alpha_star * L1^-alpha * L2^-alpha.
// Requires u2 < u1 < v_m.
std::pair<double, double> green2_bounds(const ExponentSet& e, double w,
                                        std::span<const double> v, double u1, double u2);

// Composite quadrature grid over a union of intervals, with panels refined
// geometrically toward v_m where G has its (integrable) singularity.
struct QuadGrid {
    std::vector<double> u;
    std::vector<double> weight;
};
QuadGrid build_quad_grid(std::span<const std::pair<double, double>> intervals,
                         double v_m, int panels_per_interval = 512);

// M_S(0) = C_R * int_S G(w, v; u) du on the grid above.
double integrate_green1(const ExponentSet& e, double w, std::span<const double> v,
                        const QuadGrid& grid, double C_R);

}  // namespace slekrho::green
